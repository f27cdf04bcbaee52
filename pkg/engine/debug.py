"""Global debug flag system for the toolkit.

Messages carry a bracketed subsystem tag such as "[SIC]" or "[SWEEP]".
Enabling with a tag set keeps only those subsystems.
"""

import re
from typing import FrozenSet, Iterable, Optional

from rich.console import Console

_TAG = re.compile(r"^\[([A-Z]+)\]")


def parse_debug_setting(value: Optional[str]) -> Optional[FrozenSet[str]]:
    """GFNOMA_DEBUG value -> None (off), empty set (all tags) or a tag set."""
    if value is None:
        return None
    value = value.strip()
    if value.lower() in ("", "0", "false", "off", "no"):
        return None
    if value.lower() in ("1", "true", "on", "yes", "all"):
        return frozenset()
    return frozenset(t.strip().upper() for t in value.split(",") if t.strip())


class DebugManager:
    """Singleton manager for debug output."""
    _instance = None
    _debug_enabled = False
    _tags: FrozenSet[str] = frozenset()
    _console = Console(stderr=True)

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    @classmethod
    def enable(cls, tags: Optional[Iterable[str]] = None):
        """Enable debug output, optionally for a subset of subsystem tags."""
        cls._debug_enabled = True
        cls._tags = frozenset(t.upper() for t in tags) if tags else frozenset()
        scope = ", ".join(sorted(cls._tags)) or "all subsystems"
        cls._console.log(f"[DEBUG] debug output enabled for {scope}", markup=False)

    @classmethod
    def disable(cls):
        cls._debug_enabled = False
        cls._tags = frozenset()

    @classmethod
    def toggle(cls):
        if cls._debug_enabled:
            cls.disable()
        else:
            cls.enable()

    @classmethod
    def is_enabled(cls) -> bool:
        return cls._debug_enabled

    @classmethod
    def wants(cls, message: str) -> bool:
        """True when message would be printed under the current settings."""
        if not cls._debug_enabled:
            return False
        if not cls._tags:
            return True
        match = _TAG.match(message)
        return bool(match) and match.group(1) in cls._tags

    @classmethod
    def log(cls, message: str):
        if cls.wants(message):
            cls._console.log(message, markup=False, highlight=False)


# Convenience function
def debug_log(message: str):
    """Log a debug message if debug is enabled."""
    DebugManager.log(message)
