"""Output-directory session and JSON run manifest."""

import json
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

from engine.debug import debug_log
from engine.errors import FileError


class RunSession:
    """Owns the --out directory of one CLI command and records what it wrote."""

    MANIFEST_FILE = "manifest.json"

    def __init__(self, out_dir, command: str, seed: Optional[int] = None, config_hash: Optional[str] = None):
        self.out_dir = Path(out_dir)
        self.command = command
        self.seed = seed
        self.config_hash = config_hash
        self.started = datetime.now()
        self.files: List[str] = []
        self.extra: Dict = {}
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise FileError(f"cannot create output directory {self.out_dir}: {e}") from e

    def path(self, name: str) -> Path:
        """Path inside the output directory, recorded in the manifest."""
        target = self.out_dir / name
        self.files.append(name)
        return target

    def session_duration(self) -> float:
        return (datetime.now() - self.started).total_seconds()

    def save_manifest(self) -> Optional[Path]:
        """Write manifest.json; a failed write is logged, not raised."""
        manifest = {
            "command": self.command,
            "seed": self.seed,
            "config_sha256": self.config_hash,
            "files": self.files,
            "started": self.started.isoformat(timespec="seconds"),
            "duration_s": round(self.session_duration(), 3),
        }
        manifest.update(self.extra)
        target = self.out_dir / self.MANIFEST_FILE
        try:
            with open(target, 'w') as f:
                json.dump(manifest, f, indent=2)
        except OSError as e:
            debug_log(f"[SESSION] manifest not written: {e}")
            return None
        return target
