"""Configuration: settings, presets and config-file loading."""
