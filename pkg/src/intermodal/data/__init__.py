"""Bundled scenario files (Sioux Falls TNTP data and example configs)."""

from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent


def path(name: str) -> Path:
    return DATA_DIR / name
