"""Bundled capacity curves for the four 2 Ah cells B0005, B0006, B0007, B0018.

These are seeded synthetic stand-ins (see ``scripts/make_fixtures.py``), not
the NASA measurements: same cycle counts, start/end capacities and
regeneration bumps, so the whole pipeline can run offline.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

BATTERY_IDS = ("B0005", "B0006", "B0007", "B0018")


def fixture_dir() -> Path:
    return Path(str(resources.files("oslsoh") / "data"))


def fixture_path(battery_id: str) -> Path:
    path = fixture_dir() / f"{battery_id}.csv"
    if not path.exists():
        raise FileNotFoundError(f"no bundled fixture for {battery_id!r}")
    return path


def load_fixtures():
    from .pipeline import load_dataset

    return load_dataset(fixture_dir(), BATTERY_IDS)
