"""Regenerate the bundled capacity fixtures (src/oslsoh/data/B00*.csv).

The NASA Ames archive is not redistributed here.  These are seeded synthetic
stand-ins shaped like its four 2 Ah cells: same cycle counts, start and end
capacities, the capacity-regeneration bumps that follow rest periods, and a slow
wander of a few mAh over tens of cycles.
Run from the repo root: ``python scripts/make_fixtures.py``.
"""

from pathlib import Path

import numpy as np

# id: (cycles, start Ah, end-of-trend Ah, curvature exponent, rest cycles)
PROFILES = {
    "B0005": (168, 1.856, 1.300, 1.15, [19, 30, 46, 60, 88, 110, 125, 147, 161]),
    "B0006": (168, 2.035, 1.170, 1.10, [19, 30, 46, 60, 88, 110, 125, 147, 161]),
    "B0007": (168, 1.891, 1.425, 1.20, [19, 30, 46, 60, 88, 110, 125, 147, 161]),
    "B0018": (132, 1.855, 1.330, 1.05, [16, 29, 46, 60, 79, 96, 108, 123]),
}
SEED = 20070


def synthesize(cycles, start, end, power, rests, rng):
    n = np.arange(cycles, dtype=float)
    trend = start - (start - end) * (n / (cycles - 1)) ** power
    # short early fade seen at the start of every cell
    trend -= 0.012 * (1 - np.exp(-n / 6.0))
    regen = np.zeros(cycles)
    for r in rests:
        jump = rng.uniform(0.02, 0.055)
        tail = n >= r
        regen[tail] += jump * np.exp(-(n[tail] - r) / rng.uniform(2.5, 6.0))
    wander = rng.uniform(0.012, 0.02) * np.sin(2 * np.pi * n / rng.uniform(40, 60) + rng.uniform(0, 2 * np.pi))
    wander *= 1 - np.exp(-n / 20.0)  # no offset at cycle 1
    noise = rng.normal(0.0, 0.0025, cycles)
    return np.round(trend + regen + wander + noise, 6)


def main(out_dir=Path(__file__).resolve().parents[1] / "src" / "oslsoh" / "data"):
    rng = np.random.default_rng(SEED)
    for bid, (cycles, start, end, power, rests) in PROFILES.items():
        cap = synthesize(cycles, start, end, power, rests, rng)
        lines = ["cycle,capacity_ah"] + [f"{i + 1},{c:.6f}" for i, c in enumerate(cap)]
        (out_dir / f"{bid}.csv").write_text("\n".join(lines) + "\n")
        print(bid, cycles, cap[0], cap.min(), cap[-1])


if __name__ == "__main__":
    main()
