"""Regenerate the synthetic 12-county fixture shipped in ``netscreen/data/synthetic12``.

The layout loosely imitates a state with one dense metro core, a ring of
suburban counties and a sparsely connected rural west. Distances are 1.25x
straight-line miles between made-up county seats. The case history is a
noiseless no-intervention run of the model, rounded to whole persons.

    python scripts/make_fixture.py
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from netscreen.epi import AllocationPlan, CountyState, DiseaseParams, simulate
from netscreen.net import DistanceTable, build_weights, lambda_for_strength, node_strength
from netscreen.tables import write_table

OUT = Path(__file__).resolve().parents[1] / "src" / "netscreen" / "data" / "synthetic12"

SEATS = np.array(
    [
        [0, 0],
        [-12, 8],
        [-6, -12],
        [10, 22],
        [-45, 5],
        [-10, -35],
        [15, -30],
        [55, -50],
        [-90, -5],
        [-85, 15],
        [-120, 10],
        [-80, 40],
    ],
    dtype=float,
)
POPULATION = [800000, 1600000, 700000, 790000, 830000, 570000, 520000, 210000, 470000, 160000, 125000, 70000]
SEED_HIDDEN = np.array([2.0, 1.2, 1.0, 1.5, 0.8, 0.6, 0.5, 3.0, 0.7, 0.4, 2.5, 0.3]) * 3e-4
HISTORY_DAYS = 15
TARGET_STRENGTH = 0.65
PARAMS = DiseaseParams(0.3, 0.16, 1 / 15)


def main() -> None:
    labels = [f"C{i + 1:02d}" for i in range(len(POPULATION))]
    diff = SEATS[:, None, :] - SEATS[None, :, :]
    miles = np.round(1.25 * np.sqrt((diff**2).sum(axis=-1)), 1)
    dist = DistanceTable(tuple(labels), miles)
    lam = lambda_for_strength(dist, TARGET_STRENGTH)
    weights = build_weights(dist, lam)
    N = np.array(POPULATION, dtype=float)

    # day k of the history reports beta * N * h(k-1); the last row seeds screening
    plan = AllocationPlan.zeros(len(labels), 1, HISTORY_DAYS)
    trace = simulate(CountyState.from_hidden(SEED_HIDDEN), PARAMS, weights, N, plan)
    cases = np.round(trace.new_confirmed)

    OUT.mkdir(parents=True, exist_ok=True)
    write_table(
        OUT / "distances.csv",
        ["county", *labels],
        [[lab, *[("0" if i == j else f"{miles[i, j]:g}") for j in range(len(labels))]] for i, lab in enumerate(labels)],
    )
    write_table(OUT / "populations.csv", ["county", "population"], [[lab, p] for lab, p in zip(labels, POPULATION)])
    days = [f"2020-03-{d:02d}" for d in range(1, HISTORY_DAYS + 1)]
    write_table(OUT / "cases.csv", ["day", *labels], [[d, *[int(v) for v in row]] for d, row in zip(days, cases)])
    print(f"lambda for max strength {TARGET_STRENGTH}: {lam:.6f}")
    print("strengths:", np.round(node_strength(weights), 3))


if __name__ == "__main__":
    main()
