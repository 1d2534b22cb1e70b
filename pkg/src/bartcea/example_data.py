"""Synthetic observational CEA dataset in the guided-example layout.

Columns ``c, q, t, age, sex, education``; costs and QALYs have correlated
errors, treatment depends on all three confounders and some outcome cells
are missing at random, written either as ``NA`` or as the sentinel ``-99``.
The first nine rows are fixed; the rest are simulated.

Run ``python -m bartcea.example_data out.csv`` to write a copy.
"""

from __future__ import annotations

import sys

import numpy as np
import pandas as pd

# fixed leading rows; None marks a missing cell
EXCERPT = [
    (None, 0.5865, 0, 56, 0, 3),
    (2882.69, 0.9512, 0, 70, 1, 3),
    (2275.42, 0.9149, 0, 71, 1, 3),
    (1964.08, None, 0, 61, 0, 3),
    (2524.98, 0.9133, 0, 75, 1, 1),
    (2683.89, 0.6261, 1, 50, 1, 3),
    (None, None, 0, 43, 1, 2),
    (1744.14, 0.2123, 1, 21, 1, 3),
    (None, 0.5122, 1, 28, 0, 3),
]

TRUE_DELTA_C = 350.0
TRUE_DELTA_Q = 0.06


def make_guided_example(n: int = 500, seed: int = 2025, sentinel: float = -99) -> pd.DataFrame:
    """Return an ``n``-row table; cells for missing outcomes hold ``"NA"`` or ``sentinel``."""
    if n < len(EXCERPT) + 10:
        raise ValueError("n too small")
    rng = np.random.default_rng(seed)
    m = n - len(EXCERPT)
    age = rng.integers(18, 86, m)
    sex = rng.binomial(1, 0.5, m)
    education = rng.choice([1, 2, 3], size=m, p=[0.25, 0.30, 0.45])
    logit = -0.3 + 0.03 * (age - 55) - 0.4 * sex + 0.5 * (education == 3)
    t = rng.binomial(1, 1.0 / (1.0 + np.exp(-logit)))

    sd_c, sd_q, rho = 350.0, 0.12, -0.3
    cov = np.array([[sd_c ** 2, rho * sd_c * sd_q], [rho * sd_c * sd_q, sd_q ** 2]])
    err = rng.multivariate_normal([0.0, 0.0], cov, size=m)
    cost = (1500 + 12 * age + 150 * sex + 0.2 * (age - 55) ** 2
            + TRUE_DELTA_C * t + err[:, 0])
    qaly = (0.95 - 0.006 * np.maximum(age - 40, 0) - 0.05 * (education == 1)
            + TRUE_DELTA_Q * t + err[:, 1])
    qaly = np.clip(qaly, 0.0, 1.0)

    miss_c = rng.random(m) < 0.08 + 0.10 * (age > 70)
    miss_q = rng.random(m) < 0.08
    cells_c = [f"{v:.2f}" for v in cost]
    cells_q = [f"{v:.4f}" for v in qaly]
    for cells, miss in ((cells_c, miss_c), (cells_q, miss_q)):
        for i in np.flatnonzero(miss):
            cells[i] = "NA" if rng.random() < 0.5 else f"{sentinel:g}"

    head = pd.DataFrame(
        {
            "c": ["NA" if r[0] is None else f"{r[0]:.2f}" for r in EXCERPT],
            "q": ["NA" if r[1] is None else f"{r[1]:.4f}" for r in EXCERPT],
            "t": [r[2] for r in EXCERPT],
            "age": [r[3] for r in EXCERPT],
            "sex": [r[4] for r in EXCERPT],
            "education": [r[5] for r in EXCERPT],
        }
    )
    body = pd.DataFrame(
        {"c": cells_c, "q": cells_q, "t": t, "age": age, "sex": sex, "education": education}
    )
    return pd.concat([head, body], ignore_index=True)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        print("usage: python -m bartcea.example_data OUT.csv [N] [SEED]", file=sys.stderr)
        return 2
    n = int(argv[1]) if len(argv) > 1 else 500
    seed = int(argv[2]) if len(argv) > 2 else 2025
    make_guided_example(n, seed).to_csv(argv[0], index=False)
    return 0


if __name__ == "__main__":
    sys.exit(main())
