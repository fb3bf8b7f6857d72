"""Regenerates the frozen statistics fixtures in tests/data.

Datasets are drawn once from fixed seeds and rounded to two decimals, so the
CSV files are the source of truth for both this script and the C++ tests.
Run from the repository root: python3 tests/oracles/gen_frozen.py
"""
import csv
import itertools
import os

import numpy as np
import pandas as pd
from scipy import special, stats
from statsmodels.stats.anova import AnovaRM

DATA = os.path.join(os.path.dirname(__file__), "..", "data")
CELLS = ["H_V", "H_nV", "nH_V", "nH_nV"]  # index 2*a + b


def make_datasets():
    specs = [
        (11, (0.6, 15.8, 0.5, 22.6), 3.0),   # strong haptic effect without vision
        (22, (5.0, 5.3, 5.1, 5.6), 2.0),     # weak effects
        (33, (10.0, 12.0, 14.0, 20.0), 6.0), # interaction
    ]
    out = []
    for seed, means, sd in specs:
        rng = np.random.default_rng(seed)
        subject = rng.normal(0, sd, size=14)
        rows = []
        for i in range(14):
            rows.append([round(float(m + subject[i] + rng.normal(0, sd)), 2) for m in means])
        out.append(rows)
    return out


def write_datasets(datasets):
    for k, rows in enumerate(datasets, start=1):
        with open(os.path.join(DATA, f"anova_dataset_{k}.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["participant"] + CELLS)
            for i, r in enumerate(rows, start=1):
                w.writerow([f"S{i:02d}"] + [f"{v:.2f}" for v in r])


def read_dataset(k):
    with open(os.path.join(DATA, f"anova_dataset_{k}.csv")) as f:
        r = csv.DictReader(f)
        return [[float(row[c]) for c in CELLS] for row in r]


def anova_rows(k, rows):
    long = []
    for i, r in enumerate(rows):
        for a, b in itertools.product(range(2), range(2)):
            long.append({"subject": i, "haptic": "H" if a == 0 else "nH", "visual": "V" if b == 0 else "nV",
                         "y": r[2 * a + b]})
    df = pd.DataFrame(long)
    res = AnovaRM(df, "y", "subject", within=["haptic", "visual"]).fit().anova_table
    out = []
    for name, effect in [("haptic", "haptic"), ("visual", "visual"), ("haptic:visual", "interaction")]:
        out.append((k, "two_way", effect, res.loc[name, "F Value"], res.loc[name, "Pr > F"]))
    for level, tag in [("nV", "one_way_nV"), ("V", "one_way_V")]:
        sub = df[df.visual == level]
        r1 = AnovaRM(sub, "y", "subject", within=["haptic"]).fit().anova_table
        out.append((k, tag, "haptic", r1.loc["haptic", "F Value"], r1.loc["haptic", "Pr > F"]))
    for level, b in [("nV", 1), ("V", 0)]:
        t = stats.ttest_rel([r[b] for r in rows], [r[2 + b] for r in rows])
        out.append((k, "paired_t_" + level, "haptic", t.statistic, t.pvalue))
    return out


def main():
    if not os.path.exists(os.path.join(DATA, "anova_dataset_1.csv")):
        write_datasets(make_datasets())
    with open(os.path.join(DATA, "anova_frozen.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["dataset", "test", "effect", "statistic", "p"])
        for k in (1, 2, 3):
            for row in anova_rows(k, read_dataset(k)):
                w.writerow([row[0], row[1], row[2], repr(float(row[3])), repr(float(row[4]))])

    with open(os.path.join(DATA, "special_frozen.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["kind", "a", "b", "x", "value"])
        for a, b, x in itertools.product([0.5, 1.0, 2.5, 6.5, 20.0, 150.0], [0.5, 1.0, 3.0, 13.0, 80.0],
                                         [0.001, 0.05, 0.3, 0.5, 0.77, 0.95, 0.999]):
            w.writerow(["betainc", a, b, x, repr(float(special.betainc(a, b, x)))])
        for d1, d2, fv in itertools.product([1, 2, 4], [3, 13, 19, 60], [0.01, 0.5, 1.0, 4.7, 6.87, 25.0, 400.0]):
            w.writerow(["f_sf", d1, d2, fv, repr(float(stats.f.sf(fv, d1, d2)))])
        for df_, t in itertools.product([2, 5, 13, 19, 100], [0.0, 0.3, 1.0, 2.16, 3.5, 12.0, -2.5]):
            w.writerow(["t_two_sided", df_, 0, t, repr(float(2 * stats.t.sf(abs(t), df_)))])


if __name__ == "__main__":
    main()
