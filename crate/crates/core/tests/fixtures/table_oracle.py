"""Independent oracle for the comparison-table fixtures.

Generates a small race/sex dataset, fits main-only and cat-modified models
under reference-group and abundance-based identification with numpy/scipy
(SVD nullspace of the full constraint set, explicit covariance), and writes
the expected text tables. Run from this directory:

    python3 table_oracle.py
"""

import numpy as np
from scipy import linalg, stats

RACE = ["White", "Black", "Hispanic"]
SEX = ["Female", "Male"]
COUNTS = {("White", "Female"): 16, ("White", "Male"): 15, ("Black", "Female"): 10,
          ("Black", "Male"): 8, ("Hispanic", "Female"): 3, ("Hispanic", "Male"): 5}
MEANS = {("White", "Female"): 0.30, ("White", "Male"): 0.35, ("Black", "Female"): -0.40,
         ("Black", "Male"): -0.65, ("Hispanic", "Female"): 0.05, ("Hispanic", "Male"): 0.20}


def dataset(seed=20240601):
    rng = np.random.default_rng(seed)
    rows = []
    # First rows fix level order: White, Black, Hispanic and Female, Male.
    order = [("White", "Female"), ("Black", "Male"), ("Hispanic", "Female")]
    cells = order + [c for c in COUNTS if c not in order]
    for cell in cells:
        for _ in range(COUNTS[cell]):
            rows.append((cell[0], cell[1], round(MEANS[cell] + 0.25 * rng.standard_normal(), 3)))
    perm = np.concatenate([[0, COUNTS[order[0]], COUNTS[order[0]] + COUNTS[order[1]]],
                           rng.permutation([i for i in range(len(rows))
                                            if i not in (0, COUNTS[order[0]],
                                                         COUNTS[order[0]] + COUNTS[order[1]])])])
    return [rows[i] for i in perm]


def design(rows, interaction):
    labels = ["Intercept"] + RACE + SEX
    cols = [[1.0] * len(rows)]
    cols += [[float(r == lv) for r, _, _ in rows] for lv in RACE]
    cols += [[float(s == lv) for _, s, _ in rows] for lv in SEX]
    if interaction:
        for s in SEX:
            for r in RACE:
                labels.append(f"{r}:{s}")
                cols.append([float(rr == r and ss == s) for rr, ss, _ in rows])
    return labels, np.array(cols).T


def constraints(rows, labels, scheme):
    n = len(rows)
    p = len(labels)
    idx = {l: i for i, l in enumerate(labels)}
    pr = {lv: sum(r == lv for r, _, _ in rows) / n for lv in RACE}
    ps = {lv: sum(s == lv for _, s, _ in rows) / n for lv in SEX}
    pj = {(r, s): sum(rr == r and ss == s for rr, ss, _ in rows) / n for r in RACE for s in SEX}
    out = []

    def row(entries):
        a = np.zeros(p)
        for l, w in entries:
            a[idx[l]] = w
        out.append(a)

    if scheme == "RGE":
        row([("White", 1.0)])
        row([("Female", 1.0)])
        for l in labels:
            if ":" in l and ("White" in l or "Female" in l):
                row([(l, 1.0)])
    else:
        row([(r, pr[r]) for r in RACE])
        row([(s, ps[s]) for s in SEX])
        if ":" in labels[-1]:
            for s in SEX:
                row([(f"{r}:{s}", pj[(r, s)]) for r in RACE])
            for r in RACE:
                row([(f"{r}:{s}", pj[(r, s)]) for s in SEX])
    return np.array(out)


def fit(rows, interaction, scheme):
    labels, x = design(rows, interaction)
    y = np.array([v for _, _, v in rows])
    q = linalg.null_space(constraints(rows, labels, scheme))
    xq = x @ q
    g = np.linalg.inv(xq.T @ xq)
    theta = q @ (g @ xq.T @ y)
    resid = y - x @ theta
    df = len(y) - q.shape[1]
    s2 = resid @ resid / df
    se = np.sqrt(np.maximum(np.diag(s2 * q @ g @ q.T), 0.0))
    out = {}
    for l, b, s in zip(labels, theta, se):
        if s < 1e-12:
            out[l] = None
        else:
            out[l] = (b, s, 2 * stats.t.sf(abs(b / s), df))
    return labels, out


def fixed3(v):
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def check_margin(v):
    # Refuse values within 1e-9 of a 3-decimal rounding boundary, where two
    # correct implementations could print differently.
    frac = abs(v) * 1000 - np.floor(abs(v) * 1000)
    assert abs(frac - 0.5) > 1e-6, v


def cells(res):
    if res is None:
        return "ref", "ref"
    b, s, p = res
    for v in (b, s, p):
        check_margin(v)
    return f"{fixed3(b)} ({fixed3(s)})", "<0.001" if p < 0.001 else fixed3(p)


def render(models):
    mains, inter = [], []
    for _, (labels, _) in models:
        for l in labels:
            bucket = inter if ":" in l else mains
            if l not in bucket:
                bucket.append(l)
    lines = []

    def emit(ls):
        for l in ls:
            first = True
            for name, (_, res) in models:
                if l in res:
                    est, p = cells(res[l])
                    lines.append([l if first else "", name, est, p])
                    first = False

    emit(mains)
    if inter:
        lines.append(None)
        emit(inter)
    lines.append(None)
    header = ["Variable", "Model", "Estimate (SE)", "p-value"]
    widths = [max([len(h)] + [len(c[i]) for c in lines if c]) for i, h in enumerate(header)]
    total = sum(widths) + 2 * 3

    def fmt(c):
        s = c[0].ljust(widths[0]) + "  " + c[1].ljust(widths[1])
        s += "  " + c[2].rjust(widths[2]) + "  " + c[3].rjust(widths[3])
        return s.rstrip()

    out = [fmt(header), "-" * total]
    out += ["-" * total if c is None else fmt(c) for c in lines]
    return "\n".join(out) + "\n"


def main():
    rows = dataset()
    with open("race_sex.csv", "w") as f:
        f.write("race,sex,y\n")
        for r, s, v in rows:
            f.write(f"{r},{s},{v}\n")
    for scheme, path in [("RGE", "race_sex_rge.txt"), ("ABC", "race_sex_abc.txt")]:
        models = [("Main-only", fit(rows, False, scheme)), ("Cat-modified", fit(rows, True, scheme))]
        with open(path, "w") as f:
            f.write(render(models))


if __name__ == "__main__":
    main()
