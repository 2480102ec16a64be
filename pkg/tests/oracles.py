"""Slow reference implementations written as plain loops over cells.

They share no code with the package and serve as independent oracles.
"""

import itertools
import math


def rca(x):
    n, m = len(x), len(x[0])
    total = sum(sum(row) for row in x)
    out = [[0.0] * m for _ in range(n)]
    for i in range(n):
        row = sum(x[i])
        for a in range(m):
            col = sum(x[j][a] for j in range(n))
            if row > 0 and col > 0:
                out[i][a] = (x[i][a] / row) / (col / total)
    return out


def cosine(u, v):
    uv = sum(p * q for p, q in zip(u, v))
    uu = math.sqrt(sum(p * p for p in u))
    vv = math.sqrt(sum(q * q for q in v))
    if uu == 0 or vv == 0:
        return 0.0
    return uv / (uu * vv)


def proximity(x):
    n, m = len(x), len(x[0])
    cols = [[x[i][a] for i in range(n)] for a in range(m)]
    out = [[0.0] * m for _ in range(m)]
    for a in range(m):
        for b in range(m):
            if a == b:
                out[a][b] = 1.0 if any(cols[a]) else 0.0
            else:
                out[a][b] = cosine(cols[a], cols[b])
    return out


def related_density(u, prox, i, a, exclude_self=False):
    num = den = 0.0
    for b in range(len(prox)):
        if exclude_self and b == a:
            continue
        num += prox[a][b] * u[i][b]
        den += prox[a][b]
    return num / den if den > 0 else math.nan


def neighbor_density(u, dist, i, a):
    num = den = 0.0
    for j in range(len(u)):
        if j != i:
            num += u[j][a] / dist[i][j]
            den += 1.0 / dist[i][j]
    return num / den


def pair_mean(p, q):
    vals = [v for v in (p, q) if not math.isnan(v)]
    return sum(vals) / len(vals) if vals else math.nan


def productivity_density(prod, dist, i, a):
    num = den = 0.0
    for j in range(len(prod)):
        if j == i:
            continue
        v = pair_mean(prod[i][a], prod[j][a])
        if not math.isnan(v):
            num += v / dist[i][j]
            den += 1.0 / dist[i][j]
    return num / den if den > 0 else math.nan


def similarity(rca_i, rca_j):
    return cosine([math.log1p(v) for v in rca_i], [math.log1p(v) for v in rca_j])


def events(u, first_year, horizon):
    """Brute-force window scan; returns sets of (i, a, t, kind, outcome)."""
    n, m, n_years = len(u), len(u[0]), len(u[0][0])
    out = set()
    for t in range(first_year, first_year + n_years):
        k = t - first_year
        if k - 2 < 0 or k + horizon + 2 >= n_years:
            continue
        for i in range(n):
            for a in range(m):
                seq = u[i][a]
                if seq[k - 2] == 0 and seq[k - 1] == 0 and seq[k] == 0:
                    fwd = all(seq[k + horizon + d] == 1 for d in range(3))
                    out.add((i, a, t, "entry", int(fwd)))
                if seq[k] == 1:
                    out.add((i, a, t, "keep", int(seq[k + horizon] == 1)))
    return out


def best_spanning_tree_weight(w):
    """Maximum total weight over all spanning trees by enumerating edge subsets.

    Sums are correctly rounded so equal edge sets give identical totals.
    """
    n = len(w)
    edges = [(a, b) for a in range(n) for b in range(a + 1, n)]
    best = -math.inf
    for subset in itertools.combinations(edges, n - 1):
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x
        ok = True
        for a, b in subset:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
        if ok:
            best = max(best, math.fsum(w[a][b] for a, b in subset))
    return best


def normal_equations(X, y):
    """Solve X'X b = X'y by Gauss-Jordan elimination with partial pivoting."""
    k = len(X[0])
    A = [[sum(row[r] * row[c] for row in X) for c in range(k)] for r in range(k)]
    rhs = [sum(row[r] * v for row, v in zip(X, y)) for r in range(k)]
    M = [A[r] + [rhs[r]] for r in range(k)]
    for c in range(k):
        piv = max(range(c, k), key=lambda r: abs(M[r][c]))
        M[c], M[piv] = M[piv], M[c]
        for r in range(k):
            if r != c:
                f = M[r][c] / M[c][c]
                M[r] = [p - f * q for p, q in zip(M[r], M[c])]
    return [M[r][k] / M[r][r] for r in range(k)]


def probit_loglik(beta, X, y):
    total = 0.0
    for row, v in zip(X, y):
        z = sum(b * x for b, x in zip(beta, row))
        p = 0.5 * math.erfc(-z / math.sqrt(2))
        total += math.log(p) if v == 1 else math.log(1 - p)
    return total


def four_group_did(y0, y1, treat):
    def mean(vals):
        return sum(vals) / len(vals)
    tb = mean([v for v, d in zip(y0, treat) if d])
    ta = mean([v for v, d in zip(y1, treat) if d])
    cb = mean([v for v, d in zip(y0, treat) if not d])
    ca = mean([v for v, d in zip(y1, treat) if not d])
    return (ta - tb) - (ca - cb)
