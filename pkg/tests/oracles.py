"""Independent brute-force references used by the tests.

Everything here is deliberately written with plain Python loops (math.fsum for
sums) or a direct definition, never calling into the package's own numerics,
so agreement is evidence rather than tautology.
"""

from __future__ import annotations

import math

import numpy as np


def column_mean_oracle(m) -> list[float]:
    rows = [list(r) for r in m]
    t, d = len(rows), len(rows[0])
    return [math.fsum(rows[i][j] for i in range(t)) / t for j in range(d)]


def top_indices_oracle(values, count: int) -> list[int]:
    """Indices of the largest values, ties to the lower index, strongest first."""
    values = list(values)
    order = sorted(range(len(values)), key=lambda j: (-values[j], j))
    return order[: min(count, len(values))]


def masked_frame_mean_oracle(m, feature_idx) -> list[float]:
    rows = [list(r) for r in m]
    feats = list(feature_idx)
    return [math.fsum(row[j] for j in feats) / len(feats) for row in rows]


def top_frames_oracle(frame_values, q: int) -> list[int]:
    return sorted(top_indices_oracle(frame_values, q))


def foreground_oracle(m, k: int, q: int) -> list[float]:
    rows = [list(r) for r in m]
    d = len(rows[0])
    feats = top_indices_oracle(column_mean_oracle(rows), k)
    frames = top_frames_oracle(masked_frame_mean_oracle(rows, feats), q)
    out = [0.0] * d
    for j in feats:
        out[j] = math.fsum(rows[i][j] for i in frames) / len(frames)
    return out


def background_oracle(m, selected_frames) -> list[float]:
    rows = [list(r) for r in m]
    t, d = len(rows), len(rows[0])
    chosen = set(int(i) for i in selected_frames)
    rest = [i for i in range(t) if i not in chosen]
    if not rest:
        return [0.0] * d
    return [math.fsum(rows[i][j] for i in rest) / len(rest) for j in range(d)]


def top_c_block_oracle(scores, c: int) -> list[float]:
    keep = top_indices_oracle(scores, c)
    out = [0.0] * len(scores)
    for j in keep:
        out[j] = scores[j]
    return out


def wup_oracle(parents: dict[str, str], root: str, a: str, b: str) -> float:
    """Wu-Palmer from first principles: enumerate full ancestor paths."""
    if a == b:
        return 1.0

    def path(node):
        out = [node]
        while out[-1] != root:
            out.append(parents[out[-1]])
        return out

    known = set(parents) | {root}
    if a not in known or b not in known:
        return 0.0
    pa, pb = path(a), path(b)
    common = [n for n in pa if n in set(pb)]
    lca = common[0]
    depth = lambda n: len(path(n))  # noqa: E731 - node-count depth, root = 1
    return 2.0 * depth(lca) / (depth(a) + depth(b))


def subgradient_reference(X, y, C: float, iters: int = 60_000) -> float:
    """Deterministic full-batch subgradient descent on the bias-augmented
    hinge objective, returning the best objective value encountered.

    Steps 1/t suit the unit-strength quadratic term; on the tiny problems this
    backs, 60k iterations land within ~5e-5 of the optimum.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    xa = np.hstack([X, np.ones((n, 1))])
    u = np.zeros(d + 1)
    best = np.inf
    for t in range(1, iters + 1):
        margins = y * (xa @ u)
        viol = margins < 1.0
        grad = u - C * (y[viol][:, None] * xa[viol]).sum(axis=0)
        u = u - grad / t
        val = 0.5 * (u @ u) + C * np.maximum(0.0, 1.0 - y * (xa @ u)).sum()
        if val < best:
            best = val
    return best


def nearest_centroid_accuracy(train_x, train_y, test_x, test_y) -> float:
    train_x = np.asarray(train_x)
    test_x = np.asarray(test_x)
    classes = sorted(set(int(c) for c in train_y))
    centroids = np.stack([train_x[np.asarray(train_y) == c].mean(axis=0)
                          for c in classes])
    d2 = ((test_x[:, None, :] - centroids[None]) ** 2).sum(axis=2)
    pred = np.array(classes)[d2.argmin(axis=1)]
    return float((pred == np.asarray(test_y)).mean())
