"""Independent reference implementations used only by the tests."""
import functools
import itertools
import math

import numpy as np

PAIRABLE = np.zeros((4, 4), dtype=bool)
for a, b in ("AU", "UA", "GC", "CG", "GU", "UG"):
    PAIRABLE["ACGU".index(a), "ACGU".index(b)] = True


@functools.lru_cache(maxsize=None)
def all_structures(n, min_loop=3):
    """Every non-crossing pair set on positions 0..n-1, ignoring the sequence."""

    @functools.lru_cache(maxsize=None)
    def rec(i, j):  # structures of the closed interval [i, j]
        if i >= j:
            return [()]
        out = [s for s in rec(i + 1, j)]  # i unpaired
        for k in range(i + min_loop + 1, j + 1):  # i pairs with k
            for inner in rec(i + 1, k - 1):
                for outer in rec(k + 1, j):
                    out.append(((i, k),) + inner + outer)
        return out

    return tuple(rec(0, n - 1)) if n else ((),)


def max_pairs_bruteforce(codes, min_loop=3):
    """Maximum allowed-pair count for each row of ``codes`` (N x L int array)."""
    codes = np.atleast_2d(codes)
    n = codes.shape[1]
    best = np.zeros(len(codes), dtype=np.int64)
    for struct in all_structures(n, min_loop):
        if not struct:
            continue
        ok = np.ones(len(codes), dtype=bool)
        for i, j in struct:
            ok &= PAIRABLE[codes[:, i], codes[:, j]]
        best = np.where(ok, np.maximum(best, len(struct)), best)
    return best


def all_codes(length):
    return np.array(list(itertools.product(range(4), repeat=length)), dtype=np.int64).reshape(-1, length)


def random_structure(gen, n, p_open=0.35):
    """Random balanced dot-bracket string of length ``n``."""
    out, depth = [], 0
    for pos in range(n):
        remaining = n - pos
        if depth == remaining:
            out.append(")")
            depth -= 1
            continue
        r = gen.random()
        if r < p_open and depth + 1 <= remaining - 1:
            out.append("(")
            depth += 1
        elif r < 2 * p_open and depth > 0:
            out.append(")")
            depth -= 1
        else:
            out.append(".")
    return "".join(out)


def adam_scalar_trace(grads, alpha=0.001, b1=0.9, b2=0.999, eps=1e-8, w=0.0):
    m = v = 0.0
    hist = []
    for t, g in enumerate(grads, 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        w = w - alpha * mhat / (math.sqrt(vhat) + eps)
        hist.append((w, m, v))
    return hist
