"""Synthetic stem-loop positives and dinucleotide-shuffled negatives.

Used for desk-scale runs; the real benchmarks are distributed separately.
"""
from __future__ import annotations

import numpy as np

from . import rng
from .errors import ValidationError
from .seqdata import Dataset, Sample

BASES = "ACGU"
WATSON_CRICK = {"A": "U", "U": "A", "G": "C", "C": "G"}
WOBBLE = {"G": "U", "U": "G"}


def _random_bases(gen, n):
    return "".join(BASES[i] for i in gen.integers(0, 4, n))


def stem_loop(gen: np.random.Generator, length: int, wobble_rate: float = 0.1, max_bulges: int = 2) -> str:
    """A hairpin of exactly ``length`` bases: stem + 3-8 base loop + a few bulges."""
    n_bulges = int(gen.integers(0, max_bulges + 1))
    loops = [l for l in range(3, 9) if (length - l - n_bulges) % 2 == 0]
    loop_len = int(gen.choice(loops))
    n_pairs = (length - loop_len - n_bulges) // 2
    if n_pairs < 1:
        raise ValidationError(f"length {length} too short for a stem-loop")
    left = _random_bases(gen, n_pairs)
    right = []
    for b in reversed(left):
        if b in WOBBLE and gen.random() < wobble_rate:
            right.append(WOBBLE[b])
        else:
            right.append(WATSON_CRICK[b])
    left, right = list(left), right
    for _ in range(n_bulges):
        arm = left if gen.random() < 0.5 else right
        pos = int(gen.integers(1, len(arm)))  # never at the very ends
        arm.insert(pos, BASES[int(gen.integers(0, 4))])
    return "".join(left) + _random_bases(gen, loop_len) + "".join(right)


def dinucleotide_shuffle(seq: str, gen: np.random.Generator) -> str:
    """Random permutation of ``seq`` with identical dinucleotide counts.

    Altschul-Erickson: pick a random last-exit edge per symbol forming a tree
    into the final symbol, shuffle the other edges, then walk the Eulerian
    path from the first symbol.
    """
    if len(seq) < 3:
        return seq
    first, last = seq[0], seq[-1]
    edges = {c: [] for c in sorted(set(seq))}  # sorted: set order varies with the hash seed
    for a, b in zip(seq, seq[1:]):
        edges[a].append(b)
    while True:
        last_edge = {}
        for v, outs in edges.items():
            if v != last and outs:
                last_edge[v] = outs[int(gen.integers(0, len(outs)))]
        ok = True
        for v in last_edge:
            seen, u = set(), v
            while u != last:
                if u in seen:
                    ok = False
                    break
                seen.add(u)
                u = last_edge[u]
            if not ok:
                break
        if ok:
            break
    order = {}
    for v, outs in edges.items():
        rest = list(outs)
        if v in last_edge:
            rest.remove(last_edge[v])
        rest = [rest[i] for i in gen.permutation(len(rest))]
        if v in last_edge:
            rest.append(last_edge[v])
        order[v] = rest
    out, u = [first], first
    ptr = {v: 0 for v in order}
    for _ in range(len(seq) - 1):
        nxt = order[u][ptr[u]]
        ptr[u] += 1
        out.append(nxt)
        u = nxt
    return "".join(out)


def synthesize(n_pos: int, n_neg: int, length_range=(70, 90), seed: int = 0) -> tuple[Dataset, Dataset]:
    """Positive and negative datasets of the requested sizes.

    Negatives are dinucleotide shuffles of separately drawn hairpins, so both
    classes share length and composition statistics.
    """
    lo, hi = length_range
    if n_pos < 1 or n_neg < 1:
        raise ValidationError("need at least one positive and one negative")
    if lo > hi or lo < 10:
        raise ValidationError(f"degenerate length range {length_range}")
    gen = rng.stream(seed, rng.SYNTH)
    pos = [
        Sample(f"pos_{i:05d}", stem_loop(gen, int(gen.integers(lo, hi + 1))), 1)
        for i in range(n_pos)
    ]
    neg = [
        Sample(f"neg_{i:05d}", dinucleotide_shuffle(stem_loop(gen, int(gen.integers(lo, hi + 1))), gen), 0)
        for i in range(n_neg)
    ]
    return Dataset(tuple(pos), "synthetic_pos"), Dataset(tuple(neg), "synthetic_neg")
