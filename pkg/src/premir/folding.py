"""Dot-bracket structures: parsing, pair tables, a maximum-pairing folder
and a reader for Vienna-style structure files."""
from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ValidationError

log = logging.getLogger(__name__)

MIN_LOOP = 3
ALLOWED_PAIRS = frozenset({"AU", "UA", "GC", "CG", "GU", "UG"})


class DotBracket(str):
    """A validated, balanced dot-bracket string.

    Subclasses ``str`` so it can be sliced, reversed and compared directly;
    slices are plain strings since halves need not be balanced.
    """

    def __new__(cls, text):
        text = str(text)
        _check_balanced(text)
        return super().__new__(cls, text)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        """0-based ``(i, j)`` pairs with ``i < j``, sorted by ``i``."""
        table = to_pair_table(self)
        return [(i, j) for i, j in enumerate(table) if j is not None and i < j]

    @property
    def n_pairs(self) -> int:
        return self.count("(")


def _check_balanced(text: str) -> None:
    depth = 0
    for pos, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ValidationError(f"unbalanced ')' at position {pos}")
        elif ch != ".":
            raise ValidationError(f"invalid character {ch!r} at position {pos}")
    if depth:
        raise ValidationError(f"{depth} unclosed '(' at end (position {len(text)})")


def parse_dotbracket(text: str) -> DotBracket:
    """Validate ``text`` and return it as a :class:`DotBracket`.

    Errors carry the 0-based position of the first violation.
    """
    return DotBracket(text)


def to_pair_table(s: str) -> list[int | None]:
    stack = []
    table: list[int | None] = [None] * len(s)
    for i, ch in enumerate(s):
        if ch == "(":
            stack.append(i)
        elif ch == ")":
            j = stack.pop()
            table[i], table[j] = j, i
    return table


def from_pair_table(table) -> DotBracket:
    chars = []
    for i, j in enumerate(table):
        if j is None:
            chars.append(".")
        elif j == i:
            raise ValidationError(f"position {i} paired with itself")
        elif table[j] != i:
            raise ValidationError(f"asymmetric pair table at {i}->{j}")
        else:
            chars.append("(" if i < j else ")")
    # balance check catches crossing pairs only indirectly, so verify the round trip
    s = DotBracket("".join(chars))
    if to_pair_table(s) != list(table):
        raise ValidationError("pair table contains crossing pairs")
    return s


def can_pair(a: str, b: str) -> bool:
    return a + b in ALLOWED_PAIRS


def nussinov_matrix(seq: str, min_loop: int = MIN_LOOP) -> np.ndarray:
    """Fill the maximum-pairing table.

    ``D[i, j]`` is the best pair count of the half-open slice ``seq[i:j]``;
    the recurrence either leaves base ``j-1`` unpaired or pairs it with some
    ``k`` and splits into ``seq[i:k]`` and ``seq[k+1:j-1]``.
    """
    n = len(seq)
    neg = -(10**9)
    D = np.zeros((n + 1, n + 1), dtype=np.int64)
    codes = np.array(["ACGU".index(c) for c in seq], dtype=np.int64)
    pairable = np.zeros((4, 4), dtype=bool)
    for p in ALLOWED_PAIRS:
        pairable["ACGU".index(p[0]), "ACGU".index(p[1])] = True
    rows = np.arange(n + 1)
    for j in range(1, n + 1):
        D[:j, j] = D[:j, j - 1]
        last = j - 1
        kmax = last - min_loop  # exclusive upper bound on the partner k
        if kmax <= 0:
            continue
        ks = np.arange(kmax)
        gain = np.where(pairable[codes[ks], codes[last]], D[ks + 1, last] + 1, neg)
        # cand[i, k] = D[i, k] + gain[k], valid only for k >= i
        cand = D[:kmax, :kmax] + gain[None, :]
        cand = np.where(ks[None, :] >= rows[:kmax, None], cand, neg)
        best = cand.max(axis=1)
        D[:kmax, j] = np.maximum(D[:kmax, j], best)
    return D


def nussinov_fold(seq: str, min_loop: int = MIN_LOOP) -> DotBracket:
    """Fold ``seq`` into a structure with the maximum number of allowed pairs.

    Allowed pairs are Watson-Crick plus G-U wobble, hairpins enclose at least
    ``min_loop`` unpaired bases, and pseudoknots are excluded. Traceback is
    deterministic: leaving the 3' base unpaired is preferred, then the
    smallest partner index.
    """
    n = len(seq)
    if n < 1:
        raise ValidationError("cannot fold an empty sequence")
    D = nussinov_matrix(seq, min_loop)
    out = ["."] * n
    stack = [(0, n)]
    while stack:
        i, j = stack.pop()
        while j - i > min_loop + 1:
            if D[i, j] == D[i, j - 1]:
                j -= 1
                continue
            last = j - 1
            for k in range(i, last - min_loop):
                if can_pair(seq[k], seq[last]) and D[i, k] + D[k + 1, last] + 1 == D[i, j]:
                    break
            else:  # pragma: no cover - table and traceback disagree
                raise AssertionError(f"traceback failed at ({i}, {j})")
            out[k], out[last] = "(", ")"
            stack.append((k + 1, last))
            j = k
    return DotBracket("".join(out))


_ENERGY = re.compile(r"\s*\(\s*[-+]?\d+(?:\.\d*)?\s*\)\s*$")


def _strip_energy(line: str) -> str:
    return _ENERGY.sub("", line).strip()


def read_vienna(path) -> dict[str, tuple[str, str]]:
    """Parse a Vienna-style file into ``{id: (sequence, structure)}``.

    Records are ``>id`` / sequence / structure, the structure optionally
    followed by a parenthesised free energy, e.g. ``((...)) (-1.20)``.
    """
    path = Path(path)
    lines = [ln.strip() for ln in open(path) if ln.strip()]
    records = {}
    i = 0
    while i < len(lines):
        if not lines[i].startswith(">"):
            raise ValidationError(f"{path}: expected '>' header, got {lines[i][:30]!r}")
        if i + 2 >= len(lines):
            raise ValidationError(f"{path}: truncated record {lines[i]!r}")
        rid = lines[i][1:].split()[0]
        seq = lines[i + 1].upper().replace("T", "U")
        struct = _strip_energy(lines[i + 2])
        records[rid] = (seq, struct)
        i += 3
    return records


def load_vienna(path, data, min_loop: int = MIN_LOOP) -> dict[str, DotBracket]:
    """Map every sample id in ``data`` to a structure.

    Structures come from the Vienna file where present (energy suffix dropped)
    and from :func:`nussinov_fold` otherwise. Ids in the file that are not in
    ``data`` are logged and ignored.
    """
    records = read_vienna(path) if path is not None else {}
    by_id = {s.id: s for s in data}
    for rid in records:
        if rid not in by_id:
            log.warning("structure file entry %r has no matching sample; ignored", rid)
    out = {}
    for s in data:
        if s.id in records:
            _, struct = records[s.id]
            try:
                db = parse_dotbracket(struct)
            except ValidationError as exc:
                raise ValidationError(f"sample {s.id!r}: {exc}") from None
            if len(db) != len(s.sequence):
                raise ValidationError(
                    f"sample {s.id!r}: structure length {len(db)} != sequence length {len(s.sequence)}"
                )
            out[s.id] = db
        else:
            out[s.id] = nussinov_fold(s.sequence, min_loop)
    return out


def fold_all(data, vienna_path=None, min_loop: int = MIN_LOOP) -> dict[str, DotBracket]:
    return load_vienna(vienna_path, data, min_loop)


def write_vienna(records: Mapping[str, tuple[str, str]], path) -> None:
    with open(path, "w") as fh:
        for rid, (seq, struct) in records.items():
            fh.write(f">{rid}\n{seq}\n{struct}\n")
