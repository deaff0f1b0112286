"""Labelled RNA datasets: FASTA ingestion, stratified folds and mini-batches."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import rng
from .errors import ValidationError

ALPHABET = "ACGU"


def normalize_sequence(raw: str, record_id: str = "?") -> str:
    """Upper-case ``raw``, map T to U and reject anything outside ACGU."""
    seq = raw.upper().replace("T", "U")
    for pos, ch in enumerate(seq):
        if ch not in ALPHABET:
            raise ValidationError(
                f"record {record_id!r}: invalid symbol {ch!r} at position {pos + 1}"
            )
    if not seq:
        raise ValidationError(f"record {record_id!r}: empty sequence")
    return seq


@dataclass(frozen=True)
class Sample:
    id: str
    sequence: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValidationError(f"sample {self.id!r}: label must be 0 or 1, got {self.label!r}")
        if not self.sequence or any(c not in ALPHABET for c in self.sequence):
            raise ValidationError(f"sample {self.id!r}: sequence must be non-empty over {ALPHABET}")


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    name: str = "dataset"

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        seen = set()
        for s in self.samples:
            if s.id in seen:
                raise ValidationError(f"duplicate sample id {s.id!r} in {self.name!r}")
            seen.add(s.id)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, idx):
        return self.samples[idx]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    @property
    def n_positive(self) -> int:
        return sum(s.label for s in self.samples)

    @property
    def n_negative(self) -> int:
        return len(self.samples) - self.n_positive

    def subset(self, indices: Iterable[int], name: str | None = None) -> "Dataset":
        return Dataset(tuple(self.samples[i] for i in indices), name or self.name)

    def __add__(self, other: "Dataset") -> "Dataset":
        return Dataset(self.samples + other.samples, f"{self.name}+{other.name}")


def _read_records(path: Path):
    header = None
    chunks: list[str] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith(";"):
                continue
            if line.startswith(">"):
                if header is not None:
                    yield header, "".join(chunks)
                header = line[1:].split()[0] if line[1:].split() else ""
                if not header:
                    raise ValidationError(f"{path}:{lineno}: empty FASTA header")
                chunks = []
            else:
                if header is None:
                    raise ValidationError(f"{path}:{lineno}: sequence data before first '>' header")
                chunks.append(line)
    if header is not None:
        yield header, "".join(chunks)


def load_fasta(path, label: int, name: str | None = None) -> Dataset:
    """Read every record of a FASTA file as a sample carrying ``label``.

    Multi-line records are concatenated, T/t becomes U, and any other
    character outside ACGU raises :class:`ValidationError` naming the record.
    """
    path = Path(path)
    samples = [
        Sample(rid, normalize_sequence(raw, rid), label) for rid, raw in _read_records(path)
    ]
    if not samples:
        raise ValidationError(f"{path}: no FASTA records found")
    return Dataset(tuple(samples), name or path.stem)


def load_labeled(pos_path, neg_path, name: str = "dataset") -> Dataset:
    """Load a positive/negative FASTA pair into one dataset."""
    data = load_fasta(pos_path, 1) + load_fasta(neg_path, 0)
    return Dataset(data.samples, name)


def write_fasta(samples: Iterable[Sample], path, width: int = 60) -> None:
    with open(path, "w") as fh:
        for s in samples:
            fh.write(f">{s.id}\n")
            for i in range(0, len(s.sequence), width):
                fh.write(s.sequence[i:i + width] + "\n")


@dataclass(frozen=True)
class FoldAssignment:
    num_folds: int
    assignment: tuple[int, ...]

    def train_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignment) if f != fold]

    def test_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignment) if f == fold]


def stratified_folds(data: Dataset, k: int, seed: int) -> FoldAssignment:
    """Shuffle each class with a seeded stream and deal it round-robin into ``k`` folds."""
    if k < 2:
        raise ValidationError(f"need at least 2 folds, got {k}")
    labels = data.labels
    assignment = np.empty(len(labels), dtype=np.int64)
    gen = rng.stream(seed, rng.FOLDS, k)
    for cls in (1, 0):
        members = np.flatnonzero(labels == cls)
        if len(members) < k:
            kind = "positive" if cls == 1 else "negative"
            raise ValidationError(f"{kind} class has {len(members)} samples, fewer than k={k}")
        members = gen.permutation(members)
        assignment[members] = np.arange(len(members)) % k
    return FoldAssignment(k, tuple(int(a) for a in assignment))


def minibatches(n: int | Sequence, m: int, seed: int, epoch: int, keys: tuple = ()) -> list[np.ndarray]:
    """Split a fresh per-epoch permutation of ``range(n)`` into batches of size ``m``.

    ``n`` may also be a sized container (e.g. a :class:`Dataset`); ``keys``
    separates the shuffles of independently trained models.
    """
    if m < 1:
        raise ValidationError(f"batch size must be >= 1, got {m}")
    if not isinstance(n, (int, np.integer)):
        n = len(n)
    perm = rng.stream(seed, rng.BATCHES, *keys, epoch).permutation(n)
    return [perm[i:i + m] for i in range(0, n, m)]


def n_batches(n: int, m: int) -> int:
    return math.ceil(n / m)
