"""Split a structure at its loop center and flip the 3' half.

A pre-miRNA hairpin is a palindrome: reading the 3' arm backwards gives the
mirror image of the 5' arm. Flipping the 3' part turns the stack-like
pairing into two streams an LSTM can read in the same direction.

Positions in :class:`LoopSpan` and the split index ``k`` are 1-based, to
match how hairpin coordinates are usually reported.
"""
from __future__ import annotations

from dataclasses import dataclass

from .folding import DotBracket


@dataclass(frozen=True)
class LoopSpan:
    start: int
    end: int

    def __len__(self):
        return self.end - self.start + 1


@dataclass(frozen=True)
class StructureSplit:
    forward: str
    backward_flipped: str
    k: int

    def reconstruct(self) -> str:
        return self.forward + self.backward_flipped[::-1]


def find_hairpin_loops(s: str) -> list[LoopSpan]:
    """Dot runs bounded by '(' on the left and ')' on the right, 5' to 3'."""
    loops = []
    n = len(s)
    i = 0
    while i < n:
        if s[i] != ".":
            i += 1
            continue
        j = i
        while j + 1 < n and s[j + 1] == ".":
            j += 1
        if i > 0 and j + 1 < n and s[i - 1] == "(" and s[j + 1] == ")":
            loops.append(LoopSpan(i + 1, j + 1))
        i = j + 1
    return loops


def split_index(s: str) -> int:
    """1-based position where the backward part begins.

    With hairpins, the midpoint between the first loop's start and the last
    loop's end is floored and the backward part starts just past it. With no
    hairpin the structure is cut at its own midpoint.
    """
    loops = find_hairpin_loops(s)
    if not loops:
        return len(s) // 2 + 1
    return (loops[0].start + loops[-1].end) // 2 + 1


def split_and_flip(s: str) -> StructureSplit:
    k = split_index(s)
    return StructureSplit(forward=str(s[:k - 1]), backward_flipped=str(s[k - 1:])[::-1], k=k)


def preprocess_structure(s: DotBracket, palindrome: bool = True):
    """Structure streams fed to the network: ``(forward, flipped)`` or ``(whole,)``."""
    if not palindrome:
        return (str(s),)
    sp = split_and_flip(s)
    return sp.forward, sp.backward_flipped
