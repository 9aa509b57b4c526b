"""Set partitions of [m] = {1, ..., m} and the indicators built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, Sequence

__all__ = [
    "Partition",
    "M_MAX",
    "enumerate_partitions",
    "iter_partitions",
    "bell_number",
    "is_nonisolating",
    "chi_distinct",
    "chi_adjusted",
    "partition_from_vector",
    "partition_target",
    "mobius",
    "coarsenings",
]

M_MAX = 12


@dataclass(frozen=True)
class Partition:
    """A set partition of {1, ..., m}; blocks are sorted and ordered by least element."""

    blocks: tuple[tuple[int, ...], ...]
    m: int

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(int(i) for i in b)) for b in self.blocks), key=min))
        seen = [i for b in blocks for i in b]
        if any(len(b) == 0 for b in blocks):
            raise ValueError("empty block")
        if sorted(seen) != list(range(1, self.m + 1)):
            raise ValueError(f"blocks do not partition [1..{self.m}]: {blocks}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def of(cls, *blocks: Sequence[int]) -> "Partition":
        m = sum(len(b) for b in blocks)
        return cls(tuple(tuple(b) for b in blocks), m)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def labels(self) -> tuple[int, ...]:
        """0-based block label of each element 1..m (restricted growth string)."""
        lab = [0] * self.m
        for j, b in enumerate(self.blocks):
            for i in b:
                lab[i - 1] = j
        return tuple(lab)

    def __len__(self) -> int:
        return len(self.blocks)

    def __str__(self) -> str:
        return "{" + ",".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks) + "}"


def _from_rgs(rgs: Sequence[int]) -> Partition:
    k = max(rgs) + 1
    blocks = [[] for _ in range(k)]
    for i, lab in enumerate(rgs, start=1):
        blocks[lab].append(i)
    return Partition(tuple(tuple(b) for b in blocks), len(rgs))


def _rgs(m: int) -> Iterator[list[int]]:
    a = [0] * m
    while True:
        yield list(a)
        i = m - 1
        while i > 0 and a[i] == max(a[:i]) + 1:
            i -= 1
        if i <= 0:
            return
        a[i] += 1
        for j in range(i + 1, m):
            a[j] = 0


def iter_partitions(m: int) -> Iterator[Partition]:
    """Partitions of [m] in lexicographic order of their restricted growth strings."""
    m = int(m)
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > M_MAX:
        raise ValueError(f"m={m} exceeds the enumeration cap {M_MAX}")
    for a in _rgs(m):
        yield _from_rgs(a)


@lru_cache(maxsize=16)
def _cached(m: int) -> tuple[Partition, ...]:
    return tuple(iter_partitions(m))


def enumerate_partitions(m: int) -> list[Partition]:
    return list(_cached(int(m))) if int(m) <= 8 else list(iter_partitions(m))


def bell_number(m: int) -> int:
    """Bell numbers via the Bell triangle."""
    row = [1]
    for _ in range(m):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def is_nonisolating(p: Partition) -> bool:
    return all(len(b) >= 2 for b in p.blocks)


def partition_from_vector(n: Sequence) -> Partition:
    """The unique partition for which ``n`` is distinct (equal entries share a block)."""
    first: dict = {}
    blocks: list[list[int]] = []
    for i, v in enumerate(n, start=1):
        if v in first:
            blocks[first[v]].append(i)
        else:
            first[v] = len(blocks)
            blocks.append([i])
    return Partition(tuple(tuple(b) for b in blocks), len(n))


def chi_distinct(p: Partition, n: Sequence[int]) -> int:
    """1 iff n_i = n_j exactly when i and j share a block."""
    if len(n) != p.m:
        raise ValueError("vector length differs from m")
    return int(partition_from_vector(list(n)) == p)


def chi_adjusted(p: Partition, r: Sequence[int], h: Sequence[int]) -> int:
    """1 iff every block has constant h and signed r summing to zero."""
    if len(r) != p.m or len(h) != p.m:
        raise ValueError("vector length differs from m")
    if any(int(x) == 0 for x in r):
        raise ValueError("all r_i must be nonzero")
    for b in p.blocks:
        if len({h[i - 1] for i in b}) != 1:
            return 0
        if sum(r[i - 1] for i in b) != 0:
            return 0
    return 1


def partition_target(p: Partition, moment: Callable[[int], float]) -> float:
    """prod over blocks of E(f^|block|); ``moment`` maps j to E(f^j)."""
    out = 1.0
    for s in p.sizes:
        out *= moment(s)
    return out


def mobius(p: Partition) -> int:
    """Moebius function mu(0, p) of the partition lattice, with blocks as atoms."""
    out = 1
    for s in p.sizes:
        out *= (-1) ** (s - 1) * math.factorial(s - 1)
    return out


def coarsenings(p: Partition) -> Iterator[tuple[Partition, tuple[int, ...]]]:
    """Partitions pi of the blocks of p, yielded as (pi, merged block weights)."""
    sizes = p.sizes
    for pi in iter_partitions(len(sizes)):
        yield pi, tuple(sum(sizes[i - 1] for i in c) for c in pi.blocks)
