"""Exact arithmetic in the discrete Heisenberg group.

Elements are integer triples ``(x, y, z)`` standing for the unitriangular
matrix ``[[1, x, z], [0, 1, y], [0, 0, 1]]``.  Multiplication is

    (x1, y1, z1) * (x2, y2, z2) = (x1 + x2, y1 + y2, z1 + z2 + x1 * y2)

so that ``a = (1, 0, 0)``, ``b = (0, 1, 0)`` and the commutator
``c = a b a^-1 b^-1 = (0, 0, 1)`` is central.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

XY_LIMIT = 2**30
Z_LIMIT = 2**60

# letter -> (x, y) generator step; upper case is the inverse letter
LETTERS = {"a": (1, 0), "A": (-1, 0), "b": (0, 1), "B": (0, -1)}


class CoordinateOverflow(OverflowError):
    """A coordinate left the guarded range |x|,|y| <= 2**30, |z| <= 2**60."""


def _check(x: int, y: int, z: int) -> None:
    if abs(x) > XY_LIMIT or abs(y) > XY_LIMIT or abs(z) > Z_LIMIT:
        raise CoordinateOverflow(f"coordinates ({x}, {y}, {z}) exceed the overflow guard")


@dataclass(frozen=True, slots=True, order=True)
class GroupElement:
    x: int
    y: int
    z: int

    def __post_init__(self) -> None:
        for name in ("x", "y", "z"):
            v = getattr(self, name)
            if isinstance(v, (np.integer,)):
                object.__setattr__(self, name, int(v))
            elif not isinstance(v, int) or isinstance(v, bool):
                raise TypeError(f"coordinate {name} must be an integer, got {v!r}")
        _check(self.x, self.y, self.z)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return mul(self, other)

    def __invert__(self) -> "GroupElement":
        return inv(self)

    def __pow__(self, n: int) -> "GroupElement":
        return power(self, n)

    def __iter__(self):
        yield self.x
        yield self.y
        yield self.z

    def __str__(self) -> str:
        return f"{self.x},{self.y},{self.z}"

    @classmethod
    def parse(cls, text: str) -> "GroupElement":
        """Parse the literal ``"x,y,z"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected 'x,y,z', got {text!r}")
        try:
            return cls(*(int(p) for p in parts))
        except ValueError as exc:
            raise ValueError(f"expected 'x,y,z' with integer entries, got {text!r}") from exc


E = GroupElement(0, 0, 0)
A = GroupElement(1, 0, 0)
B = GroupElement(0, 1, 0)
C = GroupElement(0, 0, 1)
A_INV = GroupElement(-1, 0, 0)
B_INV = GroupElement(0, -1, 0)
GENERATORS = (A, A_INV, B, B_INV)


def mul(g: GroupElement, h: GroupElement) -> GroupElement:
    return GroupElement(g.x + h.x, g.y + h.y, g.z + h.z + g.x * h.y)


def inv(g: GroupElement) -> GroupElement:
    return GroupElement(-g.x, -g.y, g.x * g.y - g.z)


def power(g: GroupElement, n: int) -> GroupElement:
    """``g**n`` in closed form; negative ``n`` allowed."""
    n = int(n)
    # z-coordinate of the n-fold product picks up x*y once per ordered pair i < j
    return GroupElement(n * g.x, n * g.y, n * g.z + (n * (n - 1) // 2) * g.x * g.y)


def commutator(g: GroupElement, h: GroupElement) -> GroupElement:
    """``[g, h] = g h g^-1 h^-1``."""
    return mul(mul(g, h), mul(inv(g), inv(h)))


@dataclass(frozen=True)
class Word:
    """A word over ``{a, a^-1, b, b^-1}`` written with letters ``a, A, b, B``."""

    letters: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        letters = tuple(self.letters)
        bad = [s for s in letters if s not in LETTERS]
        if bad:
            raise ValueError(f"unknown letters {bad}; alphabet is a, A, b, B")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def parse(cls, text: str) -> "Word":
        return cls(tuple(text.replace(" ", "")))

    def __add__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return "".join(self.letters)

    def inverse(self) -> "Word":
        return Word(tuple(s.swapcase() for s in reversed(self.letters)))


def word_eval(w: Word | str | Sequence[str]) -> GroupElement:
    """Left-to-right product of the letters of ``w``."""
    if isinstance(w, str):
        w = Word.parse(w)
    elif not isinstance(w, Word):
        w = Word(tuple(w))
    x = y = z = 0
    for s in w.letters:
        dx, dy = LETTERS[s]
        # right multiplication by a generator: only b-letters touch z
        z += x * dy
        x += dx
        y += dy
    return GroupElement(x, y, z)


def normal_form_word(g: GroupElement) -> Word:
    """A (not necessarily geodesic) word evaluating to ``g``.

    Uses ``g = a^x b^y c^(z - x y)`` with ``c^k`` written through commutators.
    """
    letters: list[str] = []
    letters += ["a" if g.x > 0 else "A"] * abs(g.x)
    letters += ["b" if g.y > 0 else "B"] * abs(g.y)
    k = g.z - g.x * g.y
    unit = ["a", "b", "A", "B"] if k > 0 else ["b", "a", "B", "A"]
    letters += unit * abs(k)
    return Word(tuple(letters))


def elements_from_arrays(xs: Iterable[int], ys: Iterable[int], zs: Iterable[int]) -> list[GroupElement]:
    return [GroupElement(int(x), int(y), int(z)) for x, y, z in zip(xs, ys, zs)]


def mul_arrays(x1, y1, z1, x2, y2, z2):
    """Vectorised multiplication on int64 coordinate arrays (no guard)."""
    return x1 + x2, y1 + y2, z1 + z2 + x1 * y2


def inv_arrays(x, y, z):
    return -x, -y, x * y - z
