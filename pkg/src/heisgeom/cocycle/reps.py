"""Unitary representations of the Heisenberg group and their coboundaries.

Two families are provided.  The finite ones act on ``C^q`` by a cyclic shift
and a diagonal modulation by ``q``-th roots of unity, so the commutator acts
by the exact scalar ``exp(2 pi i / q)``.  The discretized ones sample the
Schroedinger representation on a uniform grid: ``a^u`` translates by ``u``,
``b^v`` multiplies by ``exp(2 pi i lam v x)`` and ``c^w`` is the phase
``exp(2 pi i lam w)``.

Central phases are stored in turns as exact fractions so that huge central
exponents (``c^(j 2^(i l))``) reduce modulo one without rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..group import GroupElement, word_eval

TWO_PI = 2.0 * math.pi


class MarginExceeded(ValueError):
    """A translation would push mass past the edge of the discretization window."""


def turns_to_unit(turns: Fraction | float) -> complex:
    """``exp(2 pi i * turns)`` after exact reduction modulo one."""
    t = turns % 1
    return complex(np.exp(1j * TWO_PI * float(t)))


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid ``x_j = j / cells_per_unit`` on ``[-half_width - margin, half_width + margin]``."""

    half_width: float
    cells_per_unit: int
    margin: int = 2

    def __post_init__(self) -> None:
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if int(self.cells_per_unit) != self.cells_per_unit or self.cells_per_unit < 1:
            raise ValueError("cells_per_unit must be a positive integer")
        if int(self.margin) != self.margin or self.margin < 0:
            raise ValueError("margin must be a nonnegative integer")

    @property
    def step(self) -> float:
        return 1.0 / self.cells_per_unit

    @property
    def offset(self) -> int:
        """Index of ``x = 0``."""
        return int(math.ceil(self.half_width * self.cells_per_unit)) + self.margin * self.cells_per_unit

    @property
    def size(self) -> int:
        return 2 * self.offset + 1

    def points(self) -> np.ndarray:
        return (np.arange(self.size) - self.offset) / self.cells_per_unit

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.half_width, self.cells_per_unit * factor, self.margin)

    @classmethod
    def parse_step(cls, text: str) -> int:
        """Accept ``"1/S"`` or ``"S"`` and return the integer ``S``."""
        text = text.strip()
        if text.startswith("1/"):
            text = text[2:]
        val = Fraction(text)
        if val.denominator != 1 or val < 1:
            raise ValueError(f"step must be 1/S for a positive integer S, got {text!r}")
        return int(val)


@dataclass(frozen=True, eq=False)
class UnitaryRep:
    """A representation with scalar central action ``U_c = exp(2 pi i * central_turns)``."""

    kind: str
    dim: int
    central_turns: Fraction
    q: int | None = None
    lam: float | None = None
    grid: GridSpec | None = None
    _x: np.ndarray | None = field(default=None, repr=False)

    @property
    def zeta(self) -> complex:
        return turns_to_unit(self.central_turns)

    @property
    def weight(self) -> float:
        """Quadrature weight of the inner product (grid step, or 1)."""
        return self.grid.step if self.grid is not None else 1.0

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        return complex(np.vdot(u, v) * self.weight)

    def norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(self.weight * np.vdot(v, v).real))

    def central_power(self, k) -> complex:
        """Scalar by which ``c^k`` acts; ``k`` may be a huge integer or, for grids, real."""
        if isinstance(k, (int, np.integer)):
            return turns_to_unit(self.central_turns * int(k))
        if self.kind == "finite":
            raise TypeError("finite representations only accept integer central exponents")
        return complex(np.exp(1j * TWO_PI * math.fmod(self.lam * float(k), 1.0)))

    # --- generators -----------------------------------------------------
    def shift(self, v: np.ndarray, x: int) -> np.ndarray:
        """``U_a^x v``, i.e. ``(U_a^x v)(t) = v(t + x)``."""
        x = int(x)
        if self.kind == "finite":
            return np.roll(v, -x)
        cells = x * self.grid.cells_per_unit
        if cells == 0:
            return v.copy()
        out = np.zeros_like(v)
        if abs(cells) >= len(v):
            if np.any(v):
                raise MarginExceeded(f"shift by {x} leaves the window")
            return out
        if cells > 0:
            lost = v[:cells]
            out[:-cells] = v[cells:]
        else:
            lost = v[cells:]
            out[-cells:] = v[:cells]
        if np.any(lost):
            raise MarginExceeded(f"shift by {x} exceeds the grid margin of {self.grid.margin}")
        return out

    def modulate(self, v: np.ndarray, y: int) -> np.ndarray:
        """``U_b^y v``."""
        y = int(y)
        if y == 0:
            return v.copy()
        if self.kind == "finite":
            idx = (np.arange(self.q, dtype=np.int64) * (y % self.q)) % self.q
            phase = np.exp(1j * TWO_PI * (idx / self.q))
            return phase * v
        return np.exp(1j * TWO_PI * np.fmod(self.lam * y * self._x, 1.0)) * v

    def apply(self, g: GroupElement, v: np.ndarray) -> np.ndarray:
        """``pi(g) v`` through ``g = a^x b^y c^(z - x y)``."""
        w = self.modulate(v, g.y) * self.central_power(g.z - g.x * g.y)
        return self.shift(w, g.x)

    def matrix(self, g: GroupElement) -> np.ndarray:
        """Dense matrix of ``pi(g)`` (small dimensions only)."""
        eye = np.eye(self.dim, dtype=complex)
        return np.stack([self.apply(g, eye[:, k]) for k in range(self.dim)], axis=1)

    def random_vector(self, rng: np.random.Generator, *, support: float | None = None) -> np.ndarray:
        v = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        if self.kind != "finite":
            lim = self.grid.half_width if support is None else support
            v[np.abs(self._x) > lim] = 0
        return v

    def check_axioms(self, rng: np.random.Generator | None = None, trials: int = 4) -> dict:
        """Largest deviations from unitarity, the commutation relation and centrality."""
        rng = np.random.default_rng(0) if rng is None else rng
        unit = rel = cen = 0.0
        a, b = GroupElement(1, 0, 0), GroupElement(0, 1, 0)
        for _ in range(trials):
            v = self.random_vector(rng, support=self.grid.half_width if self.grid else None)
            nv = self.norm(v)
            Ua, Ub = self.apply(a, v), self.apply(b, v)
            Uc = self.central_power(1) * v
            for w in (Ua, Ub, Uc):
                unit = max(unit, abs(self.norm(w) - nv) / nv)
            lhs = self.apply(a, self.apply(b, v))
            rhs = self.central_power(1) * self.apply(b, self.apply(a, v))
            rel = max(rel, self.norm(lhs - rhs) / nv)
            cen = max(cen, self.norm(self.apply(a, Uc) - self.central_power(1) * Ua) / nv,
                      self.norm(self.apply(b, Uc) - self.central_power(1) * Ub) / nv)
        return {"unitarity": unit, "relation": rel, "centrality": cen}


def make_finite_rep(q: int) -> UnitaryRep:
    """Shift/modulation representation on ``C^q`` with ``U_c = exp(2 pi i / q)``."""
    q = int(q)
    if q < 1:
        raise ValueError("q must be a positive integer")
    return UnitaryRep("finite", q, Fraction(1, q), q=q)


def make_discretized_rep(lam: float, grid: GridSpec) -> UnitaryRep:
    """Grid sample of the Schroedinger representation with frequency ``lam``."""
    lam = float(lam)
    if lam == 0 or not math.isfinite(lam):
        raise ValueError("lambda must be a nonzero finite real")
    x = grid.points()
    x.setflags(write=False)
    return UnitaryRep("discretized", grid.size, Fraction(lam), lam=lam, grid=grid, _x=x)


@dataclass(frozen=True, eq=False)
class Coboundary:
    """``f(g) = scale * (pi(g) h - h)``.

    ``scale`` defaults to the value making ``max(|f(a)|, |f(b)|) = 1`` so that
    ``f`` is 1-Lipschitz for the word metric.
    """

    rep: UnitaryRep
    h: np.ndarray
    lipschitz_scale: float = 1.0

    @classmethod
    def normalized(cls, rep: UnitaryRep, h: np.ndarray) -> "Coboundary":
        h = np.asarray(h, dtype=complex)
        raw = cls(rep, h, 1.0)
        top = max(rep.norm(raw(GroupElement(1, 0, 0))), rep.norm(raw(GroupElement(0, 1, 0))))
        return cls(rep, h, 1.0 / top if top > 0 else 1.0)

    @classmethod
    def random(cls, rep: UnitaryRep, rng: np.random.Generator) -> "Coboundary":
        return cls.normalized(rep, rep.random_vector(rng))

    def __call__(self, g) -> np.ndarray:
        return cocycle_eval(self, g)

    def central(self, w) -> np.ndarray:
        """``f(c^w)``; real ``w`` allowed on discretized representations."""
        return (self.rep.central_power(w) - 1.0) * self.h * self.lipschitz_scale

    def lipschitz_constant(self) -> float:
        return max(self.rep.norm(self(GroupElement(1, 0, 0))), self.rep.norm(self(GroupElement(0, 1, 0))))


def cocycle_eval(f: Coboundary, g) -> np.ndarray:
    """``f(g) = scale * (pi(g) h - h)`` for a group element or a word."""
    if not isinstance(g, GroupElement):
        g = word_eval(g)
    return (f.rep.apply(g, f.h) - f.h) * f.lipschitz_scale
