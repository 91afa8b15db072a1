"""Exact selection of the integer parameters (m, k, l, n) driving the compression bound.

All defining inequalities are checked by cross-multiplied integer powers, so
there is no floating-point boundary case.  ``p`` and ``t`` are converted to
fractions (``"2.5"`` becomes ``5/2``, ``1e4`` becomes ``10000``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


class ParameterError(ValueError):
    """Inputs outside the range where the selection is defined."""


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return Fraction(repr(v))
    return Fraction(v)


@dataclass(frozen=True)
class ParamSelection:
    p: Fraction
    t: Fraction
    m: int
    k: int
    ell: int
    n_of_i: dict[int, int]

    @property
    def i_range(self) -> range:
        return range(self.k + 1, self.k + self.m + 1)

    def as_dict(self) -> dict:
        return {"p": float(self.p), "t": float(self.t), "m": self.m, "k": self.k, "ell": self.ell,
                "n_of_i": {str(i): n for i, n in self.n_of_i.items()}}


def _m_ok(m: int, a: int, b: int, t: Fraction) -> bool:
    # m^m <= (t/4)^(p/3)  <=>  m^(3 m b) <= (t/4)^a
    return Fraction(m) ** (3 * m * b) <= (t / 4) ** a


def _k_ok(k: int, m: int, a: int, b: int, t: Fraction) -> bool:
    # m^(3/(2p) + 3(k+1)/p) >= t  <=>  m^((3 + 6(k+1)) b) >= t^(2a)
    return Fraction(m) ** ((3 + 6 * (k + 1)) * b) >= t ** (2 * a)


def _ell_ok(ell: int, m: int, a: int, b: int) -> bool:
    # ell >= (6/p) log2 m  <=>  2^(ell a) >= m^(6 b)
    return 2 ** (ell * a) >= m ** (6 * b)


def ceil_scale(m: int, i: int, ell: int, a: int, b: int) -> int:
    """Smallest integer N with ``N >= m^(3/(2p)) 2^(i ell / 2)``."""
    # N >= X  <=>  N^(2a) >= m^(3b) 2^(i ell a)
    target = m ** (3 * b) * 2 ** (i * ell * a)
    p = a / b
    guess = int(math.floor(m ** (1.5 / p) * 2 ** (i * ell / 2)))
    N = max(1, guess - 2)
    while N ** (2 * a) < target:
        N += 1
    while N > 1 and (N - 1) ** (2 * a) >= target:
        N -= 1
    return N


def select_parameters(p, t) -> ParamSelection:
    """Choose ``m`` maximal, ``k`` minimal and ``l`` as in the compression argument.

    The lower half ``t <= 4n`` of the sandwich always holds.  The upper half can
    fail when rounding ``l`` up inflates ``2^(i l / 2)`` (first at ``p = 3``,
    ``t = 4 * 6^6``, where ``m`` reaches 6); that case raises :class:`ParameterError` instead of
    returning an inconsistent selection.
    """
    p = _frac(p)
    t = _frac(t)
    if p < 2:
        raise ParameterError(f"p must be >= 2, got {p}")
    a, b = p.numerator, p.denominator
    # t >= 8^p  <=>  t^b >= 8^a
    if t**b < Fraction(8) ** a:
        raise ParameterError(f"precondition t >= 8^p violated: t={float(t):g}, 8^p={8.0 ** float(p):g}")

    m = 1
    while _m_ok(m + 1, a, b, t):
        m += 1
    if m < 2:
        raise ParameterError("m < 2: no admissible k exists")
    k = 0
    while not _k_ok(k, m, a, b, t):
        k += 1
    ell = 0
    while not _ell_ok(ell, m, a, b):
        ell += 1

    n_of_i = {}
    for i in range(k + 1, k + m + 1):
        N = ceil_scale(m, i, ell, a, b)
        n = -(-N // 4)
        if not (t <= 4 * n <= t * t):
            raise ParameterError(f"sandwich t <= 4n <= t^2 fails at i={i}, n={n}")
        n_of_i[i] = n
    return ParamSelection(p, t, m, k, ell, n_of_i)


def verify_selection(sel: ParamSelection) -> dict:
    """Re-check every defining condition exactly; returns named booleans."""
    a, b = sel.p.numerator, sel.p.denominator
    t = sel.t
    checks = {
        "m_feasible": _m_ok(sel.m, a, b, t),
        "m_maximal": not _m_ok(sel.m + 1, a, b, t),
        "k_feasible": _k_ok(sel.k, sel.m, a, b, t),
        "k_minimal": sel.k == 0 or not _k_ok(sel.k - 1, sel.m, a, b, t),
        "ell_ceiling": _ell_ok(sel.ell, sel.m, a, b) and (sel.ell == 0 or not _ell_ok(sel.ell - 1, sel.m, a, b)),
        "n_rounding": all(
            4 * (n - 1) < ceil_scale(sel.m, i, sel.ell, a, b) <= 4 * n for i, n in sel.n_of_i.items()
        ),
        "sandwich": all(t <= 4 * n <= t * t for n in sel.n_of_i.values()),
        "i_range": sorted(sel.n_of_i) == list(sel.i_range),
    }
    checks["all"] = all(checks.values())
    return checks
