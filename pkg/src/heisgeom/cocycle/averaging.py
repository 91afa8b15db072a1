"""Ergodic averages of the central action and the inequality checks built on them.

Every representation here has a scalar central action ``zeta``, so the dyadic
average ``P_n = 2^-n sum_{j < 2^n} zeta^j`` is a scalar and all checks reduce to
exact scalar arithmetic on top of honest vector norms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg

from ..group import GroupElement, power
from .reps import Coboundary, UnitaryRep, turns_to_unit

ROUNDING = 1e-9
LEMMA44_CEILING = 10.0

_A = GroupElement(1, 0, 0)
_B = GroupElement(0, 1, 0)
_C = GroupElement(0, 0, 1)


class PreconditionError(ValueError):
    """Input violates the hypotheses of the inequality being checked."""


def avg_scalar(turns: Fraction, n: int) -> complex:
    """``2^-n sum_{j < 2^n} zeta^j`` for ``zeta = exp(2 pi i * turns)``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if turns % 1 == 0:
        return 1.0 + 0j
    zeta = turns_to_unit(turns)
    top = turns_to_unit(turns * 2**n)
    return (1.0 - top) / (1.0 - zeta) / 2.0**n


@dataclass(frozen=True)
class AveragingOperator:
    """``P_n`` on a representation whose centre acts by a scalar."""

    rep: UnitaryRep
    n: int

    @property
    def scalar(self) -> complex:
        return avg_scalar(self.rep.central_turns, self.n)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.scalar * v

    def matrix(self) -> np.ndarray:
        return self.scalar * np.eye(self.rep.dim, dtype=complex)

    def explicit_matrix(self) -> np.ndarray:
        """Direct summation of ``pi(c)^j`` (oracle for small ``2^n`` and ``dim``)."""
        Uc = self.rep.matrix(_C)
        acc = np.zeros_like(Uc)
        P = np.eye(self.rep.dim, dtype=complex)
        for _ in range(2**self.n):
            acc += P
            P = Uc @ P
        return acc / 2**self.n


def p_avg(rep: UnitaryRep, n: int) -> AveragingOperator:
    return AveragingOperator(rep, int(n))


def folner_gap(rep: UnitaryRep, m: int, k: int) -> float:
    """``|P_m - zeta^k P_m|`` on a scalar central action."""
    p = avg_scalar(rep.central_turns, m)
    return abs(p - rep.central_power(k) * p)


# ----------------------------------------------------------------------
# convexity and dyadic ergodic averages


def _norms(xs: np.ndarray) -> np.ndarray:
    return np.sqrt((np.abs(xs) ** 2).sum(axis=-1))


def check_convexity(xs, p: float = 2.0, K: float = 1.0) -> dict:
    """Variance of a point cloud against the convexity defect of its norms."""
    if p < 2 or K <= 0:
        raise PreconditionError("need p >= 2 and K > 0")
    xs = np.asarray(xs)
    if xs.ndim == 1:
        xs = xs[:, None]
    mean = xs.mean(axis=0)
    lhs = float(np.mean(_norms(xs - mean) ** p))
    # same norm routine on both terms, so identical points cancel exactly
    rhs = float((2 * K) ** p * (np.mean(_norms(xs) ** p) - _norms(mean) ** p))
    return {"lhs": lhs, "rhs": rhs, "slack": rhs - lhs, "ok": rhs - lhs >= -ROUNDING}


class _SpectralPowers:
    """Powers of a normal contraction through its eigen-decomposition.

    Eigenvalue phases are kept in exact turns, so ``T^N`` for ``N ~ 2^30`` is as
    accurate as ``T`` itself.
    """

    def __init__(self, T: np.ndarray):
        D, Z = scipy.linalg.schur(T, output="complex")
        vals = np.diag(D)
        self.basis = Z
        mod = np.abs(vals)
        # unit-modulus eigenvalues are snapped so that huge powers cannot grow
        mod[np.abs(mod - 1.0) < 1e-12] = 1.0
        self.mod = mod
        self.turns = [Fraction(float(t)) for t in np.angle(vals) / (2 * math.pi)]

    def eigpow(self, N: int) -> np.ndarray:
        ph = np.array([turns_to_unit(t * N) for t in self.turns])
        return ph * self.mod ** N

    def averages(self, n: int) -> np.ndarray:
        """Diagonal of ``2^-n sum_{j < 2^n} T^j`` in the eigenbasis."""
        out = np.empty(len(self.turns), dtype=complex)
        for idx, (t, r) in enumerate(zip(self.turns, self.mod)):
            if r == 1.0:
                out[idx] = avg_scalar(t, n)
            else:
                z = r * turns_to_unit(t)
                out[idx] = (1 - z ** (2**n)) / (1 - z) / 2**n if z != 1 else 1.0
        return out


def _is_normal(T: np.ndarray) -> bool:
    return np.linalg.norm(T @ T.conj().T - T.conj().T @ T) <= 1e-12 * max(1.0, np.linalg.norm(T)) ** 2


def check_lemma31(T, z, ell: int, i_max: int, p: float = 2.0, K: float = 1.0, *,
                  samples: int = 16, seed: int = 0) -> dict:
    """Partial sums of the dyadic-average increment series against ``(2K)^p |z|^p``."""
    T = np.atleast_2d(np.asarray(T, dtype=complex))
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if ell < 1 or i_max < 0:
        raise PreconditionError("need ell >= 1 and i_max >= 0")
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        v = rng.standard_normal(len(z)) + 1j * rng.standard_normal(len(z))
        if np.linalg.norm(T @ v) > np.linalg.norm(v) * (1 + 1e-12):
            raise PreconditionError("T is not a contraction on sampled vectors")
    if np.linalg.norm(T, 2) > 1 + 1e-12:
        raise PreconditionError("T is not a contraction")

    terms = []
    if _is_normal(T):
        sp_ = _SpectralPowers(T)
        w = sp_.basis.conj().T @ z
        for i in range(i_max + 1):
            s_lo = sp_.averages(i * ell) * w
            s_hi = sp_.averages((i + 1) * ell) * w
            step = 2 ** (i * ell)
            acc = 0.0
            for j in range(2**ell):
                diff = s_hi - sp_.eigpow(j * step) * s_lo
                acc += np.linalg.norm(diff) ** p
            terms.append(acc / 2**ell)
    else:
        # generic contraction: build s_n by the dyadic recursion with repeated squaring
        s = z.copy()
        U = T.copy()
        for i in range(i_max + 1):
            # s currently equals s_{i ell}; U equals T^(2^(i ell))
            orbit = [s]
            for _ in range(2**ell - 1):
                orbit.append(U @ orbit[-1])
            s_next = np.mean(orbit, axis=0)
            terms.append(float(np.mean([np.linalg.norm(s_next - o) ** p for o in orbit])))
            s = s_next
            for _ in range(ell):
                U = U @ U
    partial = float(np.sum(terms))
    bound = float((2 * K) ** p * np.linalg.norm(z) ** p)
    return {"partial_lhs": partial, "bound": bound, "slack": bound - partial,
            "terms": [float(t) for t in terms], "ok": bound - partial >= -ROUNDING}


# ----------------------------------------------------------------------
# cocycle inequalities


def _require_lipschitz(f: Coboundary) -> None:
    L = f.lipschitz_constant()
    if L > 1 + 1e-9:
        raise PreconditionError(f"cocycle is not 1-Lipschitz (generator norm {L:.6g})")


def _central_sq(n: int) -> GroupElement:
    return power(_C, n * n)


def _apply_gap(f: Coboundary, i: int, j: int, ell: int, v: np.ndarray) -> np.ndarray:
    rep = f.rep
    hi = p_avg(rep, (i + 1) * ell)(v)
    return rep.central_power(-j * 2 ** (i * ell)) * hi - p_avg(rep, i * ell)(v)


def check_lemma42(f: Coboundary, k: int, m: int, ell: int, p: float = 2.0, K: float = 1.0,
                  n_list=(4, 16)) -> dict:
    """Search the dyadic window for a pair (i, j) with small generator increments."""
    _require_lipschitz(f)
    rep = f.rep
    fa, fb = f(_A), f(_B)
    best = None
    series = 0.0
    for i in range(k + 1, k + m + 1):
        for j in range(2**ell):
            ga = rep.norm(_apply_gap(f, i, j, ell, fa))
            gb = rep.norm(_apply_gap(f, i, j, ell, fb))
            series += (ga**p + gb**p) / 2**ell
            worst = max(ga, gb)
            if best is None or worst < best[0]:
                best = (worst, i, j)
    gen_bound = 4 * K / m ** (1.0 / p)
    worst, i, j = best
    per_n = []
    for n in n_list:
        v = f(_central_sq(int(n)))
        lhs = rep.norm(_apply_gap(f, i, j, ell, v))
        bound = 16 * K * n / m ** (1.0 / p)
        per_n.append({"n": int(n), "lhs": lhs, "bound": bound, "slack": bound - lhs})
    return {
        "i": i, "j": j, "gen_max": worst, "gen_bound": gen_bound,
        "gen_bound_ok": worst <= gen_bound + ROUNDING,
        "series": series, "series_bound": (4 * K) ** p,
        "per_n": per_n,
        "ok": worst <= gen_bound + ROUNDING and all(r["slack"] >= -ROUNDING for r in per_n),
    }


def check_lemma43(f: Coboundary, m: int, n: int, k_range=range(1, 33)) -> dict:
    """Explicit bound ``|P_m f(c^(n^2))| <= 4n/k + 4n^3 k^2 / 2^m`` for each ``k``."""
    _require_lipschitz(f)
    rep = f.rep
    val = rep.norm(p_avg(rep, m)(f(_central_sq(n))))
    rows = []
    for k in k_range:
        bound = 4 * n / k + 4 * n**3 * k**2 / 2.0**m
        rows.append({"k": int(k), "bound": bound, "slack": bound - val})
    ratio = val * 2 ** (m / 3) / n ** (5 / 3)
    return {"norm": val, "per_k": rows, "optimize_ok": all(r["slack"] >= -ROUNDING for r in rows),
            "min_slack": min(r["slack"] for r in rows), "ratio": ratio}


def check_lemma44(f: Coboundary, m: int, n: int) -> dict:
    """Size of the part of ``f(c^(n^2))`` not captured by ``P_m``; ratio guarded at 10."""
    _require_lipschitz(f)
    rep = f.rep
    v = f(_central_sq(n))
    lhs = rep.norm(v - p_avg(rep, m)(v))
    scale = 2 ** (m / 3) * n ** (1 / 3)
    ratio = lhs / scale
    return {"lhs": lhs, "scale": scale, "ratio": ratio, "ok": ratio <= LEMMA44_CEILING}


def compression_experiment(f: Coboundary, p: float, t, K: float = 1.0) -> dict:
    """Run the parameter engine and the three-term split of ``f(c^(n^2))``."""
    from .params import select_parameters

    params = select_parameters(p, t)
    p = float(params.p)
    search = check_lemma42(f, params.k, params.m, params.ell, p, K, n_list=())
    i, j = search["i"], search["j"]
    n = params.n_of_i[i]
    rep = f.rep
    ell = params.ell
    v = f(_central_sq(n))
    first = rep.central_power(-j * 2 ** (i * ell)) * p_avg(rep, (i + 1) * ell)(v)
    second = p_avg(rep, i * ell)(v) - first
    third = v - p_avg(rep, i * ell)(v)
    resid = rep.norm(first + second + third - v)
    norm = rep.norm(v)
    loglog = math.log(math.log(n)) / math.log(n)
    bound = K * loglog ** (1.0 / p)
    ratio = norm / n
    return {
        "m": params.m, "k": params.k, "ell": ell, "i": i, "j": j, "n": n,
        "norm": norm, "ratio": ratio, "bound": bound, "ratio_over_bound": ratio / bound,
        "terms": [rep.norm(first), rep.norm(second), rep.norm(third)],
        "decomposition_residual": resid,
        "sandwich_ok": params.t <= 4 * n <= params.t**2,
    }
