"""Discrete Poincare inequality on Heisenberg balls as a generalized eigenproblem.

For a radius ``R`` and outer factor ``rho`` the two sides are

    L(f) = sum_{x in B_R} sum_{k=1}^{R^2} (f(x c^k) - f(x))^2 / k^2
    M(f) = sum_{x in B_{rho R}} (f(x a) - f(x))^2 + (f(x b) - f(x))^2

and the best constant is ``sup L(f) / M(f)`` over nonconstant ``f``.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from . import cayley
from .cayley import ElementTable
from .group import GroupElement

log = logging.getLogger(__name__)

PAPER_RHO = 22
MIN_RHO = 5
DENSE_LIMIT = 4000


class ConvergenceError(RuntimeError):
    """The iterative eigensolver hit its iteration cap."""

    def __init__(self, msg: str, residual: float, iterations: int, estimate: float):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations
        self.estimate = estimate


class DisconnectedGraph(RuntimeError):
    """The gradient form has more than one connected component."""


@dataclass(frozen=True, eq=False)
class QuadForm:
    """``Q(f) = sum_p w_p (f(i_p) - f(j_p))^2`` on ``n`` indexed vertices.

    Pairs are stored once with ``i < j`` and summed weights, sorted by ``(i, j)``.
    """

    n: int
    i: np.ndarray
    j: np.ndarray
    w: np.ndarray

    @classmethod
    def from_pairs(cls, n: int, i, j, w=None) -> "QuadForm":
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        w = np.ones(len(i)) if w is None else np.broadcast_to(np.asarray(w, dtype=float), i.shape)
        if ((i < 0) | (j < 0) | (i >= n) | (j >= n)).any():
            raise ValueError("pair endpoint outside the vertex set")
        keep = i != j
        lo, hi, w = np.minimum(i, j)[keep], np.maximum(i, j)[keep], w[keep]
        if (w <= 0).any():
            raise ValueError("pair weights must be positive")
        key, inverse = np.unique(lo * n + hi, return_inverse=True)
        agg = np.zeros(len(key))
        np.add.at(agg, inverse, w)
        return cls(n, key // n, key % n, agg)

    def __len__(self) -> int:
        return len(self.w)

    def evaluate(self, f) -> float:
        """Form value; a 2-d ``f`` is treated as vector-valued (rows = vertices)."""
        f = np.asarray(f)
        diff = f[self.i] - f[self.j]
        if diff.ndim == 1:
            return float(np.dot(self.w, np.abs(diff) ** 2))
        return float(np.dot(self.w, (np.abs(diff) ** 2).sum(axis=1)))

    def matrix(self) -> sp.csr_matrix:
        """Weighted graph Laplacian ``A`` with ``Q(f) = f^T A f``."""
        n = self.n
        off = sp.coo_matrix((-self.w, (self.i, self.j)), shape=(n, n))
        deg = np.bincount(self.i, self.w, n) + np.bincount(self.j, self.w, n)
        A = off + off.T + sp.diags(deg)
        return sp.csr_matrix(A)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.i, self.w, self.n) + np.bincount(self.j, self.w, self.n)


@dataclass(frozen=True, eq=False)
class FormPair:
    R: int
    rho: int
    preset: str
    vertices: ElementTable
    L: QuadForm
    M: QuadForm

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)


def _right_translate(x, y, z, gx: int, gy: int, gz: int):
    return x + gx, y + gy, z + gz + x * gy


def parse_preset(preset: str | int | None) -> tuple[str, int]:
    """``"paper"`` -> rho 22; ``"mini:7"``, ``"mini(7)"`` or an int -> that rho."""
    if preset is None or preset == "paper":
        return "paper", PAPER_RHO
    if isinstance(preset, int):
        rho = preset
    else:
        text = str(preset).strip().lower().replace("(", ":").rstrip(")")
        if not text.startswith("mini:"):
            raise ValueError(f"unknown preset {preset!r}; use 'paper' or 'mini:RHO'")
        rho = int(text.split(":", 1)[1])
    if rho < MIN_RHO:
        raise ValueError(f"mini preset needs rho >= {MIN_RHO} so central pairs stay inside the vertex set")
    return f"mini({rho})", rho


def gradient_vertex_set(outer: int) -> tuple[ElementTable, ElementTable]:
    """``(B_outer, B_outer ∪ B_outer a ∪ B_outer b)``."""
    big = cayley.ball(outer + 1)
    inner = big.restrict(outer)
    mask = np.zeros(len(big), dtype=bool)
    mask[: len(inner)] = True
    for g in ((1, 0, 0), (0, 1, 0)):
        idx = big.index(*_right_translate(inner.x, inner.y, inner.z, *g))
        mask[idx] = True
    return inner, big.subset(mask)


def gradient_form(inner: ElementTable, verts: ElementTable) -> QuadForm:
    src = verts.index(inner.x, inner.y, inner.z)
    ia = verts.index(*_right_translate(inner.x, inner.y, inner.z, 1, 0, 0))
    ib = verts.index(*_right_translate(inner.x, inner.y, inner.z, 0, 1, 0))
    return QuadForm.from_pairs(len(verts), np.concatenate([src, src]), np.concatenate([ia, ib]))


def build_forms(R: int, preset: str | int | None = "paper") -> FormPair:
    """Both sides of the central-difference Poincare inequality at radius ``R``."""
    R = int(R)
    if R < 1:
        raise ValueError("R must be positive")
    name, rho = parse_preset(preset)
    inner, verts = gradient_vertex_set(rho * R)
    M = gradient_form(inner, verts)

    bR = cayley.ball(R)
    ks = np.arange(1, R * R + 1, dtype=np.int64)
    src = np.repeat(verts.index(bR.x, bR.y, bR.z), len(ks))
    kk = np.tile(ks, len(bR))
    dst = verts.index(np.repeat(bR.x, len(ks)), np.repeat(bR.y, len(ks)), np.repeat(bR.z, len(ks)) + kk)
    if (dst < 0).any() or (src < 0).any():
        raise AssertionError("central pair endpoint escaped the vertex set")
    L = QuadForm.from_pairs(len(verts), src, dst, 1.0 / kk.astype(float) ** 2)
    return FormPair(R, rho, name, verts, L, M)


# --------------------------------------------------------------------------
# generalized eigensolvers


class _CenteredMass:
    """``(scale) * sum_{x in S} (f(x) - mean_S f)^2`` as a symmetric operator."""

    def __init__(self, n: int, support: np.ndarray, scale: float):
        self.n = n
        self.support = np.asarray(support, dtype=np.int64)
        self.scale = float(scale)

    def evaluate(self, f) -> float:
        g = np.asarray(f)[self.support]
        g = g - g.mean(axis=0)
        return self.scale * float((np.abs(g) ** 2).sum())

    def matvec(self, F: np.ndarray) -> np.ndarray:
        out = np.zeros_like(F)
        g = F[self.support]
        out[self.support] = self.scale * (g - g.mean(axis=0))
        return out

    def dense(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        s = self.support
        A[np.ix_(s, s)] = -self.scale / len(s)
        A[s, s] += self.scale
        return A


def _as_operator(form):
    """(matvec on (n, k) blocks, evaluate, dense) for a QuadForm or _CenteredMass."""
    if isinstance(form, QuadForm):
        A = form.matrix()
        return (lambda F: A @ F), form.evaluate, (lambda: A.toarray())
    return form.matvec, form.evaluate, form.dense


@dataclass
class EigResult:
    constant: float
    witness: np.ndarray
    residual: float
    iterations: int
    method: str
    converged: bool = True
    history: list[float] = field(default_factory=list, repr=False)


class _GradientSolver:
    """Solve ``M u = r`` on the mean-zero subspace by preconditioned CG."""

    def __init__(self, M: sp.csr_matrix, rtol: float = 1e-13):
        self.M = M
        self.rtol = rtol
        self.precond = None
        self.cg_iterations = 0
        if M.shape[0] > 20_000:
            import pyamg

            # a coarse grid of a few hundred unknowns keeps the singular coarse solve accurate
            ml = pyamg.ruge_stuben_solver(M, max_coarse=500)
            self.precond = ml.aspreconditioner(cycle="V")

    def solve(self, r: np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
        r = r - r.mean()
        if not np.any(r):
            return np.zeros_like(r)
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.cg(self.M, r, x0=x0, rtol=self.rtol, atol=0.0, maxiter=20 * self.M.shape[0],
                          M=self.precond, callback=cb)
        self.cg_iterations += count[0]
        if info != 0:
            log.warning("CG stopped with info=%d", info)
        return x - x.mean()


def _check_connected(M: sp.csr_matrix) -> None:
    ncomp, _ = connected_components(M, directed=False)
    if ncomp != 1:
        raise DisconnectedGraph(f"gradient graph has {ncomp} components")


def _normalize_witness(w: np.ndarray, M: sp.csr_matrix) -> np.ndarray:
    deg = M.diagonal()
    w = w - np.dot(deg, w) / deg.sum()
    m = float(w @ (M @ w))
    return w / math.sqrt(m) if m > 0 else w


def generalized_top(num, M: QuadForm, method: str = "iterative", *, block: int = 6,
                    tol: float = 1e-10, stall_tol: float = 1e-8, max_iter: int = 10_000,
                    samples: int = 1000, seed: int = 0) -> EigResult:
    """Largest value of ``num(f) / M(f)`` over ``f`` orthogonal to constants."""
    Mm = M.matrix()
    n = Mm.shape[0]
    _check_connected(Mm)
    matvec, evaluate, dense = _as_operator(num)

    if method == "dense":
        if n > DENSE_LIMIT:
            raise ValueError(f"dense method limited to {DENSE_LIMIT} vertices, got {n}")
        Q = scipy.linalg.null_space(np.ones((1, n)))
        A = Q.T @ dense() @ Q
        Bm = Q.T @ Mm.toarray() @ Q
        vals, vecs = scipy.linalg.eigh(A, Bm, subset_by_index=[n - 2, n - 2])
        w = _normalize_witness(Q @ vecs[:, 0], Mm)
        lam = float(vals[0])
        res = _residual(matvec, Mm, w, lam)
        return EigResult(lam, w, res, 1, "dense")

    if method == "sample":
        rng = np.random.default_rng(seed)
        F = rng.standard_normal((n, samples))
        LF = matvec(F)
        MF = Mm @ F
        ratios = np.einsum("ij,ij->j", F, LF) / np.einsum("ij,ij->j", F, MF)
        best = int(np.argmax(ratios))
        w = _normalize_witness(F[:, best], Mm)
        return EigResult(float(ratios[best]), w, float("nan"), samples, "sample")

    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")
    return _subspace_iteration(matvec, Mm, block=block, tol=tol, stall_tol=stall_tol,
                               max_iter=max_iter, seed=seed)


def _residual(matvec, Mm, w, lam) -> float:
    Lw = matvec(w[:, None])[:, 0]
    Mw = Mm @ w
    denom = abs(lam) * np.linalg.norm(Mw)
    return float(np.linalg.norm(Lw - lam * Mw) / denom) if denom > 0 else 0.0


def _subspace_iteration(matvec, Mm, *, block, tol, stall_tol, max_iter, seed) -> EigResult:
    """Block power iteration on ``M^+ L`` with Rayleigh-Ritz on each block."""
    n = Mm.shape[0]
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, min(block, n - 1)))
    Z -= Z.mean(axis=0)
    solver = _GradientSolver(Mm)
    history: list[float] = []
    lam, res, w = 0.0, float("inf"), Z[:, 0]
    for it in range(1, max_iter + 1):
        LZ = matvec(Z)
        MZ = Mm @ Z
        Bm = Z.T @ MZ
        Bm = (Bm + Bm.T) / 2
        bv, bw = np.linalg.eigh(Bm)
        keep = bv > 1e-12 * bv.max()
        T = bw[:, keep] / np.sqrt(bv[keep])
        A = T.T @ (Z.T @ LZ) @ T
        theta, Y = np.linalg.eigh((A + A.T) / 2)
        order = np.argsort(theta)[::-1]
        theta, Y = theta[order], Y[:, order]
        coef = T @ Y
        Zr, LZr, MZr = Z @ coef, LZ @ coef, MZ @ coef
        lam = float(theta[0])
        w = Zr[:, 0]
        denom = abs(lam) * np.linalg.norm(MZr[:, 0])
        res = float(np.linalg.norm(LZr[:, 0] - lam * MZr[:, 0]) / denom) if denom > 0 else 0.0
        history.append(lam)
        if res <= tol:
            break
        if len(history) > 10 and abs(history[-1] - history[-11]) <= stall_tol * abs(lam) and res <= 1e-6:
            break
        cols = [solver.solve(LZr[:, c], x0=theta[c] * Zr[:, c]) for c in range(Zr.shape[1])
                if theta[c] > 1e-14 * max(lam, 1e-300)]
        if not cols:
            break
        Z = np.stack(cols, axis=1)
    else:
        raise ConvergenceError(f"no convergence after {max_iter} iterations (residual {res:.3e})",
                               res, max_iter, lam)
    w = _normalize_witness(w, Mm)
    return EigResult(lam, w, res, it, "iterative", True, history)


def best_constant(fp: FormPair, method: str = "iterative", **kw) -> EigResult:
    """Best constant ``sup L(f)/M(f)`` for a form pair.

    ``method`` is ``"dense"``, ``"iterative"`` or ``"sample"`` (a lower estimate from
    ``samples`` random Gaussian functions).
    """
    return generalized_top(fp.L, fp.M, method, **kw)


@dataclass(frozen=True, eq=False)
class LocalPair:
    R: int
    inner: int
    outer: int
    vertices: ElementTable
    num: _CenteredMass
    M: QuadForm


def build_local_forms(R: int, inner_factor: int = 7, outer_factor: int = 22) -> LocalPair:
    R = int(R)
    if R < 1:
        raise ValueError("R must be positive")
    if not 0 < inner_factor <= outer_factor:
        raise ValueError("need 0 < inner_factor <= outer_factor")
    inner_ball, verts = gradient_vertex_set(outer_factor * R)
    M = gradient_form(inner_ball, verts)
    core = cayley.ball(inner_factor * R)
    support = verts.index(core.x, core.y, core.z)
    num = _CenteredMass(len(verts), support, 1.0 / R**2)
    return LocalPair(R, inner_factor * R, outer_factor * R, verts, num, M)


def local_constant(R: int, method: str = "iterative", *, inner_factor: int = 7,
                   outer_factor: int = 22, **kw) -> EigResult:
    """Best constant of ``R^-2 sum_{B_7R} |f - mean|^2 <= C * gradient sum over B_22R``."""
    lp = build_local_forms(R, inner_factor, outer_factor)
    return generalized_top(lp.num, lp.M, method, **kw)


def central_sum(R: int) -> float:
    """``sum_{k=1}^{R^2} d_W(c^k, e)^2 / k^2``."""
    prof = cayley.central_profile(R * R)
    return float(sum(d * d / (k * k) for k, d in enumerate(prof, start=1)))


def distortion_lower_bound(R: int, C: float, rho: int = PAPER_RHO) -> float:
    """Certified lower bound on the Euclidean distortion of the form-pair vertex set.

    Any map with ``d_W <= |f(x) - f(y)| <= D d_W`` gives ``L(f) >= |B_R| S`` and
    ``M(f) <= 2 D^2 |B_{rho R}|``, so ``L <= C M`` forces
    ``D >= sqrt(|B_R| S / (2 C |B_{rho R}|))``.
    """
    if not (C > 0 and math.isfinite(C)):
        raise ValueError("constant must be positive and finite")
    nR = len(cayley.ball(R))
    nOuter = len(cayley.ball(rho * R))
    return math.sqrt(nR * central_sum(R) / (2.0 * C * nOuter))


class ExtendedMap:
    """Radial cut-off extension of a map on ``B_R`` with ``f(e) = 0``.

    Equal to ``f`` on ``B_{R/2}``, ``2 (1 - |x|/R) f(x)`` on the annulus and zero
    outside ``B_R``.
    """

    def __init__(self, values, table: ElementTable, R: int):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if len(values) != len(table):
            raise ValueError("one value row per ball element required")
        e_idx = int(table.index(0, 0, 0)[0])
        if e_idx < 0 or np.any(values[e_idx] != 0):
            raise ValueError("extension requires f(e) = 0")
        self.table = table
        self.R = int(R)
        d = table.dist.astype(float)
        factor = np.where(2 * table.dist <= self.R, 1.0, 2.0 * (1.0 - d / self.R))
        factor = np.where(table.dist <= self.R, factor, 0.0)
        self._values = values * factor[:, None]

    def evaluate(self, x, y, z) -> np.ndarray:
        idx = self.table.index(x, y, z)
        out = np.zeros((len(idx), self._values.shape[1]))
        hit = idx >= 0
        out[hit] = self._values[idx[hit]]
        return out

    def __call__(self, g: GroupElement) -> np.ndarray:
        return self.evaluate([g.x], [g.y], [g.z])[0]


def extend_lipschitz(values, table: ElementTable, R: int) -> ExtendedMap:
    return ExtendedMap(values, table, R)


def witness_csv(vertices: ElementTable, witness: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "z", "value"])
    for row in zip(vertices.x.tolist(), vertices.y.tolist(), vertices.z.tolist(), witness.tolist()):
        w.writerow([row[0], row[1], row[2], repr(float(row[3]))])
    return buf.getvalue()
