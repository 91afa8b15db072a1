"""Bi-Lipschitz distortion of finite metric spaces into Euclidean and l_p spaces.

The Euclidean optimum solves the semidefinite program

    min D^2  s.t.  Q >= 0,  d_ij^2 <= Q_ii + Q_jj - 2 Q_ij <= D^2 d_ij^2,

here through a factorisation ``Q = V V^T`` and an augmented Lagrangian.  Every
returned embedding is a genuine feasible point: ``D`` is recomputed exactly from
the coordinates, so it is an upper bound that the solver drives down to the
optimum.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse as sp

from . import cayley

log = logging.getLogger(__name__)

FULL_RANK_LIMIT = 32
POINT_LIMIT = 2000


class BracketError(RuntimeError):
    """No feasible starting embedding could be produced."""


@dataclass(frozen=True, eq=False)
class MetricInstance:
    labels: list[str]
    d: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] != len(self.labels):
            raise ValueError("distance matrix must be square with one label per point")
        if not np.allclose(d, d.T, rtol=0, atol=0):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.diag(d) != 0):
            raise ValueError("diagonal must be zero")
        off = d[~np.eye(len(d), dtype=bool)]
        if np.any(off <= 0):
            raise ValueError("distinct points need positive distance")
        object.__setattr__(self, "d", d)

    def __len__(self) -> int:
        return len(self.labels)

    def max_triangle_violation(self) -> float:
        """``max(d_ik - d_ij - d_jk)``; nonpositive for a metric."""
        d = self.d
        worst = -np.inf
        for j in range(len(d)):
            worst = max(worst, float((d - d[:, j : j + 1] - d[j : j + 1, :]).max()))
        return worst

    def scaled(self, factor: float) -> "MetricInstance":
        return MetricInstance(list(self.labels), self.d * factor)

    def subset(self, idx) -> "MetricInstance":
        idx = np.asarray(idx)
        return MetricInstance([self.labels[i] for i in idx], self.d[np.ix_(idx, idx)])

    def pairs(self):
        return np.triu_indices(len(self), 1)

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "d"])
        I, J = self.pairs()
        for i, j in zip(I.tolist(), J.tolist()):
            w.writerow([i, j, repr(float(self.d[i, j]))])

    @classmethod
    def from_csv(cls, fh) -> "MetricInstance":
        rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError("empty instance file")
        n = 1 + max(max(int(r["i"]), int(r["j"])) for r in rows)
        d = np.zeros((n, n))
        seen = np.zeros((n, n), dtype=bool)
        for r in rows:
            i, j, v = int(r["i"]), int(r["j"]), float(r["d"])
            d[i, j] = d[j, i] = v
            seen[i, j] = seen[j, i] = True
        np.fill_diagonal(seen, True)
        if not seen.all():
            raise ValueError("instance file does not list every pair")
        return cls([str(i) for i in range(n)], d)


def path_instance(n: int) -> MetricInstance:
    idx = np.arange(n)
    return MetricInstance([str(i) for i in idx], np.abs(idx[:, None] - idx[None, :]).astype(float))


def cycle_instance(n: int) -> MetricInstance:
    idx = np.arange(n)
    k = np.abs(idx[:, None] - idx[None, :])
    return MetricInstance([str(i) for i in idx], np.minimum(k, n - k).astype(float))


def ball_instance(R: int) -> MetricInstance:
    """``(B_R, d_W)`` with exact word distances."""
    b = cayley.ball(R)
    d = cayley.pairwise_distances(b.x, b.y, b.z, max_norm=R)
    labels = [f"{x},{y},{z}" for x, y, z in zip(b.x.tolist(), b.y.tolist(), b.z.tolist())]
    return MetricInstance(labels, d.astype(float))


def table_instance(table: cayley.ElementTable) -> MetricInstance:
    d = cayley.pairwise_distances(table.x, table.y, table.z, max_norm=int(table.dist.max()))
    labels = [f"{x},{y},{z}" for x, y, z in zip(table.x.tolist(), table.y.tolist(), table.z.tolist())]
    return MetricInstance(labels, d.astype(float))


@dataclass
class EmbedResult:
    D: float
    coords: np.ndarray
    gram: np.ndarray | None
    certificate: float
    iterations: int
    method: str
    p: float = 2.0
    converged: bool = True
    gram_min_eig: float = 0.0
    history: list[float] = field(default_factory=list, repr=False)


def _pnorm_rows(U: np.ndarray, p: float) -> np.ndarray:
    if p == 2:
        return np.sqrt((U * U).sum(axis=1))
    if math.isinf(p):
        return np.abs(U).max(axis=1)
    return (np.abs(U) ** p).sum(axis=1) ** (1.0 / p)


def distortion_of(m: MetricInstance, coords: np.ndarray, p: float = 2.0) -> float:
    """Exact distortion ``max ratio / min ratio`` of an embedding in l_p."""
    I, J = m.pairs()
    if len(I) == 0:
        return 1.0
    ratio = _pnorm_rows(coords[I] - coords[J], p) / m.d[I, J]
    lo = ratio.min()
    if lo <= 0:
        return math.inf
    return float(ratio.max() / lo)


def normalize_embedding(m: MetricInstance, coords: np.ndarray, p: float = 2.0) -> np.ndarray:
    """Rescale so the embedding is noncontracting with contraction exactly 1."""
    I, J = m.pairs()
    if len(I) == 0:
        return coords
    ratio = _pnorm_rows(coords[I] - coords[J], p) / m.d[I, J]
    return coords / ratio.min()


def verify_embedding(m: MetricInstance, D: float, *, coords=None, gram=None, tol: float = 1e-4) -> dict:
    """Independent check of ``d^2 <= |f_i - f_j|^2 <= D^2 d^2`` from raw coordinates or Gram."""
    I, J = m.pairs()
    if gram is None:
        G = coords @ coords.T
    else:
        G = np.asarray(gram)
    sq = G[I, I] + G[J, J] - 2 * G[I, J]
    dd = m.d[I, J] ** 2
    scale = float(dd.max()) if len(dd) else 1.0
    contraction = float(np.max(dd - sq, initial=0.0)) / scale
    expansion = float(np.max(sq - D * D * dd, initial=0.0)) / scale
    min_eig = float(np.linalg.eigvalsh((G + G.T) / 2).min()) if len(G) else 0.0
    return {
        "max_contraction": contraction,
        "max_expansion": expansion,
        "gram_min_eig": min_eig,
        "ok": contraction <= tol and expansion <= tol and min_eig >= -tol * scale,
    }


def classical_mds(d: np.ndarray, dim: int) -> np.ndarray:
    n = len(d)
    J = np.eye(n) - 1.0 / n
    B = -0.5 * J @ (d * d) @ J
    vals, vecs = np.linalg.eigh((B + B.T) / 2)
    order = np.argsort(vals)[::-1][:dim]
    vals = np.clip(vals[order], 0, None)
    X = vecs[:, order] * np.sqrt(vals)
    if X.shape[1] < dim:
        X = np.hstack([X, np.zeros((n, dim - X.shape[1]))])
    return X


# --------------------------------------------------------------------------
# heuristic l_p embedding


def _lse(v: np.ndarray, tau: float):
    m = v.max()
    e = np.exp(tau * (v - m))
    s = e.sum()
    return m + math.log(s) / tau, e / s


def heuristic_embed_lp(m: MetricInstance, p: float = 2.0, dim: int = 2, iters: int = 2000,
                       seed: int = 0, restarts: int = 4) -> EmbedResult:
    """Local minimisation of a smoothed log-distortion in ``l_p^dim``.

    Starts from classical MDS plus ``restarts - 1`` seeded random
    configurations and tightens a log-sum-exp surrogate of
    ``log max ratio - log min ratio``.  Returns the best feasible iterate; an
    upper bound on the optimal distortion, never a certificate of optimality.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    n = len(m)
    dim = max(1, int(dim))
    if n <= 1:
        return EmbedResult(1.0, np.zeros((n, dim)), None, 0.0, 0, "heuristic", p)
    rng = np.random.default_rng(seed)
    I, J = m.pairs()
    logd = np.log(m.d[I, J])
    floor = 1e-9 * float(m.d.max())
    # the surrogate uses a finite exponent; the reported distortion uses the true p
    q = min(float(p), 64.0)
    if dim == 1:
        q = 2.0  # every l_p norm is |u| on the line

    def objective(flat, tau, eps):
        X = flat.reshape(n, dim)
        U = X[I] - X[J]
        if q == 2:
            sq = (U * U).sum(axis=1) + eps * eps
            lr = 0.5 * np.log(sq) - logd
            dU = U / sq[:, None]
        else:
            a = np.sqrt(U * U + eps * eps)
            amax = a.max(axis=1, keepdims=True)
            r = a / amax
            s = (r**q).sum(axis=1)
            lr = np.log(s) / q + np.log(amax[:, 0]) - logd
            dU = (r ** (q - 2)) * U / (amax * amax * s[:, None])
        hi, whi = _lse(lr, tau)
        lo, wlo = _lse(-lr, tau)
        g = (whi - wlo)[:, None] * dU
        G = np.zeros_like(X)
        np.add.at(G, I, g)
        np.add.at(G, J, -g)
        return hi + lo, G.ravel()

    starts = [classical_mds(m.d, dim)]
    spread = float(m.d.max())
    for _ in range(max(0, restarts - 1)):
        starts.append(spread * rng.standard_normal((n, dim)))

    taus = [4.0, 16.0, 64.0, 256.0, 1024.0]
    per = max(1, iters // len(taus))
    best, bestD = None, math.inf
    history: list[float] = []
    nfev = 0
    for X in starts:
        if not np.isfinite(distortion_of(m, X, p)):
            X = X + 1e-3 * spread * rng.standard_normal(X.shape)
        X = normalize_embedding(m, X, p)
        D = distortion_of(m, X, p)
        if D < bestD:
            bestD, best = D, X
        if D <= 1 + 1e-12:
            break
        for tau in taus:
            # coordinate smoothing shrinks with the max/min smoothing
            eps = max(floor, 0.1 * spread / tau) if q != 2 else floor
            res = scipy.optimize.minimize(objective, X.ravel(), args=(tau, eps), jac=True, method="L-BFGS-B",
                                          options={"maxiter": per, "gtol": 1e-12, "ftol": 1e-15})
            nfev += res.nfev
            X = res.x.reshape(n, dim)
            D = distortion_of(m, X, p)
            if D < bestD:
                bestD, best = D, normalize_embedding(m, X, p)
        history.append(bestD)
        if bestD <= 1 + 1e-9:
            break
    return EmbedResult(bestD, best, None, 0.0, nfev, "heuristic", p, True, 0.0, history)


# --------------------------------------------------------------------------
# Euclidean SDP via factorised augmented Lagrangian


def _incidence(n: int, I: np.ndarray, J: np.ndarray) -> sp.csr_matrix:
    k = len(I)
    rows = np.concatenate([np.arange(k), np.arange(k)])
    cols = np.concatenate([I, J])
    vals = np.concatenate([np.ones(k), -np.ones(k)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(k, n))


def _al_solve(dd: np.ndarray, S: sp.csr_matrix, V: np.ndarray, s: float, *, tol: float,
              max_outer: int, inner_iter: int, mu: float = 10.0):
    """Augmented Lagrangian for ``min s`` s.t. ``1 <= |V_i - V_j|^2 / dd <= s``."""
    n, r = V.shape
    k = len(dd)
    lam1 = np.zeros(k)
    lam2 = np.zeros(k)
    prev_viol = math.inf
    history: list[float] = []
    nfev = 0
    ST = S.T.tocsr()

    def fg(x):
        Vx = x[:-1].reshape(n, r)
        sx = x[-1]
        U = S @ Vx
        q = np.einsum("ij,ij->i", U, U) / dd
        g1 = np.maximum(0.0, lam1 + mu * (1.0 - q))
        g2 = np.maximum(0.0, lam2 + mu * (q - sx))
        f = sx + ((g1 * g1 - lam1 * lam1).sum() + (g2 * g2 - lam2 * lam2).sum()) / (2 * mu)
        # U is not needed after this, so scale it in place
        U *= ((g2 - g1) / dd)[:, None]
        gV = 2.0 * (ST @ U)
        gs = 1.0 - g2.sum()
        return f, np.concatenate([gV.ravel(), [gs]])

    x = np.concatenate([V.ravel(), [s]])
    converged = False
    it = 0
    for it in range(1, max_outer + 1):
        res = scipy.optimize.minimize(fg, x, jac=True, method="L-BFGS-B",
                                      options={"maxiter": inner_iter, "gtol": 1e-12, "ftol": 1e-16,
                                               "maxcor": 20})
        nfev += res.nfev
        x = res.x
        U = S @ x[:-1].reshape(n, r)
        q = (U * U).sum(axis=1) / dd
        c1 = 1.0 - q
        c2 = q - x[-1]
        viol = max(float(c1.max()), float(c2.max()), 0.0)
        lam1 = np.maximum(0.0, lam1 + mu * c1)
        lam2 = np.maximum(0.0, lam2 + mu * c2)
        history.append(float(x[-1]))
        log.debug("AL outer %d: s=%.10f viol=%.2e mu=%.1e", it, x[-1], viol, mu)
        if viol < tol and len(history) > 1 and abs(history[-1] - history[-2]) < tol * max(1.0, abs(x[-1])):
            converged = True
            break
        if viol > 0.25 * prev_viol:
            mu = min(mu * 5.0, 1e9)
        prev_viol = viol
    return x[:-1].reshape(n, r), float(x[-1]), it, nfev, converged, history


def min_distortion_l2(m: MetricInstance, tol: float = 1e-4, *, seed: int = 0, rank: int | None = None,
                      max_outer: int = 80, inner_iter: int = 4000) -> EmbedResult:
    """Least Euclidean distortion of a finite metric (SDP optimum up to ``tol``)."""
    n = len(m)
    if n > POINT_LIMIT:
        raise ValueError(f"at most {POINT_LIMIT} points supported, got {n}")
    if n <= 2:
        X = classical_mds(m.d, 1)
        X = normalize_embedding(m, X) if n == 2 else X
        G = X @ X.T
        return EmbedResult(1.0, X, G, 0.0, 0, "exact", 2.0, True, 0.0)

    scale = float(m.d.max())
    mn = m.scaled(1.0 / scale)
    start = heuristic_embed_lp(mn, p=2, dim=min(n - 1, 8), iters=600, seed=seed)
    if not math.isfinite(start.D):
        raise BracketError("heuristic embedding failed to give a finite upper bracket")
    upper = start.D

    I, J = mn.pairs()
    dd = mn.d[I, J] ** 2
    S = _incidence(n, I, J)
    rng = np.random.default_rng(seed)
    if rank is None:
        rank = n if n <= FULL_RANK_LIMIT else int(math.ceil(2 * math.sqrt(n)))
    rank = min(max(rank, start.coords.shape[1]), n)

    best_X, best_D = start.coords, upper
    iterations = 0
    converged = False
    history: list[float] = []
    while True:
        V = np.zeros((n, rank))
        V[:, : best_X.shape[1]] = best_X
        V += 1e-3 * rng.standard_normal(V.shape)
        V = normalize_embedding(mn, V)
        s0 = distortion_of(mn, V) ** 2
        V, s, it, nfev, converged, hist = _al_solve(dd, S, V, s0, tol=min(tol, 1e-6) * 1e-3,
                                                    max_outer=max_outer, inner_iter=inner_iter)
        iterations += it
        history += hist
        X = normalize_embedding(mn, V)
        D = distortion_of(mn, X)
        if D < best_D:
            best_X, best_D = X, D
        sv = np.linalg.svd(V, compute_uv=False)
        saturated = rank < n and sv[-1] > 1e-3 * sv[0]
        if not saturated:
            break
        rank = min(n, int(math.ceil(1.5 * rank)))
        log.info("rank saturated, restarting with rank %d", rank)

    coords = best_X * scale
    G = coords @ coords.T
    check = verify_embedding(m, best_D, gram=G, tol=tol)
    cert = max(check["max_contraction"], check["max_expansion"])
    return EmbedResult(best_D, coords, G, cert, iterations, "sdp-al", 2.0, converged,
                       check["gram_min_eig"], history)


@dataclass
class TrendFit:
    slope: float
    intercept: float
    r2: float


def trend_fit(series) -> TrendFit:
    """Least-squares fit of ``D^2`` against ``log R``."""
    pts = [(float(R), float(D)) for R, D in series]
    if len(pts) < 3:
        raise ValueError("trend fit needs at least 3 points")
    x = np.log([R for R, _ in pts])
    if np.ptp(x) == 0:
        raise ValueError("degenerate series: all radii equal")
    y = np.array([D * D for _, D in pts])
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    ss_res = float(((y - fit) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return TrendFit(float(slope), float(intercept), r2)
