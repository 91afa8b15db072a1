"""Word metric and balls of the discrete Heisenberg group by breadth-first search.

The Cayley graph is taken with respect to ``S = {a, a^-1, b, b^-1}`` acting on
the right, so ``d_W(x, y) = |x^-1 y|`` is left-invariant.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .group import GroupElement

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 8 * 2**30
BUDGET_ENV = "HEIS_MEM_BUDGET"

# packed key layout: x in bits 47..62, y in bits 31..46, z in bits 0..30
_XY_OFF = 2**15
_Z_OFF = 2**30
_Y_SHIFT = 31
_X_SHIFT = 47


class BudgetExceeded(MemoryError):
    """A BFS would exceed the configured memory budget."""


def memory_budget() -> int:
    """Budget in bytes; ``HEIS_MEM_BUDGET`` accepts plain bytes or a K/M/G suffix."""
    raw = os.environ.get(BUDGET_ENV)
    if not raw:
        return DEFAULT_BUDGET
    raw = raw.strip().upper().removesuffix("B").removesuffix("I")
    scale = {"K": 2**10, "M": 2**20, "G": 2**30}.get(raw[-1:], 1)
    digits = raw[:-1] if scale != 1 else raw
    return int(float(digits) * scale)


def estimate_ball_size(R: int) -> int:
    """Upper estimate of |B_R| (exact sizes grow like 31/72 R^4)."""
    return int(0.45 * R**4 + 4 * R**3 + 8 * R**2 + 8 * R + 1)


def estimate_ball_bytes(R: int) -> int:
    # table (key + coords + dist) plus rolling-layer temporaries
    sphere = max(1, estimate_ball_size(R) - estimate_ball_size(R - 1)) if R > 0 else 1
    return 48 * estimate_ball_size(R) + 160 * sphere + 2**20


def _packable(x, y, z) -> bool:
    if len(x) == 0:
        return True
    return (
        np.abs(x).max() < _XY_OFF
        and np.abs(y).max() < _XY_OFF
        and np.abs(z).max() < _Z_OFF
    )


def pack(x, y, z) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    z = np.asarray(z, dtype=np.int64)
    return ((x + _XY_OFF) << _X_SHIFT) | ((y + _XY_OFF) << _Y_SHIFT) | (z + _Z_OFF)


def unpack(keys: np.ndarray):
    keys = np.asarray(keys, dtype=np.int64)
    x = (keys >> _X_SHIFT) - _XY_OFF
    y = ((keys >> _Y_SHIFT) & (2**16 - 1)) - _XY_OFF
    z = (keys & (2**31 - 1)) - _Z_OFF
    return x, y, z


def _neighbors(x, y, z):
    """Right multiplication of every element by a, a^-1, b, b^-1."""
    nx = np.concatenate([x + 1, x - 1, x, x])
    ny = np.concatenate([y, y, y + 1, y - 1])
    nz = np.concatenate([z, z, z + x, z - x])
    return nx, ny, nz


def _in_sorted(values: np.ndarray, sorted_ref: np.ndarray) -> np.ndarray:
    if len(sorted_ref) == 0:
        return np.zeros(len(values), dtype=bool)
    pos = np.searchsorted(sorted_ref, values)
    pos = np.minimum(pos, len(sorted_ref) - 1)
    return sorted_ref[pos] == values


def _unique_rows(x, y, z):
    rows = np.unique(np.stack([x, y, z], axis=1), axis=0)
    return rows[:, 0].copy(), rows[:, 1].copy(), rows[:, 2].copy()


def _setdiff_rows(x, y, z, *others):
    """Rows of (x, y, z) absent from every other row set (fallback path)."""
    drop: set[tuple[int, int, int]] = set()
    for ox, oy, oz in others:
        drop.update(zip(ox.tolist(), oy.tolist(), oz.tolist()))
    keep = np.array([t not in drop for t in zip(x.tolist(), y.tolist(), z.tolist())], dtype=bool)
    return x[keep], y[keep], z[keep]


@dataclass(frozen=True, eq=False)
class ElementTable:
    """Finite set of group elements with their word distance to ``e``.

    Rows are sorted lexicographically by ``(dist, x, y, z)``; ``radius`` bounds
    every distance in the table.
    """

    radius: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    dist: np.ndarray
    _keys: np.ndarray = field(repr=False)
    _order: np.ndarray = field(repr=False)

    @classmethod
    def from_rows(cls, radius, x, y, z, dist):
        x, y, z, dist = (np.asarray(v, dtype=np.int64) for v in (x, y, z, dist))
        order = np.lexsort((z, y, x, dist))
        x, y, z, dist = x[order], y[order], z[order], dist[order]
        keys = pack(x, y, z)
        key_order = np.argsort(keys, kind="stable")
        for arr in (x, y, z, dist):
            arr.flags.writeable = False
        return cls(int(radius), x, y, z, dist, keys[key_order], key_order)

    def __len__(self) -> int:
        return len(self.dist)

    def __contains__(self, g: GroupElement) -> bool:
        return self.distance(g) is not None

    def index(self, x, y, z) -> np.ndarray:
        """Row index of each element, or -1 when it lies outside the ball."""
        x = np.atleast_1d(np.asarray(x, dtype=np.int64))
        y = np.atleast_1d(np.asarray(y, dtype=np.int64))
        z = np.atleast_1d(np.asarray(z, dtype=np.int64))
        out = np.full(len(x), -1, dtype=np.int64)
        lim = self.radius + 1
        ok = (np.abs(x) <= lim) & (np.abs(y) <= lim) & (np.abs(z) <= lim * lim + 1)
        if not ok.any():
            return out
        keys = pack(x[ok], y[ok], z[ok])
        pos = np.minimum(np.searchsorted(self._keys, keys), len(self._keys) - 1)
        hit = self._keys[pos] == keys
        idx = np.where(hit, self._order[pos], -1)
        out[ok] = idx
        return out

    def lookup(self, x, y, z) -> np.ndarray:
        """Distance of each element to ``e``, or -1 when outside the ball."""
        idx = self.index(x, y, z)
        return np.where(idx >= 0, self.dist[np.maximum(idx, 0)], -1)

    def distance(self, g: GroupElement) -> int | None:
        d = int(self.lookup([g.x], [g.y], [g.z])[0])
        return None if d < 0 else d

    def elements(self) -> list[GroupElement]:
        return [GroupElement(int(a), int(b), int(c)) for a, b, c in zip(self.x, self.y, self.z)]

    def layer_sizes(self) -> np.ndarray:
        return np.bincount(self.dist, minlength=self.radius + 1)

    def subset(self, mask) -> "ElementTable":
        mask = np.asarray(mask, dtype=bool)
        return ElementTable.from_rows(self.radius, self.x[mask], self.y[mask], self.z[mask], self.dist[mask])

    def to_csv(self, fh=None) -> str | None:
        """Write ``x,y,z,dist`` rows; returns the text when ``fh`` is None."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "z", "dist"])
        w.writerows(zip(self.x.tolist(), self.y.tolist(), self.z.tolist(), self.dist.tolist()))
        return buf.getvalue() if fh is None else None


class Ball(ElementTable):
    """``B_R = {g : d_W(e, g) <= R}`` with exact distances."""

    def restrict(self, r: int) -> "Ball":
        if r > self.radius:
            raise ValueError(f"cannot restrict a ball of radius {self.radius} to radius {r}")
        n = int(np.searchsorted(self.dist, r, side="right"))
        return Ball.from_rows(r, self.x[:n], self.y[:n], self.z[:n], self.dist[:n])


def _bfs(R: int) -> Ball:
    budget = memory_budget()
    need = estimate_ball_bytes(R)
    if need > budget:
        raise BudgetExceeded(
            f"ball({R}) needs about {need / 2**30:.2f} GiB, budget is {budget / 2**30:.2f} GiB"
        )
    zero = np.zeros(1, dtype=np.int64)
    layers = [(zero, zero.copy(), zero.copy())]
    prev = (np.empty(0, np.int64),) * 3
    cur = layers[0]
    for _ in range(R):
        nx, ny, nz = _neighbors(*cur)
        if _packable(nx, ny, nz):
            cand = np.unique(pack(nx, ny, nz))
            ck = pack(*cur)
            pk = pack(*prev)
            ck.sort()
            pk.sort()
            new = cand[~(_in_sorted(cand, ck) | _in_sorted(cand, pk))]
            nxt = unpack(new)
        else:
            nxt = _setdiff_rows(*_unique_rows(nx, ny, nz), cur, prev)
        prev, cur = cur, nxt
        layers.append(cur)
    x = np.concatenate([l[0] for l in layers])
    y = np.concatenate([l[1] for l in layers])
    z = np.concatenate([l[2] for l in layers])
    dist = np.concatenate([np.full(len(l[0]), r, dtype=np.int64) for r, l in enumerate(layers)])
    return Ball.from_rows(R, x, y, z, dist)


_cache: dict[int, Ball] = {}


def ball(R: int) -> Ball:
    """Exact ball of radius ``R`` around the identity."""
    R = int(R)
    if R < 0:
        raise ValueError("radius must be nonnegative")
    if R in _cache:
        return _cache[R]
    bigger = [r for r in _cache if r > R]
    if bigger:
        b = _cache[min(bigger)].restrict(R)
    else:
        log.debug("BFS for ball(%d)", R)
        b = _bfs(R)
    if len(_cache) >= 6:
        _cache.pop(min(_cache))
    _cache[R] = b
    return b


def clear_cache() -> None:
    _cache.clear()


BIDIRECTIONAL_THRESHOLD = 30


def dist(g: GroupElement, maxR: int) -> int | None:
    """``d_W(e, g)`` when it is at most ``maxR``, else ``None``.

    ``d_W(x, y)`` for arbitrary pairs is ``dist(inv(x) * y, maxR)``.
    """
    maxR = int(maxR)
    if maxR < 0:
        raise ValueError("maxR must be nonnegative")
    if maxR <= BIDIRECTIONAL_THRESHOLD:
        return ball(maxR).distance(g)
    d = _meet_in_middle(ball((maxR + 1) // 2), np.array([g.x]), np.array([g.y]), np.array([g.z]))[0]
    return None if d < 0 or d > maxR else int(d)


def _meet_in_middle(half: Ball, gx, gy, gz) -> np.ndarray:
    """Distances ``|g|`` for each target, via ``min_m |m| + |m^-1 g|`` over ``m`` in ``half``.

    Exact whenever ``|g| <= 2 * half.radius``; -1 otherwise.
    """
    mx, my, mz, md = half.x, half.y, half.z, half.dist
    # m^-1 g = (-mx + gx, -my + gy, mx*my - mz + gz - mx*gy)
    base_z = mx * my - mz
    out = np.empty(len(gx), dtype=np.int64)
    for t, (tx, ty, tz) in enumerate(zip(np.asarray(gx).tolist(), np.asarray(gy).tolist(), np.asarray(gz).tolist())):
        rest = half.lookup(tx - mx, ty - my, base_z + tz - mx * ty)
        ok = rest >= 0
        out[t] = int((md[ok] + rest[ok]).min()) if ok.any() else -1
    return out


def pairwise_distances(xs, ys, zs, max_norm: int) -> np.ndarray:
    """Dense matrix ``d_W(g_i, g_j)``; ``max_norm`` bounds every ``|g_i|``."""
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    zs = np.asarray(zs, dtype=np.int64)
    n = len(xs)
    table = ball(2 * int(max_norm))
    D = np.zeros((n, n), dtype=np.int64)
    ix, iy, iz = -xs, -ys, xs * ys - zs
    for i in range(n):
        # (g_i)^-1 g_j
        d = table.lookup(ix[i] + xs, iy[i] + ys, iz[i] + zs + ix[i] * ys)
        if (d < 0).any():
            raise ValueError(f"some |g_i| exceeds max_norm={max_norm}")
        D[i] = d
    return D


@dataclass
class GrowthReport:
    radii: list[int]
    sizes: list[int]
    slope: float


def growth_report(Rmin: int, Rmax: int) -> GrowthReport:
    """|B_R| for ``Rmin <= R <= Rmax`` and the least-squares slope of log|B_R| on log R."""
    if not (1 <= Rmin < Rmax):
        raise ValueError("need 1 <= Rmin < Rmax")
    b = ball(Rmax)
    cum = np.cumsum(b.layer_sizes())
    radii = list(range(Rmin, Rmax + 1))
    sizes = [int(cum[r]) for r in radii]
    slope = float(np.polyfit(np.log(radii), np.log(sizes), 1)[0])
    return GrowthReport(radii, sizes, slope)


def central_profile(K: int) -> list[int]:
    """``[d_W(c^k, e) for k in 1..K]``."""
    K = int(K)
    if K < 1:
        raise ValueError("K must be positive")
    maxR = 4 * math.isqrt(K - 1) + 4 + 2
    ks = np.arange(1, K + 1, dtype=np.int64)
    zeros = np.zeros(K, dtype=np.int64)
    if maxR <= BIDIRECTIONAL_THRESHOLD:
        d = ball(maxR).lookup(zeros, zeros, ks)
    else:
        d = _meet_in_middle(ball((maxR + 1) // 2), zeros, zeros, ks)
    if (d < 0).any():
        raise RuntimeError("central profile search radius too small")
    return [int(v) for v in d]
