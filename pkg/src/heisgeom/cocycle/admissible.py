"""Numerical test of whether ``int_1^inf (theta(t)/t)^2 dt/t`` converges.

Partial integrals are taken at dyadic cut-offs ``2^j``.  The verdict is a
heuristic read of the dyadic increments ``D_j``:

* geometric decay (ratio below 0.9 over the last five doublings) or a power
  law ``D_j ~ j^-beta`` with ``beta`` clearly above 1 means converging;
* increments that do not shrink, or a power law with ``beta`` clearly below 1,
  mean diverging;
* anything else is inconclusive.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
import scipy.integrate

GEOMETRIC_RATIO = 0.9
WINDOW = 5
BETA_MARGIN = 0.05
SAMPLES_PER_DOUBLING = 64


class NonMonotone(ValueError):
    """The sampled function decreases somewhere."""


def theta_family(name: str, alpha: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
    """Named test functions: ``linear``, ``sqrt`` and ``log`` (``t / log^alpha(e + t)``)."""
    if name == "linear":
        return lambda t: t
    if name == "sqrt":
        return np.sqrt
    if name == "log":
        return lambda t: t / np.log(math.e + t) ** alpha
    raise ValueError(f"unknown family {name!r}")


def _fit_power(js: np.ndarray, inc: np.ndarray) -> float:
    """Exponent ``beta`` in ``inc ~ j^-beta`` over the upper half of the doublings."""
    keep = (inc > 0) & (js >= max(2, js[-1] // 2))
    if keep.sum() < 3:
        return math.nan
    slope, _ = np.polyfit(np.log(js[keep]), np.log(inc[keep]), 1)
    return float(-slope)


def admissibility(theta, t_max: float = 1e12, *, t=None, samples_per_doubling: int = SAMPLES_PER_DOUBLING) -> dict:
    """Classify the growth of ``theta`` against the square-integrability criterion.

    ``theta`` is either a callable evaluated on a log-spaced grid or, together
    with ``t``, an array of samples.
    """
    if t is None:
        doublings = int(math.floor(math.log2(t_max)))
        u = np.linspace(0.0, doublings * math.log(2), doublings * samples_per_doubling + 1)
        t = np.exp(u)
        vals = np.asarray(theta(t), dtype=float)
    else:
        t = np.asarray(t, dtype=float)
        vals = np.asarray(theta, dtype=float)
        if t[0] != 1.0:
            raise ValueError("samples must start at t = 1")
        u = np.log(t)
    if np.any(np.diff(vals) < -1e-12 * np.maximum(1.0, np.abs(vals[1:]))):
        raise NonMonotone("theta must be nondecreasing on the samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("sample points must increase")

    # dt/t = du, so the integrand in u is (theta/t)^2
    integrand = (vals / t) ** 2
    cum = scipy.integrate.cumulative_simpson(integrand, x=u, initial=0.0)
    cut_j = np.arange(1, int(math.floor(u[-1] / math.log(2) + 1e-9)) + 1)
    cut_u = cut_j * math.log(2)
    partials = np.interp(cut_u, u, cum)
    inc = np.diff(np.concatenate([[0.0], partials]))

    ratios = inc[1:] / np.where(inc[:-1] > 0, inc[:-1], np.nan)
    tail = ratios[-WINDOW:]
    geometric = bool(len(tail) == WINDOW and np.all(tail < GEOMETRIC_RATIO))
    beta = _fit_power(cut_j, inc)
    flat = bool(len(inc) >= WINDOW and inc[-WINDOW:].min() >= 0.5 * inc[-2 * WINDOW:-WINDOW].max())

    if geometric or (not math.isnan(beta) and beta > 1 + BETA_MARGIN):
        verdict = "converging"
    elif flat or (not math.isnan(beta) and beta < 1 - BETA_MARGIN):
        verdict = "diverging"
    else:
        verdict = "inconclusive"
    return {
        "cutoffs": [float(2.0**j) for j in cut_j],
        "partials": partials.tolist(),
        "increments": inc.tolist(),
        "tail_ratios": [float(r) for r in tail],
        "power_exponent": beta,
        "verdict": verdict,
    }
