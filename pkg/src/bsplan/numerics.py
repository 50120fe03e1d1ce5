"""Scalar numeric kernel: special functions, adaptive quadrature, root finding,
and unimodal minimization.

All routines are pure functions of their inputs and safe for concurrent use.
Integrands passed to :func:`integrate_1d` must accept numpy arrays of abscissae
and return arrays of the same shape; this is what keeps the adaptive
subdivision loop fast enough for the nested risk integrals built on top of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import special

__all__ = [
    "QuadSettings",
    "Bracket",
    "DomainError",
    "ConvergenceError",
    "ModelViolationError",
    "regularized_incomplete_beta",
    "integrate_1d",
    "integrate_semi_infinite",
    "find_root_monotone",
    "expand_bracket_hi",
    "minimize_scalar_unimodal",
]


class DomainError(ValueError):
    """An input lies outside the documented domain of an operation."""


class ModelViolationError(RuntimeError):
    """Sampled function values contradict a structural assumption (e.g. monotonicity)."""


class ConvergenceError(RuntimeError):
    """Subdivision budget exhausted before the tolerance was met.

    Carries the best available estimate and its error bound.
    """

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(f"{message} (best estimate {estimate!r}, error bound {error_bound!r})")
        self.estimate = estimate
        self.error_bound = error_bound


@dataclass(frozen=True)
class QuadSettings:
    """Tolerances and budget for adaptive quadrature."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000

    def __post_init__(self) -> None:
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be > 0")
        if self.abs_tol < 0:
            raise DomainError("abs_tol must be >= 0")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


@dataclass(frozen=True)
class Bracket:
    """An oriented interval lo < hi."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise DomainError(f"invalid bracket: lo={self.lo} must be < hi={self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def regularized_incomplete_beta(eta: float, a: float, b: float):
    """Regularized incomplete beta function I_eta(a, b).

    Accepts scalars or arrays for ``eta``; shape parameters must be positive and
    eta in [0, 1].
    """
    eta_arr = np.asarray(eta, dtype=float)
    if np.any(eta_arr < 0.0) or np.any(eta_arr > 1.0):
        raise DomainError("eta must lie in [0, 1]")
    if not (np.all(np.asarray(a) > 0) and np.all(np.asarray(b) > 0)):
        raise DomainError("shape parameters a, b must be > 0")
    out = special.betainc(a, b, eta_arr)
    if np.isscalar(eta) or eta_arr.ndim == 0:
        return float(out)
    return out


# 15-point Gauss-Kronrod rule on [-1, 1] with the embedded 7-point Gauss rule.
_GK_NODES = np.array(
    [
        -0.991455371120813,
        -0.949107912342759,
        -0.864864423359769,
        -0.741531185599394,
        -0.586087235467691,
        -0.405845151377397,
        -0.207784955007898,
        0.0,
        0.207784955007898,
        0.405845151377397,
        0.586087235467691,
        0.741531185599394,
        0.864864423359769,
        0.949107912342759,
        0.991455371120813,
    ]
)
_GK_WEIGHTS = np.array(
    [
        0.022935322010529,
        0.063092092629979,
        0.104790010322250,
        0.140653259715525,
        0.169004726639267,
        0.190350578064785,
        0.204432940075298,
        0.209482141084728,
        0.204432940075298,
        0.190350578064785,
        0.169004726639267,
        0.140653259715525,
        0.104790010322250,
        0.063092092629979,
        0.022935322010529,
    ]
)
_G_WEIGHTS = np.array(
    [
        0.129484966168870,
        0.279705391489277,
        0.381830050505119,
        0.417959183673469,
        0.381830050505119,
        0.279705391489277,
        0.129484966168870,
    ]
)
_G_IDX = np.arange(1, 15, 2)


def _gk_panels(f: Callable, lo: np.ndarray, hi: np.ndarray):
    """Evaluate the GK15/G7 pair on a batch of panels.

    Returns (kronrod, abs_error) arrays, one entry per panel. ``f`` is called
    once on the flattened node array.
    """
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _GK_NODES[None, :]
    y = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    k = half * (y * _GK_WEIGHTS).sum(axis=1)
    g = half * (y[:, _G_IDX] * _G_WEIGHTS).sum(axis=1)
    err = (200.0 * np.abs(k - g)) ** 1.5
    # The classical QUADPACK error heuristic degenerates when k == g; floor it.
    err = np.maximum(err, np.abs(k) * 1e-15)
    return k, err


def integrate_1d(f: Callable, bracket: Bracket, settings: QuadSettings = QuadSettings()) -> float:
    """Adaptive Gauss-Kronrod integration of a vectorized integrand.

    Bisects the worst panels until the summed error estimate meets
    ``max(abs_tol, rel_tol * |integral|)`` or the subdivision budget runs out,
    in which case a :class:`ConvergenceError` carrying the best estimate is
    raised.
    """
    lo = np.array([bracket.lo], dtype=float)
    hi = np.array([bracket.hi], dtype=float)
    vals, errs = _gk_panels(f, lo, hi)
    n_panels = 1
    while True:
        total = vals.sum()
        err_total = errs.sum()
        if err_total <= max(settings.abs_tol, settings.rel_tol * abs(total)):
            return float(total)
        if n_panels >= settings.max_subdivisions:
            raise ConvergenceError("integrate_1d: subdivision budget exhausted", float(total), float(err_total))
        # Split every panel contributing more than its share of the budget.
        thresh = max(err_total / (2.0 * len(errs)), settings.abs_tol / max(1, 4 * len(errs)))
        bad = errs > thresh
        if not bad.any():
            bad = errs == errs.max()
        keep = ~bad
        mids = 0.5 * (lo[bad] + hi[bad])
        new_lo = np.concatenate([lo[keep], lo[bad], mids])
        new_hi = np.concatenate([hi[keep], mids, hi[bad]])
        new_vals, new_errs = _gk_panels(f, np.concatenate([lo[bad], mids]), np.concatenate([mids, hi[bad]]))
        vals = np.concatenate([vals[keep], new_vals])
        errs = np.concatenate([errs[keep], new_errs])
        lo, hi = new_lo, new_hi
        n_panels += int(bad.sum())


def integrate_semi_infinite(f: Callable, lo: float = 0.0, settings: QuadSettings = QuadSettings()) -> float:
    """Integrate f over [lo, inf) via the substitution x = lo + t/(1-t).

    Suitable for integrands with exponential or fast power-law decay.
    """

    def g(t):
        t = np.clip(t, 0.0, 1.0 - 1e-16)
        one_minus = 1.0 - t
        x = lo + t / one_minus
        return f(x) / one_minus**2

    return integrate_1d(g, Bracket(0.0, 1.0), settings)


def find_root_monotone(
    f: Callable[[float], float],
    bracket: Bracket,
    tol: float = 1e-9,
) -> Optional[float]:
    """Locate the root of a strictly monotone function inside a bracket.

    Returns ``None`` (the outside-bracket sentinel) when f has the same sign at
    both endpoints, leaving clipping decisions to the caller. Raises
    :class:`ModelViolationError` if the midpoint sample contradicts
    monotonicity of the endpoint values.
    """
    flo = f(bracket.lo)
    fhi = f(bracket.hi)
    if flo == 0.0:
        return bracket.lo
    if fhi == 0.0:
        return bracket.hi
    if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
        fmid = f(0.5 * (bracket.lo + bracket.hi))
        lo_side, hi_side = (flo, fhi) if flo < fhi else (fhi, flo)
        if not (lo_side <= fmid <= hi_side) and abs(fmid) > tol:
            raise ModelViolationError(
                "find_root_monotone: midpoint sample inconsistent with monotone endpoints"
            )
        return None
    lo, hi = bracket.lo, bracket.hi
    # Bisection: unconditionally convergent, and the threshold functions this
    # serves are cheap enough per evaluation.
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if math.copysign(1.0, fmid) == math.copysign(1.0, flo):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def expand_bracket_hi(
    f: Callable[[float], float],
    lo: float,
    hi0: float,
    max_hi: float = 1e12,
    factor: float = 4.0,
) -> Optional[float]:
    """Grow the upper end of [lo, hi] geometrically until f changes sign.

    Returns the first hi with sign(f(hi)) != sign(f(lo)), or ``None`` if the
    sign never flips before ``max_hi`` (caller interprets: root at infinity).
    """
    flo = f(lo)
    hi = hi0
    while hi <= max_hi:
        if math.copysign(1.0, f(hi)) != math.copysign(1.0, flo):
            return hi
        hi *= factor
    return None


_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section(f, lo, hi, tol):
    a, b = lo, hi
    c = b - _INV_GOLDEN * (b - a)
    d = a + _INV_GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:  # keep the left interval on ties: smallest-argmin rule
            b, d, fd = d, c, fc
            c = b - _INV_GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_GOLDEN * (b - a)
            fd = f(d)
    x = a if f(a) <= min(fc, fd, f(b)) else (c if fc <= fd else d)
    return x


def minimize_scalar_unimodal(
    f: Callable[[float], float],
    bracket: Bracket,
    tol: float = 1e-6,
    grid_points: int = 25,
) -> tuple[float, float]:
    """Coarse grid scan followed by golden-section refinement.

    Returns ``(argmin, min)``. Ties resolve to the smallest argument, so a
    constant function yields the bracket's lower endpoint.
    """
    if grid_points < 3:
        raise DomainError("grid_points must be >= 3")
    xs = np.linspace(bracket.lo, bracket.hi, grid_points)
    fs = np.array([f(x) for x in xs])
    i = int(np.argmin(fs))  # argmin returns the first (smallest-x) minimizer
    lo = xs[max(i - 1, 0)]
    hi = xs[min(i + 1, grid_points - 1)]
    if hi - lo <= tol:
        return float(xs[i]), float(fs[i])
    x = _golden_section(f, float(lo), float(hi), tol)
    fx = f(x)
    # The grid sample wins if refinement did not strictly improve on it, which
    # also enforces the smallest-argmin tie-break for flat objectives.
    if fs[i] < fx or (fs[i] == fx and xs[i] < x):
        return float(xs[i]), float(fs[i])
    return float(x), float(fx)
