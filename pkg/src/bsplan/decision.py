"""Posterior expected acceptance loss, the Bayes accept/reject rule, and the
threshold curves that carve the (w1, w2) plane into acceptance and rejection
regions for each failure-count table.

The central quantity is a product, over causes, of mixed Gamma-by-uniform
integrals of the reduced likelihood. Each factor is evaluated in the log
domain; under elevated stress the uniform mixing integral reduces to a
difference of regularized incomplete beta functions, with a quadrature
fallback where that representation is invalid or ill-conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .model import ACCEPT, REJECT, ConfigurationError, LossPoly, PriorSpec
from .numerics import Bracket, QuadSettings, find_root_monotone, integrate_1d

__all__ = [
    "FailureCounts",
    "SuffStats",
    "ExponentVector",
    "h1",
    "log_h1",
    "h1_direct_quadrature",
    "posterior_expected_loss",
    "posterior_loss_grid",
    "bayes_decision",
    "threshold_c",
    "threshold_c_raw",
    "threshold_c1",
    "threshold_c1_batch",
    "loss_exponent_table",
]

# Bracket expansion cap for threshold roots; beyond this the root is treated
# as +inf (the posterior loss never crosses c_r).
_ROOT_HI_CAP = 1e12
_ROOT_TOL = 1e-5


@dataclass(frozen=True)
class FailureCounts:
    """Failure counts by (phase, cause): d1[j] before the stress-change
    inspection time, d2[j] after."""

    d1: tuple[int, ...]
    d2: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "d1", tuple(int(v) for v in self.d1))
        object.__setattr__(self, "d2", tuple(int(v) for v in self.d2))
        if len(self.d1) != len(self.d2):
            raise ConfigurationError("d1 and d2 must have equal length")
        if any(v < 0 for v in self.d1 + self.d2):
            raise ConfigurationError("failure counts must be >= 0")

    @property
    def n_risks(self) -> int:
        return len(self.d1)

    @property
    def pre_total(self) -> int:
        return sum(self.d1)

    @property
    def post_total(self) -> int:
        return sum(self.d2)

    @property
    def total(self) -> int:
        return self.pre_total + self.post_total

    def by_cause(self, j: int) -> tuple[int, int]:
        return self.d1[j], self.d2[j]


@dataclass(frozen=True)
class SuffStats:
    """Sufficient reduction of an observed test: accumulated test time before
    (w1) and after (w2) the inspection time, the count table, and the
    stress-elevation indicator delta."""

    w1: float
    w2: float
    counts: FailureCounts
    delta: int

    def __post_init__(self) -> None:
        if self.w1 < 0 or self.w2 < 0:
            raise ConfigurationError("w1 and w2 must be >= 0")
        if self.delta not in (0, 1):
            raise ConfigurationError("delta must be 0 or 1")


@dataclass(frozen=True)
class ExponentVector:
    """Extra per-cause rate exponents selecting a loss-polynomial moment:
    all zeros for the normalizer, a single 1 for linear terms, and a pair
    summing to 2 for quadratic terms."""

    p: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", tuple(int(v) for v in self.p))
        if any(v not in (0, 1, 2) for v in self.p):
            raise ConfigurationError("exponents must be in {0, 1, 2}")
        if sum(self.p) > 2 or sum(1 for v in self.p if v) > 2:
            raise ConfigurationError("at most two nonzero exponents summing to <= 2")


@lru_cache(maxsize=None)
def _gl_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


@lru_cache(maxsize=256)
def loss_exponent_table(loss: LossPoly) -> tuple[np.ndarray, np.ndarray]:
    """Exponent vectors and coefficients for every loss-polynomial moment.

    Row 0 is the all-zero vector (the posterior normalizer, coefficient
    unused); subsequent rows carry the linear and quadratic coefficients.
    """
    j = loss.n_risks
    rows = [np.zeros(j, dtype=int)]
    coefs = [0.0]
    for k, ak in enumerate(loss.a):
        if ak != 0.0:
            row = np.zeros(j, dtype=int)
            row[k] = 1
            rows.append(row)
            coefs.append(ak)
    for i, k, q in loss.quad_pairs():
        row = np.zeros(j, dtype=int)
        row[i] += 1
        row[k] += 1
        rows.append(row)
        coefs.append(q)
    return np.array(rows), np.array(coefs)


def _log_phi_integral_quadrature(e: int, big_a: np.ndarray, q: np.ndarray, l: float) -> np.ndarray:
    """log of int_1^l phi^e (1 + phi*q)^(-A) dphi for flat arrays q, A.

    Gauss-Legendre in phi, evaluated in the log domain. Adequate whenever the
    integrand is not sharply peaked, i.e. for l*q not large.
    """
    nodes, weights = _gl_rule(48)
    half = 0.5 * (l - 1.0)
    phi = 1.0 + half * (nodes + 1.0)
    logg = e * np.log(phi)[None, :] - big_a[:, None] * np.log1p(q[:, None] * phi[None, :])
    return special.logsumexp(logg + np.log(weights * half)[None, :], axis=1)


def _log_phi_integral_adaptive(e: int, big_a: float, q: float, l: float) -> float:
    """Adaptive scalar version of the phi mixing integral, for peaked cases."""
    # Peak of phi^e (1+phi q)^(-A) is at phi = e/((A-e) q) when interior.
    probe = np.geomspace(1.0, l, 64)
    logg = e * np.log(probe) - big_a * np.log1p(q * probe)
    scale = float(logg.max())

    def f(phi):
        return np.exp(e * np.log(phi) - big_a * np.log1p(q * phi) - scale)

    val = integrate_1d(f, Bracket(1.0, l), QuadSettings(rel_tol=1e-10, abs_tol=0.0))
    return scale + math.log(val)


def _log_h1_factor(
    w1: np.ndarray,
    w2: np.ndarray,
    alpha: float,
    beta: float,
    l: float,
    d1j: int,
    d2j: int,
    delta: int,
    p: np.ndarray,
) -> np.ndarray:
    """log of the cause-j factor for every exponent row in p.

    ``w1``/``w2`` are flat arrays of equal length N; ``p`` has shape (P,).
    Returns shape (P, N).
    """
    big_a = alpha + d1j + d2j + p.astype(float)  # (P,)
    if delta == 0:
        return (
            special.gammaln(big_a)[:, None]
            + math.log(l - 1.0)
            - big_a[:, None] * np.log(w1 + w2 + beta)[None, :]
        )

    out = np.empty((len(p), len(w1)))
    logw1b = np.log(w1 + beta)
    zero = w2 == 0.0
    if zero.any():
        e = d2j
        const = math.log((l ** (e + 1) - 1.0) / (e + 1))
        out[:, zero] = (
            special.gammaln(big_a)[:, None] + const - big_a[:, None] * logw1b[None, zero]
        )
    pos = ~zero
    if not pos.any():
        return out

    w1p = w1[pos]
    w2p = w2[pos]
    b = p.astype(float) + d1j + alpha - 1.0  # (P,)
    a_sh = d2j + 1
    eta2 = w2p / (w1p + beta)
    eta1 = eta2 * l
    res = _log_beta_difference(a_sh, b, eta1, eta2)
    for i in range(len(p)):
        bad = ~np.isfinite(res[i])
        if bad.any():
            big_ai = alpha + d1j + d2j + p[i]
            q = eta2[bad]
            peaked = q * l > 50.0
            vals = np.empty(int(bad.sum()))
            if (~peaked).any():
                vals[~peaked] = _log_phi_integral_quadrature(
                    d2j, np.full(int((~peaked).sum()), big_ai), q[~peaked], l
                )
            for k in np.nonzero(peaked)[0]:
                vals[k] = _log_phi_integral_adaptive(d2j, big_ai, float(q[k]), l)
            res[i, bad] = vals
    # Both branches compute log int_1^l phi^d2j (1 + phi*eta2)^(-A) dphi;
    # fold in the Gamma normalizer and the (w1+beta)^(-A) power.
    for i in range(len(p)):
        out[i, pos] = special.gammaln(big_a[i]) - big_a[i] * np.log(w1p + beta) + res[i]
    return out


def _log_beta_difference(a_sh: int, b: np.ndarray, eta1: np.ndarray, eta2: np.ndarray) -> np.ndarray:
    """log of int_1^l phi^(a_sh-1) (1 + phi*eta2)^(-a_sh-b) dphi for every
    shape offset in ``b`` (shape (P,)) over flat arrays eta (shape (N,)).

    The substitution t = phi*eta2 turns the integral into
    eta2^(-a_sh) B(a_sh, b) [I_z1(a_sh, b) - I_z2(a_sh, b)] with z = t/(1+t);
    near z = 1 the complementary identity keeps the difference accurate.
    Entries are NaN where b <= 0 (no beta representation) or where the
    difference is too ill-conditioned to trust, signalling the quadrature
    fallback.
    """
    out = np.full((len(b), len(eta2)), np.nan)
    ok_rows = b > 0.0
    if not ok_rows.any():
        return out
    bv = b[ok_rows][:, None]
    comp = eta2 > 9.0  # z2 = eta2/(1+eta2) > 0.9
    for cols, swap in ((~comp, False), (comp, True)):
        if not cols.any():
            continue
        e1 = eta1[cols][None, :]
        e2 = eta2[cols][None, :]
        if swap:
            i1 = special.betainc(bv, a_sh, 1.0 / (1.0 + e2))
            i2 = special.betainc(bv, a_sh, 1.0 / (1.0 + e1))
        else:
            i1 = special.betainc(a_sh, bv, e1 / (1.0 + e1))
            i2 = special.betainc(a_sh, bv, e2 / (1.0 + e2))
        diff = i1 - i2
        good = (diff > 0) & (diff > 1e-9 * np.maximum(np.maximum(i1, i2), 1e-300))
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(
                good,
                np.log(np.where(good, diff, 1.0))
                + special.betaln(a_sh, bv)
                - a_sh * np.log(e2),
                np.nan,
            )
        out[np.ix_(ok_rows, cols)] = vals
    return out


def _log_h1_grid(
    w1: np.ndarray,
    w2: np.ndarray,
    counts: FailureCounts,
    delta: int,
    priors: PriorSpec,
    p_table: np.ndarray,
) -> np.ndarray:
    """log H1 for every exponent row, over flat (w1, w2) arrays.

    Returns shape (P, N).
    """
    w1 = np.asarray(w1, dtype=float).ravel()
    w2 = np.asarray(w2, dtype=float).ravel()
    total = np.zeros((p_table.shape[0], len(w1)))
    for j in range(priors.n_risks):
        total += _log_h1_factor(
            w1,
            w2,
            priors.alpha[j],
            priors.beta[j],
            priors.l[j],
            counts.d1[j],
            counts.d2[j],
            delta,
            p_table[:, j],
        )
    return total


def log_h1(stats: SuffStats, priors: PriorSpec, p: ExponentVector) -> float:
    """log of the mixed-likelihood product for one exponent vector."""
    if stats.counts.n_risks != priors.n_risks or len(p.p) != priors.n_risks:
        raise ConfigurationError("stats, priors and exponent vector must agree on J")
    table = np.array([p.p])
    return float(
        _log_h1_grid(np.array([stats.w1]), np.array([stats.w2]), stats.counts, stats.delta, priors, table)[0, 0]
    )


def h1(stats: SuffStats, priors: PriorSpec, p: ExponentVector) -> float:
    """Mixed-likelihood product H1; prefer :func:`log_h1` for large exponents."""
    return math.exp(log_h1(stats, priors, p))


def h1_direct_quadrature(stats: SuffStats, priors: PriorSpec, p: ExponentVector) -> float:
    """Independent evaluation of H1 by adaptive quadrature of the defining
    acceleration-factor integral, used to cross-check the closed forms."""
    total = 0.0
    settings = QuadSettings(rel_tol=1e-11, abs_tol=0.0)
    for j in range(priors.n_risks):
        alpha, beta, l = priors.alpha[j], priors.beta[j], priors.l[j]
        d1j, d2j = stats.counts.by_cause(j)
        big_a = alpha + d1j + d2j + p.p[j]
        e = stats.delta * d2j

        def f(phi, big_a=big_a, e=e):
            denom = stats.w1 + (phi**stats.delta) * stats.w2 + beta
            return np.exp(e * np.log(phi) + special.gammaln(big_a) - big_a * np.log(denom))

        total += math.log(integrate_1d(f, Bracket(1.0, l), settings))
    return math.exp(total)


def posterior_loss_grid(
    w1,
    w2,
    counts: FailureCounts,
    delta: int,
    priors: PriorSpec,
    loss: LossPoly,
) -> np.ndarray:
    """Posterior expected acceptance loss on arrays of (w1, w2) points.

    Broadcasts ``w1`` against ``w2``; returns the broadcast shape.
    """
    w1b, w2b = np.broadcast_arrays(np.asarray(w1, dtype=float), np.asarray(w2, dtype=float))
    shape = w1b.shape
    table, coefs = loss_exponent_table(loss)
    logs = _log_h1_grid(w1b.ravel(), w2b.ravel(), counts, delta, priors, table)
    ratios = np.exp(logs[1:] - logs[0][None, :])
    phi = loss.a0 + (coefs[1:, None] * ratios).sum(axis=0)
    return phi.reshape(shape)


def posterior_expected_loss(stats: SuffStats, priors: PriorSpec, loss: LossPoly) -> float:
    """Posterior expectation of the acceptance loss given the observed
    sufficient statistics."""
    return float(posterior_loss_grid(stats.w1, stats.w2, stats.counts, stats.delta, priors, loss))


def bayes_decision(stats: SuffStats, priors: PriorSpec, loss: LossPoly, c_r: float) -> str:
    """Accept iff the posterior expected loss does not exceed the rejection
    cost (the boundary accepts)."""
    return ACCEPT if posterior_expected_loss(stats, priors, loss) <= c_r else REJECT


def _phi_w1(w1: float, counts, delta, priors, loss) -> float:
    return float(posterior_loss_grid(w1, 0.0, counts, delta, priors, loss))


@lru_cache(maxsize=65536)
def threshold_c_raw(
    counts: FailureCounts,
    delta: int,
    priors: PriorSpec,
    loss: LossPoly,
    c_r: float,
) -> float:
    """Unclipped acceptance threshold in w1 at w2 = 0.

    Returns 0 when even w1 = 0 accepts, and +inf when the posterior loss never
    drops to c_r (possible when a0 >= c_r).
    """
    g = lambda w1: _phi_w1(w1, counts, delta, priors, loss) - c_r
    if g(0.0) <= 0.0:
        return 0.0
    if loss.a0 >= c_r:
        return math.inf
    hi = 1.0 + max(priors.beta)
    while g(hi) > 0.0:
        hi *= 4.0
        if hi > _ROOT_HI_CAP:
            return math.inf
    lo = hi / 4.0 if hi > 1.0 + max(priors.beta) else 0.0
    root = find_root_monotone(g, Bracket(lo, hi), tol=_ROOT_TOL)
    return float(root) if root is not None else math.inf


def threshold_c(
    counts: FailureCounts,
    delta: int,
    priors: PriorSpec,
    loss: LossPoly,
    c_r: float,
    n: int,
    tau1: float,
) -> float:
    """Clipped rejection-region boundary in w1: min of the raw threshold and
    the largest attainable w1, n*tau1."""
    return min(threshold_c_raw(counts, delta, priors, loss, c_r), n * tau1)


def threshold_c1(
    w1: float,
    counts: FailureCounts,
    delta: int,
    priors: PriorSpec,
    loss: LossPoly,
    c_r: float,
) -> float:
    """Rejection-region boundary in w2 at a fixed w1.

    Returns 0 when w2 = 0 already accepts and +inf when no amount of test time
    at elevated exposure brings the posterior loss down to c_r.
    """
    out = threshold_c1_batch(np.array([w1]), counts, delta, priors, loss, c_r)
    return float(out[0])


def threshold_c1_batch(
    w1: np.ndarray,
    counts: FailureCounts,
    delta: int,
    priors: PriorSpec,
    loss: LossPoly,
    c_r: float,
) -> np.ndarray:
    """Vectorized :func:`threshold_c1` over an array of w1 values."""
    w1 = np.asarray(w1, dtype=float)
    out = np.zeros_like(w1)
    phi0 = posterior_loss_grid(w1, np.zeros_like(w1), counts, delta, priors, loss)
    active = phi0 > c_r
    if not active.any():
        return out
    if loss.a0 >= c_r:
        out[active] = math.inf
        return out
    w1a = w1[active]
    hi = np.full_like(w1a, 1.0 + max(priors.beta) + float(w1a.max()))
    for _ in range(64):
        phi_hi = posterior_loss_grid(w1a, hi, counts, delta, priors, loss)
        grow = phi_hi > c_r
        if not grow.any():
            break
        hi[grow] *= 4.0
        if hi.max() > _ROOT_HI_CAP:
            break
    diverged = posterior_loss_grid(w1a, hi, counts, delta, priors, loss) > c_r
    roots = np.full_like(w1a, math.inf)
    solve = ~diverged
    if solve.any():
        from scipy.optimize import elementwise

        def g(w2, w1v):
            return posterior_loss_grid(w1v, w2, counts, delta, priors, loss) - c_r

        res = elementwise.find_root(
            g,
            (np.zeros(solve.sum()), hi[solve]),
            args=(w1a[solve],),
            tolerances={"xatol": _ROOT_TOL, "xrtol": 1e-9},
        )
        roots[solve] = res.x
    out[active] = roots
    return out
