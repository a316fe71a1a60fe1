"""Closed-form false-detection and detection probability approximations.

Each detection chart has an analytic approximation to its false detection
probability (FDP, the chance of an alarm within L null steps from the
stationary window state) and, for the MA and adjusted signed-root charts,
to the probability of detection (POD) under a sustained signal.  Most
formulas carry an overshoot attenuation factor built from the constant
rho_plus = E[S^2]/(2 E[S]) of a symmetric-difference random walk at its
first strictly positive ladder epoch; this module also estimates that
constant, and the related factor lambda(delta) entering the windowed
CUSUM and Shiryaev-Roberts approximations, by direct simulation.

FDP functions return an :class:`ApproxValue` holding the full saddlepoint
form and the small-threshold simplified form.  Values are linear in L by
construction and are not clamped to [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .families import (
    MODELS,
    DomainError,
    NoSolutionError,
    get_model,
    solve_psi,
    solve_psi_scale,
    solve_theta_for_mean,
)

__all__ = [
    "WeakSignalError",
    "SimulationError",
    "OvershootEstimate",
    "ApproxInputs",
    "ApproxValue",
    "RHO_PLUS",
    "GMA_ATTENUATION_SCALE",
    "estimate_rho_plus",
    "rho_plus_for",
    "nu_factor",
    "lambda_factor",
    "fdp_ma",
    "fdp_ma_closed",
    "fdp_gma",
    "fdp_rstar",
    "fdp_cusum",
    "fdp_sr",
    "fdp_scale_multiparam",
    "fdp_bartlett",
    "pod_ma",
    "pod_rstar",
]


class WeakSignalError(ValueError):
    """Signal too weak for the requested approximation's validity regime."""


class SimulationError(RuntimeError):
    """A supporting Monte Carlo estimate failed its termination guard."""


@dataclass(frozen=True)
class OvershootEstimate:
    """Simulated ladder-overshoot constant with a jackknife standard error."""

    rho_plus: float
    std_error: float
    replications: int
    capped: int = 0


@dataclass(frozen=True)
class ApproxValue:
    """Full and simplified readings of one approximation formula."""

    full: float
    simplified: float


@dataclass(frozen=True)
class ApproxInputs:
    """Arguments shared by the approximation formulas.

    threshold is on the chart's own scale (b, d, c, or b^2).  delta carries
    the signal for POD formulas and the reference value for CUSUM/S-R.
    rho_plus=None selects the per-formula default from RHO_PLUS.
    """

    model_id: str = "normal_mean"
    w: int = 20
    L: int = 20
    threshold: float = 1.0
    delta: float | None = None
    w0: int | None = None
    w1: int | None = None
    rho_plus: float | None = None

    def __post_init__(self):
        if self.w < 2:
            raise ValueError("w must be at least 2")
        if self.L < 0:
            raise ValueError("L must be nonnegative")
        if not self.threshold > 0:
            raise ValueError("threshold must be strictly positive")

    @property
    def h(self):
        """Threshold on the window-mean scale."""
        return self.threshold / math.sqrt(self.w)


# Ladder-overshoot constants of the catalog models' symmetric-difference
# walks (canonical scale; the two-parameter normal projects its sufficient
# statistic on the scale direction, which reproduces the variance walk).
RHO_PLUS = {
    "exp_rate": 1.0,
    "normal_mean": 0.824,
    "normal_variance": 1.167,
    "normal_two_param": 1.167,
}

# rho_plus entering the standardized signed-root and deviance formulas;
# their random walks live on the normal scale regardless of the data model.
_RHO_NORMALIZED = RHO_PLUS["normal_mean"]

# The simplified grouped-MA integrand attenuates as exp(-s * rho * u); the
# full form's per-step scale gives s = 1/sqrt(2), which also tracks the
# simulated chart far better than the alternative constant 2.
GMA_ATTENUATION_SCALE = 1.0 / math.sqrt(2.0)

_LADDER_CAP = 10**6
_LADDER_CAP_FRACTION = 0.01


def _null_increments(model, rng, size, direction):
    """Increments of the symmetric-difference walk, projected if needed.

    The catalog's normal walks admit exact same-law shortcuts that cut the
    draw count: z1 - z2 ~ sqrt(2) z, and (z1^2 - z2^2)/sqrt(2) ~ sqrt(2) a b
    with a, b the independent rotated pair (z1 -+ z2)/sqrt(2).
    """
    if model.dim == 1:
        if model.model_id == "normal_mean":
            out = rng.standard_normal(size)
            out *= math.sqrt(2.0)
            return out
        if model.model_id == "normal_variance":
            out = rng.standard_normal(size)
            out *= rng.standard_normal(size)
            out *= math.sqrt(2.0)
            return out
        out = model.null_canonical(rng, size)
        out -= model.null_canonical(rng, size)
        return out
    d = np.asarray(direction, dtype=float)
    h0 = model.cumulant_d2(np.asarray(model.theta0))
    gamma = d / math.sqrt(float(d @ h0 @ d))
    t = model.null_canonical(rng, size) - model.null_canonical(rng, size)
    return t @ gamma


def estimate_rho_plus(model, theta_dir=None, replications=10**6, seed=0):
    """Estimate rho_plus = E[S^2]/(2 E[S]) at the first positive ladder epoch.

    The walk sums differences of two independent null draws; for the
    two-parameter model the sufficient-statistic difference is projected on
    the unit direction derived from theta_dir (default: the scale
    coordinate).  Walks are advanced in doubling blocks; a walk still
    nonpositive after 10^6 steps is dropped, and more than 1% dropped is a
    simulation error.
    """
    if replications < 10**4:
        raise ValueError("replications must be at least 10^4")
    model = get_model(model)
    if model.dim > 1 and theta_dir is None:
        theta_dir = (1.0, 0.0)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0x6F76)))

    heights = np.empty(replications)
    filled = 0
    capped = 0
    chunk = 1 << 17
    for start in range(0, replications, chunk):
        n = min(chunk, replications - start)
        pos = np.zeros(n)
        alive = np.arange(n)
        steps = 0
        block = 16
        out = np.full(n, np.nan)
        while alive.size and steps < _LADDER_CAP:
            block = min(block, _LADDER_CAP - steps)
            path = _null_increments(model, rng, (alive.size, block), theta_dir)
            np.cumsum(path, axis=1, out=path)
            path += pos[alive, None]
            crossed = path > 0.0
            hit = crossed.any(axis=1)
            first = np.argmax(crossed, axis=1)
            done = alive[hit]
            out[done] = path[hit, first[hit]]
            pos[alive] = path[:, -1]
            alive = alive[~hit]
            steps += block
            block *= 2
        capped += alive.size
        got = np.isfinite(out)
        k = int(got.sum())
        heights[filled : filled + k] = out[got]
        filled += k
    if capped > _LADDER_CAP_FRACTION * replications:
        raise SimulationError(
            f"{capped} of {replications} ladder walks failed to cross within "
            f"{_LADDER_CAP} steps"
        )
    s = heights[:filled]
    n = s.size
    a, b = float(np.sum(s * s)), float(np.sum(s))
    rho = a / (2.0 * b)
    # delete-one jackknife of the ratio
    loo = (a - s * s) / (2.0 * (b - s))
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return OvershootEstimate(rho_plus=rho, std_error=se, replications=n, capped=capped)


def rho_plus_for(model, recompute=False, replications=10**6, seed=0):
    """Cached rho_plus constant for a catalog model; recompute to validate."""
    model = get_model(model)
    if not recompute:
        return RHO_PLUS[model.model_id]
    return estimate_rho_plus(model, replications=replications, seed=seed).rho_plus


def nu_factor(x, rho_plus=_RHO_NORMALIZED, attenuation="exp_rho"):
    """Overshoot attenuation exp(-rho_plus * x); policy 'none' returns 1."""
    if x < 0:
        raise ValueError("attenuation scale must be nonnegative")
    if attenuation == "none":
        return 1.0
    if attenuation == "exp_rho":
        return math.exp(-rho_plus * x)
    raise ValueError(f"unknown attenuation policy {attenuation!r}")


_LAMBDA_CACHE = {}
_LAMBDA_BARRIER = 8.0
_LAMBDA_REPS = 10**5


def lambda_factor(model, delta, replications=_LAMBDA_REPS, seed=5):
    """E[exp(-overshoot)] of the one-sided score walk at a high barrier.

    The walk sums delta * X - c(delta) with X drawn under the changed
    parameter delta, so it drifts upward; the limit is approximated at
    barrier 8 with the overshoot recorded at first crossing.  Results are
    cached per (model, delta, replications, seed).
    """
    model = get_model(model)
    key = (model.model_id, float(delta), int(replications), int(seed))
    if key in _LAMBDA_CACHE:
        return _LAMBDA_CACHE[key]
    c_delta = float(model.cumulant(delta))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0x6C64)))
    pos = np.zeros(replications)
    alive = np.arange(replications)
    over = np.full(replications, np.nan)
    block = 32
    steps = 0
    while alive.size:
        inc = delta * model.alt_canonical(rng, (alive.size, block), delta) - c_delta
        path = np.cumsum(inc, axis=1) + pos[alive, None]
        crossed = path >= _LAMBDA_BARRIER
        hit = crossed.any(axis=1)
        first = np.argmax(crossed, axis=1)
        done = alive[hit]
        over[done] = path[hit, first[hit]] - _LAMBDA_BARRIER
        pos[alive] = path[:, -1]
        alive = alive[~hit]
        steps += block
        if steps > 10**7:  # positive drift makes this unreachable
            raise SimulationError("score walk failed to reach the barrier")
    value = float(np.mean(np.exp(-over)))
    _LAMBDA_CACHE[key] = value
    return value


def _phi(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _resolve_rho(inputs, fallback):
    return fallback if inputs.rho_plus is None else inputs.rho_plus


def fdp_ma(inputs, attenuation="exp_rho"):
    """FDP of the moving-average chart.

    full: saddlepoint form with the tilt solved from c'(theta~) = b/sqrt(w);
    simplified: the small-h normal-density form.  rho_plus defaults to the
    data model's own walk constant.
    """
    m = get_model(inputs.model_id)
    if m.dim != 1:
        raise DomainError("fdp_ma requires a one-parameter model")
    rho = _resolve_rho(inputs, RHO_PLUS[m.model_id])
    b, w, L = inputs.threshold, inputs.w, inputs.L
    h = b / math.sqrt(w)
    theta_s = solve_theta_for_mean(m, h)  # tilt on the window-mean scale
    c2 = float(m.cumulant_d2(theta_s))
    log_num = -math.sqrt(w) * theta_s * b + w * float(m.cumulant(theta_s))
    full = (
        L * b * math.exp(log_num) / (math.sqrt(2.0 * math.pi) * w * math.sqrt(c2))
    ) * nu_factor(theta_s, rho, attenuation)
    c20 = float(m.cumulant_d2(0.0))
    simplified = (
        L * b / (w * math.sqrt(c20)) * _phi(b / math.sqrt(c20))
    ) * nu_factor(b / (math.sqrt(w) * c20), rho, attenuation)
    return ApproxValue(full=full, simplified=simplified)


def fdp_ma_closed(inputs, attenuation="exp_rho"):
    """Model-specialized closed form of the full MA FDP.

    Algebraic rearrangement of the saddlepoint form for the exponential-rate
    and normal-variance models; agrees with fdp_ma(...).full to rounding.
    """
    m = get_model(inputs.model_id)
    rho = _resolve_rho(inputs, RHO_PLUS[m.model_id])
    b, w, L = inputs.threshold, inputs.w, inputs.L
    h = b / math.sqrt(w)
    base = L * b / (math.sqrt(2.0 * math.pi) * w)
    if m.model_id == "exp_rate":
        # tilt h/(1+h); exponent collapses to (1+h)^(w-1) e^(-sqrt(w) b)
        value = base * (1.0 + h) ** (w - 1) * math.exp(-math.sqrt(w) * b)
        return value * nu_factor(h / (1.0 + h), rho, attenuation)
    if m.model_id == "normal_variance":
        r2 = math.sqrt(2.0)
        value = base * (1.0 + r2 * h) ** (w / 2 - 1) * math.exp(-math.sqrt(w) * b / r2)
        return value * nu_factor(h / (1.0 + r2 * h), rho, attenuation)
    raise DomainError(f"no specialized closed form for {m.model_id}")


def fdp_gma(inputs, kappa=None, attenuation="exp_rho"):
    """FDP of the grouped moving-average chart over windows [w0, w1].

    full: quadrature of the tilted integrand over the window range;
    simplified: the closed-form u-integral with attenuation scale kappa
    (default GMA_ATTENUATION_SCALE).  The degenerate range w0 == w1 falls
    back to the single-window formula.
    """
    m = get_model(inputs.model_id)
    if m.dim != 1:
        raise DomainError("fdp_gma requires a one-parameter model")
    w0 = inputs.w0 if inputs.w0 is not None else inputs.w
    w1 = inputs.w1 if inputs.w1 is not None else inputs.w
    if not (1 <= w0 <= w1):
        raise ValueError("need 1 <= w0 <= w1")
    if w0 == w1:
        single = ApproxInputs(
            model_id=inputs.model_id,
            w=w0,
            L=inputs.L,
            threshold=inputs.threshold,
            rho_plus=inputs.rho_plus,
        )
        return fdp_ma(single, attenuation=attenuation)
    rho = _resolve_rho(inputs, RHO_PLUS[m.model_id])
    if kappa is None:
        kappa = GMA_ATTENUATION_SCALE
    b, L = inputs.threshold, inputs.L

    def integrand(w):
        theta_s = solve_theta_for_mean(m, b / math.sqrt(w))
        theta = theta_s * math.sqrt(w)
        val = (
            theta
            * b
            * b
            / (4.0 * w * w)
            * math.exp(-theta * b + w * float(m.cumulant(theta_s)))
            / math.sqrt(float(m.cumulant_d2(theta_s)))
        )
        return val * nu_factor(theta / math.sqrt(2.0 * w), rho, attenuation)

    est, err = integrate.quad(integrand, w0, w1, epsabs=1e-10, epsrel=1e-10, limit=10**4)
    full = L * est

    c20 = float(m.cumulant_d2(0.0))
    lo = b / math.sqrt(w1 * c20)
    hi = b / math.sqrt(w0 * c20)
    s = kappa * rho if attenuation == "exp_rho" else 0.0
    if s > 0.0:
        # antiderivative of (u/2) e^(-s u)
        def anti(u):
            return -(u / s + 1.0 / (s * s)) * math.exp(-s * u) / 2.0

        integral = anti(hi) - anti(lo)
    else:
        integral = (hi * hi - lo * lo) / 4.0
    simplified = L * b / math.sqrt(c20) * _phi(b / math.sqrt(c20)) * integral
    return ApproxValue(full=full, simplified=simplified)


def fdp_rstar(inputs, attenuation="exp_rho"):
    """FDP of the adjusted signed-root chart (one-parameter models).

    full: tilt theta solved from theta c'(theta) - c(theta) = b^2/(2w);
    simplified: (L b / w) phi(b) with attenuation exp(-b rho / sqrt(w)).
    rho_plus defaults to the normalized-scale constant 0.824.
    """
    m = get_model(inputs.model_id)
    if m.dim != 1:
        raise DomainError("fdp_rstar requires a one-parameter model")
    rho = _resolve_rho(inputs, _RHO_NORMALIZED)
    b, w, L = inputs.threshold, inputs.w, inputs.L
    theta = solve_psi(m, b * b / (2.0 * w))
    full = (
        L * theta * float(m.cumulant_d1(theta)) / b * _phi(b)
    ) * nu_factor(theta, rho, attenuation)
    c20 = float(m.cumulant_d2(0.0))
    simplified = (L * b / w) * _phi(b) * nu_factor(
        b / math.sqrt(w * c20), rho, attenuation
    )
    return ApproxValue(full=full, simplified=simplified)


def fdp_cusum(inputs, lambda_replications=_LAMBDA_REPS, lambda_seed=5):
    """FDP of the windowed CUSUM chart: L psi(delta) e^(-d) lambda(delta)^2."""
    m = get_model(inputs.model_id)
    if inputs.delta is None or inputs.delta <= 0:
        raise ValueError("fdp_cusum requires a positive reference delta")
    delta = inputs.delta
    psi = delta * float(m.cumulant_d1(delta)) - float(m.cumulant(delta))
    lam = lambda_factor(m, delta, lambda_replications, lambda_seed)
    value = inputs.L * psi * math.exp(-inputs.threshold) * lam * lam
    return ApproxValue(full=value, simplified=value)


def fdp_sr(inputs, lambda_replications=_LAMBDA_REPS, lambda_seed=5):
    """FDP of the windowed Shiryaev-Roberts chart: L e^(-c) lambda(delta)."""
    m = get_model(inputs.model_id)
    if inputs.delta is None or inputs.delta <= 0:
        raise ValueError("fdp_sr requires a positive reference delta")
    lam = lambda_factor(m, inputs.delta, lambda_replications, lambda_seed)
    value = inputs.L * math.exp(-inputs.threshold) * lam
    return ApproxValue(full=value, simplified=value)


def fdp_scale_multiparam(inputs, theta0=(-0.5, 0.0), attenuation="exp_rho"):
    """FDP of the scale-coordinate signed-root chart (two-parameter normal).

    full: tilt from the scale-direction analog of the psi equation;
    simplified: (L b / w) phi(b) exp(-b rho / sqrt(w c''_11(theta0))).
    rho_plus defaults to the scale-projected walk constant 1.167.
    """
    m = MODELS["normal_two_param"]
    rho = _resolve_rho(inputs, RHO_PLUS["normal_two_param"])
    b, w, L = inputs.threshold, inputs.w, inputs.L
    th0 = np.asarray(theta0, dtype=float)
    theta = np.asarray(solve_psi_scale(th0[0], b * b / (2.0 * w), th0[1]))
    dtheta = float(theta[0] - th0[0])
    dc1 = float(m.cumulant_d1(theta)[0] - m.cumulant_d1(th0)[0])
    full = (L * dtheta * dc1 / b) * _phi(b) * nu_factor(dtheta, rho, attenuation)
    c11 = float(m.cumulant_d2(th0)[0, 0])
    simplified = (L * b / w) * _phi(b) * nu_factor(
        b / math.sqrt(w * c11), rho, attenuation
    )
    return ApproxValue(full=full, simplified=simplified)


def fdp_bartlett(inputs, p=2, theta0=(-0.5, 0.0), attenuation="exp_rho"):
    """FDP of the Bartlett-adjusted deviance chart; threshold is b^2.

    full: the saddlepoint form along the scale direction (p = 2 normal
    only); simplified: the small-tilt form, whose attenuation factor is the
    quantity switched off by attenuation='none'.
    """
    b2 = inputs.threshold
    if b2 <= p:
        raise DomainError("requires threshold b^2 > p")
    rho = _resolve_rho(inputs, _RHO_NORMALIZED)
    b = math.sqrt(b2)
    w, L = inputs.w, inputs.L
    theta_star = 0.5 * (1.0 - p / b2)
    pre = (
        L
        * (b2 / p) ** (p / 2.0)
        * math.exp(p / 2.0)
        / (2.0 * math.sqrt(p * math.pi))
        * math.exp(-b2 / 2.0)
    )
    simplified = (
        pre
        * b2
        / (2.0 * w)
        * nu_factor(b * (1.0 - p / b2) / math.sqrt(2.0 * w), rho, attenuation)
    )
    if p != 2:
        return ApproxValue(full=math.nan, simplified=simplified)
    m = MODELS["normal_two_param"]
    th0 = np.asarray(theta0, dtype=float)
    theta = np.asarray(solve_psi_scale(th0[0], b2 / (2.0 * w), th0[1]))
    dvec = theta - th0
    dc = np.asarray(m.cumulant_d1(theta) - m.cumulant_d1(th0))
    quad = float(dvec @ (m.cumulant_d2(theta) + m.cumulant_d2(th0)) @ dvec)
    full = (
        pre
        * float(dvec @ dc)
        * nu_factor(theta_star * math.sqrt(quad), rho, attenuation)
    )
    return ApproxValue(full=full, simplified=simplified)


def pod_ma(inputs, delta=None, continuity_correction=False, attenuation="exp_rho"):
    """Detection probability of the MA chart under a sustained signal delta.

    Strong signals (c'(delta) >= h) use the normal crossing-time
    approximation; weak signals integrate the local boundary-crossing
    density over u = t/w in [0, L/w].
    """
    m = get_model(inputs.model_id)
    if m.dim != 1:
        raise DomainError("pod_ma requires a one-parameter model")
    if delta is None:
        delta = inputs.delta
    if delta is None or delta <= 0:
        raise ValueError("pod_ma requires a positive signal delta")
    rho = _resolve_rho(inputs, RHO_PLUS[m.model_id])
    b, w, L = inputs.threshold, inputs.w, inputs.L
    h = b / math.sqrt(w)
    c1 = float(m.cumulant_d1(delta))
    c2 = float(m.cumulant_d2(delta))
    if c1 >= h:
        if continuity_correction:
            h = h - rho / w
        return float(norm.cdf((c1 * L - h * w) / math.sqrt(w * c2)))
    c20 = float(m.cumulant_d2(0.0))

    def integrand(u):
        gap = h - min(u, 1.0) * c1
        g = math.sqrt(w) * gap / math.sqrt(c20)
        att = nu_factor(gap / c20, rho, attenuation) if gap > 0 else 1.0
        return g * _phi(g) * att

    upper = L / w
    pts = [1.0] if upper > 1.0 else None
    val, err = integrate.quad(
        integrand, 0.0, upper, points=pts, epsabs=1e-10, epsrel=1e-10, limit=10**4
    )
    return float(val)


def pod_rstar(inputs, delta=None):
    """Detection probability of the adjusted signed-root chart.

    Valid when the signal satisfies delta c'(delta) - c(delta) >= b^2/(2w);
    weaker signals have no supported approximation and raise
    WeakSignalError.
    """
    m = get_model(inputs.model_id)
    if m.dim != 1:
        raise DomainError("pod_rstar requires a one-parameter model")
    if delta is None:
        delta = inputs.delta
    if delta is None or delta <= 0:
        raise ValueError("pod_rstar requires a positive signal delta")
    b, w, L = inputs.threshold, inputs.w, inputs.L
    target = b * b / (2.0 * w)
    psi = delta * float(m.cumulant_d1(delta)) - float(m.cumulant(delta))
    if psi < target:
        raise WeakSignalError(
            "signal below the approximation's validity regime: "
            f"psi(delta)={psi:.6g} < b^2/(2w)={target:.6g}"
        )
    delta_star = solve_psi(m, target)
    t_star = float(m.cumulant_d1(delta_star)) / float(m.cumulant_d1(delta))
    c1 = float(m.cumulant_d1(delta))
    c2 = float(m.cumulant_d2(delta))
    sd = math.sqrt(c2 / (w * c1 * c1))
    return float(norm.cdf((L / w - t_star) / sd))
