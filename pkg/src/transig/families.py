"""Exponential family catalog.

Each model describes observations whose density tilts a baseline f0 by
exp(theta * x - c(theta)) on the canonical scale, so that the null data have
mean zero and the cumulant function c fully determines the moments after a
change.  The four catalog models cover a normal mean shift, an exponential
rate decrease, a normal variance increase, and the joint normal
(mean, variance) pair in natural coordinates.

All cumulant evaluations accept numpy arrays and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

__all__ = [
    "DomainError",
    "NoSolutionError",
    "DegenerateWindowError",
    "Model",
    "NormalMean",
    "ExpRate",
    "NormalVariance",
    "NormalTwoParam",
    "MODELS",
    "get_model",
    "CanonicalSample",
    "sample_null",
    "sample_alt",
    "solve_theta_for_mean",
    "solve_psi",
    "solve_psi_scale",
    "mle_two_param",
]

# Relative shrink applied to open domain endpoints so logs stay finite.
_MARGIN = 1e-9

_SQRT2 = math.sqrt(2.0)


class DomainError(ValueError):
    """Parameter outside the model's canonical domain."""


class NoSolutionError(ValueError):
    """Requested target is not attained by the model on its domain."""


class DegenerateWindowError(ValueError):
    """Window summary has zero variance, so scale statistics are undefined."""


@dataclass(frozen=True)
class CanonicalSample:
    """Canonical-scale draws plus the parameter that generated them."""

    values: np.ndarray
    source_theta: object


class Model:
    """Base class; subclasses fill in the closed forms."""

    model_id: str = ""
    dim: int = 1
    # open interval of valid canonical parameters (per coordinate for dim 2,
    # where only theta_1 is constrained)
    theta_lo: float = -math.inf
    theta_hi: float = math.inf

    def _check(self, theta):
        th = np.asarray(theta, dtype=float)
        if np.any(th <= self.theta_lo) or np.any(th >= self.theta_hi):
            raise DomainError(
                f"{self.model_id}: theta={theta!r} outside open interval "
                f"({self.theta_lo}, {self.theta_hi})"
            )
        return th

    def cumulant(self, theta):
        raise NotImplementedError

    def cumulant_d1(self, theta):
        raise NotImplementedError

    def cumulant_d2(self, theta):
        raise NotImplementedError

    def null_canonical(self, rng, size):
        """Draw null observations on the canonical scale."""
        raise NotImplementedError

    def alt_canonical(self, rng, size, theta):
        """Draw changed observations on the canonical scale."""
        raise NotImplementedError

    # Range of c' over the domain, used to validate mean inversions.
    def mean_range(self):
        return (-math.inf, math.inf)

    def __repr__(self):  # pragma: no cover
        return f"<Model {self.model_id}>"


class NormalMean(Model):
    """Standard normal baseline, mean shift; c(theta) = theta^2 / 2."""

    model_id = "normal_mean"
    # Unbounded domain; R* reduces to the z statistic sqrt(w) * mean.
    rstar_arg_scale = 0.0

    def cumulant(self, theta):
        th = self._check(theta)
        return 0.5 * th * th

    def cumulant_d1(self, theta):
        return self._check(theta) * 1.0

    def cumulant_d2(self, theta):
        th = self._check(theta)
        return np.ones_like(th)

    def null_canonical(self, rng, size):
        return rng.standard_normal(size)

    def alt_canonical(self, rng, size, theta):
        th = float(self._check(theta))
        return rng.standard_normal(size) + th


class ExpRate(Model):
    """Rate decrease in exponential data.

    Raw observations Y are exponential with unit rate under the null; the
    canonical data are X = Y - 1.  A changed rate lambda < 1 corresponds to
    theta = 1 - lambda, and c(theta) = -theta - ln(1 - theta).
    """

    model_id = "exp_rate"
    theta_hi = 1.0
    rstar_arg_scale = 1.0

    def cumulant(self, theta):
        th = self._check(theta)
        return -th - np.log1p(-th)

    def cumulant_d1(self, theta):
        th = self._check(theta)
        return th / (1.0 - th)

    def cumulant_d2(self, theta):
        th = self._check(theta)
        return (1.0 - th) ** -2

    def mean_range(self):
        return (-1.0, math.inf)

    def null_canonical(self, rng, size):
        return rng.standard_exponential(size) - 1.0

    def alt_canonical(self, rng, size, theta):
        th = float(self._check(theta))
        # X = E / (1 - theta) - 1 has mean c'(theta)
        return rng.standard_exponential(size) / (1.0 - th) - 1.0


class NormalVariance(Model):
    """Variance increase in centered normal data.

    Raw Y ~ N(0, sigma^2); canonical X = (Y^2 / sigma0^2 - 1) / sqrt(2) with
    sigma0 = 1, and theta = (1 - sigma0^2/sigma^2)/sqrt(2).
    """

    model_id = "normal_variance"
    theta_hi = 1.0 / _SQRT2
    rstar_arg_scale = _SQRT2

    def cumulant(self, theta):
        th = self._check(theta)
        return -th / _SQRT2 - 0.5 * np.log1p(-_SQRT2 * th)

    def cumulant_d1(self, theta):
        th = self._check(theta)
        return th / (1.0 - _SQRT2 * th)

    def cumulant_d2(self, theta):
        th = self._check(theta)
        return (1.0 - _SQRT2 * th) ** -2

    def mean_range(self):
        return (-1.0 / _SQRT2, math.inf)

    def null_canonical(self, rng, size):
        z = rng.standard_normal(size)
        return (z * z - 1.0) / _SQRT2

    def alt_canonical(self, rng, size, theta):
        th = float(self._check(theta))
        z = rng.standard_normal(size)
        # sigma^2 / sigma0^2 = 1 / (1 - sqrt(2) theta)
        return (z * z / (1.0 - _SQRT2 * th) - 1.0) / _SQRT2


class NormalTwoParam(Model):
    """Normal with both mean and variance free, in natural coordinates.

    theta = (theta1, theta2) = (-1/(2 sigma^2), mu/sigma^2), sufficient
    statistic t(x) = (x^2, x).  The null point is theta0 = (-1/2, 0) where
    the cumulant vanishes and its gradient equals the null moments (1, 0).
    """

    model_id = "normal_two_param"
    dim = 2
    theta_hi = 0.0  # constraint applies to theta1 only
    theta0 = (-0.5, 0.0)

    def _check(self, theta):
        th = np.asarray(theta, dtype=float)
        if th.shape[-1] != 2:
            raise DomainError("normal_two_param: theta must have two coordinates")
        if np.any(th[..., 0] >= 0.0):
            raise DomainError(f"normal_two_param: theta1 must be negative, got {theta!r}")
        return th

    def cumulant(self, theta):
        th = self._check(theta)
        t1, t2 = th[..., 0], th[..., 1]
        return -t2 * t2 / (4.0 * t1) - 0.5 * np.log(-2.0 * t1)

    def cumulant_d1(self, theta):
        th = self._check(theta)
        t1, t2 = th[..., 0], th[..., 1]
        g1 = t2 * t2 / (4.0 * t1 * t1) - 1.0 / (2.0 * t1)
        g2 = -t2 / (2.0 * t1)
        return np.stack([g1, g2], axis=-1)

    def cumulant_d2(self, theta):
        th = self._check(theta)
        t1, t2 = th[..., 0], th[..., 1]
        h11 = -t2 * t2 / (2.0 * t1 ** 3) + 1.0 / (2.0 * t1 * t1)
        h12 = t2 / (2.0 * t1 * t1)
        h22 = -1.0 / (2.0 * t1)
        row1 = np.stack([h11, h12], axis=-1)
        row2 = np.stack([h12, h22], axis=-1)
        return np.stack([row1, row2], axis=-2)

    @staticmethod
    def theta_from_moments(mu, sigma2):
        if sigma2 <= 0:
            raise DomainError("normal_two_param: sigma^2 must be positive")
        return (-0.5 / sigma2, mu / sigma2)

    @staticmethod
    def moments_from_theta(theta):
        t1, t2 = float(theta[0]), float(theta[1])
        sigma2 = -0.5 / t1
        return (t2 * sigma2, sigma2)

    def null_raw(self, rng, size):
        return rng.standard_normal(size)

    def alt_raw(self, rng, size, theta):
        mu, sigma2 = self.moments_from_theta(self._check(theta))
        return rng.standard_normal(size) * math.sqrt(sigma2) + mu

    def null_canonical(self, rng, size):
        x = self.null_raw(rng, size)
        return np.stack([x * x, x], axis=-1)

    def alt_canonical(self, rng, size, theta):
        x = self.alt_raw(rng, size, theta)
        return np.stack([x * x, x], axis=-1)


MODELS = {
    m.model_id: m
    for m in (NormalMean(), ExpRate(), NormalVariance(), NormalTwoParam())
}


def get_model(model):
    """Resolve a model id (or pass through a Model instance)."""
    if isinstance(model, Model):
        return model
    try:
        return MODELS[model]
    except KeyError:
        raise DomainError(f"unknown model {model!r}; known: {sorted(MODELS)}") from None


def sample_null(model, n, seed):
    """Draw ``n`` null observations on the canonical scale, deterministically."""
    if n < 1:
        raise ValueError("n must be at least 1")
    model = get_model(model)
    rng = np.random.default_rng(seed)
    return CanonicalSample(values=model.null_canonical(rng, n), source_theta=None)


def sample_alt(model, theta, n, seed):
    """Draw ``n`` observations under the changed parameter ``theta``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    model = get_model(model)
    rng = np.random.default_rng(seed)
    return CanonicalSample(values=model.alt_canonical(rng, n, theta), source_theta=theta)


def solve_theta_for_mean(model, m):
    """Invert c': return theta with c'(theta) = m.

    Closed forms exist for every one-parameter catalog model, so no iteration
    is involved; the relative error is at the rounding level.
    """
    model = get_model(model)
    if model.dim != 1:
        raise DomainError("solve_theta_for_mean requires a one-parameter model")
    lo, hi = model.mean_range()
    if not (lo < m < hi):
        raise NoSolutionError(f"{model.model_id}: mean {m} outside attainable range ({lo}, {hi})")
    if model.model_id == "normal_mean":
        return float(m)
    if model.model_id == "exp_rate":
        return m / (1.0 + m)
    if model.model_id == "normal_variance":
        return m / (1.0 + _SQRT2 * m)
    raise NoSolutionError(f"no closed-form mean inversion for {model.model_id}")


def _bracketed_root(f, lo, hi):
    # Bracketing solver; the callers guarantee monotone f with a sign change.
    return optimize.brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)


def solve_psi(model, target):
    """Solve psi(theta) = theta c'(theta) - c(theta) = target for theta > 0.

    psi increases on theta > 0 (its derivative is theta c''(theta)), so the
    positive root is unique.  target = 0 returns 0.
    """
    model = get_model(model)
    if model.dim != 1:
        raise DomainError("solve_psi requires a one-parameter model")
    if target < 0:
        raise ValueError("solve_psi target must be nonnegative")
    if target == 0:
        return 0.0
    if model.model_id == "normal_mean":
        return math.sqrt(2.0 * target)

    def psi_minus(th):
        return th * model.cumulant_d1(th) - model.cumulant(th) - target

    hi_edge = model.theta_hi * (1.0 - _MARGIN)
    # expand the bracket geometrically toward the domain edge
    lo, hi = 0.0, min(0.5, 0.5 * hi_edge)
    while psi_minus(hi) < 0.0:
        nxt = 0.5 * (hi + hi_edge)
        if nxt - hi < 1e-15:
            raise NoSolutionError(
                f"{model.model_id}: psi never reaches {target} on the domain"
            )
        lo, hi = hi, nxt
    root = _bracketed_root(psi_minus, lo, hi)
    return float(root)


def solve_psi_scale(theta01, target, theta02=0.0):
    """Scale-direction analog of solve_psi for the two-parameter normal.

    Solves (theta1 - theta01) c1'(theta) - c(theta) + c(theta0) = target with
    the nuisance coordinate frozen at its null value, returning the branch
    theta1 > theta01.  For the null point theta0 = (-1/2, 0) the left side
    reduces to (theta1 + 1/2)/(-2 theta1) + ln(-2 theta1)/2, increasing on
    (theta01, 0).
    """
    model = MODELS["normal_two_param"]
    if target < 0:
        raise ValueError("solve_psi_scale target must be nonnegative")
    if theta01 >= 0:
        raise DomainError("theta01 must be negative")
    if target == 0:
        return (float(theta01), float(theta02))
    th0 = np.array([theta01, theta02])
    c0 = float(model.cumulant(th0))

    def g(t1):
        th = np.array([t1, theta02])
        c1p = float(model.cumulant_d1(th)[0])
        return (t1 - theta01) * c1p - float(model.cumulant(th)) + c0 - target

    lo = theta01 * (1.0 - _MARGIN)
    hi = theta01 * _MARGIN  # just below zero
    if g(hi) < 0.0:
        raise NoSolutionError(f"target {target} beyond the scale direction's range")
    root = _bracketed_root(g, lo, hi)
    return (float(root), float(theta02))


def mle_two_param(sum_x, sum_x2, w):
    """Closed-form MLE of the two-parameter normal from window sums.

    Parameters
    ----------
    sum_x, sum_x2 : float or ndarray
        Window sums of x and x^2.
    w : int
        Window size, at least 2.  The variance uses divisor w.

    Returns
    -------
    (theta1_hat, theta2_hat, sigma2_hat, xbar)
    """
    if w < 2:
        raise ValueError("w must be at least 2")
    xbar = np.asarray(sum_x, dtype=float) / w
    sigma2 = np.asarray(sum_x2, dtype=float) / w - xbar * xbar
    if np.any(sigma2 <= 0.0):
        raise DegenerateWindowError("window variance is zero; MLE undefined")
    theta1 = -0.5 / sigma2
    theta2 = xbar / sigma2
    if np.ndim(sum_x) == 0:
        return (float(theta1), float(theta2), float(sigma2), float(xbar))
    return (theta1, theta2, sigma2, xbar)
