"""Streaming detection charts over a sliding window.

Every chart consumes one observation per step, keeps the last ``w`` values in
a ring buffer, and emits a statistic together with an alarm flag once the
window is full.  The statistic kernels are written against window summaries
(window sums, and suffix sums where the chart scans partial windows), so the
same code serves the streaming path here and the vectorized replication
engine in :mod:`transig.mcsim`.

Chart identifiers
-----------------
ma, gma, rstar_1p, cusum_w, sr_w, rstar_var_unknown_mean,
rstar_mean_unknown_var, tstat, cusum_profile, sr_profile, bartlett_w2,
plus the companion statistics r_1p, wald_var_unknown_mean,
r_var_unknown_mean and r_mean_unknown_var used as reference columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .families import (
    DegenerateWindowError,
    DomainError,
    NoSolutionError,
    get_model,
)

__all__ = [
    "CHART_IDS",
    "WindowState",
    "ChartStep",
    "ChartConfig",
    "WindowSums",
    "ChartKernel",
    "kernel_for",
    "Chart",
    "TwoSidedChart",
    "make_chart",
    "ma_step",
    "gma_step",
    "rstar_1p_step",
    "cusum_w_step",
    "sr_w_step",
    "rstar_var_unknown_mean_step",
    "rstar_mean_unknown_var_step",
    "tstat_step",
    "cusum_profile_step",
    "sr_profile_step",
    "bartlett_w2_step",
]

CHART_IDS = (
    "ma",
    "gma",
    "rstar_1p",
    "cusum_w",
    "sr_w",
    "rstar_var_unknown_mean",
    "rstar_mean_unknown_var",
    "tstat",
    "cusum_profile",
    "sr_profile",
    "bartlett_w2",
    # companion columns, not part of the core alarm set
    "r_1p",
    "wald_var_unknown_mean",
    "r_var_unknown_mean",
    "r_mean_unknown_var",
)

# Charts whose statistic needs the window's second moment.
_NEEDS_SQUARES = {
    "rstar_var_unknown_mean",
    "rstar_mean_unknown_var",
    "tstat",
    "cusum_profile",
    "sr_profile",
    "bartlett_w2",
    "wald_var_unknown_mean",
    "r_var_unknown_mean",
    "r_mean_unknown_var",
}

# Charts that scan suffixes of the window rather than only the full window.
_NEEDS_SUFFIX = {"gma", "cusum_w", "sr_w", "cusum_profile", "sr_profile"}

# Signed statistics for which a two-sided wrapper is meaningful.
_SIGNED = {
    "ma",
    "rstar_1p",
    "r_1p",
    "tstat",
    "rstar_mean_unknown_var",
    "r_mean_unknown_var",
    "rstar_var_unknown_mean",
    "r_var_unknown_mean",
    "wald_var_unknown_mean",
}

# When |R| falls below this, the 1/R correction is replaced by the limit 0.
_R_GUARD = 1e-8

# Running sums are recomputed from the buffer this often to stop float drift.
_REFRESH_EVERY = 4096


def _h(a):
    """2(a - log1p(a)) / a^2, the curvature ratio in the signed-root forms.

    Defined for a > -1, positive, equal to 1 at a = 0.  A Taylor branch keeps
    full precision through the removable singularity.
    """
    a = np.asarray(a, dtype=float)
    small = np.abs(a) < 1e-3
    safe = np.where(small, 0.5, a)
    direct = 2.0 * (safe - np.log1p(safe)) / (safe * safe)
    series = 1.0 + a * (-2.0 / 3.0 + a * (0.5 + a * (-0.4 + a * (1.0 / 3.0))))
    return np.where(small, series, direct)


def _k(t):
    """log1p(t) / t for t >= 0, with the same Taylor treatment near 0."""
    t = np.asarray(t, dtype=float)
    small = t < 1e-3
    safe = np.where(small, 0.5, t)
    direct = np.log1p(safe) / safe
    series = 1.0 + t * (-0.5 + t * (1.0 / 3.0 + t * (-0.25 + t * 0.2)))
    return np.where(small, series, direct)


def _guarded_rstar(r, log_u_over_r):
    """R + ln(U/R)/R with the removable singularity at R = 0 set to 0."""
    r = np.asarray(r, dtype=float)
    tiny = np.abs(r) < _R_GUARD
    safe = np.where(tiny, 1.0, r)
    return np.where(tiny, 0.0, r + log_u_over_r / safe)


class WindowState:
    """Ring buffer of the last ``capacity`` observations with running sums.

    push() is O(1).  The running first and second moments are refreshed from
    the buffer every few thousand pushes so they stay exact over arbitrarily
    long streams.
    """

    __slots__ = ("capacity", "count", "sum_x", "sum_x2", "_buf", "_head", "_stale")

    def __init__(self, capacity):
        capacity = int(capacity)
        if capacity < 1:
            raise ValueError("window capacity must be at least 1")
        self.capacity = capacity
        self.count = 0
        self.sum_x = 0.0
        self.sum_x2 = 0.0
        self._buf = np.zeros(capacity)
        self._head = 0  # next write slot
        self._stale = 0

    @property
    def warm(self):
        return self.count >= self.capacity

    def push(self, x):
        x = float(x)
        if self.count >= self.capacity:
            old = self._buf[self._head]
            self.sum_x -= old
            self.sum_x2 -= old * old
        self._buf[self._head] = x
        self._head = (self._head + 1) % self.capacity
        self.count += 1
        self.sum_x += x
        self.sum_x2 += x * x
        self._stale += 1
        if self._stale >= _REFRESH_EVERY:
            self.refresh()

    def refresh(self):
        """Recompute the running sums exactly from the buffer."""
        vals = self.ordered()
        self.sum_x = float(vals.sum())
        self.sum_x2 = float((vals * vals).sum())
        self._stale = 0

    def ordered(self):
        """Buffer contents, oldest first."""
        if self.count < self.capacity:
            return self._buf[: self.count].copy()
        return np.concatenate([self._buf[self._head :], self._buf[: self._head]])

    def reset(self):
        self.count = 0
        self.sum_x = 0.0
        self.sum_x2 = 0.0
        self._buf[:] = 0.0
        self._head = 0
        self._stale = 0


@dataclass(frozen=True)
class ChartStep:
    """One emission from a chart: time index, statistic, alarm flag.

    ``statistic`` is NaN while the window is still filling (``warming``).
    ``direction`` is set by the two-sided wrapper only.
    """

    t: int
    statistic: float
    alarm: bool
    direction: str | None = None
    warming: bool = False


@dataclass(frozen=True)
class WindowSums:
    """Window summaries handed to a statistic kernel.

    suf_x[..., j] is the sum of the most recent j+1 observations (suffix
    length k = j+1, ascending); suf_x2 likewise for squares.  Suffix arrays
    are populated only for kernels that declare needs_suffix.
    """

    w: int
    sum_x: object
    sum_x2: object = None
    suf_x: object = None
    suf_x2: object = None
    k: object = None


@dataclass(frozen=True)
class ChartKernel:
    """Vectorized statistic function plus the inputs it needs."""

    chart_id: str
    fn: object
    needs_suffix: bool
    needs_squares: bool

    def __call__(self, sums):
        return self.fn(sums)


@dataclass(frozen=True)
class ChartConfig:
    """Everything needed to instantiate a chart.

    threshold is on the statistic's own scale: b for the standardized
    charts, d for windowed CUSUM, c for windowed S-R, b^2 for bartlett_w2.
    delta is the reference signal for CUSUM/S-R variants (the mean-shift
    kind of the profile charts reuses it); sigma1_sq is the reference
    variance for the profile variance kind.
    """

    chart_id: str
    w: int = 0
    threshold: float = math.inf
    model_id: str | None = None
    delta: float | None = None
    w0: int | None = None
    w1: int | None = None
    kind: str | None = None
    sigma0_sq: float = 1.0
    sigma1_sq: float | None = None
    per_suffix: bool = False
    two_sided: bool = False

    def __post_init__(self):
        if self.chart_id not in CHART_IDS:
            raise ValueError(f"unknown chart_id {self.chart_id!r}; known: {CHART_IDS}")
        if self.chart_id == "gma":
            w0 = self.w0 if self.w0 is not None else self.w
            w1 = self.w1 if self.w1 is not None else self.w
            if not (1 <= w0 <= w1):
                raise ValueError(f"gma needs 1 <= w0 <= w1, got ({w0}, {w1})")
            object.__setattr__(self, "w0", int(w0))
            object.__setattr__(self, "w1", int(w1))
            object.__setattr__(self, "w", int(w1))
        elif self.w < 1:
            raise ValueError("w must be at least 1")
        if self.chart_id in _NEEDS_SQUARES and self.w < 2:
            raise ValueError(f"{self.chart_id} needs w >= 2")
        if self.threshold is not None and not self.threshold > 0:
            raise ValueError("threshold must be strictly positive")
        if self.chart_id in ("rstar_1p", "r_1p", "cusum_w", "sr_w"):
            if self.model_id is None:
                raise ValueError(f"{self.chart_id} requires model_id")
            model = get_model(self.model_id)
            if model.dim != 1:
                raise ValueError(f"{self.chart_id} requires a one-parameter model")
        if self.chart_id in ("cusum_w", "sr_w"):
            if self.delta is None or self.delta <= 0:
                raise ValueError(f"{self.chart_id} requires delta > 0")
            get_model(self.model_id).cumulant(self.delta)  # domain check
        if self.chart_id in ("cusum_profile", "sr_profile"):
            if self.kind not in ("variance", "mean"):
                raise ValueError("profile charts need kind='variance' or kind='mean'")
            if self.kind == "variance":
                if self.sigma1_sq is None or self.sigma1_sq <= 0:
                    raise ValueError("variance kind requires sigma1_sq > 0")
                if self.sigma1_sq == self.sigma0_sq:
                    raise ValueError("sigma1_sq must differ from sigma0_sq")
                if self.sigma0_sq <= 0:
                    raise ValueError("sigma0_sq must be positive")
            else:
                if self.delta is None or self.delta == 0:
                    raise ValueError("mean kind requires nonzero delta")
        if self.two_sided and self.chart_id not in _SIGNED:
            raise ValueError(f"{self.chart_id} is one-sided by construction")


def _var_from(sums):
    xbar = np.asarray(sums.sum_x, dtype=float) / sums.w
    sigma2 = np.asarray(sums.sum_x2, dtype=float) / sums.w - xbar * xbar
    if np.any(sigma2 <= 0.0):
        raise DegenerateWindowError("window variance is zero")
    return xbar, sigma2


def kernel_for(config):
    """Build the vectorized statistic kernel for a config.

    The returned kernel maps a WindowSums (scalar entries for the streaming
    path, per-replication arrays for the batch engine) to statistics of the
    same leading shape.
    """
    cid = config.chart_id
    w = config.w

    if cid == "ma":
        sqw = math.sqrt(w)

        def fn(s):
            return np.asarray(s.sum_x, dtype=float) / sqw

    elif cid == "gma":
        j0 = config.w0 - 1
        inv = 1.0 / np.sqrt(np.arange(config.w0, config.w1 + 1, dtype=float))

        def fn(s):
            return np.max(np.asarray(s.suf_x)[..., j0:] * inv, axis=-1)

    elif cid in ("rstar_1p", "r_1p"):
        kappa = get_model(config.model_id).rstar_arg_scale
        corrected = cid == "rstar_1p"

        def fn(s):
            xbar = np.asarray(s.sum_x, dtype=float) / w
            a = kappa * xbar
            if kappa != 0.0 and np.any(a <= -1.0):
                raise NoSolutionError("window mean outside the attainable range")
            h = _h(a)
            r = xbar * np.sqrt(w * h)
            if not corrected:
                return r
            return _guarded_rstar(r, -0.5 * np.log(h))

    elif cid in ("cusum_w", "sr_w"):
        delta = float(config.delta)
        c_delta = float(get_model(config.model_id).cumulant(delta))
        take_max = cid == "cusum_w"

        def fn(s):
            l = delta * np.asarray(s.suf_x) - np.asarray(s.k) * c_delta
            if take_max:
                return np.max(l, axis=-1)
            return logsumexp(l, axis=-1)

    elif cid == "wald_var_unknown_mean":
        scale = math.sqrt(w / 2.0)

        def fn(s):
            _, sigma2 = _var_from(s)
            return scale * (sigma2 - 1.0)

    elif cid in ("rstar_var_unknown_mean", "r_var_unknown_mean"):
        corrected = cid == "rstar_var_unknown_mean"

        def fn(s):
            _, sigma2 = _var_from(s)
            e = sigma2 - 1.0
            h = _h(e)
            r = e * np.sqrt(w * h / 2.0)
            if not corrected:
                return r
            return _guarded_rstar(r, 0.5 * (np.log1p(e) - np.log(h)))

    elif cid in ("rstar_mean_unknown_var", "r_mean_unknown_var"):
        corrected = cid == "rstar_mean_unknown_var"

        def fn(s):
            xbar, sigma2 = _var_from(s)
            t = xbar * xbar / sigma2
            kr = _k(t)
            r = xbar / np.sqrt(sigma2) * np.sqrt(w * kr)
            if not corrected:
                return r
            return _guarded_rstar(r, -np.log1p(t) - 0.5 * np.log(kr))

    elif cid == "tstat":
        sqw = math.sqrt(w)

        def fn(s):
            xbar, sigma2 = _var_from(s)
            return sqw * xbar / np.sqrt(sigma2)

    elif cid == "bartlett_w2":
        adj = 1.0 + 3.0 / (4.0 * w)

        def fn(s):
            xbar, sigma2 = _var_from(s)
            return w * (xbar * xbar + sigma2 - 1.0 - np.log(sigma2)) / adj

    elif cid in ("cusum_profile", "sr_profile"):
        take_max = cid == "cusum_profile"
        if config.kind == "variance":
            s0, s1 = config.sigma0_sq, config.sigma1_sq
            coef = 1.0 / s0 - 1.0 / s1
            log_ratio = math.log(s0 / s1)
            per_suffix = config.per_suffix

            def fn(s):
                k = np.asarray(s.k, dtype=float)
                if per_suffix:
                    # suffix-local variance, about the suffix mean
                    suf_mean = np.asarray(s.suf_x) / k
                    ks2 = np.asarray(s.suf_x2) - k * suf_mean * suf_mean
                else:
                    # variance about the whole-window mean
                    xbar = np.asarray(s.sum_x, dtype=float) / s.w
                    xb = xbar[..., None]
                    ks2 = np.asarray(s.suf_x2) - 2.0 * xb * np.asarray(s.suf_x) + k * xb * xb
                l = 0.5 * (coef * ks2 + k * log_ratio)
                if take_max:
                    return np.max(l, axis=-1)
                return logsumexp(l, axis=-1)

        else:  # mean kind
            delta = float(config.delta)
            per_suffix = config.per_suffix

            def fn(s):
                k = np.asarray(s.k, dtype=float)
                num = delta * np.asarray(s.suf_x) - k * (delta * delta / 2.0)
                if per_suffix:
                    # suffix-local variance needs k >= 2
                    suf_mean = np.asarray(s.suf_x) / k
                    ks2 = (np.asarray(s.suf_x2) - k * suf_mean * suf_mean) / k
                    if np.any(ks2[..., 1:] <= 0.0):
                        raise DegenerateWindowError("suffix variance is zero")
                    l = num[..., 1:] / ks2[..., 1:]
                else:
                    _, sigma2 = _var_from(s)
                    l = num / np.asarray(sigma2)[..., None]
                if take_max:
                    return np.max(l, axis=-1)
                return logsumexp(l, axis=-1)

    else:  # pragma: no cover
        raise ValueError(f"no kernel for chart_id {cid!r}")

    return ChartKernel(
        chart_id=cid,
        fn=fn,
        needs_suffix=cid in _NEEDS_SUFFIX,
        needs_squares=cid in _NEEDS_SQUARES,
    )


def _sums_from_state(state, needs_suffix):
    if needs_suffix:
        rev = state.ordered()[::-1]
        suf_x = np.cumsum(rev)
        suf_x2 = np.cumsum(rev * rev)
        return WindowSums(
            w=state.capacity,
            sum_x=suf_x[-1],
            sum_x2=suf_x2[-1],
            suf_x=suf_x,
            suf_x2=suf_x2,
            k=np.arange(1, state.capacity + 1),
        )
    return WindowSums(w=state.capacity, sum_x=state.sum_x, sum_x2=state.sum_x2)


class Chart:
    """Streaming one-sided chart: push one observation, get one ChartStep."""

    def __init__(self, config):
        self.config = config
        self.kernel = kernel_for(config)
        self.state = WindowState(config.w)
        self._t = 0

    def reset(self):
        self.state.reset()
        self._t = 0

    def step(self, x):
        self._t += 1
        self.state.push(x)
        if not self.state.warm:
            return ChartStep(t=self._t, statistic=math.nan, alarm=False, warming=True)
        stat = float(self.kernel(_sums_from_state(self.state, self.kernel.needs_suffix)))
        return ChartStep(t=self._t, statistic=stat, alarm=stat > self.config.threshold)

    def run(self, xs):
        """Convenience: step through an iterable, returning all ChartSteps."""
        return [self.step(x) for x in xs]


class TwoSidedChart(Chart):
    """Signed chart monitored in both directions with thresholds +-b."""

    def step(self, x):
        base = super().step(x)
        if base.warming:
            return base
        b = self.config.threshold
        if base.statistic > b:
            return ChartStep(t=base.t, statistic=base.statistic, alarm=True, direction="up")
        if base.statistic < -b:
            return ChartStep(t=base.t, statistic=base.statistic, alarm=True, direction="down")
        return ChartStep(t=base.t, statistic=base.statistic, alarm=False)


def make_chart(config):
    """Instantiate the streaming chart described by a ChartConfig."""
    if config.two_sided:
        return TwoSidedChart(config)
    return Chart(config)


# ---------------------------------------------------------------------------
# Single-step operations on an externally held WindowState.  Each pushes x,
# then evaluates its statistic; the threshold default of +inf means "just
# compute, never alarm".

def _emit(state, t, kernel, threshold, two_sided=False):
    if not state.warm:
        return ChartStep(t=t, statistic=math.nan, alarm=False, warming=True)
    stat = float(kernel(_sums_from_state(state, kernel.needs_suffix)))
    if two_sided:
        if stat > threshold:
            return ChartStep(t=t, statistic=stat, alarm=True, direction="up")
        if stat < -threshold:
            return ChartStep(t=t, statistic=stat, alarm=True, direction="down")
        return ChartStep(t=t, statistic=stat, alarm=False)
    return ChartStep(t=t, statistic=stat, alarm=stat > threshold)


def _one(state, x, config, threshold, two_sided=False):
    state.push(x)
    return _emit(state, state.count, kernel_for(config), threshold, two_sided)


def ma_step(state, x, threshold=math.inf):
    """Moving-average chart: statistic sqrt(w) * window mean."""
    return _one(state, x, ChartConfig("ma", w=state.capacity), threshold)


def gma_step(state, x, w0, threshold=math.inf):
    """Grouped moving average: max of sqrt(k) * suffix mean over w0 <= k <= w1.

    The state's capacity plays the role of w1.
    """
    cfg = ChartConfig("gma", w0=w0, w1=state.capacity)
    return _one(state, x, cfg, threshold)


def rstar_1p_step(state, x, model, threshold=math.inf, two_sided=False):
    """Adjusted signed-root statistic for a one-parameter catalog model."""
    cfg = ChartConfig("rstar_1p", w=state.capacity, model_id=get_model(model).model_id)
    return _one(state, x, cfg, threshold, two_sided)


def cusum_w_step(state, x, model, delta, threshold=math.inf):
    """Window-restricted CUSUM with reference signal delta."""
    cfg = ChartConfig(
        "cusum_w", w=state.capacity, model_id=get_model(model).model_id, delta=delta
    )
    return _one(state, x, cfg, threshold)


def sr_w_step(state, x, model, delta, threshold=math.inf):
    """Window-restricted Shiryaev-Roberts statistic (log scale)."""
    cfg = ChartConfig(
        "sr_w", w=state.capacity, model_id=get_model(model).model_id, delta=delta
    )
    return _one(state, x, cfg, threshold)


def rstar_var_unknown_mean_step(state, x, threshold=math.inf, two_sided=False):
    """Adjusted signed root for a variance change, mean treated as nuisance."""
    cfg = ChartConfig("rstar_var_unknown_mean", w=state.capacity)
    return _one(state, x, cfg, threshold, two_sided)


def rstar_mean_unknown_var_step(state, x, threshold=math.inf, two_sided=False):
    """Adjusted signed root for a mean change, variance treated as nuisance."""
    cfg = ChartConfig("rstar_mean_unknown_var", w=state.capacity)
    return _one(state, x, cfg, threshold, two_sided)


def tstat_step(state, x, threshold=math.inf, two_sided=False):
    """Plain studentized mean sqrt(w) * xbar / sigma_hat."""
    cfg = ChartConfig("tstat", w=state.capacity)
    return _one(state, x, cfg, threshold, two_sided)


def cusum_profile_step(
    state,
    x,
    kind,
    sigma1_sq=None,
    delta=None,
    sigma0_sq=1.0,
    per_suffix=False,
    threshold=math.inf,
):
    """Profile-likelihood CUSUM with a nuisance parameter estimated in-window.

    kind='variance': scans suffix variances about the whole-window mean
    against the reference pair (sigma0_sq, sigma1_sq); set per_suffix=True
    for the variant that re-centers each suffix at its own mean.
    kind='mean': scans suffix mean shifts of size delta studentized by the
    pooled window variance (per_suffix=True studentizes each suffix by its
    own variance and starts at suffix length 2).
    """
    cfg = ChartConfig(
        "cusum_profile",
        w=state.capacity,
        kind=kind,
        sigma0_sq=sigma0_sq,
        sigma1_sq=sigma1_sq,
        delta=delta,
        per_suffix=per_suffix,
    )
    return _one(state, x, cfg, threshold)


def sr_profile_step(
    state,
    x,
    kind,
    sigma1_sq=None,
    delta=None,
    sigma0_sq=1.0,
    per_suffix=False,
    threshold=math.inf,
):
    """Log-sum-exp companion of cusum_profile_step over the same suffix scores."""
    cfg = ChartConfig(
        "sr_profile",
        w=state.capacity,
        kind=kind,
        sigma0_sq=sigma0_sq,
        sigma1_sq=sigma1_sq,
        delta=delta,
        per_suffix=per_suffix,
    )
    return _one(state, x, cfg, threshold)


def bartlett_w2_step(state, x, threshold=math.inf):
    """Bartlett-adjusted two-parameter deviance chart; threshold is b^2."""
    cfg = ChartConfig("bartlett_w2", w=state.capacity)
    return _one(state, x, cfg, threshold)
