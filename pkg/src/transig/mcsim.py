"""Monte Carlo experiment engine.

Estimates alarm probabilities (false detection under the null, detection
under a signal) by replicated simulation, calibrates thresholds to a target
false-detection probability by bisection on common random numbers, and
rebuilds the five benchmark comparison grids together with their published
reference values.

Replications are split into fixed-size batches; batch r always uses the
r-th spawned substream of the scenario seed, so results are bit-identical
regardless of worker count or completion order.  The per-step statistics
are evaluated by the same kernels the streaming charts use, vectorized
across the replications of a batch.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import approx
from .charts import ChartConfig, WindowSums, kernel_for
from .families import DomainError, get_model

__all__ = [
    "CalibrationError",
    "Scenario",
    "ProbabilityEstimate",
    "CalibrationResult",
    "TableArtifact",
    "resolve_workers",
    "run_scenario",
    "run_charts_shared",
    "calibrate_threshold",
    "reproduce_table",
    "TABLE_IDS",
]

_BATCH = 10_000

WORKERS_ENV = "TRANSIG_WORKERS"


class CalibrationError(RuntimeError):
    """Threshold search failed to bracket or converge."""


@dataclass(frozen=True)
class Scenario:
    """One simulation experiment.

    signal is None for the null (false-detection) case, the changed
    canonical parameter for one-parameter models, or a (mu, sigma^2) pair
    for the two-parameter normal.  burn_in defaults to the window width; the
    window is prefilled with that many null observations so monitoring
    starts from the stationary window state, and the change (if any)
    occupies monitored steps 1..L.
    """

    model_id: str
    chart: ChartConfig
    L: int
    replications: int
    seed: int
    signal: object = None
    burn_in: int | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.L < 1:
            raise ValueError("L must be at least 1")
        model = get_model(self.model_id)
        if self.signal is not None:
            if model.dim == 1:
                model.cumulant(float(self.signal))  # domain check
            else:
                try:
                    mu, sigma2 = self.signal
                except TypeError:
                    raise DomainError(
                        "two-parameter signals are (mu, sigma^2) pairs"
                    ) from None
                if sigma2 <= 0:
                    raise DomainError("sigma^2 signal must be positive")
        prefill = self.chart.w if self.burn_in is None else self.burn_in
        if prefill < self.chart.w:
            raise ValueError("burn_in must be at least the window width")


@dataclass(frozen=True)
class ProbabilityEstimate:
    """Binomial point estimate with its standard error."""

    p_hat: float
    std_error: float
    replications: int

    @classmethod
    def from_count(cls, count, n):
        p = count / n
        return cls(p_hat=p, std_error=math.sqrt(p * (1.0 - p) / n), replications=n)


@dataclass(frozen=True)
class CalibrationResult:
    threshold: float
    achieved_fdp: ProbabilityEstimate
    iterations: int


def resolve_workers(workers=None):
    """Worker count: explicit argument, else the environment, else all cores."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _draw_streams(model, signal, n, prefill, L, rng):
    """(n, prefill + L) observations: null prefill, then signal (or null)."""
    if model.dim == 1:
        head = model.null_canonical(rng, (n, prefill))
        if signal is None:
            tail = model.null_canonical(rng, (n, L))
        else:
            tail = model.alt_canonical(rng, (n, L), float(signal))
    else:
        head = model.null_raw(rng, (n, prefill))
        if signal is None:
            tail = model.null_raw(rng, (n, L))
        else:
            mu, sigma2 = signal
            theta = model.theta_from_moments(float(mu), float(sigma2))
            tail = model.alt_raw(rng, (n, L), theta)
    return np.concatenate([head, tail], axis=1)


def _padded_cumsum(a):
    out = np.empty((a.shape[0], a.shape[1] + 1))
    out[:, 0] = 0.0
    np.cumsum(a, axis=1, out=out[:, 1:])
    return out


def _eval_batch(model_id, configs, L, signal, prefill, seed_seq, n, want_max):
    """Run one batch of n replications; per-config alarm counts or maxima."""
    model = get_model(model_id)
    kernels = [kernel_for(c) for c in configs]
    w = configs[0].w
    rng = np.random.default_rng(seed_seq)
    values = _draw_streams(model, signal, n, prefill, L, rng)

    cx = _padded_cumsum(values)
    need_sq = any(k.needs_squares for k in kernels)
    cx2 = _padded_cumsum(values * values) if need_sq else None
    need_suf = any(k.needs_suffix for k in kernels)
    kvec = np.arange(1, w + 1)

    if want_max:
        acc = [np.full(n, -np.inf) for _ in kernels]
    else:
        acc = [np.zeros(n, dtype=bool) for _ in kernels]
    for t in range(1, L + 1):
        e = prefill + t
        sum_x = cx[:, e] - cx[:, e - w]
        sum_x2 = cx2[:, e] - cx2[:, e - w] if need_sq else None
        if need_suf:
            suf_x = (cx[:, e, None] - cx[:, e - w : e])[:, ::-1]
            suf_x2 = (
                (cx2[:, e, None] - cx2[:, e - w : e])[:, ::-1] if need_sq else None
            )
        else:
            suf_x = suf_x2 = None
        sums = WindowSums(
            w=w, sum_x=sum_x, sum_x2=sum_x2, suf_x=suf_x, suf_x2=suf_x2, k=kvec
        )
        for i, kern in enumerate(kernels):
            stat = kern(sums)
            if want_max:
                np.maximum(acc[i], stat, out=acc[i])
            else:
                acc[i] |= stat > configs[i].threshold
    if want_max:
        return acc
    return [int(a.sum()) for a in acc]


def _batch_task(args):
    return _eval_batch(*args)


def _run_batches(model_id, configs, L, signal, prefill, replications, seed, workers, want_max):
    n_batches = (replications + _BATCH - 1) // _BATCH
    sizes = [
        _BATCH if (i + 1) * _BATCH <= replications else replications - i * _BATCH
        for i in range(n_batches)
    ]
    children = np.random.SeedSequence(entropy=seed).spawn(n_batches)
    tasks = [
        (model_id, configs, L, signal, prefill, children[i], sizes[i], want_max)
        for i in range(n_batches)
    ]
    workers = resolve_workers(workers)
    if workers > 1 and n_batches > 1:
        with ProcessPoolExecutor(max_workers=min(workers, n_batches)) as pool:
            results = list(pool.map(_batch_task, tasks))
    else:
        results = [_batch_task(t) for t in tasks]
    if want_max:
        return [np.concatenate([r[i] for r in results]) for i in range(len(configs))]
    return [sum(r[i] for r in results) for i in range(len(configs))]


def run_charts_shared(model_id, configs, L, signal, replications, seed, workers=None, burn_in=None):
    """Alarm probability of several charts on identical replication streams.

    All configs must share one window width.  Returns one
    ProbabilityEstimate per config; estimates across configs are correlated
    by construction (same streams), which is what comparison grids want.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("need at least one chart config")
    w = configs[0].w
    if any(c.w != w for c in configs):
        raise ValueError("shared-stream charts must use one window width")
    # validate via a scenario on the first chart
    Scenario(
        model_id=model_id,
        chart=configs[0],
        L=L,
        replications=replications,
        seed=seed,
        signal=signal,
        burn_in=burn_in,
    )
    prefill = w if burn_in is None else burn_in
    counts = _run_batches(
        model_id, configs, L, signal, prefill, replications, seed, workers, want_max=False
    )
    return [ProbabilityEstimate.from_count(c, replications) for c in counts]


def run_scenario(s, workers=None):
    """Estimate the alarm probability of one scenario."""
    return run_charts_shared(
        s.model_id,
        [s.chart],
        s.L,
        s.signal,
        s.replications,
        s.seed,
        workers=workers,
        burn_in=s.burn_in,
    )[0]


def _max_statistics(s, workers=None):
    prefill = s.chart.w if s.burn_in is None else s.burn_in
    return _run_batches(
        s.model_id,
        [s.chart],
        s.L,
        s.signal,
        prefill,
        s.replications,
        s.seed,
        workers,
        want_max=True,
    )[0]


def _analytic_threshold_guess(s, target):
    """Invert the matching analytic FDP formula for a starting threshold."""
    cid = s.chart.chart_id
    w, L = s.chart.w, s.L

    # b phi(b) peaks near b = 1; invert on the decreasing branch only
    def invert(f, lo=1.0, hi=40.0):
        g = lambda b: f(b) - target
        try:
            if g(lo) < 0 or g(hi) > 0:
                return None
            return optimize.brentq(g, lo, hi, xtol=1e-9)
        except (ValueError, ArithmeticError):
            return None

    try:
        if cid == "ma":
            return invert(
                lambda b: approx.fdp_ma(
                    approx.ApproxInputs(model_id=s.model_id, w=w, L=L, threshold=b)
                ).simplified
            )
        if cid == "gma":
            return invert(
                lambda b: approx.fdp_gma(
                    approx.ApproxInputs(
                        model_id=s.model_id,
                        w=w,
                        L=L,
                        threshold=b,
                        w0=s.chart.w0,
                        w1=s.chart.w1,
                    )
                ).simplified
            )
        if cid in ("rstar_1p", "r_1p", "rstar_var_unknown_mean", "rstar_mean_unknown_var"):
            model_id = s.model_id if get_model(s.model_id).dim == 1 else "normal_mean"
            return invert(
                lambda b: approx.fdp_rstar(
                    approx.ApproxInputs(model_id=model_id, w=w, L=L, threshold=b)
                ).simplified
            )
        if cid in ("cusum_w", "sr_w"):
            m = get_model(s.model_id)
            delta = s.chart.delta
            lam = approx.lambda_factor(m, delta)
            if cid == "cusum_w":
                psi = delta * float(m.cumulant_d1(delta)) - float(m.cumulant(delta))
                return math.log(L * psi * lam * lam / target)
            return math.log(L * lam / target)
        if cid == "bartlett_w2":
            b = invert(
                lambda b: approx.fdp_bartlett(
                    approx.ApproxInputs(model_id=s.model_id, w=w, L=L, threshold=b * b)
                ).simplified,
                lo=math.sqrt(2.0) + 0.05,
            )
            return None if b is None else b * b
    except (DomainError, ValueError, ArithmeticError):
        return None
    return None


def calibrate_threshold(s, target_fdp, tol=0.001, workers=None):
    """Find the threshold whose null alarm probability hits target_fdp.

    Uses one set of common random numbers (the scenario seed), so the
    estimated FDP is exactly nonincreasing in the candidate threshold, and
    bisects until |p_hat - target| <= max(tol, 2 SE(p_hat)).  The starting
    bracket comes from the analytic inverse when one exists, otherwise from
    [0.5, 10] sqrt(ln L).  More than 60 iterations is a CalibrationError.
    """
    if not (0.0 < target_fdp < 0.5):
        raise ValueError("target_fdp must lie in (0, 0.5)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if s.signal is not None:
        raise ValueError("calibration runs under the null; scenario.signal must be None")
    maxima = _max_statistics(s, workers=workers)
    n = maxima.size

    def p_hat(b):
        return float(np.count_nonzero(maxima > b)) / n

    iterations = 0
    guess = _analytic_threshold_guess(s, target_fdp)
    if guess is not None and guess > 0:
        lo, hi = guess / 1.5, guess * 1.5
    else:
        root = math.sqrt(math.log(max(s.L, 2)))
        lo, hi = 0.5 * root, 10.0 * root

    # widen until the bracket straddles the target
    while p_hat(lo) < target_fdp:
        iterations += 1
        lo /= 2.0
        if iterations > 60 or lo < 1e-12:
            raise CalibrationError("no threshold low enough to reach the target FDP")
    while p_hat(hi) > target_fdp:
        iterations += 1
        hi *= 1.5
        if iterations > 60:
            raise CalibrationError("no threshold high enough to reach the target FDP")

    while iterations <= 60:
        iterations += 1
        mid = 0.5 * (lo + hi)
        p = p_hat(mid)
        se = math.sqrt(p * (1.0 - p) / n)
        if abs(p - target_fdp) <= max(tol, 2.0 * se):
            est = ProbabilityEstimate(p_hat=p, std_error=se, replications=n)
            return CalibrationResult(threshold=mid, achieved_fdp=est, iterations=iterations)
        if p > target_fdp:
            lo = mid
        else:
            hi = mid
    raise CalibrationError("bisection failed to converge within 60 iterations")


# ---------------------------------------------------------------------------
# Benchmark grids and their published reference values.

TABLE_IDS = (1, 2, 3, 4, 5)

_SQRT2 = math.sqrt(2.0)


def _t1_signal(ratio):
    # changed rate lambda = 1/ratio; canonical tilt theta = 1 - lambda
    return None if ratio == 1.0 else 1.0 - 1.0 / ratio


def _t2_signal(sigma2):
    return None if sigma2 == 1.0 else (1.0 - 1.0 / sigma2) / _SQRT2


def _charts_t1():
    return [
        ("MA", ChartConfig("ma", w=20, threshold=3.10)),
        ("R", ChartConfig("r_1p", w=20, threshold=2.55, model_id="exp_rate")),
        ("R*", ChartConfig("rstar_1p", w=20, threshold=2.67, model_id="exp_rate")),
        ("CUSUM", ChartConfig("cusum_w", w=20, threshold=4.48, model_id="exp_rate", delta=0.5)),
        ("S-R", ChartConfig("sr_w", w=20, threshold=6.14, model_id="exp_rate", delta=0.5)),
    ]


def _charts_t2():
    d = 0.5 / _SQRT2  # reference tilt for sigma^2 = 2
    return [
        ("MA", ChartConfig("ma", w=20, threshold=3.30)),
        ("R", ChartConfig("r_1p", w=20, threshold=2.55, model_id="normal_variance")),
        ("R*", ChartConfig("rstar_1p", w=20, threshold=2.65, model_id="normal_variance")),
        ("CUSUM", ChartConfig("cusum_w", w=20, threshold=3.96, model_id="normal_variance", delta=d)),
        ("S-R", ChartConfig("sr_w", w=20, threshold=5.84, model_id="normal_variance", delta=d)),
    ]


def _charts_t3():
    return [
        ("W", ChartConfig("wald_var_unknown_mean", w=20, threshold=3.05)),
        ("R", ChartConfig("r_var_unknown_mean", w=20, threshold=2.40)),
        ("R*", ChartConfig("rstar_var_unknown_mean", w=20, threshold=2.65)),
        ("CUSUM", ChartConfig("cusum_profile", w=20, threshold=3.58, kind="variance", sigma1_sq=2.0)),
        ("S-R", ChartConfig("sr_profile", w=20, threshold=5.45, kind="variance", sigma1_sq=2.0)),
    ]


def _charts_t4():
    return [
        ("t", ChartConfig("tstat", w=20, threshold=3.10)),
        ("R", ChartConfig("r_mean_unknown_var", w=20, threshold=2.77)),
        ("R*", ChartConfig("rstar_mean_unknown_var", w=20, threshold=2.67)),
        ("CUSUM", ChartConfig("cusum_profile", w=20, threshold=4.26, kind="mean", delta=0.5)),
        ("S-R", ChartConfig("sr_profile", w=20, threshold=6.7, kind="mean", delta=0.5)),
    ]


def _charts_t5():
    return [("W*", ChartConfig("bartlett_w2", w=20, threshold=9.3))]


_T1_LEVELS = (1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0)

PRINTED_TABLE1 = {
    (20, 1.00): (0.0199, 0.0191, 0.0200, 0.0196, 0.0200),
    (20, 1.25): (0.1127, 0.1224, 0.1112, 0.1174, 0.1296),
    (20, 1.50): (0.3359, 0.3465, 0.3274, 0.3380, 0.3481),
    (20, 1.75): (0.5864, 0.6038, 0.5849, 0.5899, 0.5962),
    (20, 2.00): (0.7780, 0.7949, 0.7826, 0.7786, 0.7720),
    (20, 2.25): (0.8993, 0.8966, 0.8994, 0.8888, 0.8931),
    (20, 2.50): (0.9539, 0.9580, 0.9516, 0.9496, 0.9481),
    (20, 2.75): (0.9774, 0.9811, 0.9788, 0.9768, 0.9784),
    (20, 3.00): (0.9895, 0.9916, 0.9904, 0.9886, 0.9905),
    (30, 1.00): (0.0302, 0.0298, 0.0282, 0.0282, 0.0289),
    (30, 1.25): (0.1952, 0.2111, 0.1923, 0.1825, 0.1926),
    (30, 1.50): (0.5136, 0.5338, 0.5161, 0.4901, 0.5015),
    (30, 1.75): (0.7929, 0.8000, 0.7843, 0.7560, 0.7659),
    (30, 2.00): (0.9249, 0.9324, 0.9227, 0.9070, 0.9122),
    (30, 2.25): (0.9780, 0.9752, 0.9759, 0.9703, 0.9691),
    (30, 2.50): (0.9937, 0.9954, 0.9921, 0.9903, 0.9926),
    (30, 2.75): (0.9991, 0.9979, 0.9987, 0.9965, 0.9976),
    (30, 3.00): (0.9995, 0.9992, 0.9996, 0.9989, 0.9994),
    (10, 1.00): (0.0124, 0.0134, 0.0126, 0.0140, 0.0126),
    (10, 1.25): (0.0403, 0.0412, 0.0341, 0.0509, 0.0540),
    (10, 1.50): (0.0980, 0.0973, 0.0969, 0.1406, 0.1525),
    (10, 1.75): (0.1895, 0.1870, 0.1816, 0.2783, 0.2792),
    (10, 2.00): (0.2983, 0.3188, 0.3039, 0.4283, 0.4398),
    (10, 2.25): (0.4370, 0.4469, 0.4245, 0.5632, 0.5914),
    (10, 2.50): (0.5471, 0.5613, 0.5463, 0.6865, 0.6898),
    (10, 2.75): (0.6517, 0.6592, 0.6498, 0.7818, 0.7821),
    (10, 3.00): (0.7309, 0.7353, 0.7345, 0.8386, 0.8426),
}

PRINTED_TABLE2 = {
    (20, 1.00): (0.0191, 0.0189, 0.0188, 0.0192, 0.0190),
    (20, 1.25): (0.0713, 0.0737, 0.0751, 0.0797, 0.0826),
    (20, 1.50): (0.1812, 0.1875, 0.1846, 0.1946, 0.2070),
    (20, 1.75): (0.3362, 0.3436, 0.3403, 0.3617, 0.3712),
    (20, 2.00): (0.4932, 0.4995, 0.4983, 0.5120, 0.5165),
    (20, 2.25): (0.6306, 0.6355, 0.6359, 0.6517, 0.6545),
    (20, 2.50): (0.7395, 0.7445, 0.7436, 0.7449, 0.7629),
    (20, 2.75): (0.8178, 0.8239, 0.8205, 0.8251, 0.8408),
    (20, 3.00): (0.8739, 0.8761, 0.8767, 0.8758, 0.8802),
    (30, 1.00): (0.0284, 0.0257, 0.0258, 0.0296, 0.0264),
    (30, 1.25): (0.1205, 0.1290, 0.1176, 0.1253, 0.1270),
    (30, 1.50): (0.3053, 0.3137, 0.3109, 0.3108, 0.3078),
    (30, 1.75): (0.5171, 0.5190, 0.5162, 0.5134, 0.5205),
    (30, 2.00): (0.6943, 0.6953, 0.6934, 0.6892, 0.6953),
    (30, 2.25): (0.8168, 0.8199, 0.8195, 0.8154, 0.8202),
    (30, 2.50): (0.8927, 0.9039, 0.8955, 0.8927, 0.8915),
    (30, 2.75): (0.9402, 0.9418, 0.9423, 0.9370, 0.9398),
    (30, 3.00): (0.9712, 0.9633, 0.9650, 0.9685, 0.9643),
    (10, 1.00): (0.0109, 0.0126, 0.0120, 0.0126, 0.0128),
    (10, 1.25): (0.0250, 0.0253, 0.0270, 0.0375, 0.0364),
    (10, 1.50): (0.0595, 0.0560, 0.0593, 0.0824, 0.0896),
    (10, 1.75): (0.0976, 0.1015, 0.1075, 0.1522, 0.1571),
    (10, 2.00): (0.1676, 0.1680, 0.1707, 0.2343, 0.2440),
    (10, 2.25): (0.2274, 0.2451, 0.2415, 0.3249, 0.3336),
    (10, 2.50): (0.3093, 0.3145, 0.3137, 0.4055, 0.4210),
    (10, 2.75): (0.3846, 0.3920, 0.3997, 0.4899, 0.5033),
    (10, 3.00): (0.4501, 0.4763, 0.4591, 0.5566, 0.5665),
}

PRINTED_TABLE3 = {
    1.00: (0.0202, 0.0218, 0.0207, 0.0204, 0.0206),
    1.25: (0.0722, 0.0731, 0.0721, 0.0798, 0.0795),
    1.50: (0.1833, 0.1861, 0.1810, 0.1939, 0.1986),
    1.75: (0.3327, 0.3433, 0.3287, 0.3430, 0.3462),
    2.00: (0.4797, 0.4819, 0.4808, 0.4937, 0.5064),
    2.25: (0.6118, 0.6192, 0.6183, 0.6264, 0.6333),
    2.50: (0.7335, 0.7311, 0.7259, 0.7333, 0.7350),
    2.75: (0.8157, 0.8100, 0.8101, 0.8138, 0.8149),
    3.00: (0.8659, 0.8673, 0.8601, 0.8671, 0.8688),
}

PRINTED_TABLE4 = {
    0.00: (0.0234, 0.0246, 0.0237, 0.0233, 0.0240),
    0.25: (0.0969, 0.1099, 0.1088, 0.0965, 0.1033),
    0.50: (0.3546, 0.3576, 0.3647, 0.3156, 0.3361),
    0.75: (0.7103, 0.7159, 0.7210, 0.6400, 0.6686),
    1.00: (0.9338, 0.9402, 0.9378, 0.8816, 0.8968),
    1.25: (0.9933, 0.9931, 0.9939, 0.9766, 0.9798),
    1.50: (0.9999, 0.9996, 0.9997, 0.9973, 0.9978),
    1.75: (1.0000, 1.0000, 1.0000, 0.9998, 0.9998),
    2.00: (1.0000, 1.0000, 1.0000, 1.0000, 1.0000),
}

_T5_SIGMA = (1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0)
_T5_MU = (0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)

PRINTED_TABLE5 = {
    0.00: (0.0807, 0.1926, 0.3270, 0.4638, 0.5862, 0.6873, 0.7699, 0.8261, 0.8746),
    0.25: (0.0986, 0.2165, 0.3514, 0.4893, 0.6087, 0.7066, 0.7796, 0.8414, 0.8816),
    0.50: (0.1661, 0.3041, 0.4456, 0.5735, 0.6784, 0.7619, 0.8239, 0.8700, 0.9076),
    0.75: (0.2833, 0.4405, 0.5802, 0.6870, 0.7720, 0.8319, 0.8786, 0.9132, 0.9355),
    1.00: (0.4617, 0.6141, 0.7221, 0.8104, 0.8645, 0.9030, 0.9291, 0.9487, 0.9638),
    1.25: (0.6519, 0.7782, 0.8530, 0.9029, 0.9323, 0.9537, 0.9661, 0.9762, 0.9823),
    1.50: (0.8216, 0.8982, 0.9364, 0.9591, 0.9736, 0.9823, 0.9867, 0.9908, 0.9932),
    1.75: (0.9363, 0.9660, 0.9805, 0.9876, 0.9913, 0.9947, 0.9961, 0.9970, 0.9979),
    2.00: (0.9847, 0.9926, 0.9958, 0.9973, 0.9982, 0.9988, 0.9987, 0.9992, 0.9993),
}


@dataclass(frozen=True)
class TableRow:
    block: object  # L for tables 1-2, None otherwise
    signal_label: str
    estimates: tuple
    printed: tuple
    deviations: tuple


@dataclass(frozen=True)
class TableArtifact:
    """Reproduced comparison grid plus deviations from the published values."""

    table_id: int
    column_labels: tuple
    rows: tuple
    replications: int
    seed: int

    def to_csv(self, path, sep=","):
        lines = ["table,block,signal,chart,p_hat,std_error,printed,abs_dev".replace(",", sep)]
        for row in self.rows:
            for label, est, printed, dev in zip(
                self.column_labels, row.estimates, row.printed, row.deviations
            ):
                lines.append(
                    sep.join(
                        [
                            str(self.table_id),
                            "" if row.block is None else str(row.block),
                            row.signal_label,
                            label,
                            f"{est.p_hat:.6g}",
                            f"{est.std_error:.6g}",
                            f"{printed:.6g}",
                            f"{dev:.6g}",
                        ]
                    )
                )
        text = "\n".join(lines) + "\n"
        with open(path, "w") as fh:
            fh.write(text)
        return path

    def to_text(self):
        width = 18
        out = []
        header = f"{'signal':>10} " + " ".join(f"{c:>{width}}" for c in self.column_labels)
        block = object()
        for row in self.rows:
            if row.block != block:
                block = row.block
                if block is not None:
                    out.append(f"-- L = {block}")
                out.append(header)
            cells = [
                f"{e.p_hat:.4f} ({p:.4f} d={d:.4f})"
                for e, p, d in zip(row.estimates, row.printed, row.deviations)
            ]
            out.append(f"{row.signal_label:>10} " + " ".join(f"{c:>{width}}" for c in cells))
        return "\n".join(out) + "\n"

    def max_abs_deviation(self):
        return max(max(r.deviations) for r in self.rows)


def _table_plan(table_id):
    if table_id == 1:
        cells = [
            (L, f"{r:.2f}", _t1_signal(r), PRINTED_TABLE1[(L, r)])
            for L in (20, 30, 10)
            for r in _T1_LEVELS
        ]
        return "exp_rate", _charts_t1(), cells
    if table_id == 2:
        cells = [
            (L, f"{v:.2f}", _t2_signal(v), PRINTED_TABLE2[(L, v)])
            for L in (20, 30, 10)
            for v in _T1_LEVELS
        ]
        return "normal_variance", _charts_t2(), cells
    if table_id == 3:
        cells = [
            (None, f"{v:.2f}", None if v == 1.0 else (0.0, v), PRINTED_TABLE3[v])
            for v in _T1_LEVELS
        ]
        return "normal_two_param", _charts_t3(), cells
    if table_id == 4:
        cells = [
            (None, f"{mu:.2f}", None if mu == 0.0 else (mu, 1.0), PRINTED_TABLE4[mu])
            for mu in _T5_MU
        ]
        return "normal_two_param", _charts_t4(), cells
    if table_id == 5:
        cells = [
            (
                None,
                f"{mu:.2f}",
                [None if (mu == 0.0 and v == 1.0) else (mu, v) for v in _T5_SIGMA],
                PRINTED_TABLE5[mu],
            )
            for mu in _T5_MU
        ]
        return "normal_two_param", _charts_t5(), cells
    raise ValueError(f"table_id must be one of {TABLE_IDS}")


def reproduce_table(table_id, replications=10**5, seed=0, workers=None):
    """Re-estimate one published comparison grid.

    Charts within a row share replication streams; every row reports the
    estimate, the published value, and their absolute deviation.  Table 5
    lays the grid out as mean rows against variance columns for the single
    deviance chart; the others are signal rows against chart columns.
    L is fixed at 20 where the published grid fixes it; tables 1 and 2
    repeat their rows for L = 20, 30, 10.
    """
    model_id, charts, cells = _table_plan(table_id)
    labels = tuple(lbl for lbl, _ in charts)
    configs = [cfg for _, cfg in charts]
    rows = []
    if table_id == 5:
        labels = tuple(f"s2={v:g}" for v in _T5_SIGMA)
        for block, sig_label, signals, printed in cells:
            ests = []
            for i, signal in enumerate(signals):
                ests.append(
                    run_charts_shared(
                        model_id,
                        configs,
                        20,
                        signal,
                        replications,
                        seed + 1000 * i,
                        workers=workers,
                    )[0]
                )
            devs = tuple(abs(e.p_hat - p) for e, p in zip(ests, printed))
            rows.append(
                TableRow(
                    block=block,
                    signal_label=sig_label,
                    estimates=tuple(ests),
                    printed=printed,
                    deviations=devs,
                )
            )
    else:
        for block, sig_label, signal, printed in cells:
            L = block if block is not None else 20
            ests = run_charts_shared(
                model_id, configs, L, signal, replications, seed, workers=workers
            )
            devs = tuple(abs(e.p_hat - p) for e, p in zip(ests, printed))
            rows.append(
                TableRow(
                    block=block,
                    signal_label=sig_label,
                    estimates=tuple(ests),
                    printed=printed,
                    deviations=devs,
                )
            )
    return TableArtifact(
        table_id=table_id,
        column_labels=labels,
        rows=tuple(rows),
        replications=replications,
        seed=seed,
    )
