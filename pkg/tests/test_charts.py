"""Streaming charts: frozen window values, oracle equality, invariants."""

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_series
from transig.charts import (
    CHART_IDS,
    Chart,
    ChartConfig,
    WindowState,
    bartlett_w2_step,
    cusum_profile_step,
    cusum_w_step,
    gma_step,
    kernel_for,
    ma_step,
    make_chart,
    rstar_1p_step,
    rstar_mean_unknown_var_step,
    rstar_var_unknown_mean_step,
    sr_profile_step,
    sr_w_step,
    tstat_step,
)
from transig.families import DegenerateWindowError, NoSolutionError, get_model


def run_stats(config, xs):
    """Non-warming statistics from a streaming chart."""
    chart = make_chart(config)
    return [(s.t, s.statistic) for s in chart.run(xs) if not s.warming]


# --- frozen single-window reference values -----------------------------------
# Computed from the closed forms with independent high-precision arithmetic
# before the kernels were written.

def test_signed_root_exponential_window():
    w = 20
    xs = [0.6] * w
    r = run_stats(ChartConfig("r_1p", w=w, model_id="exp_rate"), xs)[0][1]
    rstar = run_stats(ChartConfig("rstar_1p", w=w, model_id="exp_rate"), xs)[0][1]
    assert r == pytest.approx(2.28031901938535299, rel=1e-13)
    assert rstar == pytest.approx(2.35167971833416377, rel=1e-13)


def test_variance_window_statistics():
    w = 20
    xs = [math.sqrt(2.0), -math.sqrt(2.0)] * (w // 2)  # mean 0, variance 2
    wald = run_stats(ChartConfig("wald_var_unknown_mean", w=w), xs)[0][1]
    rstar = run_stats(ChartConfig("rstar_var_unknown_mean", w=w), xs)[0][1]
    assert wald == pytest.approx(math.sqrt(10.0), rel=1e-13)
    assert rstar == pytest.approx(2.71574996665919520, rel=1e-13)


def test_mean_window_statistics():
    w = 20
    xs = [1.5, -0.5] * (w // 2)  # mean 0.5, variance 1
    t = run_stats(ChartConfig("tstat", w=w), xs)[0][1]
    rstar = run_stats(ChartConfig("rstar_mean_unknown_var", w=w), xs)[0][1]
    assert t == pytest.approx(math.sqrt(20.0) * 0.5, rel=1e-13)
    assert rstar == pytest.approx(2.03382101799197775, rel=1e-13)


def test_bartlett_window_statistic():
    w = 20
    xs = [1.5, -0.5] * (w // 2)  # xbar^2 + s2 - 1 - ln s2 = 0.25
    steps = [bartlett_w2_step_state(xs, w)]
    stat = steps[0]
    assert stat * (1.0 + 3.0 / (4.0 * w)) == pytest.approx(5.0, rel=1e-13)
    assert stat == pytest.approx(4.81927710843373494, rel=1e-13)


def bartlett_w2_step_state(xs, w):
    state = WindowState(w)
    out = None
    for x in xs:
        out = bartlett_w2_step(state, x)
    assert not out.warming
    return out.statistic


# --- warm-up, alarm semantics, wrappers ---------------------------------------

def test_warmup_emits_nan_until_window_full():
    chart = make_chart(ChartConfig("ma", w=5, threshold=0.1))
    steps = chart.run([1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
    for s in steps[:4]:
        assert s.warming and math.isnan(s.statistic) and not s.alarm
    assert not steps[4].warming and steps[4].t == 5
    assert steps[4].statistic == pytest.approx(math.sqrt(5.0))
    assert steps[4].alarm


def test_alarm_is_strictly_greater_than_threshold():
    # constant window puts the MA statistic exactly at 2.0
    cfg = ChartConfig("ma", w=4, threshold=2.0)
    steps = make_chart(cfg).run([1.0] * 4)
    assert steps[-1].statistic == 2.0
    assert not steps[-1].alarm
    low = replace(cfg, threshold=2.0 - 1e-12)
    assert make_chart(low).run([1.0] * 4)[-1].alarm


def test_two_sided_wrapper_directions():
    cfg = ChartConfig("tstat", w=4, threshold=2.0, two_sided=True)
    up = make_chart(cfg).run([1.0, 1.1, 0.9, 1.05])[-1]
    assert up.alarm and up.direction == "up"
    down = make_chart(cfg).run([-1.0, -1.1, -0.9, -1.05])[-1]
    assert down.alarm and down.direction == "down"
    quiet = make_chart(cfg).run([1.0, -1.0, 1.0, -1.0])[-1]
    assert not quiet.alarm and quiet.direction is None


def test_two_sided_rejected_for_one_sided_charts():
    with pytest.raises(ValueError):
        ChartConfig("gma", w0=3, w1=5, two_sided=True)
    with pytest.raises(ValueError):
        ChartConfig("cusum_w", w=5, model_id="exp_rate", delta=0.5, two_sided=True)
    with pytest.raises(ValueError):
        ChartConfig("bartlett_w2", w=5, two_sided=True)


def test_sign_symmetry_of_mean_charts(rng):
    xs = rng.normal(size=60)
    for cid in ("tstat", "rstar_mean_unknown_var", "r_mean_unknown_var"):
        pos = run_stats(ChartConfig(cid, w=12), xs)
        neg = run_stats(ChartConfig(cid, w=12), -xs)
        for (_, a), (_, b) in zip(pos, neg):
            assert a == pytest.approx(-b, rel=1e-10, abs=1e-12)
    # normal-mean signed root is odd too, and uncorrected (kappa = 0)
    pos = run_stats(ChartConfig("rstar_1p", w=12, model_id="normal_mean"), xs)
    neg = run_stats(ChartConfig("rstar_1p", w=12, model_id="normal_mean"), -xs)
    for (_, a), (_, b) in zip(pos, neg):
        assert a == pytest.approx(-b, rel=1e-10, abs=1e-12)


def test_variance_charts_invariant_under_sign_flip(rng):
    xs = rng.normal(size=60)
    for cid in ("wald_var_unknown_mean", "rstar_var_unknown_mean", "bartlett_w2"):
        pos = run_stats(ChartConfig(cid, w=12), xs)
        neg = run_stats(ChartConfig(cid, w=12), -xs)
        for (_, a), (_, b) in zip(pos, neg):
            assert a == pytest.approx(b, rel=1e-10, abs=1e-12)


# --- config validation ---------------------------------------------------------

def test_config_validation_errors():
    with pytest.raises(ValueError):
        ChartConfig("nope", w=5)
    with pytest.raises(ValueError):
        ChartConfig("ma", w=0)
    with pytest.raises(ValueError):
        ChartConfig("ma", w=5, threshold=0.0)
    with pytest.raises(ValueError):
        ChartConfig("tstat", w=1)  # squares need w >= 2
    with pytest.raises(ValueError):
        ChartConfig("rstar_1p", w=5)  # model required
    with pytest.raises(ValueError):
        ChartConfig("cusum_w", w=5, model_id="exp_rate")  # delta required
    with pytest.raises(ValueError):
        ChartConfig("cusum_w", w=5, model_id="exp_rate", delta=1.5)  # domain
    with pytest.raises(ValueError):
        ChartConfig("gma", w0=4, w1=2)
    with pytest.raises(ValueError):
        ChartConfig("cusum_profile", w=5, kind="variance")  # sigma1 required
    with pytest.raises(ValueError):
        ChartConfig("cusum_profile", w=5, kind="mean")  # delta required
    with pytest.raises(ValueError):
        ChartConfig("sr_profile", w=5, kind="scale", delta=0.5)


def test_gma_normalizes_window_to_w1():
    cfg = ChartConfig("gma", w0=3, w1=9)
    assert cfg.w == 9
    single = ChartConfig("gma", w=6)
    assert (single.w0, single.w1) == (6, 6)


def test_signed_root_domain_error():
    # exp_rate window mean at the attainable boundary -1
    cfg = ChartConfig("rstar_1p", w=4, model_id="exp_rate")
    with pytest.raises(NoSolutionError):
        run_stats(cfg, [-1.0] * 4)


def test_degenerate_window_error():
    with pytest.raises(DegenerateWindowError):
        run_stats(ChartConfig("tstat", w=4), [2.0] * 4)


# --- oracle equality -----------------------------------------------------------

EXP_C = get_model("exp_rate").cumulant


def _oracle_cases(rng, w):
    xs_n = rng.normal(size=40)
    xs_e = rng.exponential(size=40) - 1.0
    return [
        (ChartConfig("ma", w=w), xs_n, dict()),
        (ChartConfig("gma", w0=max(1, w - 2), w1=w), xs_n, dict(w0=max(1, w - 2))),
        (ChartConfig("r_1p", w=w, model_id="exp_rate"), xs_e, dict(kappa=1.0)),
        (ChartConfig("rstar_1p", w=w, model_id="exp_rate"), xs_e, dict(kappa=1.0)),
        (
            ChartConfig("cusum_w", w=w, model_id="exp_rate", delta=0.5),
            xs_e,
            dict(cumulant=lambda d: float(EXP_C(d)), delta=0.5),
        ),
        (
            ChartConfig("sr_w", w=w, model_id="exp_rate", delta=0.5),
            xs_e,
            dict(cumulant=lambda d: float(EXP_C(d)), delta=0.5),
        ),
        (ChartConfig("wald_var_unknown_mean", w=w), xs_n, dict()),
        (ChartConfig("r_var_unknown_mean", w=w), xs_n, dict()),
        (ChartConfig("rstar_var_unknown_mean", w=w), xs_n, dict()),
        (ChartConfig("r_mean_unknown_var", w=w), xs_n, dict()),
        (ChartConfig("rstar_mean_unknown_var", w=w), xs_n, dict()),
        (ChartConfig("tstat", w=w), xs_n, dict()),
        (ChartConfig("bartlett_w2", w=w), xs_n, dict()),
        (
            ChartConfig("cusum_profile", w=w, kind="variance", sigma1_sq=2.0),
            xs_n,
            dict(kind="variance", sigma1_sq=2.0),
        ),
        (
            ChartConfig("sr_profile", w=w, kind="variance", sigma1_sq=2.0),
            xs_n,
            dict(kind="variance", sigma1_sq=2.0),
        ),
        (
            ChartConfig(
                "cusum_profile", w=w, kind="variance", sigma1_sq=2.0, per_suffix=True
            ),
            xs_n,
            dict(kind="variance", sigma1_sq=2.0, per_suffix=True),
        ),
        (
            ChartConfig("cusum_profile", w=w, kind="mean", delta=0.5),
            xs_n,
            dict(kind="mean", delta=0.5),
        ),
        (
            ChartConfig("sr_profile", w=w, kind="mean", delta=0.5),
            xs_n,
            dict(kind="mean", delta=0.5),
        ),
        (
            ChartConfig("cusum_profile", w=w, kind="mean", delta=0.5, per_suffix=True),
            xs_n,
            dict(kind="mean", delta=0.5, per_suffix=True),
        ),
        (
            ChartConfig("sr_profile", w=w, kind="mean", delta=0.5, per_suffix=True),
            xs_n,
            dict(kind="mean", delta=0.5, per_suffix=True),
        ),
    ]


@pytest.mark.parametrize("w", [3, 5])
def test_streaming_matches_brute_force_oracle(rng, w):
    for cfg, xs, kw in _oracle_cases(rng, w):
        got = run_stats(cfg, xs)
        want = brute_series(cfg.chart_id, list(xs), cfg.w, **kw)
        assert len(got) == len(want) == len(xs) - cfg.w + 1
        for (t_g, s_g), (t_w, s_w) in zip(got, want):
            assert t_g == t_w
            assert s_g == pytest.approx(s_w, rel=1e-8, abs=1e-10), (cfg.chart_id, t_g)


def test_batch_kernel_matches_streaming(rng):
    """The vectorized window-sum path must agree with the ring buffer path."""
    from transig.mcsim import _padded_cumsum
    from transig.charts import WindowSums

    xs = rng.normal(size=64)
    for cfg, stream, kw in _oracle_cases(rng, 6):
        data = stream[:64] if cfg.model_id != "exp_rate" else stream
        kern = kernel_for(cfg)
        got = run_stats(cfg, data)
        row = np.asarray(data, dtype=float)[None, :]
        cx = _padded_cumsum(row)
        cx2 = _padded_cumsum(row * row)
        w = cfg.w
        kvec = np.arange(1, w + 1)
        for i, (t, s_stream) in enumerate(got):
            e = t
            sums = WindowSums(
                w=w,
                sum_x=cx[:, e] - cx[:, e - w],
                sum_x2=cx2[:, e] - cx2[:, e - w],
                suf_x=(cx[:, e, None] - cx[:, e - w : e])[:, ::-1],
                suf_x2=(cx2[:, e, None] - cx2[:, e - w : e])[:, ::-1],
                k=kvec,
            )
            s_batch = float(np.asarray(kern(sums))[0])
            assert s_batch == pytest.approx(s_stream, rel=1e-9, abs=1e-11)


# --- numeric invariants ---------------------------------------------------------

def test_ring_buffer_long_run_consistency(rng):
    """10^4 pushes: statistic tracks a fresh recompute; exact after refresh."""
    cfg = ChartConfig("rstar_var_unknown_mean", w=32)
    chart = make_chart(cfg)
    kern = kernel_for(cfg)
    xs = rng.normal(size=10_000) * (1.0 + 0.001 * np.arange(10_000))
    from transig.charts import WindowSums

    window = []
    for i, x in enumerate(xs):
        step = chart.step(float(x))
        window.append(float(x))
        if len(window) > 32:
            window.pop(0)
        if step.warming:
            continue
        arr = np.asarray(window)
        fresh = float(
            np.asarray(
                kern(
                    WindowSums(
                        w=32, sum_x=arr.sum(), sum_x2=float(arr @ arr),
                        suf_x=None, suf_x2=None, k=None,
                    )
                )
            )
        )
        assert step.statistic == pytest.approx(fresh, rel=1e-9, abs=1e-9)


def test_gma_with_equal_windows_is_ma(rng):
    xs = rng.normal(size=50)
    ma = run_stats(ChartConfig("ma", w=8), xs)
    gma = run_stats(ChartConfig("gma", w0=8, w1=8), xs)
    for (_, a), (_, b) in zip(ma, gma):
        assert a == b or a == pytest.approx(b, abs=1e-12)


def test_sr_dominates_cusum_pathwise(rng):
    xs = rng.exponential(size=200) - 1.0
    cusum = run_stats(ChartConfig("cusum_w", w=10, model_id="exp_rate", delta=0.5), xs)
    sr = run_stats(ChartConfig("sr_w", w=10, model_id="exp_rate", delta=0.5), xs)
    for (_, c), (_, s) in zip(cusum, sr):
        assert s >= c
    ys = rng.normal(size=200)
    for kind, kw in (("variance", dict(sigma1_sq=2.0)), ("mean", dict(delta=0.5))):
        cusum = run_stats(ChartConfig("cusum_profile", w=10, kind=kind, **kw), ys)
        sr = run_stats(ChartConfig("sr_profile", w=10, kind=kind, **kw), ys)
        for (_, c), (_, s) in zip(cusum, sr):
            assert s >= c


def test_per_suffix_flag_changes_profile_statistics(rng):
    xs = rng.normal(size=60)
    base = run_stats(ChartConfig("cusum_profile", w=10, kind="mean", delta=0.5), xs)
    alt = run_stats(
        ChartConfig("cusum_profile", w=10, kind="mean", delta=0.5, per_suffix=True), xs
    )
    assert any(abs(a - b) > 1e-9 for (_, a), (_, b) in zip(base, alt))


def test_window_state_reset_and_order(rng):
    st8 = WindowState(3)
    for v in (1.0, 2.0, 3.0, 4.0):
        st8.push(v)
    assert list(st8.ordered()) == [2.0, 3.0, 4.0]
    st8.reset()
    assert not st8.warm
    st8.push(9.0)
    assert list(st8.ordered()) == [9.0]


def test_step_functions_agree_with_charts(rng):
    xs = list(rng.normal(size=30))
    pairs = [
        (ma_step, dict(), ChartConfig("ma", w=6)),
        (gma_step, dict(w0=3), ChartConfig("gma", w0=3, w1=6)),
        (rstar_1p_step, dict(model="normal_mean"),
         ChartConfig("rstar_1p", w=6, model_id="normal_mean")),
        (cusum_w_step, dict(model="normal_mean", delta=0.4),
         ChartConfig("cusum_w", w=6, model_id="normal_mean", delta=0.4)),
        (sr_w_step, dict(model="normal_mean", delta=0.4),
         ChartConfig("sr_w", w=6, model_id="normal_mean", delta=0.4)),
        (rstar_var_unknown_mean_step, dict(), ChartConfig("rstar_var_unknown_mean", w=6)),
        (rstar_mean_unknown_var_step, dict(), ChartConfig("rstar_mean_unknown_var", w=6)),
        (tstat_step, dict(), ChartConfig("tstat", w=6)),
        (cusum_profile_step, dict(kind="variance", sigma1_sq=2.0),
         ChartConfig("cusum_profile", w=6, kind="variance", sigma1_sq=2.0)),
        (sr_profile_step, dict(kind="mean", delta=0.5),
         ChartConfig("sr_profile", w=6, kind="mean", delta=0.5)),
        (bartlett_w2_step, dict(), ChartConfig("bartlett_w2", w=6)),
    ]
    for fn, kw, cfg in pairs:
        state = WindowState(6)
        got = []
        for x in xs:
            out = fn(state, x, **kw)
            if not out.warming:
                got.append((out.t, out.statistic))
        want = run_stats(cfg, xs)
        assert got == want, cfg.chart_id


@given(st.lists(st.floats(-3, 3), min_size=6, max_size=40))
@settings(max_examples=50, deadline=None)
def test_ma_statistic_matches_definition(vals):
    w = 6
    got = run_stats(ChartConfig("ma", w=w), vals)
    for t, s in got:
        assert s == pytest.approx(
            math.sqrt(w) * sum(vals[t - w : t]) / w, rel=1e-12, abs=1e-12
        )


def test_chart_ids_catalog_is_stable():
    assert set(CHART_IDS) == {
        "ma", "gma", "rstar_1p", "r_1p", "cusum_w", "sr_w",
        "wald_var_unknown_mean", "r_var_unknown_mean", "rstar_var_unknown_mean",
        "r_mean_unknown_var", "rstar_mean_unknown_var", "tstat",
        "cusum_profile", "sr_profile", "bartlett_w2",
    }
