"""Shared test helpers: naive reference implementations of every chart.

These recompute each statistic from scratch on explicit window slices with
plain Python arithmetic, independently of the library's ring buffer,
padded-cumsum, and suffix-array machinery, so equality against them
validates the windowing mechanics end to end.
"""

import math

import numpy as np
import pytest

# One line per acceptance criterion, echoed after the run so the verdicts
# are visible even when output capture swallows in-test prints.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def logsumexp_py(vals):
    m = max(vals)
    return m + math.log(sum(math.exp(v - m) for v in vals))


def _h_py(a):
    if a == 0.0:
        return 1.0
    return 2.0 * (a - math.log1p(a)) / (a * a)


def _k_py(t):
    if t == 0.0:
        return 1.0
    return math.log1p(t) / t


def _rstar_py(r, log_u_over_r):
    if abs(r) < 1e-8:
        return 0.0
    return r + log_u_over_r / r


def brute_stat(chart_id, win, *, kappa=None, cumulant=None, delta=None,
               w0=None, sigma0_sq=1.0, sigma1_sq=None, kind=None,
               per_suffix=False):
    """One statistic value from an explicit full window (oldest first)."""
    w = len(win)
    xbar = sum(win) / w
    if chart_id == "ma":
        return math.sqrt(w) * xbar
    if chart_id == "gma":
        best = -math.inf
        for k in range(w0, w + 1):
            suf = sum(win[w - k:])
            best = max(best, suf / math.sqrt(k))
        return best
    if chart_id in ("r_1p", "rstar_1p"):
        a = kappa * xbar
        h = _h_py(a)
        r = xbar * math.sqrt(w * h)
        if chart_id == "r_1p":
            return r
        return _rstar_py(r, -0.5 * math.log(h))
    if chart_id in ("cusum_w", "sr_w"):
        c = cumulant(delta)
        ls = [delta * sum(win[w - k:]) - k * c for k in range(1, w + 1)]
        return max(ls) if chart_id == "cusum_w" else logsumexp_py(ls)
    s2 = sum(v * v for v in win) / w - xbar * xbar
    if chart_id == "wald_var_unknown_mean":
        return math.sqrt(w / 2.0) * (s2 - 1.0)
    if chart_id in ("r_var_unknown_mean", "rstar_var_unknown_mean"):
        e = s2 - 1.0
        h = _h_py(e)
        r = e * math.sqrt(w * h / 2.0)
        if chart_id == "r_var_unknown_mean":
            return r
        return _rstar_py(r, 0.5 * (math.log1p(e) - math.log(h)))
    if chart_id in ("r_mean_unknown_var", "rstar_mean_unknown_var"):
        t = xbar * xbar / s2
        kq = _k_py(t)
        r = xbar / math.sqrt(s2) * math.sqrt(w * kq)
        if chart_id == "r_mean_unknown_var":
            return r
        return _rstar_py(r, -math.log1p(t) - 0.5 * math.log(kq))
    if chart_id == "tstat":
        return math.sqrt(w) * xbar / math.sqrt(s2)
    if chart_id == "bartlett_w2":
        return w * (xbar * xbar + s2 - 1.0 - math.log(s2)) / (1.0 + 3.0 / (4.0 * w))
    if chart_id in ("cusum_profile", "sr_profile"):
        ls = []
        if kind == "variance":
            coef = 1.0 / sigma0_sq - 1.0 / sigma1_sq
            logr = math.log(sigma0_sq / sigma1_sq)
            for k in range(1, w + 1):
                suf = win[w - k:]
                if per_suffix:
                    sm = sum(suf) / k
                    q = sum((v - sm) ** 2 for v in suf)
                else:
                    q = sum((v - xbar) ** 2 for v in suf)
                ls.append(0.5 * (coef * q + k * logr))
        else:
            for k in range(1, w + 1):
                suf = win[w - k:]
                num = delta * sum(suf) - k * delta * delta / 2.0
                if per_suffix:
                    if k == 1:
                        continue
                    sm = sum(suf) / k
                    v2 = sum((v - sm) ** 2 for v in suf) / k
                    ls.append(num / v2)
                else:
                    ls.append(num / s2)
        return max(ls) if chart_id == "cusum_profile" else logsumexp_py(ls)
    raise AssertionError(f"no brute-force form for {chart_id}")


def brute_series(chart_id, xs, w, **kw):
    """(t, statistic) for every t with a full window, naively recomputed."""
    return [
        (t, brute_stat(chart_id, [float(v) for v in xs[t - w: t]], **kw))
        for t in range(w, len(xs) + 1)
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(20260818)
