import numpy as np
import pytest

from modules.inference.diagnostics import autocorrelation, effective_sample_size, ess_report


def _ar1(n, rho, seed):
    r = np.random.default_rng(seed)
    e = r.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0] / np.sqrt(1 - rho ** 2)
    for i in range(1, n):
        x[i] = rho * x[i - 1] + e[i]
    return x


def test_independent_draws_keep_their_count():
    x = np.random.default_rng(0).standard_normal(20_000)
    assert 16_000 <= effective_sample_size(x) <= 24_000


def test_ar1_matches_integrated_autocorrelation_time():
    n, rho = 50_000, 0.9
    expected = n * (1 - rho) / (1 + rho)
    assert effective_sample_size(_ar1(n, rho, 1)) == pytest.approx(expected, rel=0.3)


def test_autocorrelation_starts_at_one():
    rho = autocorrelation(_ar1(5000, 0.5, 2))
    assert rho[0] == pytest.approx(1.0)
    assert rho[1] == pytest.approx(0.5, abs=0.05)


@pytest.mark.parametrize("trace", [np.full(100, 3.0), np.array([1.0, 2.0, 3.0]), np.array([1.0, np.nan, 2.0, 3.0, 4.0])])
def test_degenerate_traces_have_no_ess(trace):
    assert np.isnan(effective_sample_size(trace))


def test_report_covers_every_trace():
    r = np.random.default_rng(3)
    report = ess_report({"a": r.standard_normal(500), "b": np.ones(500)})
    assert set(report) == {"a", "b"}
    assert report["a"] > 100 and np.isnan(report["b"])
