"""
Convergence diagnostics for scalar MCMC traces
"""
from typing import Dict, Mapping

import numpy as np
from scipy import fft


def autocorrelation(trace: np.ndarray) -> np.ndarray:
    """Normalized autocorrelation at every lag (FFT, zero-padded)"""
    x = np.asarray(trace, dtype=float)
    n = x.shape[0]
    x = x - x.mean()
    size = fft.next_fast_len(2 * n)
    spec = fft.rfft(x, size)
    acov = fft.irfft(spec * np.conjugate(spec), size)[:n]
    if acov[0] <= 0.0:
        return np.zeros(n)
    return acov / acov[0]


def effective_sample_size(trace: np.ndarray) -> float:
    """
    Initial positive sequence estimator: sum autocorrelations in adjacent
    pairs until a pair sum goes non-positive.
    A constant trace returns NaN.
    """
    x = np.asarray(trace, dtype=float)
    n = x.shape[0]
    if n < 4 or not np.all(np.isfinite(x)):
        return float("nan")
    if np.ptp(x) == 0.0:
        return float("nan")
    rho = autocorrelation(x)
    n_pairs = n // 2
    pairs = rho[: 2 * n_pairs].reshape(n_pairs, 2).sum(axis=1)
    stop = np.flatnonzero(pairs <= 0.0)
    m = int(stop[0]) if stop.size else n_pairs
    tau = -1.0 + 2.0 * float(np.sum(pairs[:m]))
    tau = max(tau, 1.0 / np.log10(max(n, 10)))
    return float(n / tau)


def ess_report(traces: Mapping[str, np.ndarray]) -> Dict[str, float]:
    return {name: effective_sample_size(values) for name, values in traces.items()}
