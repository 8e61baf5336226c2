"""Hot numeric kernels for the gesture models.

Two interchangeable backends: numba ``@njit`` loops (default when numba is
importable) and vectorized numpy.  Set ``AFFTALK_NO_NUMBA=1`` before import
to force the numpy path; ``backend()`` reports which one is live.  Both
paths work in the log domain; the only hard invariant is that a row of all
``-inf`` stays ``-inf`` instead of turning into NaN.
"""

from __future__ import annotations

import math
import os

import numpy as np

_LOG_2PI = math.log(2.0 * math.pi)

__all__ = [
    "backend",
    "gmm_obs_logprob",
    "log_forward",
    "log_backward",
    "transition_xi_sum",
]


def _numba_disabled() -> bool:
    return os.environ.get("AFFTALK_NO_NUMBA", "").strip().lower() in {
        "1",
        "true",
        "yes",
        "on",
    }


# ---------------------------------------------------------------------------
# numpy backend

def _gmm_obs_logprob_np(frames, log_weights, means, variances):
    diff = frames[:, None, None, :] - means[None, :, :, :]
    quad = (diff * diff / variances[None, :, :, :]).sum(axis=-1)
    norm = np.log(variances).sum(axis=-1) + frames.shape[1] * _LOG_2PI
    log_wcomp = log_weights[None, :, :] - 0.5 * (quad + norm[None, :, :])
    log_b = np.logaddexp.reduce(log_wcomp, axis=-1)
    return log_wcomp, log_b


def _log_forward_np(log_trans, log_obs):
    T, Q = log_obs.shape
    log_alpha = np.full((T, Q), -np.inf)
    log_alpha[0, 0] = log_obs[0, 0]
    for t in range(1, T):
        step = log_alpha[t - 1][:, None] + log_trans
        log_alpha[t] = np.logaddexp.reduce(step, axis=0) + log_obs[t]
    return log_alpha


def _log_backward_np(log_trans, log_obs):
    T, Q = log_obs.shape
    log_beta = np.zeros((T, Q))
    for t in range(T - 2, -1, -1):
        step = log_trans + (log_obs[t + 1] + log_beta[t + 1])[None, :]
        log_beta[t] = np.logaddexp.reduce(step, axis=1)
    return log_beta


def _transition_xi_sum_np(log_trans, log_obs, log_alpha, log_beta, loglik):
    arrival = (log_obs[1:] + log_beta[1:])[:, None, :]
    lx = log_alpha[:-1][:, :, None] + log_trans[None, :, :] + arrival - loglik
    return np.exp(lx).sum(axis=0)


# ---------------------------------------------------------------------------
# numba backend (same semantics, explicit loops)

def _gmm_obs_logprob_loops(frames, log_weights, means, variances):
    T, D = frames.shape
    Q, M = log_weights.shape
    log_wcomp = np.empty((T, Q, M))
    log_b = np.empty((T, Q))
    for t in range(T):
        for q in range(Q):
            peak = -np.inf
            for m in range(M):
                acc = 0.0
                for d in range(D):
                    diff = frames[t, d] - means[q, m, d]
                    acc += diff * diff / variances[q, m, d] + np.log(variances[q, m, d])
                value = log_weights[q, m] - 0.5 * (acc + D * _LOG_2PI)
                log_wcomp[t, q, m] = value
                if value > peak:
                    peak = value
            if peak == -np.inf:
                log_b[t, q] = -np.inf
            else:
                total = 0.0
                for m in range(M):
                    total += np.exp(log_wcomp[t, q, m] - peak)
                log_b[t, q] = peak + np.log(total)
    return log_wcomp, log_b


def _log_forward_loops(log_trans, log_obs):
    T, Q = log_obs.shape
    log_alpha = np.full((T, Q), -np.inf)
    log_alpha[0, 0] = log_obs[0, 0]
    for t in range(1, T):
        for j in range(Q):
            peak = -np.inf
            for i in range(Q):
                v = log_alpha[t - 1, i] + log_trans[i, j]
                if v > peak:
                    peak = v
            if peak == -np.inf:
                log_alpha[t, j] = -np.inf
            else:
                total = 0.0
                for i in range(Q):
                    total += np.exp(log_alpha[t - 1, i] + log_trans[i, j] - peak)
                log_alpha[t, j] = peak + np.log(total) + log_obs[t, j]
    return log_alpha


def _log_backward_loops(log_trans, log_obs):
    T, Q = log_obs.shape
    log_beta = np.zeros((T, Q))
    for t in range(T - 2, -1, -1):
        for i in range(Q):
            peak = -np.inf
            for j in range(Q):
                v = log_trans[i, j] + log_obs[t + 1, j] + log_beta[t + 1, j]
                if v > peak:
                    peak = v
            if peak == -np.inf:
                log_beta[t, i] = -np.inf
            else:
                total = 0.0
                for j in range(Q):
                    total += np.exp(
                        log_trans[i, j] + log_obs[t + 1, j] + log_beta[t + 1, j] - peak
                    )
                log_beta[t, i] = peak + np.log(total)
    return log_beta


def _transition_xi_sum_loops(log_trans, log_obs, log_alpha, log_beta, loglik):
    T, Q = log_obs.shape
    xi = np.zeros((Q, Q))
    for t in range(T - 1):
        for i in range(Q):
            for j in range(Q):
                v = (
                    log_alpha[t, i]
                    + log_trans[i, j]
                    + log_obs[t + 1, j]
                    + log_beta[t + 1, j]
                    - loglik
                )
                if v > -np.inf:
                    xi[i, j] += np.exp(v)
    return xi


_BACKEND = "numpy"
gmm_obs_logprob = _gmm_obs_logprob_np
log_forward = _log_forward_np
log_backward = _log_backward_np
transition_xi_sum = _transition_xi_sum_np

if not _numba_disabled():
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        njit = None
    if njit is not None:
        gmm_obs_logprob = njit(cache=True)(_gmm_obs_logprob_loops)
        log_forward = njit(cache=True)(_log_forward_loops)
        log_backward = njit(cache=True)(_log_backward_loops)
        transition_xi_sum = njit(cache=True)(_transition_xi_sum_loops)
        _BACKEND = "numba"


def backend() -> str:
    """Name of the active backend, ``"numba"`` or ``"numpy"``."""
    return _BACKEND
