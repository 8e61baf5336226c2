"""Left-to-right gesture models with Gaussian-mixture emissions.

One model per action, trained with Baum-Welch from a deterministic seeded
initialization (uniform time segmentation plus per-state k-means).  States
may only self-loop or advance, the entry state is always the first one, and
scoring works on arbitrary prefixes of a trajectory, which is what makes
early recognition possible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import kernels
from .fusion import SoftActionEvidence

VAR_FLOOR = 1e-6
ROW_SUM_TOL = 1e-12
DEFAULT_STATES = 4
DEFAULT_MIXTURES = 2
MAX_EM_ITERATIONS = 100
EM_REL_TOL = 1e-6

__all__ = [
    "HmmError",
    "Trajectory",
    "HmmModel",
    "GestureBank",
    "PrefixCurve",
    "preprocess",
    "train_hmm",
    "train_bank",
    "forward_loglik",
    "action_posterior",
    "prefix_curve",
]


class HmmError(ValueError):
    """Invalid trajectory, model parameters or unscoreable input."""


@dataclass(frozen=True)
class Trajectory:
    """A time series of D-dimensional hand positions."""

    frames: np.ndarray
    frame_period: float = 1.0 / 30.0

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise HmmError("trajectory needs at least one frame of shape (T, D)")
        if not np.isfinite(frames).all():
            raise HmmError("trajectory contains non-finite values")
        if self.frame_period <= 0:
            raise HmmError("frame_period must be positive")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


def preprocess(raw: Trajectory, torso: np.ndarray) -> Trajectory:
    """Center frames on the torso and divide by the peak distance.

    The result is translation invariant and scale invariant; its largest
    frame norm is exactly one, except for the degenerate case where the hand
    never leaves the torso (all-zero frames, division skipped).  Running the
    function twice (with a zero torso the second time) changes nothing.
    """
    torso = np.asarray(torso, dtype=np.float64)
    if torso.shape != raw.frames.shape:
        raise HmmError(
            f"torso positions {torso.shape} must match frames {raw.frames.shape}"
        )
    centered = raw.frames - torso
    peak = float(np.sqrt((centered * centered).sum(axis=1)).max())
    if peak > 0.0:
        centered = centered / peak
    return Trajectory(frames=centered, frame_period=raw.frame_period)


@dataclass(frozen=True)
class HmmModel:
    """Parameters of a single left-to-right model.

    ``log_trans`` is (Q, Q) with finite entries only on the diagonal and the
    first superdiagonal; the entry state is state 0.  Emissions are diagonal
    Gaussian mixtures stored as stacked arrays of shape (Q, M[, D]).
    ``history`` records the per-iteration training log-likelihood and is not
    part of the serialized model.
    """

    action_label: str
    log_trans: np.ndarray
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    history: tuple[float, ...] = ()

    def __post_init__(self):
        for name in ("log_trans", "weights", "means", "variances"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        self._validate()

    def _validate(self) -> None:
        q = self.log_trans.shape[0]
        if self.log_trans.shape != (q, q):
            raise HmmError("log_trans must be square")
        trans = np.exp(self.log_trans)
        off_mask = ~(np.eye(q, dtype=bool) | np.eye(q, k=1, dtype=bool))
        if (trans[off_mask] != 0.0).any():
            raise HmmError("transitions outside self/next must be exactly zero")
        if not np.allclose(trans.sum(axis=1), 1.0, rtol=0.0, atol=ROW_SUM_TOL):
            raise HmmError("transition rows must sum to 1")
        if self.weights.shape != self.means.shape[:2] or self.means.shape != self.variances.shape:
            raise HmmError("mixture arrays must share (Q, M, D) shapes")
        if self.weights.shape[0] != q:
            raise HmmError("mixture arrays must have one row per state")
        if not np.allclose(self.weights.sum(axis=1), 1.0, rtol=0.0, atol=ROW_SUM_TOL):
            raise HmmError("mixture weights must sum to 1 per state")
        if (self.weights < 0).any():
            raise HmmError("mixture weights must be nonnegative")
        if (self.variances < VAR_FLOOR - 1e-18).any():
            raise HmmError(f"variances must stay above the floor {VAR_FLOOR}")

    @property
    def n_states(self) -> int:
        return self.log_trans.shape[0]

    @property
    def n_mixtures(self) -> int:
        return self.weights.shape[1]

    @property
    def dim(self) -> int:
        return self.means.shape[2]


@dataclass(frozen=True)
class GestureBank:
    """One trained model per action, in a fixed label order."""

    models: tuple[HmmModel, ...]

    def __post_init__(self):
        labels = [m.action_label for m in self.models]
        if not labels:
            raise HmmError("bank must contain at least one model")
        if len(set(labels)) != len(labels):
            raise HmmError("duplicate action labels in bank")

    @property
    def actions(self) -> tuple[str, ...]:
        return tuple(m.action_label for m in self.models)

    def model(self, action: str) -> HmmModel:
        for m in self.models:
            if m.action_label == action:
                return m
        raise HmmError(f"no model for action {action!r}")


def _left_right_log_trans(n_states: int, self_prob: float) -> np.ndarray:
    trans = np.zeros((n_states, n_states))
    for i in range(n_states - 1):
        trans[i, i] = self_prob
        trans[i, i + 1] = 1.0 - self_prob
    trans[n_states - 1, n_states - 1] = 1.0
    with np.errstate(divide="ignore"):
        return np.log(trans)


def _kmeans(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    idx = rng.choice(n, size=k, replace=n < k)
    centroids = points[idx].astype(np.float64)
    assign = np.full(n, -1)
    for _ in range(25):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        for c in range(k):
            members = points[new_assign == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
            else:
                # re-seed an empty cluster at the worst-fitting point
                centroids[c] = points[d2.min(axis=1).argmax()]
        if (new_assign == assign).all():
            break
        assign = new_assign
    return centroids


def _initial_model(
    trajs: Sequence[Trajectory], n_states: int, n_mix: int, seed: int, label: str
) -> HmmModel:
    rng = np.random.default_rng(seed)
    dim = trajs[0].dim
    state_frames: list[list[np.ndarray]] = [[] for _ in range(n_states)]
    for traj in trajs:
        blocks = np.array_split(traj.frames, n_states)
        for q, block in enumerate(blocks):
            state_frames[q].append(block)
    weights = np.zeros((n_states, n_mix))
    means = np.zeros((n_states, n_mix, dim))
    variances = np.zeros((n_states, n_mix, dim))
    for q in range(n_states):
        points = np.concatenate(state_frames[q], axis=0)
        centroids = _kmeans(points, n_mix, rng)
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        for m in range(n_mix):
            members = points[assign == m]
            if len(members) == 0:
                weights[q, m] = 1e-3
                means[q, m] = centroids[m]
                variances[q, m] = np.maximum(points.var(axis=0), VAR_FLOOR)
            else:
                weights[q, m] = len(members)
                means[q, m] = members.mean(axis=0)
                variances[q, m] = np.maximum(members.var(axis=0), VAR_FLOOR)
        weights[q] /= weights[q].sum()
    mean_len = sum(len(t) for t in trajs) / len(trajs)
    duration = max(mean_len / n_states, 1.0 + 1e-9)
    self_prob = float(np.clip(1.0 - 1.0 / duration, 0.1, 0.95))
    return HmmModel(
        action_label=label,
        log_trans=_left_right_log_trans(n_states, self_prob),
        weights=weights,
        means=means,
        variances=variances,
    )


def _sequence_stats(model: HmmModel, frames: np.ndarray):
    log_wcomp, log_b = kernels.gmm_obs_logprob(
        frames, np.log(model.weights + 1e-300), model.means, model.variances
    )
    log_alpha = kernels.log_forward(model.log_trans, log_b)
    loglik = float(np.logaddexp.reduce(log_alpha[-1]))
    if not math.isfinite(loglik):
        raise HmmError("sequence has zero likelihood under the current model")
    log_beta = kernels.log_backward(model.log_trans, log_b)
    gamma = np.exp(log_alpha + log_beta - loglik)
    resp = gamma[:, :, None] * np.exp(log_wcomp - log_b[:, :, None])
    xi = kernels.transition_xi_sum(model.log_trans, log_b, log_alpha, log_beta, loglik)
    return loglik, gamma, resp, xi


def train_hmm(
    trajs: Sequence[Trajectory],
    n_states: int = DEFAULT_STATES,
    n_mix: int = DEFAULT_MIXTURES,
    seed: int = 0,
    action_label: str = "",
) -> HmmModel:
    """Baum-Welch training, deterministic for a given seed.

    Stops after 100 iterations or when the relative log-likelihood gain drops
    below 1e-6.  Zero entries of the left-to-right transition matrix stay
    zero, and variances never fall below the floor.
    """
    if not trajs:
        raise HmmError("empty training set")
    if n_states < 1 or n_mix < 1:
        raise HmmError("need at least one state and one mixture component")
    dim = trajs[0].dim
    for traj in trajs:
        if traj.dim != dim:
            raise HmmError("all trajectories must share the same dimensionality")
        if len(traj) < n_states:
            raise HmmError(
                f"trajectory of length {len(traj)} is shorter than {n_states} states"
            )
    model = _initial_model(trajs, n_states, n_mix, seed, action_label)
    history: list[float] = []
    for iteration in range(MAX_EM_ITERATIONS):
        total_ll = 0.0
        trans_num = np.zeros((n_states, n_states))
        occupancy = np.zeros(n_states)
        resp_sum = np.zeros((n_states, n_mix))
        mean_num = np.zeros((n_states, n_mix, dim))
        sq_num = np.zeros((n_states, n_mix, dim))
        for traj in trajs:
            loglik, gamma, resp, xi = _sequence_stats(model, traj.frames)
            total_ll += loglik
            trans_num += xi
            occupancy += gamma.sum(axis=0)
            resp_sum += resp.sum(axis=0)
            mean_num += np.einsum("tqm,td->qmd", resp, traj.frames)
            sq_num += np.einsum("tqm,td->qmd", resp, traj.frames**2)
        history.append(total_ll)
        if iteration > 0:
            gain = total_ll - history[-2]
            if gain < EM_REL_TOL * abs(history[-2]):
                break
        trans = np.exp(model.log_trans)
        row_tot = trans_num.sum(axis=1)
        for i in range(n_states):
            if row_tot[i] > 0:
                trans[i] = trans_num[i] / row_tot[i]
        weights = model.weights.copy()
        means = model.means.copy()
        variances = model.variances.copy()
        for q in range(n_states):
            if occupancy[q] <= 0:
                continue
            weights[q] = resp_sum[q] / resp_sum[q].sum()
            for m in range(n_mix):
                if resp_sum[q, m] < 1e-12:
                    continue
                mu = mean_num[q, m] / resp_sum[q, m]
                means[q, m] = mu
                variances[q, m] = np.maximum(
                    sq_num[q, m] / resp_sum[q, m] - mu * mu, VAR_FLOOR
                )
        with np.errstate(divide="ignore"):
            log_trans = np.log(trans)
        model = HmmModel(
            action_label=action_label,
            log_trans=log_trans,
            weights=weights,
            means=means,
            variances=variances,
        )
    return replace(model, history=tuple(history))


def train_bank(
    trajs_by_action: dict[str, Sequence[Trajectory]],
    n_states: int = DEFAULT_STATES,
    n_mix: int = DEFAULT_MIXTURES,
    seed: int = 0,
) -> GestureBank:
    """Train one model per action; per-action seeds are offset from ``seed``."""
    models = []
    for offset, (label, trajs) in enumerate(trajs_by_action.items()):
        models.append(
            train_hmm(trajs, n_states, n_mix, seed=seed + offset, action_label=label)
        )
    return GestureBank(models=tuple(models))


def _prefix_logliks(model: HmmModel, traj: Trajectory) -> np.ndarray:
    if traj.dim != model.dim:
        raise HmmError(
            f"trajectory dimension {traj.dim} does not match model dimension {model.dim}"
        )
    _, log_b = kernels.gmm_obs_logprob(
        traj.frames, np.log(model.weights + 1e-300), model.means, model.variances
    )
    log_alpha = kernels.log_forward(model.log_trans, log_b)
    return np.logaddexp.reduce(log_alpha, axis=1)


def forward_loglik(model: HmmModel, traj: Trajectory) -> float:
    """Log-likelihood of the whole trajectory under one model."""
    return float(_prefix_logliks(model, traj)[-1])


def action_posterior(bank: GestureBank, traj: Trajectory) -> SoftActionEvidence:
    """Posterior over actions from normalized likelihoods (uniform prior)."""
    logliks = np.array([forward_loglik(m, traj) for m in bank.models])
    peak = logliks.max()
    if peak == -np.inf:
        raise HmmError("trajectory has zero likelihood under every model")
    weights = np.exp(logliks - peak)
    return SoftActionEvidence(weights=weights / weights.sum(), actions=bank.actions)


@dataclass(frozen=True)
class PrefixCurve:
    """Per-prefix scores for every action.

    ``log_liks[t-1, k]`` is log L(first t frames | action k); ``scores`` is
    the same divided by t, and ``posteriors`` applies the uniform-prior
    normalization per prefix.
    """

    actions: tuple[str, ...]
    log_liks: np.ndarray
    scores: np.ndarray
    posteriors: np.ndarray

    def __len__(self):
        return self.log_liks.shape[0]

    def at(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        """Scores and posterior after the first ``t`` frames (1-indexed)."""
        if t < 1 or t > len(self):
            raise HmmError(f"prefix length {t} outside 1..{len(self)}")
        return self.scores[t - 1], self.posteriors[t - 1]

    def posterior_at(self, t: int) -> SoftActionEvidence:
        return SoftActionEvidence(weights=self.at(t)[1], actions=self.actions)


def prefix_curve(bank: GestureBank, traj: Trajectory) -> PrefixCurve:
    """Length-normalized prefix log-likelihoods plus per-prefix posteriors."""
    log_liks = np.stack([_prefix_logliks(m, traj) for m in bank.models], axis=1)
    t = np.arange(1, len(traj) + 1)[:, None].astype(np.float64)
    scores = log_liks / t
    peak = log_liks.max(axis=1, keepdims=True)
    if (peak == -np.inf).any():
        raise HmmError("some prefix has zero likelihood under every model")
    weights = np.exp(log_liks - peak)
    posteriors = weights / weights.sum(axis=1, keepdims=True)
    return PrefixCurve(
        actions=bank.actions, log_liks=log_liks, scores=scores, posteriors=posteriors
    )
