"""Per-sample hardness scores.

Three pieces, combined into a single Dynamic Forensic Hardness (DFH)
value per training sample:

* instantaneous hardness: the sample's current loss, normalized by the
  ratio of the peak learning rate to the current one (so late, small-step
  epochs are not read as "everything became easy");
* DIH: an exponential moving average of instantaneous hardness over the
  epochs in which the sample was part of the hard pool;
* a static quality prior in [0, 1] (blurrier / lower-quality images are
  considered harder a priori), weighted by ``alpha_f``.

All vectors are float64 so that selection by ranking is stable across
platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from dffc.errors import InvalidScheduleError


@dataclass
class HardnessState:
    """Mutable per-sample hardness bookkeeping for one training run.

    ``dih`` starts at zero for every sample: during warm-up all samples
    are updated equally often, so the shared cold start does not affect
    relative ordering.
    """

    dih: np.ndarray
    prior: np.ndarray
    gamma: float
    alpha_f: float
    update_count: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.dih = np.asarray(self.dih, dtype=np.float64)
        self.prior = np.asarray(self.prior, dtype=np.float64)
        if self.update_count is None:
            self.update_count = np.zeros(len(self.dih), dtype=np.int64)
        else:
            self.update_count = np.asarray(self.update_count, dtype=np.int64)
        if not (len(self.dih) == len(self.prior) == len(self.update_count)):
            raise ValueError("dih, prior and update_count must have equal length")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.alpha_f < 0.0:
            raise ValueError(f"alpha_f must be non-negative, got {self.alpha_f}")
        if len(self.prior) and (self.prior.min() < 0.0 or self.prior.max() > 1.0):
            raise ValueError("prior values must lie in [0, 1]")

    @classmethod
    def fresh(cls, prior: np.ndarray, gamma: float, alpha_f: float) -> "HardnessState":
        """State with zero loss history for ``len(prior)`` samples."""
        prior = np.asarray(prior, dtype=np.float64)
        return cls(dih=np.zeros(len(prior)), prior=prior, gamma=gamma, alpha_f=alpha_f)

    @property
    def n_samples(self) -> int:
        return len(self.dih)

    def to_json(self) -> str:
        doc = {
            "gamma": self.gamma,
            "alpha_f": self.alpha_f,
            "dih": self.dih.tolist(),
            "prior": self.prior.tolist(),
            "update_count": self.update_count.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "HardnessState":
        doc = json.loads(text)
        return cls(
            dih=np.asarray(doc["dih"], dtype=np.float64),
            prior=np.asarray(doc["prior"], dtype=np.float64),
            gamma=float(doc["gamma"]),
            alpha_f=float(doc["alpha_f"]),
            update_count=np.asarray(doc.get("update_count", np.zeros(len(doc["dih"]))), dtype=np.int64),
        )


def instantaneous_hardness(loss: float, eta_t: float, eta_max: float) -> float:
    """Loss scaled by eta_max / eta_t.

    Raises :class:`InvalidScheduleError` when the learning rate is outside
    (0, eta_max]; that always indicates a broken schedule upstream.
    """
    if loss < 0.0:
        raise ValueError(f"loss must be non-negative, got {loss}")
    if eta_t <= 0.0 or eta_t > eta_max:
        raise InvalidScheduleError(
            f"learning rate {eta_t} outside (0, {eta_max}]"
        )
    return loss * eta_max / eta_t


def _check_index(state: HardnessState, sample_id: int) -> None:
    if not 0 <= sample_id < state.n_samples:
        raise IndexError(f"sample_id {sample_id} out of range for N={state.n_samples}")


def update_dih(
    state: HardnessState, sample_id: int, s_t: float, in_hard_pool: bool
) -> HardnessState:
    """EMA update for one sample; a no-op when the sample sat outside the hard pool."""
    _check_index(state, sample_id)
    if s_t < 0.0:
        raise ValueError(f"instantaneous hardness must be non-negative, got {s_t}")
    if in_hard_pool:
        g = state.gamma
        state.dih[sample_id] = g * s_t + (1.0 - g) * state.dih[sample_id]
        state.update_count[sample_id] += 1
    return state


def dfh(state: HardnessState, sample_id: int) -> float:
    """Combined hardness: loss-history EMA plus weighted quality prior."""
    _check_index(state, sample_id)
    return float(state.dih[sample_id] + state.alpha_f * state.prior[sample_id])


def dfh_all(state: HardnessState) -> np.ndarray:
    """Vectorized :func:`dfh` over every sample."""
    return state.dih + state.alpha_f * state.prior
