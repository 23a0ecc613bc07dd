"""Scheduler suite behind a single decide() interface.

Round-robin, proportional fairness, best-CQI, and the trained Q-network
scheduler. A scheduler instance is stateful and owned by one simulation run;
``decide`` gets a :class:`~nrsched.simnr.SchedulerObservation` and returns a
user index, or None to leave the RBG idle (only the Q-network scheduler does
that, when its argmax lands outside the eligible set). Ties break toward the
lowest user index everywhere.
"""

from __future__ import annotations

import numpy as np

from nrsched import backend, nn
from nrsched.dqn import load_checkpoint
from nrsched.sandbox import compose_state, data_rate_vector, fairness_update
from nrsched.simnr import SchedulerObservation

PF_TAU_SLOTS = 100.0
PF_RATE_FLOOR = 1e-6


class Scheduler:
    """Base interface; subclasses implement decide()."""

    name = "base"

    def reset(self, n_ue: int) -> None:
        pass

    def decide(self, obs: SchedulerObservation) -> int | None:
        raise NotImplementedError

    def on_slot_end(self, delivered_bits: np.ndarray) -> None:
        pass


def _argmax_eligible(metric: np.ndarray, eligible: set[int]) -> int:
    best = None
    best_val = None
    for u in sorted(eligible):
        v = metric[u]
        if best_val is None or v > best_val:
            best, best_val = u, v
    return best


class RoundRobin(Scheduler):
    """Cyclic pointer over users; serves the first eligible user after it."""

    name = "rr"

    def __init__(self, n_ue: int):
        self.n_ue = n_ue
        self.pointer = n_ue - 1  # so the first decision starts at UE 0

    def reset(self, n_ue: int) -> None:
        self.n_ue = n_ue
        self.pointer = n_ue - 1

    def decide(self, obs: SchedulerObservation) -> int:
        if not obs.eligible:
            raise RuntimeError("round robin invoked with an empty eligible set")
        for off in range(1, self.n_ue + 1):
            cand = (self.pointer + off) % self.n_ue
            if cand in obs.eligible:
                self.pointer = cand
                return cand
        raise RuntimeError("unreachable: eligible set was non-empty")


class ProportionalFair(Scheduler):
    """argmax of achievable rate over an EWMA of delivered rate.

    The average updates once per slot from slot-aggregated delivered bits,
    not per RBG, which keeps the metric stable across the RBGs of one slot.
    """

    name = "pf"

    def __init__(self, n_ue: int, tau: float = PF_TAU_SLOTS, floor: float = PF_RATE_FLOOR):
        self.tau = tau
        self.floor = floor
        self.avg = np.zeros(n_ue)

    def reset(self, n_ue: int) -> None:
        self.avg = np.zeros(n_ue)

    def decide(self, obs: SchedulerObservation) -> int:
        if not obs.eligible:
            raise RuntimeError("pf invoked with an empty eligible set")
        metric = obs.achievable_bits / np.maximum(self.avg, self.floor)
        return _argmax_eligible(metric, obs.eligible)

    def on_slot_end(self, delivered_bits: np.ndarray) -> None:
        a = 1.0 / self.tau
        self.avg = (1.0 - a) * self.avg + a * delivered_bits


class BestCqi(Scheduler):
    """Pure opportunistic argmax of the achievable rate."""

    name = "bestcqi"

    def __init__(self, n_ue: int):
        pass

    def decide(self, obs: SchedulerObservation) -> int:
        if not obs.eligible:
            raise RuntimeError("bestcqi invoked with an empty eligible set")
        return _argmax_eligible(obs.achievable_bits, obs.eligible)


class DqnScheduler(Scheduler):
    """Greedy deployment of a trained Q-network.

    Builds the same state the network was trained on (masked normalized rate
    plus normalized allocation log), takes the argmax, and schedules it only
    if it is eligible; otherwise the RBG stays idle and the invalid counter
    increments. The allocation log evolves with the actually scheduled user.
    """

    name = "leasch"

    def __init__(self, params: nn.MlpParams, n_ue: int):
        if params.layer_dims[0] != 2 * n_ue or params.layer_dims[-1] != n_ue:
            raise ValueError(
                f"checkpoint expects {params.layer_dims[0] // 2} UEs "
                f"(dims {params.layer_dims}), cell has {n_ue}"
            )
        self.params = params
        self.n_ue = n_ue
        self.f = np.zeros(n_ue, dtype=np.int64)
        self.invalid_decisions = 0
        self.total_decisions = 0

    @classmethod
    def from_checkpoint(cls, path, n_ue: int) -> DqnScheduler:
        agent, _ = load_checkpoint(path)
        return cls(agent.online, n_ue)

    def reset(self, n_ue: int) -> None:
        if n_ue != self.n_ue:
            raise ValueError(f"scheduler built for {self.n_ue} UEs, run has {n_ue}")
        self.f = np.zeros(n_ue, dtype=np.int64)
        self.invalid_decisions = 0
        self.total_decisions = 0

    def decide(self, obs: SchedulerObservation) -> int | None:
        g = np.zeros(self.n_ue)
        for u in obs.eligible:
            g[u] = 1.0
        dhat = data_rate_vector(obs.mcs) * g
        state = compose_state(dhat, self.f)
        q = backend.forward_one(self.params.weights, self.params.biases, state)
        u = int(np.argmax(q))
        chosen = u if u in obs.eligible else None
        self.total_decisions += 1
        if chosen is None:
            self.invalid_decisions += 1
        self.f = fairness_update(self.f, chosen, obs.buffered)
        return chosen


SCHEDULER_NAMES = ("rr", "pf", "bestcqi", "leasch")


def make_scheduler(name: str, n_ue: int, params: nn.MlpParams | None = None) -> Scheduler:
    """Build a fresh scheduler by its config name."""
    if name == "rr":
        return RoundRobin(n_ue)
    if name == "pf":
        return ProportionalFair(n_ue)
    if name == "bestcqi":
        return BestCqi(n_ue)
    if name == "leasch":
        if params is None:
            raise ValueError("scheduler 'leasch' needs a checkpoint")
        return DqnScheduler(params, n_ue)
    raise ValueError(f"unknown scheduler {name!r}; valid names: {', '.join(SCHEDULER_NAMES)}")
