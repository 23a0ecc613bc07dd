"""Episodic training environment for the scheduling agent.

State, reward, and the training driver. One episode is a fixed number of
scheduling decisions over synthetic dynamics: per-step Bernoulli eligibility
and a wideband MCS per user that is held for a configurable number of steps
between redraws. The environment is deliberately simpler than the full
simulator; it only has to expose the agent to the penalty signal and the
throughput/fairness trade-off.

State layout for |U| users (all components in [0, 1]):
  - dhat: per-user normalized spectral efficiency, masked to zero where the
    user is ineligible,
  - f: per-user allocation log, divided by its current maximum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nrsched import dqn, mcs


@dataclass
class SandboxConfig:
    """Environment dimensions and synthetic-dynamics knobs."""

    n_ue: int = 4
    episode_len: int = 150
    penalty: float = 1.0  # magnitude of the ineligible-selection reward
    p_elig: float = 0.7
    redraw_period: int | None = 25  # steps between MCS redraws; None holds the channel
    seed: int = 0

    def __post_init__(self):
        if self.n_ue < 1 or self.episode_len < 1:
            raise ValueError("n_ue and episode_len must be >= 1")
        if self.penalty <= 0:
            raise ValueError(f"penalty must be positive, got {self.penalty}")
        if not 0.0 < self.p_elig <= 1.0:
            raise ValueError(f"p_elig must be in (0, 1], got {self.p_elig}")
        if self.redraw_period is not None and self.redraw_period < 1:
            raise ValueError("redraw_period must be >= 1 or None")


@dataclass
class SchedState:
    """Environment state: eligibility, rates, allocation log, composed vector."""

    g: np.ndarray  # {0,1} eligibility per user
    d: np.ndarray  # normalized spectral efficiency per user
    dhat: np.ndarray  # d masked by g
    f: np.ndarray  # non-negative integer allocation log
    s: np.ndarray  # composed agent input, length 2*n_ue
    step: int = 0


def eligibility_vector(buffers, harq_busy) -> np.ndarray:
    """1 where the user has buffered data and no HARQ process in progress."""
    buffers = np.asarray(buffers, dtype=bool)
    harq_busy = np.asarray(harq_busy, dtype=bool)
    if buffers.shape != harq_busy.shape:
        raise ValueError("buffers and harq_busy must have equal length")
    return (buffers & ~harq_busy).astype(np.int8)


def data_rate_vector(mcs_indices) -> np.ndarray:
    """Per-user spectral efficiency normalized by the largest table entry."""
    idx = np.asarray(mcs_indices, dtype=np.int64)
    return np.array(
        [mcs.spectral_efficiency(int(i)) / mcs.MAX_SPECTRAL_EFFICIENCY for i in idx]
    )


def fairness_update(f, selected: int | None, buffered) -> np.ndarray:
    """Advance the allocation log by one scheduling decision.

    The selected user is decremented (floored at zero) even if buffered; other
    buffered users are incremented; everyone else is left unchanged.
    """
    f = np.asarray(f, dtype=np.int64)
    buffered = np.asarray(buffered, dtype=bool)
    out = f.copy()
    out[buffered] += 1
    if selected is not None:
        if not 0 <= selected < f.shape[0]:
            raise IndexError(f"selected user {selected} out of range [0, {f.shape[0]})")
        out[selected] = max(f[selected] - 1, 0)
    return out


def compose_state(dhat, f) -> np.ndarray:
    """Concatenate [dhat, f/max(f)] with a unit divisor guard when the log is all zero."""
    dhat = np.asarray(dhat, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    f_norm = f / max(f.max(), 1.0)
    return np.concatenate([dhat, f_norm])


def _fairness_ratio(f: np.ndarray) -> float:
    mx = int(f.max())
    if mx == 0:
        return 1.0  # empty log means nobody has been starved
    return int(f.min()) / mx


def reward(state: SchedState, action: int, k: float) -> float:
    """-k for an ineligible pick; else dhat discounted by min(f)/max(f) on the updated log."""
    if not 0 <= action < state.g.shape[0]:
        raise IndexError(f"action {action} out of range [0, {state.g.shape[0]})")
    if not state.g[action]:
        return -float(k)
    f_new = fairness_update(state.f, action, state.g)
    return float(state.dhat[action] * _fairness_ratio(f_new))


def random_initial_state(cfg: SandboxConfig, rng: np.random.Generator) -> SchedState:
    """Uniform draws across the valid ranges of every state component."""
    g = (rng.random(cfg.n_ue) < cfg.p_elig).astype(np.int8)
    d = data_rate_vector(rng.integers(0, mcs.N_VALID_MCS, cfg.n_ue))
    f = rng.integers(0, cfg.episode_len, cfg.n_ue).astype(np.int64)
    dhat = d * g
    return SchedState(g=g, d=d, dhat=dhat, f=f, s=compose_state(dhat, f), step=0)


def sandbox_step(
    state: SchedState, action: int, cfg: SandboxConfig, rng: np.random.Generator
) -> tuple[SchedState, float]:
    """Apply one decision: reward, log update, then redraw the synthetic dynamics.

    An ineligible pick selects nobody (the log still advances for buffered
    users). Eligibility is redrawn every step; the per-user MCS only at the
    configured redraw period.
    """
    eligible = bool(state.g[action])
    r = reward(state, action, cfg.penalty)
    f_new = fairness_update(state.f, action if eligible else None, state.g)

    step = state.step + 1
    g_new = (rng.random(cfg.n_ue) < cfg.p_elig).astype(np.int8)
    if cfg.redraw_period is not None and step % cfg.redraw_period == 0:
        d_new = data_rate_vector(rng.integers(0, mcs.N_VALID_MCS, cfg.n_ue))
    else:
        d_new = state.d
    dhat = d_new * g_new
    nxt = SchedState(g=g_new, d=d_new, dhat=dhat, f=f_new, s=compose_state(dhat, f_new), step=step)
    return nxt, r


@dataclass
class EpisodeStats:
    total_reward: float
    mean_reward: float
    invalid_actions: int
    final_epsilon: float
    eligible_selection_prob: float
    mean_eligible_reward: float


@dataclass
class CurvePoint:
    """One learning-curve row (per training episode)."""

    episode: int
    mean_reward: float
    moving_avg_5: float
    eligible_selection_prob: float
    mean_positive_reward: float


def run_episode(
    agent: dqn.Agent, cfg: SandboxConfig, hp: dqn.DqnHyperparams, rng: np.random.Generator
) -> EpisodeStats:
    """One training episode: fresh random state, then episode_len decide/learn steps.

    Replay memory and network weights persist on the agent across episodes.
    """
    state = random_initial_state(cfg, rng)
    total = 0.0
    invalid = 0
    eligible_reward_sum = 0.0
    eligible_count = 0
    for _ in range(cfg.episode_len):
        action = dqn.select_action(agent, state.s, greedy=False, rng=rng)
        agent.epsilon = dqn.anneal_epsilon(agent.epsilon, hp.eps_decay, hp.eps_floor)
        nxt, r = sandbox_step(state, action, cfg, rng)
        dqn.push_transition(agent.replay, dqn.Transition(state.s, action, r, nxt.s))
        dqn.train_step(agent, hp, rng)
        total += r
        if state.g[action]:
            eligible_reward_sum += r
            eligible_count += 1
        else:
            invalid += 1
        state = nxt
    agent.episodes_trained += 1
    n = cfg.episode_len
    return EpisodeStats(
        total_reward=total,
        mean_reward=total / n,
        invalid_actions=invalid,
        final_epsilon=agent.epsilon,
        eligible_selection_prob=1.0 - invalid / n,
        mean_eligible_reward=eligible_reward_sum / eligible_count if eligible_count else 0.0,
    )


def train(
    cfg: SandboxConfig,
    hp: dqn.DqnHyperparams,
    n_episodes: int = 500,
    seed: int | None = None,
    hidden: tuple[int, ...] = (128, 128),
) -> tuple[dqn.Agent, list[CurvePoint]]:
    """Train a fresh agent for n_episodes; returns the agent and the learning curve.

    The curve carries the per-episode mean reward, its trailing 5-episode
    moving average, and the two reward-decomposition series: probability of
    selecting an eligible user, and the mean reward over eligible selections.
    Fully deterministic in (cfg, hp, n_episodes, seed).
    """
    if n_episodes < 0:
        raise ValueError(f"n_episodes must be >= 0, got {n_episodes}")
    if seed is None:
        seed = cfg.seed
    layer_dims = [2 * cfg.n_ue, *hidden, cfg.n_ue]
    agent = dqn.Agent.fresh(layer_dims, hp, seed=seed)
    rng = np.random.default_rng(seed)

    curve: list[CurvePoint] = []
    recent: list[float] = []
    for ep in range(1, n_episodes + 1):
        stats = run_episode(agent, cfg, hp, rng)
        recent.append(stats.mean_reward)
        if len(recent) > 5:
            recent.pop(0)
        curve.append(
            CurvePoint(
                episode=ep,
                mean_reward=stats.mean_reward,
                moving_avg_5=sum(recent) / len(recent),
                eligible_selection_prob=stats.eligible_selection_prob,
                mean_positive_reward=stats.mean_eligible_reward,
            )
        )
    return agent, curve
