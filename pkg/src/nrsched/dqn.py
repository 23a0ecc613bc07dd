"""Double-DQN agent: epsilon-greedy policy, cyclic replay, DDQN targets, training step.

The agent owns an online network, a delayed target network blended toward it
every ``target_period`` training steps, and a fixed-capacity cyclic replay
buffer sampled uniformly with replacement. Episodes end by step count, so the
final transition of an episode still bootstraps (no terminal branch).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from nrsched import backend, nn

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class Transition:
    """One (state, action, reward, next_state) experience sample."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray


@dataclass
class DqnHyperparams:
    """Training hyperparameters; defaults mirror the adopted configuration."""

    lr: float = 1e-4
    gamma: float = 0.99  # assumed value, never stated alongside the other defaults
    minibatch: int = 64
    target_period: int = 20
    smoothing: float = 1e-3
    eps_start: float = 0.99
    eps_floor: float = 0.01
    eps_decay: float = 1e-4
    grad_clip: float = 1.0
    replay_capacity: int = 1_000_000

    def __post_init__(self):
        # gamma=0 (pure myopic) is permitted: it turns the TD target into the
        # plain reward, which the regression tests rely on
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 < self.smoothing <= 1.0:
            raise ValueError(f"smoothing must be in (0, 1], got {self.smoothing}")
        if self.minibatch < 1 or self.target_period < 1:
            raise ValueError("minibatch and target_period must be >= 1")
        if not 0.0 <= self.eps_floor <= self.eps_start <= 1.0:
            raise ValueError(
                f"need 0 <= eps_floor <= eps_start <= 1, got {self.eps_floor}, {self.eps_start}"
            )
        if self.lr <= 0 or self.grad_clip <= 0 or self.replay_capacity < 1:
            raise ValueError("lr, grad_clip and replay_capacity must be positive")

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "gamma": self.gamma,
            "minibatch": self.minibatch,
            "target_period": self.target_period,
            "smoothing": self.smoothing,
            "eps_start": self.eps_start,
            "eps_floor": self.eps_floor,
            "eps_decay": self.eps_decay,
            "grad_clip": self.grad_clip,
            "replay_capacity": self.replay_capacity,
        }


class ReplayBuffer:
    """Fixed-capacity cyclic queue of transitions.

    Stored as flat arrays; when full, the write cursor wraps and the oldest
    entry is overwritten (strict FIFO eviction).
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.size = 0
        self._cursor = 0
        self._states = None
        self._actions = None
        self._rewards = None
        self._next_states = None

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition) -> None:
        state = np.asarray(t.state, dtype=np.float64)
        next_state = np.asarray(t.next_state, dtype=np.float64)
        if state.ndim != 1 or state.shape != next_state.shape:
            raise ValueError("state and next_state must be 1-D vectors of equal length")
        n_actions = state.shape[0] // 2
        if not 0 <= t.action < n_actions:
            raise ValueError(f"action {t.action} out of range [0, {n_actions})")
        if not np.isfinite(t.reward):
            raise ValueError(f"reward must be finite, got {t.reward}")
        if self._states is None:
            dim = state.shape[0]
            self._states = np.empty((self.capacity, dim))
            self._next_states = np.empty((self.capacity, dim))
            self._actions = np.empty(self.capacity, dtype=np.intp)
            self._rewards = np.empty(self.capacity)
        elif state.shape[0] != self._states.shape[1]:
            raise ValueError(
                f"state length {state.shape[0]} does not match buffer ({self._states.shape[1]})"
            )
        i = self._cursor
        self._states[i] = state
        self._actions[i] = t.action
        self._rewards[i] = t.reward
        self._next_states[i] = next_state
        self._cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, m: int, rng: np.random.Generator):
        """m transitions drawn uniformly with replacement, as batch arrays."""
        if self.size == 0:
            raise RuntimeError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self.size, size=m)
        return (
            self._states[idx],
            self._actions[idx],
            self._rewards[idx],
            self._next_states[idx],
        )


def push_transition(buffer: ReplayBuffer, t: Transition) -> None:
    buffer.push(t)


def sample_minibatch(buffer: ReplayBuffer, m: int, rng: np.random.Generator):
    return buffer.sample(m, rng)


@dataclass
class Agent:
    """Online/target networks plus optimizer, replay, and exploration state."""

    online: nn.MlpParams
    target: nn.MlpParams
    opt: nn.AdamState
    replay: ReplayBuffer
    epsilon: float
    train_steps: int = 0
    seed: int = 0
    episodes_trained: int = 0

    @classmethod
    def fresh(cls, layer_dims: list[int], hp: DqnHyperparams, seed: int) -> Agent:
        online = nn.init_params(layer_dims, seed)
        return cls(
            online=online,
            target=online.copy(),
            opt=nn.AdamState.zeros_like(online),
            replay=ReplayBuffer(hp.replay_capacity),
            epsilon=hp.eps_start,
            seed=seed,
        )

    @property
    def n_actions(self) -> int:
        return self.online.layer_dims[-1]


def select_action(
    agent: Agent, state: np.ndarray, greedy: bool = False, rng: np.random.Generator | None = None
) -> int:
    """Epsilon-greedy draw: random with probability epsilon, else greedy argmax.

    Ties break toward the lowest action index (np.argmax).
    """
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (agent.online.layer_dims[0],):
        raise ValueError(
            f"state shape {state.shape} does not match network input ({agent.online.layer_dims[0]},)"
        )
    if not greedy:
        if rng is None:
            raise ValueError("non-greedy selection needs an rng")
        if rng.random() < agent.epsilon:
            return int(rng.integers(agent.n_actions))
    q = backend.forward_one(agent.online.weights, agent.online.biases, state)
    return int(np.argmax(q))


def anneal_epsilon(eps: float, delta: float, floor: float) -> float:
    """Linear decay clamped at the floor: max(eps - delta, floor)."""
    if floor < 0:
        raise ValueError(f"floor must be >= 0, got {floor}")
    return max(eps - delta, floor)


def ddqn_target(agent: Agent, t: Transition, gamma: float) -> float:
    """r + gamma * Q_target(s', argmax_a Q_online(s', a)).

    The online network selects the next action; the target network evaluates
    it. No terminal branch: every transition bootstraps.
    """
    s2 = np.asarray(t.next_state, dtype=np.float64)
    q_online = backend.forward_one(agent.online.weights, agent.online.biases, s2)
    best = int(np.argmax(q_online))
    q_target = backend.forward_one(agent.target.weights, agent.target.biases, s2)
    return float(t.reward + gamma * q_target[best])


def train_step(agent: Agent, hp: DqnHyperparams, rng: np.random.Generator) -> float:
    """One minibatch update of the online network; returns the mean squared TD error.

    Every ``target_period`` calls the target network is blended toward the
    online one.
    """
    states, actions, rewards, next_states = agent.replay.sample(hp.minibatch, rng)

    q_online_next = backend.batch_forward(agent.online.weights, agent.online.biases, next_states)
    best = np.argmax(q_online_next, axis=1)
    q_target_next = backend.batch_forward(agent.target.weights, agent.target.biases, next_states)
    targets = rewards + hp.gamma * q_target_next[np.arange(len(best)), best]

    loss, gw, gb = backend.td_backward_batch(
        agent.online.weights, agent.online.biases, states, actions, targets
    )
    grads = nn.clip_gradients(nn.Gradients(gw, gb), hp.grad_clip)
    agent.online, agent.opt = nn.adam_step(agent.online, grads, agent.opt, hp.lr)
    agent.train_steps += 1
    if agent.train_steps % hp.target_period == 0:
        agent.target = nn.soft_update(agent.online, agent.target, hp.smoothing)
    return loss


def save_checkpoint(agent: Agent, hp: DqnHyperparams, path, fingerprint: str = "") -> None:
    """Deployment checkpoint: both networks plus hyperparameters and seed lineage.

    The replay buffer is deliberately not persisted.
    """
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": "agent-checkpoint",
        "online": nn.params_to_dict(agent.online),
        "target": nn.params_to_dict(agent.target),
        "hyperparams": hp.to_dict(),
        "epsilon": agent.epsilon,
        "train_steps": agent.train_steps,
        "episodes_trained": agent.episodes_trained,
        "seed": agent.seed,
        "backend": backend.backend_name(),
        "fingerprint": fingerprint,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> tuple[Agent, DqnHyperparams]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("kind") != "agent-checkpoint" or doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"{path}: not a readable agent checkpoint")
    hp = DqnHyperparams(**doc["hyperparams"])
    agent = Agent(
        online=nn.params_from_dict(doc["online"]),
        target=nn.params_from_dict(doc["target"]),
        opt=nn.AdamState.zeros_like(nn.params_from_dict(doc["online"])),
        replay=ReplayBuffer(hp.replay_capacity),
        epsilon=float(doc["epsilon"]),
        train_steps=int(doc["train_steps"]),
        seed=int(doc.get("seed", 0)),
        episodes_trained=int(doc.get("episodes_trained", 0)),
    )
    return agent, hp
