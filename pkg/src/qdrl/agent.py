"""Quantum DDPG building blocks: actor/critic circuits, update gradients,
replay memory, exploration noise, and soft target tracking.

The actor drives one circuit per decision: observations enter through the
encoding wires, Z expectations on every wire pass through a scaled tanh
to become bounded per-generator setpoints. The critic encodes the
state-action concatenation and reads a single X expectation, affinely
mapped to a Q value. Both updates assemble analytic chain rules around
the circuit-gradient engines, so the same code path serves exact
statevector training and shot-based noisy training.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .ansatz import CircuitLayout, InitSpec, PqcParams, build_layout, evaluate, init_params
from .gradients import (
    GradientMethodError,
    grad_adjoint,
    grad_finite_difference,
    grad_input,
    grad_parameter_shift,
)
from .noise import NoiseConfig, noisy_evaluate

_EXPLORE_TAG = 2029  # keys the exploration stream apart from noise-model streams

GRADIENT_METHODS = ("adjoint", "parameter-shift", "finite-diff")


# ============================================================
# circuit execution with method and noise dispatch
# ============================================================


@dataclass
class CircuitExecutor:
    """Routes expectation and gradient calls through one gradient method
    and an optional noise model.

    Under an active noise model every call consumes one salt from a
    monotone counter, so repeated evaluations draw fresh shot noise while
    the whole sequence stays reproducible (and resumable by restoring the
    counter). The noiseless path ignores salts entirely.
    """

    method: str = "adjoint"
    noise: NoiseConfig | None = None
    salt_counter: int = 0

    def __post_init__(self):
        if self.method not in GRADIENT_METHODS:
            raise ValueError(f"method must be one of {GRADIENT_METHODS}, got {self.method!r}")
        if self.method == "adjoint" and self.noise_active:
            # reject at construction so a doomed run fails before the
            # warmup episodes are spent, not at the first update
            raise GradientMethodError(
                "adjoint differentiation needs exact statevector evaluation; "
                "disable the noise model or use parameter-shift"
            )

    @property
    def noise_active(self) -> bool:
        return self.noise is not None and self.noise.is_active()

    def _next_salt(self) -> tuple[int, ...]:
        self.salt_counter += 1
        return (self.salt_counter,)

    def expectations(self, layout: CircuitLayout, params: PqcParams, x) -> np.ndarray:
        if self.noise_active:
            return noisy_evaluate(layout, params, x, self.noise, salt=self._next_salt())
        return evaluate(layout, params, x)

    def param_grads(self, layout: CircuitLayout, params: PqcParams, x) -> np.ndarray:
        return self._grads(layout, params, x, "parameters")

    def input_grads(self, layout: CircuitLayout, params: PqcParams, x) -> np.ndarray:
        return self._grads(layout, params, x, "inputs")

    def _grads(self, layout, params, x, wrt):
        if not self.noise_active:
            # noiselessly the shift rule and the adjoint pass compute the
            # same derivative; the adjoint sweep is the cheaper evaluation
            if self.method in ("adjoint", "parameter-shift"):
                return grad_adjoint(layout, params, x, wrt=wrt)
            return grad_finite_difference(layout, params, x, wrt=wrt)
        salt = self._next_salt()
        if self.method == "parameter-shift":
            if wrt == "parameters":
                return grad_parameter_shift(layout, params, x, noise=self.noise, salt=salt)
            return grad_input(layout, params, x, noise=self.noise, salt=salt)
        if self.method == "finite-diff":
            return grad_finite_difference(layout, params, x, wrt=wrt, noise=self.noise, salt=salt)
        # adjoint needs the pure statevector; fail loudly per contract
        return grad_adjoint(layout, params, x, wrt=wrt, noise=self.noise)


EXACT_EXECUTOR = CircuitExecutor()


# ============================================================
# actor
# ============================================================


@dataclass
class ActorConfig:
    """Hyperparameters of the policy circuit and its output map."""

    n_layers: int = 2
    # ring: a chain-only block leaves single-qubit observables blind to
    # most wires at shallow depth (the cone grows one wire per layer)
    entangle: str = "ring"
    action_scale: float = 0.5
    action_bias: float = 0.0
    norm_const: float | None = None  # None means the action dimension
    output_mode: str = "per-wire"  # or "scalar": one tanh over summed Z
    init_angle_range: float = np.pi / 8
    # equator start: at the |0...0> pole every <Z> is ~1, so the fresh
    # policy saturates positive and d<Z>/dtheta ~ 0 stalls learning
    init_final_y_center: float = np.pi / 2

    def __post_init__(self):
        if self.action_scale <= 0:
            raise ValueError("action_scale must be > 0")
        if self.norm_const is not None and self.norm_const <= 0:
            raise ValueError("norm_const must be > 0")
        if self.output_mode not in ("per-wire", "scalar"):
            raise ValueError(f"output_mode must be 'per-wire' or 'scalar', got {self.output_mode!r}")


@dataclass
class QuantumActor:
    """Policy: PQC over the observation wires with a bounded tanh readout."""

    layout: CircuitLayout
    params: PqcParams
    action_scale: float
    action_bias: float
    norm_const: float
    output_mode: str = "per-wire"

    @classmethod
    def build(cls, n_observations: int, config: ActorConfig, seed) -> "QuantumActor":
        layout = build_layout(
            n_qubits=n_observations,
            n_inputs=n_observations,
            n_layers=config.n_layers,
            entangle=config.entangle,
            observables=tuple(("z", q) for q in range(n_observations)),
        )
        params = init_params(
            layout,
            seed,
            InitSpec(
                angle_range=config.init_angle_range,
                final_y_center=config.init_final_y_center,
            ),
        )
        norm = config.norm_const if config.norm_const is not None else float(n_observations)
        return cls(
            layout=layout,
            params=params,
            action_scale=config.action_scale,
            action_bias=config.action_bias,
            norm_const=norm,
            output_mode=config.output_mode,
        )

    @property
    def n_actions(self) -> int:
        return self.layout.n_observables

    def copy(self) -> "QuantumActor":
        return replace(self, params=self.params.copy())

    def pre_activation(self, z: np.ndarray) -> np.ndarray:
        """Tanh argument per action wire from the Z expectations."""
        n_a = self.n_actions
        if self.output_mode == "scalar":
            u = z.sum(axis=-1, keepdims=True) / self.norm_const
            return np.broadcast_to(u, z.shape).copy()
        return z * (n_a / self.norm_const)

    def post_process(self, z: np.ndarray) -> np.ndarray:
        return self.action_scale * np.tanh(self.pre_activation(z)) + self.action_bias


def actor_forward(actor: QuantumActor, observation, executor: CircuitExecutor = EXACT_EXECUTOR) -> np.ndarray:
    """Bounded action vector for one observation or a batch of them."""
    z = executor.expectations(actor.layout, actor.params, observation)
    return actor.post_process(z)


# ============================================================
# critic
# ============================================================


@dataclass
class CriticConfig:
    """Hyperparameters of the value circuit and its affine readout."""

    n_layers: int = 2
    # ring keeps the X readout on qubit 0 sensitive to the action wires;
    # with a bare chain dQ/da is structurally zero below ~n_obs layers
    entangle: str = "ring"
    w_out: float = 1.0
    b_out: float = 0.0
    init_angle_range: float = np.pi / 8


@dataclass
class QuantumCritic:
    """Q function: PQC over the state-action wires, affine X readout."""

    layout: CircuitLayout
    params: PqcParams
    w_out: float
    b_out: float

    @classmethod
    def build(cls, n_observations: int, n_actions: int, config: CriticConfig, seed) -> "QuantumCritic":
        n = n_observations + n_actions
        layout = build_layout(
            n_qubits=n,
            n_inputs=n,
            n_layers=config.n_layers,
            entangle=config.entangle,
            observables=(("x", 0),),
        )
        params = init_params(layout, seed, InitSpec(angle_range=config.init_angle_range))
        return cls(layout=layout, params=params, w_out=config.w_out, b_out=config.b_out)

    def copy(self) -> "QuantumCritic":
        return replace(self, params=self.params.copy())


def critic_forward(
    critic: QuantumCritic,
    observation,
    action,
    executor: CircuitExecutor = EXACT_EXECUTOR,
) -> np.ndarray | float:
    """Q(s, a) from the state-action concatenation; scalar or (B,)."""
    obs = np.asarray(observation, dtype=float)
    act = np.asarray(action, dtype=float)
    x = np.concatenate([obs, act], axis=-1)
    expect = executor.expectations(critic.layout, critic.params, x)
    q = critic.w_out * expect[..., 0] + critic.b_out
    return float(q) if q.ndim == 0 else q


# ============================================================
# replay memory
# ============================================================


@dataclass(frozen=True)
class Transition:
    """One experience tuple."""

    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass
class TransitionBatch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray  # float 0/1 mask

    @property
    def size(self) -> int:
        return self.states.shape[0]


class ReplayBuffer:
    """Bounded FIFO of transitions with seeded uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int, seed=0):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self.head = 0  # next write slot; FIFO eviction once full
        self.size = 0
        self.rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return self.size

    def push(self, transition: Transition) -> None:
        state = np.asarray(transition.state, dtype=float)
        action = np.asarray(transition.action, dtype=float)
        next_state = np.asarray(transition.next_state, dtype=float)
        if state.shape != (self.state_dim,) or next_state.shape != (self.state_dim,):
            raise ValueError(f"state vectors must have shape ({self.state_dim},)")
        if action.shape != (self.action_dim,):
            raise ValueError(f"action must have shape ({self.action_dim},)")
        i = self.head
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = float(transition.reward)
        self.next_states[i] = next_state
        self.dones[i] = 1.0 if transition.done else 0.0
        self.head = (self.head + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def ready(self, batch_size: int) -> bool:
        return self.size >= batch_size

    def sample(self, batch_size: int) -> TransitionBatch:
        if not self.ready(batch_size):
            raise ValueError(f"buffer holds {self.size} < batch_size {batch_size}")
        idx = self.rng.choice(self.size, size=batch_size, replace=False)
        return TransitionBatch(
            states=self.states[idx].copy(),
            actions=self.actions[idx].copy(),
            rewards=self.rewards[idx].copy(),
            next_states=self.next_states[idx].copy(),
            dones=self.dones[idx].copy(),
        )


# ============================================================
# exploration
# ============================================================


@dataclass(frozen=True)
class ExplorationSpec:
    """Decaying Gaussian action noise, stateless per (seed, episode, step)."""

    sigma0: float = 0.05
    decay: float = 0.995
    seed: int = 0
    enabled: bool = True

    def __post_init__(self):
        if self.sigma0 < 0:
            raise ValueError("sigma0 must be >= 0")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must be in (0, 1]")

    def sigma(self, episode: int) -> float:
        if not self.enabled:
            return 0.0
        return self.sigma0 * self.decay**episode


def exploration_noise(spec: ExplorationSpec, episode: int, step: int, n_actions: int) -> np.ndarray:
    """Zero-mean Gaussian draw, reproducible per (seed, episode, step)."""
    sigma = spec.sigma(episode)
    if sigma == 0.0:
        return np.zeros(n_actions)
    rng = np.random.default_rng((spec.seed, _EXPLORE_TAG, episode, step))
    return sigma * rng.standard_normal(n_actions)


# ============================================================
# update gradients
# ============================================================


def critic_targets(
    batch: TransitionBatch,
    target_actor: QuantumActor,
    target_critic: QuantumCritic,
    gamma: float,
    executor: CircuitExecutor = EXACT_EXECUTOR,
) -> np.ndarray:
    """Bootstrapped regression targets y = r + gamma (1 - done) Q'(s', mu'(s'))."""
    next_actions = actor_forward(target_actor, batch.next_states, executor)
    next_q = critic_forward(target_critic, batch.next_states, next_actions, executor)
    return batch.rewards + gamma * (1.0 - batch.dones) * next_q


def critic_loss(
    batch: TransitionBatch,
    critic: QuantumCritic,
    target_actor: QuantumActor,
    target_critic: QuantumCritic,
    gamma: float,
    executor: CircuitExecutor = EXACT_EXECUTOR,
) -> tuple[float, dict]:
    """Mean squared Bellman error and its analytic gradients.

    Targets are constants (no gradient flows through the target networks);
    the circuit-parameter gradient is 2 (Q - y) w_out dX0/dtheta averaged
    over the batch, with closed-form w_out and b_out derivatives.
    """
    if batch.size == 0:
        raise ValueError("batch must be nonempty")
    y = critic_targets(batch, target_actor, target_critic, gamma, executor)
    return _critic_loss_given_targets(batch, critic, y, executor)


def _critic_loss_given_targets(
    batch: TransitionBatch,
    critic: QuantumCritic,
    y: np.ndarray,
    executor: CircuitExecutor = EXACT_EXECUTOR,
) -> tuple[float, dict]:
    x = np.concatenate([batch.states, batch.actions], axis=1)
    expect = executor.expectations(critic.layout, critic.params, x)[:, 0]
    q = critic.w_out * expect + critic.b_out
    err = q - y
    loss = float(err @ err) / batch.size
    grads_x0 = executor.param_grads(critic.layout, critic.params, x)[:, 0, :]  # (B, P)
    coeff = 2.0 * err / batch.size
    grads = {
        "params": critic.w_out * (coeff @ grads_x0),
        "w_out": float(coeff @ expect),
        "b_out": float(coeff.sum()),
    }
    return loss, grads


def actor_update_gradient(
    states: np.ndarray,
    actor: QuantumActor,
    critic: QuantumCritic,
    executor: CircuitExecutor = EXACT_EXECUTOR,
) -> np.ndarray:
    """Ascent gradient of J = mean_b Q(s_b, mu(s_b)) w.r.t. actor parameters.

    Chain: dQ/da from the critic's action-wire input gradients, da/dZ from
    the tanh output map, dZ/dtheta from the actor circuit.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.shape[0] == 0:
        raise ValueError("states batch must be nonempty")
    n_a = actor.n_actions
    z = executor.expectations(actor.layout, actor.params, states)  # (B, n_a)
    actions = actor.post_process(z)
    x = np.concatenate([states, actions], axis=1)
    dx = executor.input_grads(critic.layout, critic.params, x)[:, 0, :]  # (B, n_obs + n_a)
    dq_da = critic.w_out * dx[:, states.shape[1] :]  # (B, n_a)
    u = actor.pre_activation(z)
    sech2 = 1.0 - np.tanh(u) ** 2
    z_grads = executor.param_grads(actor.layout, actor.params, states)  # (B, n_a, P)
    if actor.output_mode == "scalar":
        # every wire shares one tanh of the summed expectations
        outer = (dq_da.sum(axis=1)) * actor.action_scale * sech2[:, 0] / actor.norm_const
        chain = outer[:, None] * z_grads.sum(axis=1)  # (B, P)
    else:
        coeff = dq_da * actor.action_scale * (n_a / actor.norm_const) * sech2  # (B, n_a)
        chain = np.einsum("bj,bjp->bp", coeff, z_grads)
    return chain.mean(axis=0)


def soft_update(target_params, main_params, tau: float):
    """Componentwise convex combination tau*main + (1-tau)*target."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    target = np.asarray(target_params, dtype=float)
    main = np.asarray(main_params, dtype=float)
    if target.shape != main.shape:
        raise ValueError(f"shape mismatch: {target.shape} vs {main.shape}")
    out = tau * main + (1.0 - tau) * target
    return float(out) if out.ndim == 0 else out


def track_targets(
    target_actor: QuantumActor,
    actor: QuantumActor,
    target_critic: QuantumCritic,
    critic: QuantumCritic,
    tau: float,
) -> None:
    """Soft-update both target networks in place."""
    target_actor.params = PqcParams.from_vector(
        target_actor.layout,
        soft_update(target_actor.params.to_vector(), actor.params.to_vector(), tau),
    )
    target_critic.params = PqcParams.from_vector(
        target_critic.layout,
        soft_update(target_critic.params.to_vector(), critic.params.to_vector(), tau),
    )
    target_critic.w_out = soft_update(target_critic.w_out, critic.w_out, tau)
    target_critic.b_out = soft_update(target_critic.b_out, critic.b_out, tau)
