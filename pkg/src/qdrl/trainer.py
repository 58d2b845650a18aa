"""Training loop: DDPG over the grid environment with quantum networks.

Each environment step acts with the policy plus decaying Gaussian noise,
stores the transition, and (once warmup has passed) draws a minibatch,
descends the critic loss, ascends the policy objective on the configured
interval, and soft-updates both targets. Runs are deterministic per seed
and resumable: the checkpoint carries parameters, optimizer moments, the
replay buffer with its generator state, and the noise-salt counter.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .agent import (
    GRADIENT_METHODS,
    ActorConfig,
    CircuitExecutor,
    CriticConfig,
    ExplorationSpec,
    QuantumActor,
    QuantumCritic,
    ReplayBuffer,
    Transition,
    _critic_loss_given_targets,
    actor_forward,
    actor_update_gradient,
    critic_targets,
    exploration_noise,
    track_targets,
)
from .ansatz import CircuitLayout, PqcParams
from .lfc import (
    DivergenceError,
    GridParams,
    GridState,
    LfcEnv,
    Scenario,
    check_state,
    frequencies_hz,
    load_vector,
    measure_ace,
    observe_frequencies,
    rk4_step,
    substep_reward,
)
from .noise import NoiseConfig

CHECKPOINT_VERSION = 1


# ============================================================
# configuration
# ============================================================


@dataclass
class TrainerConfig:
    """Hyperparameters and schedule of the DDPG loop."""

    n_episodes: int = 200
    gamma: float = 0.99
    tau: float = 0.005
    lr_actor: float = 0.01
    lr_critic: float = 0.01
    batch_size: int = 32
    buffer_capacity: int = 10_000
    warmup_episodes: int = 20
    warmup_steps: int = 400
    warmup_mode: str = "delay_training"  # or "delay_noise"
    sigma0: float = 0.05
    noise_decay: float = 0.995
    explore: bool = True  # False reproduces the no-exploration ablation
    policy_update_interval: int = 1
    gradient_method: str = "adjoint"
    optimizer: str = "sgd"  # or "adam"
    # rewards are scaled before entering the buffer so bootstrapped values
    # stay within reach of the bounded critic readout; logs keep raw returns
    reward_scale: float = 1.0
    # a time-limit end is truncation, not a terminal state: bootstrapping
    # through it keeps the value target stationary in the observed state
    bootstrap_truncation: bool = True
    seed: int = 0
    checkpoint_every: int = 0  # episodes; 0 writes only at the end
    check_gradients_every: int = 0  # updates; 0 disables the debug check
    grad_check_tol: float = 1e-5

    def __post_init__(self):
        if self.n_episodes < 1:
            raise ValueError("n_episodes must be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if self.lr_actor < 0 or self.lr_critic < 0:
            raise ValueError("learning rates must be >= 0")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need buffer_capacity >= batch_size >= 1")
        if self.warmup_episodes < 0 or self.warmup_steps < 0:
            raise ValueError("warmup thresholds must be >= 0")
        if self.warmup_mode not in ("delay_training", "delay_noise"):
            raise ValueError(f"unknown warmup_mode {self.warmup_mode!r}")
        if self.policy_update_interval < 1:
            raise ValueError("policy_update_interval must be >= 1")
        if self.reward_scale <= 0:
            raise ValueError("reward_scale must be > 0")
        if self.gradient_method not in GRADIENT_METHODS:
            raise ValueError(f"gradient_method must be one of {GRADIENT_METHODS}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")


# ============================================================
# optimizers
# ============================================================


class Optimizer:
    """Plain gradient steps by default; adaptive moments as an option."""

    def __init__(self, kind: str, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        if kind not in ("sgd", "adam"):
            raise ValueError("kind must be 'sgd' or 'adam'")
        self.kind = kind
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.moments: dict[str, dict] = {}

    def step(self, key: str, value, grad, direction: float):
        """Return value moved along direction*grad (+1 ascent, -1 descent)."""
        value = np.asarray(value, dtype=float)
        grad = np.asarray(grad, dtype=float)
        if self.kind == "sgd":
            out = value + direction * self.lr * grad
        else:
            slot = self.moments.setdefault(
                key, {"t": 0, "m": np.zeros_like(grad), "v": np.zeros_like(grad)}
            )
            slot["t"] += 1
            slot["m"] = self.beta1 * slot["m"] + (1 - self.beta1) * grad
            slot["v"] = self.beta2 * slot["v"] + (1 - self.beta2) * grad**2
            m_hat = slot["m"] / (1 - self.beta1 ** slot["t"])
            v_hat = slot["v"] / (1 - self.beta2 ** slot["t"])
            out = value + direction * self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return float(out) if out.ndim == 0 else out

    def state_dict(self) -> dict:
        return {
            key: {"t": slot["t"], "m": slot["m"].tolist(), "v": slot["v"].tolist()}
            for key, slot in self.moments.items()
        }

    def load_state(self, state: dict) -> None:
        self.moments = {
            key: {"t": slot["t"], "m": np.asarray(slot["m"]), "v": np.asarray(slot["v"])}
            for key, slot in state.items()
        }


# ============================================================
# training log
# ============================================================

LOG_COLUMNS = (
    "episode",
    "steps",
    "return",
    "freq_min_hz",
    "freq_final_hz",
    "critic_loss_mean",
    "actor_grad_norm",
    "noise_sigma",
    "wall_ms",
)


@dataclass
class EpisodeRow:
    episode: int
    steps: int
    episode_return: float
    freq_min_hz: float
    freq_final_hz: float
    critic_loss_mean: float
    actor_grad_norm: float
    noise_sigma: float
    wall_ms: float

    def as_csv_fields(self) -> list[str]:
        return [
            str(self.episode),
            str(self.steps),
            repr(float(self.episode_return)),
            repr(float(self.freq_min_hz)),
            repr(float(self.freq_final_hz)),
            repr(float(self.critic_loss_mean)),
            repr(float(self.actor_grad_norm)),
            repr(float(self.noise_sigma)),
            repr(float(self.wall_ms)),
        ]


@dataclass
class TrainingLog:
    rows: list[EpisodeRow] = field(default_factory=list)
    status: str = "completed"

    def returns(self) -> np.ndarray:
        return np.array([r.episode_return for r in self.rows])

    def write_csv(self, path: str) -> None:
        lines = [",".join(LOG_COLUMNS)]
        lines.extend(",".join(row.as_csv_fields()) for row in self.rows)
        with open(path, "w") as handle:
            handle.write("\n".join(lines) + "\n")


def read_training_log(path: str) -> TrainingLog:
    with open(path) as handle:
        lines = [line.strip() for line in handle if line.strip()]
    if not lines or lines[0].split(",") != list(LOG_COLUMNS):
        raise ValueError(f"not a training log (expected columns {','.join(LOG_COLUMNS)})")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        rows.append(
            EpisodeRow(
                episode=int(parts[0]),
                steps=int(parts[1]),
                episode_return=float(parts[2]),
                freq_min_hz=float(parts[3]),
                freq_final_hz=float(parts[4]),
                critic_loss_mean=float(parts[5]),
                actor_grad_norm=float(parts[6]),
                noise_sigma=float(parts[7]),
                wall_ms=float(parts[8]),
            )
        )
    return TrainingLog(rows=rows)


# ============================================================
# checkpointing
# ============================================================


def save_checkpoint(path: str, payload: dict) -> None:
    """Serialize atomically: write a sibling temp file, then rename over."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            json.dump(payload, handle)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def load_checkpoint(path: str) -> dict:
    with open(path) as handle:
        payload = json.load(handle)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')!r}")
    return payload


def _actor_to_dict(actor: QuantumActor) -> dict:
    return {
        "layout": actor.layout.to_dict(),
        "params": actor.params.to_vector().tolist(),
        "action_scale": actor.action_scale,
        "action_bias": actor.action_bias,
        "norm_const": actor.norm_const,
        "output_mode": actor.output_mode,
    }


def _actor_from_dict(blob: dict) -> QuantumActor:
    layout = CircuitLayout.from_dict(blob["layout"])
    return QuantumActor(
        layout=layout,
        params=PqcParams.from_vector(layout, np.asarray(blob["params"])),
        action_scale=blob["action_scale"],
        action_bias=blob["action_bias"],
        norm_const=blob["norm_const"],
        output_mode=blob["output_mode"],
    )


def _critic_to_dict(critic: QuantumCritic) -> dict:
    return {
        "layout": critic.layout.to_dict(),
        "params": critic.params.to_vector().tolist(),
        "w_out": critic.w_out,
        "b_out": critic.b_out,
    }


def _critic_from_dict(blob: dict) -> QuantumCritic:
    layout = CircuitLayout.from_dict(blob["layout"])
    return QuantumCritic(
        layout=layout,
        params=PqcParams.from_vector(layout, np.asarray(blob["params"])),
        w_out=blob["w_out"],
        b_out=blob["b_out"],
    )


def _buffer_to_dict(buffer: ReplayBuffer) -> dict:
    keep = buffer.capacity if buffer.size == buffer.capacity else buffer.size
    return {
        "capacity": buffer.capacity,
        "head": buffer.head,
        "size": buffer.size,
        "states": buffer.states[:keep].tolist(),
        "actions": buffer.actions[:keep].tolist(),
        "rewards": buffer.rewards[:keep].tolist(),
        "next_states": buffer.next_states[:keep].tolist(),
        "dones": buffer.dones[:keep].tolist(),
        "rng_state": buffer.rng.bit_generator.state,
    }


def _buffer_from_dict(blob: dict, state_dim: int, action_dim: int) -> ReplayBuffer:
    buffer = ReplayBuffer(blob["capacity"], state_dim, action_dim)
    keep = len(blob["rewards"])
    buffer.states[:keep] = np.asarray(blob["states"])
    buffer.actions[:keep] = np.asarray(blob["actions"])
    buffer.rewards[:keep] = np.asarray(blob["rewards"])
    buffer.next_states[:keep] = np.asarray(blob["next_states"])
    buffer.dones[:keep] = np.asarray(blob["dones"])
    buffer.head = blob["head"]
    buffer.size = blob["size"]
    buffer.rng.bit_generator.state = blob["rng_state"]
    return buffer


# ============================================================
# debug gradient cross-check
# ============================================================


def fd_critic_loss_grads(batch, critic: QuantumCritic, y: np.ndarray, eps: float = 1e-6) -> dict:
    """Finite-difference oracle for the critic loss gradients (fixed targets)."""

    def loss_at(params_vec, w, b):
        probe = QuantumCritic(
            layout=critic.layout,
            params=PqcParams.from_vector(critic.layout, params_vec),
            w_out=w,
            b_out=b,
        )
        loss, _ = _critic_loss_given_targets(batch, probe, y)
        return loss

    base = critic.params.to_vector()
    grad_params = np.zeros_like(base)
    for i in range(base.shape[0]):
        delta = np.zeros_like(base)
        delta[i] = eps
        grad_params[i] = (
            loss_at(base + delta, critic.w_out, critic.b_out)
            - loss_at(base - delta, critic.w_out, critic.b_out)
        ) / (2 * eps)
    grad_w = (
        loss_at(base, critic.w_out + eps, critic.b_out)
        - loss_at(base, critic.w_out - eps, critic.b_out)
    ) / (2 * eps)
    grad_b = (
        loss_at(base, critic.w_out, critic.b_out + eps)
        - loss_at(base, critic.w_out, critic.b_out - eps)
    ) / (2 * eps)
    return {"params": grad_params, "w_out": grad_w, "b_out": grad_b}


def _verify_critic_grads(batch, critic, y, analytic: dict, tol: float) -> None:
    oracle = fd_critic_loss_grads(batch, critic, y)
    flat_a = np.concatenate([analytic["params"], [analytic["w_out"], analytic["b_out"]]])
    flat_o = np.concatenate([oracle["params"], [oracle["w_out"], oracle["b_out"]]])
    scale = max(1e-8, float(np.abs(flat_o).max()))
    worst = float(np.abs(flat_a - flat_o).max()) / scale
    if worst > tol:
        raise RuntimeError(f"critic gradient check failed: relative error {worst:.3e} > {tol:.1e}")


# ============================================================
# training loop
# ============================================================


@dataclass
class TrainResult:
    log: TrainingLog
    checkpoint: dict
    actor: QuantumActor
    critic: QuantumCritic
    status: str = "completed"
    error: str | None = None


def _updates_allowed(config: TrainerConfig, episode: int, total_steps: int) -> bool:
    if config.warmup_mode == "delay_training":
        return episode >= config.warmup_episodes and total_steps >= config.warmup_steps
    return True


def _noise_delayed(config: TrainerConfig, episode: int, total_steps: int) -> bool:
    return config.warmup_mode == "delay_noise" and not (
        episode >= config.warmup_episodes and total_steps >= config.warmup_steps
    )


def train(
    env: LfcEnv,
    config: TrainerConfig,
    actor_config: ActorConfig | None = None,
    critic_config: CriticConfig | None = None,
    noise: NoiseConfig | None = None,
    resume: dict | None = None,
    checkpoint_path: str | None = None,
    config_fingerprint: str = "",
) -> TrainResult:
    """Run (or resume) DDPG training; deterministic per seed."""
    actor_config = actor_config or ActorConfig()
    critic_config = critic_config or CriticConfig()
    n_obs, n_act = env.n_observations, env.n_actions
    executor = CircuitExecutor(method=config.gradient_method, noise=noise)
    explore_spec = ExplorationSpec(
        sigma0=config.sigma0, decay=config.noise_decay, seed=config.seed, enabled=config.explore
    )

    if resume is not None:
        actor = _actor_from_dict(resume["actor"])
        critic = _critic_from_dict(resume["critic"])
        target_actor = _actor_from_dict(resume["actor"])
        target_actor.params = PqcParams.from_vector(
            target_actor.layout, np.asarray(resume["targets"]["actor_params"])
        )
        target_critic = _critic_from_dict(resume["critic"])
        target_critic.params = PqcParams.from_vector(
            target_critic.layout, np.asarray(resume["targets"]["critic_params"])
        )
        target_critic.w_out = resume["targets"]["critic_w_out"]
        target_critic.b_out = resume["targets"]["critic_b_out"]
        buffer = _buffer_from_dict(resume["replay"], n_obs, n_act)
        start_episode = resume["episode"]
        total_steps = resume["total_steps"]
        update_counter = resume["update_counter"]
        executor.salt_counter = resume["salt_counter"]
    else:
        actor = QuantumActor.build(n_obs, actor_config, (config.seed, 1))
        critic = QuantumCritic.build(n_obs, n_act, critic_config, (config.seed, 2))
        target_actor = actor.copy()
        target_critic = critic.copy()
        buffer = ReplayBuffer(config.buffer_capacity, n_obs, n_act, seed=(config.seed, 3))
        start_episode = 0
        total_steps = 0
        update_counter = 0

    actor_opt = Optimizer(config.optimizer, config.lr_actor)
    critic_opt = Optimizer(config.optimizer, config.lr_critic)
    if resume is not None:
        actor_opt.load_state(resume["optimizer_state"]["actor"])
        critic_opt.load_state(resume["optimizer_state"]["critic"])

    def snapshot(next_episode: int) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "config_fingerprint": config_fingerprint,
            "trainer_config": asdict(config),
            "actor": _actor_to_dict(actor),
            "critic": _critic_to_dict(critic),
            "targets": {
                "actor_params": target_actor.params.to_vector().tolist(),
                "critic_params": target_critic.params.to_vector().tolist(),
                "critic_w_out": target_critic.w_out,
                "critic_b_out": target_critic.b_out,
            },
            "optimizer_state": {
                "actor": actor_opt.state_dict(),
                "critic": critic_opt.state_dict(),
            },
            "episode": next_episode,
            "total_steps": total_steps,
            "update_counter": update_counter,
            "salt_counter": executor.salt_counter,
            "replay": _buffer_to_dict(buffer),
        }

    log = TrainingLog()
    status = "completed"
    error = None

    if start_episode >= config.n_episodes:
        final = snapshot(start_episode)
        if checkpoint_path:
            save_checkpoint(checkpoint_path, final)
        return TrainResult(log=log, checkpoint=final, actor=actor, critic=critic)

    for episode in range(start_episode, config.n_episodes):
        wall_start = time.perf_counter()
        obs = env.reset()
        step = -1
        episode_return = 0.0
        freq_min = math.inf
        freq_final = env.params.base_frequency_hz
        critic_losses: list[float] = []
        actor_norms: list[float] = []
        sigma = 0.0 if _noise_delayed(config, episode, total_steps) else explore_spec.sigma(episode)
        try:
            for step in range(env.steps_per_episode):
                action = actor_forward(actor, obs, executor)
                if sigma > 0.0:
                    action = action + exploration_noise(explore_spec, episode, step, n_act)
                action = np.clip(action, -env.action_limit, env.action_limit)
                next_obs, reward, done, info = env.step(action)
                stored_done = done and not config.bootstrap_truncation
                buffer.push(
                    Transition(obs, action, reward * config.reward_scale, next_obs, stored_done)
                )
                episode_return += reward
                freq_min = min(freq_min, info["freq_min_hz"])
                freq_final = float(info["freq_hz"].mean())
                total_steps += 1
                if _updates_allowed(config, episode, total_steps) and buffer.ready(config.batch_size):
                    batch = buffer.sample(config.batch_size)
                    y = critic_targets(batch, target_actor, target_critic, config.gamma, executor)
                    loss, grads = _critic_loss_given_targets(batch, critic, y, executor)
                    if (
                        config.check_gradients_every > 0
                        and update_counter % config.check_gradients_every == 0
                        and not executor.noise_active
                    ):
                        _verify_critic_grads(batch, critic, y, grads, config.grad_check_tol)
                    critic.params = PqcParams.from_vector(
                        critic.layout,
                        critic_opt.step("critic.params", critic.params.to_vector(), grads["params"], -1.0),
                    )
                    critic.w_out = critic_opt.step("critic.w_out", critic.w_out, grads["w_out"], -1.0)
                    critic.b_out = critic_opt.step("critic.b_out", critic.b_out, grads["b_out"], -1.0)
                    critic_losses.append(loss)
                    update_counter += 1
                    if update_counter % config.policy_update_interval == 0:
                        ascent = actor_update_gradient(batch.states, actor, critic, executor)
                        actor.params = PqcParams.from_vector(
                            actor.layout,
                            actor_opt.step("actor.params", actor.params.to_vector(), ascent, +1.0),
                        )
                        actor_norms.append(float(np.linalg.norm(ascent)))
                    track_targets(target_actor, actor, target_critic, critic, config.tau)
                obs = next_obs
                if done:
                    break
        except DivergenceError as exc:
            status = "diverged"
            error = str(exc)
        wall_ms = (time.perf_counter() - wall_start) * 1000.0
        log.rows.append(
            EpisodeRow(
                episode=episode,
                steps=step + 1,
                episode_return=episode_return,
                freq_min_hz=freq_min if freq_min < math.inf else env.params.base_frequency_hz,
                freq_final_hz=freq_final,
                critic_loss_mean=float(np.mean(critic_losses)) if critic_losses else math.nan,
                actor_grad_norm=float(np.mean(actor_norms)) if actor_norms else math.nan,
                noise_sigma=sigma,
                wall_ms=wall_ms,
            )
        )
        if status == "diverged":
            break
        if (
            checkpoint_path
            and config.checkpoint_every > 0
            and (episode + 1) % config.checkpoint_every == 0
        ):
            save_checkpoint(checkpoint_path, snapshot(episode + 1))

    log.status = status
    final = snapshot(episode + 1 if status == "completed" else episode)
    if checkpoint_path:
        save_checkpoint(checkpoint_path, final)
    return TrainResult(log=log, checkpoint=final, actor=actor, critic=critic, status=status, error=error)


# ============================================================
# greedy evaluation
# ============================================================


@dataclass
class EvalResult:
    """Substep-resolution trajectory of a deterministic noise-free rollout."""

    time_s: np.ndarray
    freq_hz: np.ndarray
    ace_pu: np.ndarray
    command_pu: np.ndarray
    actions_pu: np.ndarray
    reward: np.ndarray
    episode_return: float

    @property
    def nadir_hz(self) -> float:
        return float(self.freq_hz.min())

    @property
    def final_freq_hz(self) -> float:
        return float(self.freq_hz[-1].mean())

    @property
    def final_max_dev_hz(self) -> float:
        return float(np.abs(self.freq_hz[-1] - 60.0).max())


def evaluate_policy(params: GridParams, scenario: Scenario, actor: QuantumActor, action_limit: float = 0.5) -> EvalResult:
    """Greedy noise-free rollout recorded at substep resolution."""
    state = GridState.zeros(params.n_generators)
    n_steps = int(round(scenario.length_s / params.dt))
    per = params.substeps_per_control
    n = params.n_generators
    times = [0.0]
    freqs = [frequencies_hz(params, state)]
    aces = [0.0]
    commands = [0.0]
    actions = [np.zeros(n)]
    rewards = [0.0]
    ref = np.zeros(n)
    step_rewards: list[float] = []
    step_acc = 0.0
    for k in range(n_steps):
        if k % per == 0:
            obs = observe_frequencies(params, state)
            ref = np.clip(actor_forward(actor, obs), -action_limit, action_limit)
            step_acc = 0.0
        load = load_vector(scenario, params, state.time)
        state = rk4_step(params, state, load, ref)
        check_state(state)
        r = substep_reward(params, state, ref)
        step_acc += r
        if (k + 1) % per == 0:
            step_rewards.append(step_acc / per)
        times.append(state.time)
        freqs.append(frequencies_hz(params, state))
        aces.append(measure_ace(params, state))
        commands.append(float(ref.sum()))
        actions.append(ref.copy())
        rewards.append(r)
    return EvalResult(
        time_s=np.array(times),
        freq_hz=np.array(freqs),
        ace_pu=np.array(aces),
        command_pu=np.array(commands),
        actions_pu=np.array(actions),
        reward=np.array(rewards),
        episode_return=float(np.sum(step_rewards)),
    )
