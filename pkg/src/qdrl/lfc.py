"""Reduced-order multi-machine load-frequency control testbed.

Each generator carries four states: rotor angle (rad), speed deviation
(pu), turbine mechanical power (pu) and governor valve position (pu).
Machines exchange synchronizing power through a symmetric stiffness
matrix, loads enter as power injections at a bus, and a speed-droop
governor plus first-order turbine close the primary loop:

    d angle/dt = 2 pi f0 * speed
    2 H d speed/dt = mech - elec - D * speed
    T_t d mech/dt = valve - mech
    T_g d valve/dt = ref - speed / R - valve

with elec = L @ angle + load, L the graph Laplacian of the coupling
matrix. Integration is fixed-step RK4 with load and reference command
held constant over each step (zero-order hold).

Secondary control measures an area control error from the tie-line
deviation and scaled frequency deviation; `run_pi_baseline` closes a
sampled PI loop around it, and `LfcEnv` exposes the same plant at the
control interval for learning agents that command per-generator
setpoints directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FREQ_DEV_SCALE = 0.1  # ACE frequency input is per-unit deviation / 0.1


class DivergenceError(RuntimeError):
    """Simulation left its validity domain (non-finite or |speed| > 1 pu)."""

    def __init__(self, message: str, state: "GridState"):
        super().__init__(message)
        self.state = state


# ============================================================
# parameters and state
# ============================================================


def ring_coupling(n_generators: int, stiffness: float) -> np.ndarray:
    """Symmetric coupling matrix with each machine tied to its ring neighbors."""
    coupling = np.zeros((n_generators, n_generators))
    for i in range(n_generators):
        j = (i + 1) % n_generators
        if i != j:
            coupling[i, j] = stiffness
            coupling[j, i] = stiffness
    return coupling


def _as_positive_vector(name: str, value, n: int, minimum=0.0, strict=True) -> np.ndarray:
    vec = np.asarray(value, dtype=float)
    if vec.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{name} must be finite")
    if strict and np.any(vec <= minimum):
        raise ValueError(f"{name} must be > {minimum}")
    if not strict and np.any(vec < minimum):
        raise ValueError(f"{name} must be >= {minimum}")
    return vec


@dataclass(frozen=True)
class GridParams:
    """Physical constants of the multi-machine system plus control timing."""

    inertia: np.ndarray
    damping: np.ndarray
    droop: np.ndarray
    governor_tc: np.ndarray
    turbine_tc: np.ndarray
    coupling: np.ndarray
    participation: np.ndarray
    frequency_bias: float = 0.05
    base_frequency_hz: float = 60.0
    dt: float = 0.01
    control_interval_s: float = 0.5
    area_a: tuple[int, ...] = (0, 1, 2)
    area_b: tuple[int, ...] = (3, 4)
    tie_coeff: float = 0.1

    def __post_init__(self):
        n = np.asarray(self.inertia).shape[0] if np.asarray(self.inertia).ndim == 1 else 0
        if n == 0:
            raise ValueError("inertia must be a 1-D vector with at least one machine")
        object.__setattr__(self, "inertia", _as_positive_vector("inertia", self.inertia, n))
        object.__setattr__(self, "damping", _as_positive_vector("damping", self.damping, n, strict=False))
        object.__setattr__(self, "droop", _as_positive_vector("droop", self.droop, n))
        object.__setattr__(self, "governor_tc", _as_positive_vector("governor_tc", self.governor_tc, n))
        object.__setattr__(self, "turbine_tc", _as_positive_vector("turbine_tc", self.turbine_tc, n))
        coupling = np.asarray(self.coupling, dtype=float)
        if coupling.shape != (n, n):
            raise ValueError(f"coupling must have shape ({n}, {n}), got {coupling.shape}")
        if not np.all(np.isfinite(coupling)):
            raise ValueError("coupling must be finite")
        if not np.allclose(coupling, coupling.T, atol=0.0):
            raise ValueError("coupling must be symmetric")
        if np.any(np.diag(coupling) != 0.0):
            raise ValueError("coupling diagonal must be zero")
        object.__setattr__(self, "coupling", coupling)
        part = _as_positive_vector("participation", self.participation, n, strict=False)
        if abs(part.sum() - 1.0) > 1e-9:
            raise ValueError(f"participation must sum to 1, got {part.sum()}")
        object.__setattr__(self, "participation", part)
        if not 0.0 <= self.frequency_bias:
            raise ValueError("frequency_bias must be >= 0")
        if self.base_frequency_hz <= 0:
            raise ValueError("base_frequency_hz must be > 0")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        ratio = self.control_interval_s / self.dt
        if self.control_interval_s < self.dt or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("control_interval_s must be a whole number of substeps")
        seen = tuple(sorted(self.area_a + self.area_b))
        if seen != tuple(range(n)) or not self.area_a or not self.area_b:
            raise ValueError("area_a and area_b must partition the generators")
        object.__setattr__(self, "area_a", tuple(int(i) for i in self.area_a))
        object.__setattr__(self, "area_b", tuple(int(i) for i in self.area_b))

    @property
    def n_generators(self) -> int:
        return self.inertia.shape[0]

    @property
    def substeps_per_control(self) -> int:
        return int(round(self.control_interval_s / self.dt))


@dataclass
class GridState:
    """Per-machine dynamic state at a simulation instant."""

    angle: np.ndarray
    speed: np.ndarray
    mech_power: np.ndarray
    valve: np.ndarray
    time: float = 0.0

    @classmethod
    def zeros(cls, n_generators: int) -> "GridState":
        return cls(
            angle=np.zeros(n_generators),
            speed=np.zeros(n_generators),
            mech_power=np.zeros(n_generators),
            valve=np.zeros(n_generators),
        )

    def copy(self) -> "GridState":
        return GridState(
            angle=self.angle.copy(),
            speed=self.speed.copy(),
            mech_power=self.mech_power.copy(),
            valve=self.valve.copy(),
            time=self.time,
        )

    def pack(self) -> np.ndarray:
        return np.concatenate([self.angle, self.speed, self.mech_power, self.valve])

    @classmethod
    def unpack(cls, vector: np.ndarray, time: float) -> "GridState":
        n = vector.shape[0] // 4
        return cls(
            angle=vector[0:n].copy(),
            speed=vector[n : 2 * n].copy(),
            mech_power=vector[2 * n : 3 * n].copy(),
            valve=vector[3 * n : 4 * n].copy(),
            time=time,
        )


@dataclass(frozen=True)
class Scenario:
    """A single load-step disturbance over a fixed-length episode."""

    load_step: float = 0.10
    load_bus: int = 2
    onset_s: float = 1.0
    length_s: float = 20.0

    def __post_init__(self):
        if self.length_s <= 0:
            raise ValueError("length_s must be > 0")
        if int(self.load_bus) != self.load_bus or self.load_bus < 0:
            raise ValueError("load_bus must be a non-negative integer")
        object.__setattr__(self, "load_bus", int(self.load_bus))


def load_vector(scenario: Scenario, params: GridParams, time: float) -> np.ndarray:
    """Bus injection vector for the step starting at `time` (zero-order hold)."""
    load = np.zeros(params.n_generators)
    # half-substep guard keeps activation robust to accumulated float drift
    if time >= scenario.onset_s - 0.5 * params.dt:
        load[scenario.load_bus] = scenario.load_step
    return load


# ============================================================
# dynamics
# ============================================================


def _derivatives(params: GridParams, y: np.ndarray, load: np.ndarray, ref: np.ndarray) -> np.ndarray:
    n = params.n_generators
    angle = y[0:n]
    speed = y[n : 2 * n]
    mech = y[2 * n : 3 * n]
    valve = y[3 * n : 4 * n]
    omega0 = 2.0 * np.pi * params.base_frequency_hz
    # elec_i = sum_j Ks_ij (angle_i - angle_j) + load_i
    elec = params.coupling.sum(axis=1) * angle - params.coupling @ angle + load
    d_angle = omega0 * speed
    d_speed = (mech - elec - params.damping * speed) / (2.0 * params.inertia)
    d_mech = (valve - mech) / params.turbine_tc
    d_valve = (ref - speed / params.droop - valve) / params.governor_tc
    return np.concatenate([d_angle, d_speed, d_mech, d_valve])


def rk4_step(params: GridParams, state: GridState, load: np.ndarray, ref: np.ndarray) -> GridState:
    """Advance one fixed substep; load and ref are held constant throughout."""
    dt = params.dt
    y = state.pack()
    k1 = _derivatives(params, y, load, ref)
    k2 = _derivatives(params, y + 0.5 * dt * k1, load, ref)
    k3 = _derivatives(params, y + 0.5 * dt * k2, load, ref)
    k4 = _derivatives(params, y + dt * k3, load, ref)
    y_next = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return GridState.unpack(y_next, state.time + dt)


def check_state(state: GridState) -> GridState:
    """Raise DivergenceError outside the validity domain, else pass through."""
    finite = all(
        np.all(np.isfinite(v)) for v in (state.angle, state.speed, state.mech_power, state.valve)
    )
    if not finite or np.any(np.abs(state.speed) > 1.0):
        raise DivergenceError(f"state left validity domain at t={state.time:.3f}s", state)
    return state


def frequencies_hz(params: GridParams, state: GridState) -> np.ndarray:
    return params.base_frequency_hz * (1.0 + state.speed)


def tie_flow(params: GridParams, state: GridState) -> float:
    """Measured inter-area exchange: coeff times the mean-angle difference."""
    mean_a = state.angle[list(params.area_a)].mean()
    mean_b = state.angle[list(params.area_b)].mean()
    return params.tie_coeff * (mean_a - mean_b)


def scaled_frequency_deviation(params: GridParams, state: GridState) -> float:
    """Nominal-minus-actual mean frequency in units of 0.1 pu."""
    return -state.speed.mean() / FREQ_DEV_SCALE


# ============================================================
# secondary control
# ============================================================


def compute_ace(tie_dev: float, bias: float, freq_dev: float) -> float:
    """Area control error from tie deviation, bias and scaled frequency deviation."""
    return tie_dev - 10.0 * bias * freq_dev


def pi_agc_command(ace: float, ace_integral: float, kp: float, ki: float) -> float:
    """Proportional-integral correction opposing the accumulated control error."""
    return -kp * ace - ki * ace_integral


def dispatch_command(command: float, participation: np.ndarray) -> np.ndarray:
    """Split one scalar command into per-generator setpoints by participation."""
    return np.asarray(participation, dtype=float) * command


@dataclass
class PiController:
    """Sampled PI loop on the area control error with trapezoid integration."""

    kp: float = 0.8
    ki: float = 8.0
    integral: float = 0.0
    last_ace: float | None = None

    def command(self, ace: float, dt: float) -> float:
        if self.last_ace is None:
            self.integral += dt * ace  # first sample: rectangle
        else:
            self.integral += 0.5 * dt * (ace + self.last_ace)
        self.last_ace = ace
        return pi_agc_command(ace, self.integral, self.kp, self.ki)

    def reset(self) -> None:
        self.integral = 0.0
        self.last_ace = None


def measure_ace(params: GridParams, state: GridState) -> float:
    return compute_ace(
        tie_flow(params, state),
        params.frequency_bias,
        scaled_frequency_deviation(params, state),
    )


@dataclass
class BaselineResult:
    """Per-substep trajectory of a closed-loop PI run."""

    time_s: np.ndarray
    freq_hz: np.ndarray
    ace_pu: np.ndarray
    command_pu: np.ndarray
    tie_pu: np.ndarray
    final_state: GridState

    @property
    def nadir_hz(self) -> float:
        return float(self.freq_hz.min())


def run_pi_baseline(
    params: GridParams,
    scenario: Scenario,
    kp: float = 0.8,
    ki: float = 8.0,
) -> BaselineResult:
    """Simulate the disturbance under sampled PI secondary control."""
    state = GridState.zeros(params.n_generators)
    controller = PiController(kp=kp, ki=ki)
    n_steps = int(round(scenario.length_s / params.dt))
    per = params.substeps_per_control
    times = [0.0]
    freqs = [frequencies_hz(params, state)]
    aces = [0.0]
    commands = [0.0]
    ties = [0.0]
    command = 0.0
    ace = 0.0
    tie = 0.0
    for k in range(n_steps):
        if k % per == 0:
            tie = tie_flow(params, state)
            ace = measure_ace(params, state)
            command = controller.command(ace, params.control_interval_s)
        ref = dispatch_command(command, params.participation)
        load = load_vector(scenario, params, state.time)
        state = check_state(rk4_step(params, state, load, ref))
        times.append(state.time)
        freqs.append(frequencies_hz(params, state))
        aces.append(ace)
        commands.append(command)
        ties.append(tie)
    return BaselineResult(
        time_s=np.array(times),
        freq_hz=np.array(freqs),
        ace_pu=np.array(aces),
        command_pu=np.array(commands),
        tie_pu=np.array(ties),
        final_state=state,
    )


# ============================================================
# learning environment
# ============================================================

ACTION_PENALTY = 0.01
# one unit of observation per hertz of deviation: a tighter span acts as
# a gain multiplier between the policy and the grid (du/df scales with
# 1/span) and pushes learned feedback past the turbine-lag stability
# margin, where closed loops limit-cycle instead of settling
OBS_FREQ_SPAN_HZ = 1.0


def observe_frequencies(params: GridParams, state: GridState) -> np.ndarray:
    """Per-generator frequency deviations scaled to [-1, 1] for encoding."""
    dev = frequencies_hz(params, state) - params.base_frequency_hz
    return np.clip(dev / OBS_FREQ_SPAN_HZ, -1.0, 1.0)


def substep_reward(params: GridParams, state: GridState, action: np.ndarray) -> float:
    """Negative mean squared Hz deviation minus the action-effort penalty."""
    dev = frequencies_hz(params, state) - params.base_frequency_hz
    return -float(dev @ dev) / dev.shape[0] - ACTION_PENALTY * float(action @ action)


class LfcEnv:
    """Control-interval wrapper: per-generator setpoint actions, scaled
    frequency observations, quadratic regulation reward."""

    def __init__(self, params: GridParams, scenario: Scenario, action_limit: float = 0.5):
        if action_limit <= 0:
            raise ValueError("action_limit must be > 0")
        self.params = params
        self.scenario = scenario
        self.action_limit = action_limit
        self.state: GridState | None = None

    @property
    def n_observations(self) -> int:
        return self.params.n_generators

    @property
    def n_actions(self) -> int:
        return self.params.n_generators

    @property
    def steps_per_episode(self) -> int:
        total = int(round(self.scenario.length_s / self.params.dt))
        return total // self.params.substeps_per_control

    def _observe(self) -> np.ndarray:
        return observe_frequencies(self.params, self.state)

    def reset(self) -> np.ndarray:
        self.state = GridState.zeros(self.params.n_generators)
        return self._observe()

    def step(self, action) -> tuple[np.ndarray, float, bool, dict]:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        action = np.asarray(action, dtype=float)
        if action.shape != (self.n_actions,):
            raise ValueError(f"action must have shape ({self.n_actions},), got {action.shape}")
        clamped = bool(np.any(np.abs(action) > self.action_limit))
        ref = np.clip(action, -self.action_limit, self.action_limit)
        rewards = np.empty(self.params.substeps_per_control)
        freq_min = np.inf
        for s in range(self.params.substeps_per_control):
            load = load_vector(self.scenario, self.params, self.state.time)
            self.state = check_state(rk4_step(self.params, self.state, load, ref))
            rewards[s] = substep_reward(self.params, self.state, ref)
            freq_min = min(freq_min, float(frequencies_hz(self.params, self.state).min()))
        reward = float(rewards.mean())
        # half-substep guard mirrors the load-onset threshold
        done = self.state.time >= self.scenario.length_s - 0.5 * self.params.dt
        info = {
            "time_s": self.state.time,
            "freq_hz": frequencies_hz(self.params, self.state),
            "freq_min_hz": freq_min,
            "ace_pu": measure_ace(self.params, self.state),
            "tie_pu": tie_flow(self.params, self.state),
            "clamped": clamped,
        }
        return self._observe(), reward, done, info


def default_case() -> tuple[GridParams, Scenario]:
    """Five-machine ring with a 0.10 pu load step on the third bus."""
    params = GridParams(
        inertia=np.array([5.0, 4.0, 3.5, 3.0, 2.5]),
        damping=np.full(5, 1.5),
        droop=np.full(5, 0.05),
        governor_tc=np.full(5, 0.2),
        turbine_tc=np.full(5, 0.5),
        coupling=ring_coupling(5, 1.5),
        participation=np.full(5, 0.2),
    )
    return params, Scenario()
