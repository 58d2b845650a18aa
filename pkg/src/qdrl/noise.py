"""Device-style noise emulation on top of the exact simulator.

Gate noise is a stochastic Pauli unravelling of a depolarizing
channel: after every gate, with probability `depolarizing_prob`, one
uniformly random Pauli hits the gate's target qubit. Paulis are
realized with the native gate set, phases free: X = R_Y(pi) * R_Z(pi),
Y = R_Y(pi), Z = R_Z(pi). Averaged over trajectories this reproduces
the depolarizing channel on expectation values.

Readout is estimated from `shots` Bernoulli samples of the measured
eigenvalue, each flipped with probability `readout_flip_prob`, so an
exact expectation e is attenuated toward (1 - 2 r) e. With
shots="exact" no sampling happens: the trajectory expectation is
attenuated analytically instead.

Shots are split over at most TRAJECTORY_CAP independent gate-noise
trajectories per call. Trajectories are seeded individually from
(seed, salt, trajectory index), so results do not depend on execution
order and a caller can vary `salt` to decorrelate successive calls.

With depolarizing_prob = 0, readout_flip_prob = 0, shots = "exact"
the emulation reduces bit-for-bit to `ansatz.evaluate`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qsim
from .ansatz import CircuitLayout, PqcParams, Program, build_program

__all__ = [
    "TRAJECTORY_CAP",
    "NoiseConfig",
    "DEFAULT_NISQ",
    "noisy_evaluate",
    "noisy_measure_program",
]

# One gate-noise trajectory can serve many shots; the cap bounds the
# per-call simulation cost while keeping the estimate unbiased.
TRAJECTORY_CAP = 32


@dataclass(frozen=True)
class NoiseConfig:
    """Noise model settings; the defaults are the NISQ-device profile."""

    depolarizing_prob: float = 0.001
    shots: int | str = 1024
    readout_flip_prob: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.depolarizing_prob <= 1.0:
            raise ValueError(f"depolarizing_prob must be in [0, 1], got {self.depolarizing_prob}")
        if not 0.0 <= self.readout_flip_prob <= 1.0:
            raise ValueError(f"readout_flip_prob must be in [0, 1], got {self.readout_flip_prob}")
        if isinstance(self.shots, str):
            if self.shots != "exact":
                raise ValueError(f"shots must be a positive integer or 'exact', got {self.shots!r}")
        elif isinstance(self.shots, (int, np.integer)) and not isinstance(self.shots, bool):
            if self.shots < 1:
                raise ValueError(f"shots must be >= 1, got {self.shots}")
        else:
            raise ValueError(f"shots must be a positive integer or 'exact', got {self.shots!r}")

    def is_active(self) -> bool:
        """True when any stochastic element (gate, readout, shots) is on."""
        return (
            self.depolarizing_prob > 0.0
            or self.readout_flip_prob > 0.0
            or self.shots != "exact"
        )


DEFAULT_NISQ = NoiseConfig()


def _salt_tuple(salt) -> tuple[int, ...]:
    if isinstance(salt, (int, np.integer)):
        return (int(salt),)
    return tuple(int(v) for v in salt)


def _apply_random_pauli(amps: np.ndarray, n_qubits: int, qubit: int, rng: np.random.Generator) -> None:
    pick = int(rng.integers(3))
    if pick == 0:  # X, up to global phase: R_Y(pi) * R_Z(pi)
        qsim.apply_rz(amps, n_qubits, qubit, np.pi)
        qsim.apply_ry(amps, n_qubits, qubit, np.pi)
    elif pick == 1:  # Y
        qsim.apply_ry(amps, n_qubits, qubit, np.pi)
    else:  # Z
        qsim.apply_rz(amps, n_qubits, qubit, np.pi)


def _trajectory_expectations(
    prog: Program,
    row: int,
    noise: NoiseConfig,
    rng: np.random.Generator,
    shift_gate: int,
    shift: float,
) -> np.ndarray:
    """Exact observable expectations of one noisy trajectory of one row."""
    layout = prog.layout
    n = layout.n_qubits
    amps = qsim.zero_batch(1, n)
    p = noise.depolarizing_prob
    for idx, gate in enumerate(prog.gates):
        ang = gate.angles
        if not np.isscalar(ang):
            ang = float(np.asarray(ang)[row])
        if idx == shift_gate:
            ang = ang + shift
        if gate.kind == "ry":
            qsim.apply_ry(amps, n, gate.target, ang)
        elif gate.kind == "rz":
            qsim.apply_rz(amps, n, gate.target, ang)
        else:
            qsim.apply_cnot(amps, n, gate.control, gate.target)
        if p > 0.0 and rng.random() < p:
            _apply_random_pauli(amps, n, gate.target, rng)
    out = np.empty(layout.n_observables)
    for k, (axis, qubit) in enumerate(layout.observables):
        if axis == "z":
            out[k] = qsim.expect_z(amps, n, qubit)[0]
        else:
            out[k] = qsim.expect_x(amps, n, qubit)[0]
    return out


def _noisy_row(
    prog: Program,
    row: int,
    noise: NoiseConfig,
    salt: tuple[int, ...],
    shift_gate: int,
    shift: float,
) -> np.ndarray:
    """Unbiased noisy estimate of each observable for one batch row."""
    if noise.shots == "exact":
        rng = np.random.default_rng((noise.seed, *salt, row, 0))
        exact = _trajectory_expectations(prog, row, noise, rng, shift_gate, shift)
        return (1.0 - 2.0 * noise.readout_flip_prob) * exact

    shots = int(noise.shots)
    n_traj = 1 if noise.depolarizing_prob == 0.0 else min(shots, TRAJECTORY_CAP)
    base, extra = divmod(shots, n_traj)
    r = noise.readout_flip_prob
    totals = np.zeros(prog.layout.n_observables)
    for t in range(n_traj):
        rng = np.random.default_rng((noise.seed, *salt, row, t))
        exact = _trajectory_expectations(prog, row, noise, rng, shift_gate, shift)
        shots_t = base + (1 if t < extra else 0)
        if shots_t == 0:
            continue
        p_plus = np.clip(0.5 * (1.0 + exact), 0.0, 1.0)
        p_eff = p_plus * (1.0 - r) + (1.0 - p_plus) * r
        n_plus = rng.binomial(shots_t, p_eff)
        totals += 2.0 * n_plus - shots_t
    return totals / shots


def noisy_measure_program(
    prog: Program,
    noise: NoiseConfig,
    salt=0,
    shift_gate: int = -1,
    shift: float = 0.0,
) -> np.ndarray:
    """Noisy observable estimates for every row of a compiled program."""
    from .ansatz import measure_program, run_program  # noqa: PLC0415

    if not noise.is_active():
        return measure_program(prog, run_program(prog, shift_gate, shift))
    salt_t = _salt_tuple(salt)
    out = np.empty((prog.n_batch, prog.layout.n_observables))
    for b in range(prog.n_batch):
        out[b] = _noisy_row(prog, b, noise, salt_t, shift_gate, shift)
    return out


def noisy_evaluate(layout: CircuitLayout, params: PqcParams, x, noise: NoiseConfig, salt=0) -> np.ndarray:
    """Noisy counterpart of `ansatz.evaluate`; same shapes, same seed rules."""
    prog = build_program(layout, params, x)
    out = noisy_measure_program(prog, noise, salt)
    return out[0] if prog.squeeze else out
