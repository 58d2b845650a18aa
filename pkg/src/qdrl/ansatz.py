"""Hardware-efficient layered ansatz with data re-uploading.

Each layer applies, in order: input encoding R_Y(alpha_{l,j} x_j) then
R_Z(beta_{l,j} x_j) on the first `n_inputs` wires (re-uploaded every
layer), trainable R_Z(theta1_{l,j}) then R_Y(theta2_{l,j}) on all
wires, and a CNOT entangling block (chain: CNOT(q, q+1) ascending;
ring adds CNOT(n-1, 0)). Encoding scales are trainable alongside the
rotation angles, so a circuit has 2*L*m + 2*L*n scalar parameters.

Encoding angles are clamped to [-pi, pi] after scaling to keep the
angle encoding single-valued; a clamped angle contributes zero
gradient to its scale and input, and clamp events are counted so
callers can surface them in training logs.

Circuits are compiled to a `Program`: a gate list where every rotation
carries its flat parameter slot and the factor d(angle)/d(parameter),
plus the input slot and d(angle)/d(input) for encoding gates. The
gradient engines all consume this one representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qsim

__all__ = [
    "CircuitLayout",
    "PqcParams",
    "InitSpec",
    "Program",
    "ProgramGate",
    "build_layout",
    "init_params",
    "build_program",
    "run_program",
    "measure_program",
    "evaluate",
]

_ENTANGLE_PATTERNS = ("chain", "ring")
_AXES = ("z", "x")


@dataclass(frozen=True)
class CircuitLayout:
    """Static shape of a circuit: wires, layers, wiring, observables."""

    n_qubits: int
    n_inputs: int
    n_layers: int
    entangle: str = "chain"
    observables: tuple[tuple[str, int], ...] = ()

    def __post_init__(self) -> None:
        if self.n_qubits < 1 or self.n_qubits > qsim.MAX_QUBITS:
            raise qsim.CapacityError(f"n_qubits must be in 1..{qsim.MAX_QUBITS}, got {self.n_qubits}")
        if self.n_inputs < 0 or self.n_inputs > self.n_qubits:
            raise ValueError(
                f"n_inputs must be in 0..n_qubits={self.n_qubits}, got {self.n_inputs}"
            )
        if self.n_layers < 1:
            raise ValueError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.entangle not in _ENTANGLE_PATTERNS:
            raise ValueError(f"entangle must be one of {_ENTANGLE_PATTERNS}, got {self.entangle!r}")
        if not self.observables:
            raise ValueError("layout needs at least one observable")
        for axis, qubit in self.observables:
            if axis not in _AXES:
                raise ValueError(f"observable axis must be 'z' or 'x', got {axis!r}")
            if not 0 <= qubit < self.n_qubits:
                raise IndexError(f"observable qubit {qubit} out of range")

    @property
    def n_observables(self) -> int:
        return len(self.observables)

    @property
    def n_params(self) -> int:
        return 2 * self.n_layers * self.n_inputs + 2 * self.n_layers * self.n_qubits

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "n_inputs": self.n_inputs,
            "n_layers": self.n_layers,
            "entangle": self.entangle,
            "observables": [list(o) for o in self.observables],
        }

    @staticmethod
    def from_dict(d: dict) -> "CircuitLayout":
        return CircuitLayout(
            n_qubits=int(d["n_qubits"]),
            n_inputs=int(d["n_inputs"]),
            n_layers=int(d["n_layers"]),
            entangle=str(d["entangle"]),
            observables=tuple((str(a), int(q)) for a, q in d["observables"]),
        )


def build_layout(
    n_qubits: int,
    n_inputs: int,
    n_layers: int,
    entangle: str = "chain",
    observables: tuple[tuple[str, int], ...] = (),
) -> CircuitLayout:
    """Validated CircuitLayout constructor."""
    return CircuitLayout(n_qubits, n_inputs, n_layers, entangle, tuple(observables))


@dataclass
class PqcParams:
    """Trainable parameters: encoding scales and rotation angles.

    Flat vector order is enc_scale_y, enc_scale_z, rot_z, rot_y, each
    row-major over (layer, wire).
    """

    enc_scale_y: np.ndarray  # (L, m)
    enc_scale_z: np.ndarray  # (L, m)
    rot_z: np.ndarray  # (L, n)
    rot_y: np.ndarray  # (L, n)

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                self.enc_scale_y.ravel(),
                self.enc_scale_z.ravel(),
                self.rot_z.ravel(),
                self.rot_y.ravel(),
            ]
        )

    @staticmethod
    def from_vector(layout: CircuitLayout, vec: np.ndarray) -> "PqcParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (layout.n_params,):
            raise ValueError(f"expected {layout.n_params} parameters, got shape {vec.shape}")
        L, m, n = layout.n_layers, layout.n_inputs, layout.n_qubits
        a = L * m
        return PqcParams(
            enc_scale_y=vec[:a].reshape(L, m).copy(),
            enc_scale_z=vec[a : 2 * a].reshape(L, m).copy(),
            rot_z=vec[2 * a : 2 * a + L * n].reshape(L, n).copy(),
            rot_y=vec[2 * a + L * n :].reshape(L, n).copy(),
        )

    def copy(self) -> "PqcParams":
        return PqcParams(
            self.enc_scale_y.copy(), self.enc_scale_z.copy(), self.rot_z.copy(), self.rot_y.copy()
        )


@dataclass(frozen=True)
class InitSpec:
    """Initialization: constant encoding scales, uniform small angles.

    `final_y_center` offsets the last layer's Y angles; pi/2 starts every
    wire on the equator, where Z readouts are near zero and their angle
    sensitivity is maximal (at the pole d<Z>/dtheta vanishes).
    """

    scale_value: float = 1.0
    angle_range: float = math.pi / 8
    final_y_center: float = 0.0

    def __post_init__(self) -> None:
        if self.angle_range < 0:
            raise ValueError("angle_range must be >= 0")
        if not math.isfinite(self.final_y_center):
            raise ValueError("final_y_center must be finite")


def init_params(layout: CircuitLayout, seed: int, spec: InitSpec = InitSpec()) -> PqcParams:
    """Seeded parameter draw: scales at spec.scale_value, angles uniform.

    rot_z is drawn before rot_y so the draw order (and therefore the
    parameters for a given seed) is part of the contract.
    """
    rng = np.random.default_rng(seed)
    L, m, n = layout.n_layers, layout.n_inputs, layout.n_qubits
    r = spec.angle_range
    rot_z = rng.uniform(-r, r, size=(L, n))
    rot_y = rng.uniform(-r, r, size=(L, n))
    rot_y[-1] += spec.final_y_center
    return PqcParams(
        enc_scale_y=np.full((L, m), spec.scale_value),
        enc_scale_z=np.full((L, m), spec.scale_value),
        rot_z=rot_z,
        rot_y=rot_y,
    )


# ============================================================
# program construction and execution
# ============================================================


@dataclass
class ProgramGate:
    """One gate plus the bookkeeping the gradient engines need.

    `angles` is a (B,) array for encoding gates (per-row data) and a
    scalar for trainable rotations. `param_factor` is d(angle)/d(param)
    (the input value for scales, 1 for rotation angles, 0 where the
    encoding clamp is active); `input_factor` is d(angle)/d(input).
    Slots of -1 mean "not differentiable along that axis".
    """

    kind: str
    target: int
    control: int = -1
    angles: np.ndarray | float = 0.0
    param_slot: int = -1
    param_factor: np.ndarray | float = 0.0
    input_slot: int = -1
    input_factor: np.ndarray | float = 0.0


@dataclass
class Program:
    """A circuit bound to a parameter set and an input batch."""

    layout: CircuitLayout
    n_batch: int
    squeeze: bool
    gates: list[ProgramGate] = field(default_factory=list)
    clamp_count: int = 0


def _canon_inputs(layout: CircuitLayout, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape != (layout.n_inputs,):
            raise ValueError(f"expected {layout.n_inputs} inputs, got shape {x.shape}")
        return x.reshape(1, -1), True
    if x.ndim == 2:
        if x.shape[1] != layout.n_inputs:
            raise ValueError(f"expected (batch, {layout.n_inputs}) inputs, got shape {x.shape}")
        return x, False
    raise ValueError(f"inputs must be 1-D or 2-D, got shape {x.shape}")


def _check_params(layout: CircuitLayout, params: PqcParams) -> None:
    L, m, n = layout.n_layers, layout.n_inputs, layout.n_qubits
    if params.enc_scale_y.shape != (L, m) or params.enc_scale_z.shape != (L, m):
        raise ValueError("encoding scale shape does not match layout")
    if params.rot_z.shape != (L, n) or params.rot_y.shape != (L, n):
        raise ValueError("rotation angle shape does not match layout")


def build_program(layout: CircuitLayout, params: PqcParams, x) -> Program:
    """Compile (layout, params, inputs) to an annotated gate list."""
    _check_params(layout, params)
    xb, squeeze = _canon_inputs(layout, x)
    if not np.all(np.isfinite(xb)):
        raise ValueError("circuit inputs must be finite")
    L, m, n = layout.n_layers, layout.n_inputs, layout.n_qubits
    prog = Program(layout=layout, n_batch=xb.shape[0], squeeze=squeeze)
    lm = L * m
    ln = L * n
    clamped_total = 0
    for layer in range(L):
        # encoding block, re-uploaded every layer: R_Y then R_Z per wire
        for j in range(m):
            col = xb[:, j]
            for kind, scales, slot0 in (
                ("ry", params.enc_scale_y, 0),
                ("rz", params.enc_scale_z, lm),
            ):
                scale = scales[layer, j]
                raw = scale * col
                ang = np.clip(raw, -np.pi, np.pi)
                interior = np.abs(raw) < np.pi
                clamped_total += int(np.size(interior) - np.count_nonzero(interior))
                prog.gates.append(
                    ProgramGate(
                        kind=kind,
                        target=j,
                        angles=ang,
                        param_slot=slot0 + layer * m + j,
                        param_factor=np.where(interior, col, 0.0),
                        input_slot=j,
                        input_factor=np.where(interior, scale, 0.0),
                    )
                )
        # trainable block: R_Z then R_Y per wire
        for j in range(n):
            prog.gates.append(
                ProgramGate(
                    kind="rz",
                    target=j,
                    angles=float(params.rot_z[layer, j]),
                    param_slot=2 * lm + layer * n + j,
                    param_factor=1.0,
                )
            )
            prog.gates.append(
                ProgramGate(
                    kind="ry",
                    target=j,
                    angles=float(params.rot_y[layer, j]),
                    param_slot=2 * lm + ln + layer * n + j,
                    param_factor=1.0,
                )
            )
        # entangling block
        for q in range(n - 1):
            prog.gates.append(ProgramGate(kind="cnot", target=q + 1, control=q))
        if layout.entangle == "ring" and n > 2:
            prog.gates.append(ProgramGate(kind="cnot", target=0, control=n - 1))
    prog.clamp_count = clamped_total
    return prog


def _apply_program_gate(amps: np.ndarray, n_qubits: int, gate: ProgramGate, shift: float = 0.0) -> None:
    if gate.kind == "ry":
        qsim.apply_ry(amps, n_qubits, gate.target, gate.angles + shift if shift else gate.angles)
    elif gate.kind == "rz":
        qsim.apply_rz(amps, n_qubits, gate.target, gate.angles + shift if shift else gate.angles)
    else:
        qsim.apply_cnot(amps, n_qubits, gate.control, gate.target)


def run_program(prog: Program, shift_gate: int = -1, shift: float = 0.0) -> np.ndarray:
    """Execute the program on |0...0>, optionally shifting one gate's angle.

    Returns the final amplitudes, shape (B, 2**n_qubits).
    """
    n = prog.layout.n_qubits
    amps = qsim.zero_batch(prog.n_batch, n)
    for idx, gate in enumerate(prog.gates):
        _apply_program_gate(amps, n, gate, shift if idx == shift_gate else 0.0)
    return amps


def measure_program(prog: Program, amps: np.ndarray) -> np.ndarray:
    """Exact observable expectations, shape (B, n_observables)."""
    n = prog.layout.n_qubits
    out = np.empty((amps.shape[0], prog.layout.n_observables))
    for k, (axis, qubit) in enumerate(prog.layout.observables):
        if axis == "z":
            out[:, k] = qsim.expect_z(amps, n, qubit)
        else:
            out[:, k] = qsim.expect_x(amps, n, qubit)
    return out


def evaluate(layout: CircuitLayout, params: PqcParams, x) -> np.ndarray:
    """Exact expectation of each observable for input(s) x.

    x of shape (n_inputs,) gives (n_observables,); shape
    (B, n_inputs) gives (B, n_observables). Pure: identical arguments
    produce bitwise-identical results.
    """
    prog = build_program(layout, params, x)
    outs = measure_program(prog, run_program(prog))
    return outs[0] if prog.squeeze else outs
