"""Dense statevector simulation of small qubit registers.

Gate set: R_Y, R_Z, CNOT. Qubit 0 is the least-significant bit of the
amplitude index, so basis state |q_{n-1} ... q_1 q_0> sits at index
sum_k q_k 2^k. Gates update amplitude pairs in place; no 2^n x 2^n
matrix is ever materialized. Global phase is kept as produced
(R_Z(2*pi) negates the state rather than restoring it).

The array-level kernels are numba-compiled and operate on batches of
states, shape (B, 2**n_qubits) complex128, with a scalar or per-batch
angle. The `Statevector` wrapper holds a single state and routes
through the same kernels, so every caller shares one code path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "MAX_QUBITS",
    "CapacityError",
    "GateOp",
    "Statevector",
    "new_zero_state",
    "apply_gate",
    "expect_pauli",
    "ry",
    "rz",
    "cnot",
]

# 24 qubits = 256 MiB of complex128 amplitudes; the hard cap keeps a typo
# from allocating the host into the ground.
MAX_QUBITS = 24

_KINDS = ("ry", "rz", "cnot")


class CapacityError(ValueError):
    """Register size outside the supported 1..MAX_QUBITS range."""


@dataclass(frozen=True)
class GateOp:
    """One gate in a circuit: kind, wire indices, and rotation angle.

    `control` is only meaningful for kind "cnot"; `angle` only for the
    rotations.
    """

    kind: str
    target: int
    control: int | None = None
    angle: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind == "cnot":
            if self.control is None:
                raise ValueError("cnot requires a control qubit")
            if self.control == self.target:
                raise ValueError("cnot control and target must differ")
        elif self.control is not None:
            raise ValueError(f"{self.kind} takes no control qubit")
        if not np.isfinite(self.angle):
            raise ValueError("gate angle must be finite")


def ry(target: int, angle: float) -> GateOp:
    return GateOp("ry", target, None, float(angle))


def rz(target: int, angle: float) -> GateOp:
    return GateOp("rz", target, None, float(angle))


def cnot(control: int, target: int) -> GateOp:
    return GateOp("cnot", target, control)


class Statevector:
    """A normalized pure state on `n_qubits` qubits, mutated in place."""

    __slots__ = ("n_qubits", "amplitudes")

    def __init__(self, n_qubits: int, amplitudes: np.ndarray):
        dim = 1 << n_qubits
        amplitudes = np.ascontiguousarray(amplitudes, dtype=np.complex128)
        if amplitudes.shape != (dim,):
            raise ValueError(f"expected {dim} amplitudes for {n_qubits} qubits, got shape {amplitudes.shape}")
        self.n_qubits = n_qubits
        self.amplitudes = amplitudes

    def copy(self) -> "Statevector":
        return Statevector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.amplitudes.real**2 + self.amplitudes.imag**2)))

    def __repr__(self) -> str:  # pragma: no cover
        return f"Statevector(n_qubits={self.n_qubits})"


def new_zero_state(n_qubits: int) -> Statevector:
    """|0...0> on `n_qubits` qubits."""
    if not isinstance(n_qubits, (int, np.integer)) or isinstance(n_qubits, bool):
        raise CapacityError(f"n_qubits must be an integer, got {n_qubits!r}")
    if n_qubits < 1 or n_qubits > MAX_QUBITS:
        raise CapacityError(f"n_qubits must be in 1..{MAX_QUBITS}, got {n_qubits}")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(int(n_qubits), amps)


def zero_batch(n_batch: int, n_qubits: int) -> np.ndarray:
    """(n_batch, 2**n_qubits) array of |0...0> rows."""
    if n_qubits < 1 or n_qubits > MAX_QUBITS:
        raise CapacityError(f"n_qubits must be in 1..{MAX_QUBITS}, got {n_qubits}")
    amps = np.zeros((n_batch, 1 << n_qubits), dtype=np.complex128)
    amps[:, 0] = 1.0
    return amps


def _check_qubit(n_qubits: int, qubit: int, role: str) -> None:
    if not 0 <= qubit < n_qubits:
        raise IndexError(f"{role} qubit {qubit} out of range for {n_qubits}-qubit register")


# ============================================================
# numba kernels (batch-first layout, fixed iteration order)
# ============================================================


@njit(cache=True)
def _ry_kernel(amps, step, c, s):
    n_batch, dim = amps.shape
    block = 2 * step
    for b in range(n_batch):
        cb = c[b]
        sb = s[b]
        row = amps[b]
        for base in range(0, dim, block):
            for off in range(base, base + step):
                a0 = row[off]
                a1 = row[off + step]
                row[off] = cb * a0 - sb * a1
                row[off + step] = sb * a0 + cb * a1


@njit(cache=True)
def _rz_kernel(amps, step, pr, pi):
    # diag(p, conj(p)) with p = exp(-i*angle/2) = pr + i*pi
    n_batch, dim = amps.shape
    block = 2 * step
    for b in range(n_batch):
        p = complex(pr[b], pi[b])
        q = complex(pr[b], -pi[b])
        row = amps[b]
        for base in range(0, dim, block):
            for off in range(base, base + step):
                row[off] = p * row[off]
                row[off + step] = q * row[off + step]


@njit(cache=True)
def _cnot_kernel(amps, cstep, tstep):
    n_batch, dim = amps.shape
    for b in range(n_batch):
        row = amps[b]
        for idx in range(dim):
            # visit each control-set pair once, via its target-0 member
            if (idx & cstep) != 0 and (idx & tstep) == 0:
                other = idx | tstep
                tmp = row[idx]
                row[idx] = row[other]
                row[other] = tmp


@njit(cache=True)
def _pauli_x_kernel(amps, step):
    n_batch, dim = amps.shape
    block = 2 * step
    for b in range(n_batch):
        row = amps[b]
        for base in range(0, dim, block):
            for off in range(base, base + step):
                tmp = row[off]
                row[off] = row[off + step]
                row[off + step] = tmp


@njit(cache=True)
def _pauli_z_kernel(amps, step):
    n_batch, dim = amps.shape
    for b in range(n_batch):
        row = amps[b]
        for idx in range(dim):
            if (idx & step) != 0:
                row[idx] = -row[idx]


@njit(cache=True)
def _expect_z_kernel(amps, step, out):
    n_batch, dim = amps.shape
    for b in range(n_batch):
        row = amps[b]
        acc = 0.0
        for idx in range(dim):
            a = row[idx]
            m = a.real * a.real + a.imag * a.imag
            if (idx & step) == 0:
                acc += m
            else:
                acc -= m
        out[b] = acc


@njit(cache=True)
def _expect_x_kernel(amps, step, out):
    n_batch, dim = amps.shape
    block = 2 * step
    for b in range(n_batch):
        row = amps[b]
        acc = 0.0
        for base in range(0, dim, block):
            for off in range(base, base + step):
                a0 = row[off]
                a1 = row[off + step]
                acc += a0.real * a1.real + a0.imag * a1.imag
        out[b] = 2.0 * acc


def _as_batch_angles(angle, n_batch: int) -> np.ndarray:
    arr = np.asarray(angle, dtype=np.float64)
    if arr.ndim == 0:
        return np.full(n_batch, float(arr))
    if arr.shape != (n_batch,):
        raise ValueError(f"angle batch shape {arr.shape} does not match state batch {n_batch}")
    return arr


def apply_ry(amps: np.ndarray, n_qubits: int, qubit: int, angle) -> None:
    """In-place R_Y(angle) = [[cos a/2, -sin a/2], [sin a/2, cos a/2]].

    `amps` has shape (B, 2**n_qubits); `angle` is a scalar or a (B,) array.
    """
    half = 0.5 * _as_batch_angles(angle, amps.shape[0])
    _ry_kernel(amps, 1 << qubit, np.cos(half), np.sin(half))


def apply_rz(amps: np.ndarray, n_qubits: int, qubit: int, angle) -> None:
    """In-place R_Z(angle) = diag(e^{-i a/2}, e^{+i a/2}); phases are kept."""
    half = 0.5 * _as_batch_angles(angle, amps.shape[0])
    _rz_kernel(amps, 1 << qubit, np.cos(half), -np.sin(half))


def apply_cnot(amps: np.ndarray, n_qubits: int, control: int, target: int) -> None:
    """In-place CNOT: flip `target` bit wherever `control` bit is 1."""
    _cnot_kernel(amps, 1 << control, 1 << target)


def apply_pauli_x(amps: np.ndarray, n_qubits: int, qubit: int) -> None:
    """In-place exact Pauli X (phase-true, unlike the noise realization)."""
    _pauli_x_kernel(amps, 1 << qubit)


def apply_pauli_z(amps: np.ndarray, n_qubits: int, qubit: int) -> None:
    """In-place exact Pauli Z."""
    _pauli_z_kernel(amps, 1 << qubit)


def expect_z(amps: np.ndarray, n_qubits: int, qubit: int) -> np.ndarray:
    """<Z_qubit> per batch row. Exact, no sampling."""
    out = np.empty(amps.shape[0])
    _expect_z_kernel(amps, 1 << qubit, out)
    return out


def expect_x(amps: np.ndarray, n_qubits: int, qubit: int) -> np.ndarray:
    """<X_qubit> = 2 Re sum conj(a_0) a_1 over bit-paired amplitudes."""
    out = np.empty(amps.shape[0])
    _expect_x_kernel(amps, 1 << qubit, out)
    return out


def apply_gate_array(amps: np.ndarray, n_qubits: int, gate: GateOp) -> None:
    """Dispatch one GateOp onto a (B, 2**n) amplitude array."""
    _check_qubit(n_qubits, gate.target, "target")
    if gate.kind == "ry":
        apply_ry(amps, n_qubits, gate.target, gate.angle)
    elif gate.kind == "rz":
        apply_rz(amps, n_qubits, gate.target, gate.angle)
    else:
        _check_qubit(n_qubits, gate.control, "control")
        apply_cnot(amps, n_qubits, gate.control, gate.target)


def apply_gate(state: Statevector, gate: GateOp) -> Statevector:
    """Apply one gate to `state` in place and return it."""
    apply_gate_array(state.amplitudes.reshape(1, -1), state.n_qubits, gate)
    return state


def expect_pauli(state: Statevector, axis: str, qubit: int) -> float:
    """Exact single-qubit Pauli expectation on a Statevector."""
    _check_qubit(state.n_qubits, qubit, "measured")
    amps = state.amplitudes.reshape(1, -1)
    axis_l = axis.lower()
    if axis_l == "z":
        return float(expect_z(amps, state.n_qubits, qubit)[0])
    if axis_l == "x":
        return float(expect_x(amps, state.n_qubits, qubit)[0])
    raise ValueError(f"unsupported Pauli axis {axis!r}; expected 'z' or 'x'")
