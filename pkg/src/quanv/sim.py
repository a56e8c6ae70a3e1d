"""Dense statevector simulation for few-qubit circuits.

Wire 0 is the most significant bit of the basis index, so applying
``RY(pi)`` to wire 0 of ``|00>`` gives ``|10>`` (index 2).

Amplitudes may carry leading batch dimensions: an array of shape
``(..., 2**n)`` holds one register per leading index and every gate acts on
all of them at once.  Rotation angles broadcast against those leading
dimensions, which is how a whole image's patches get encoded in one call.

All gate arithmetic is done on the float64 real/imaginary parts with plain
elementwise multiplies and adds, so a register's result does not depend on
how many other registers share its batch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, WireError
from .rng import SplitMix64

MAX_QUBITS = 10
ORACLE_MAX_QUBITS = 6
ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATIONS + ("CNOT",)


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.amplitudes.shape[:-1]

    def norm(self) -> np.ndarray | float:
        return np.sqrt(np.sum(np.abs(self.amplitudes) ** 2, axis=-1))

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())


@dataclass(frozen=True)
class Gate:
    kind: str
    wires: tuple[int, ...]
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ConfigError(f"unknown gate kind {self.kind!r}")
        want = 2 if self.kind == "CNOT" else 1
        if len(self.wires) != want:
            raise WireError(f"{self.kind} takes {want} wire(s), got {self.wires}")
        if len(set(self.wires)) != len(self.wires):
            raise WireError(f"{self.kind} wires must be distinct, got {self.wires}")
        if not math.isfinite(self.angle):
            raise ConfigError(f"gate angle must be finite, got {self.angle}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "wires": list(self.wires)}
        if self.kind != "CNOT":
            d["angle"] = self.angle
        return d


@dataclass(frozen=True)
class CircuitSpec:
    """Immutable gate list plus the (seed, n_layers) that generated it."""

    n_qubits: int
    gates: tuple[Gate, ...] = ()
    seed: int = 0
    n_layers: int = 0

    def __post_init__(self):
        for g in self.gates:
            if max(g.wires) >= self.n_qubits or min(g.wires) < 0:
                raise WireError(f"gate {g} does not fit a {self.n_qubits}-qubit register")

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_qubits": self.n_qubits,
                "seed": self.seed,
                "n_layers": self.n_layers,
                "gates": [g.to_dict() for g in self.gates],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "CircuitSpec":
        doc = json.loads(text)
        gates = tuple(
            Gate(g["kind"], tuple(g["wires"]), float(g.get("angle", 0.0))) for g in doc["gates"]
        )
        return cls(int(doc["n_qubits"]), gates, int(doc["seed"]), int(doc["n_layers"]))


def new_state(n_qubits: int, batch_shape: tuple[int, ...] = ()) -> StateVector:
    """``|0...0>`` on ``n_qubits`` wires, optionally replicated over ``batch_shape``."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigError(f"n_qubits must be in 1..{MAX_QUBITS}, got {n_qubits}")
    amps = np.zeros(tuple(batch_shape) + (2**n_qubits,), dtype=np.complex128)
    amps[..., 0] = 1.0
    return StateVector(n_qubits, amps)


def _check_wire(state: StateVector, wire: int) -> None:
    if not 0 <= wire < state.n_qubits:
        raise WireError(f"wire {wire} out of range for {state.n_qubits} qubits")


def _tensor(state: StateVector) -> tuple[np.ndarray, int]:
    """Float view of the amplitudes shaped ``batch + (2,)*n + (2,)`` and the wire-0 axis."""
    amps = state.amplitudes
    if not amps.flags.c_contiguous:
        state.amplitudes = amps = np.ascontiguousarray(amps)
    lead = amps.shape[:-1]
    t = amps.view(np.float64).reshape(lead + (2,) * state.n_qubits + (2,))
    return t, len(lead)


def apply_rotation(state: StateVector, kind: str, wire: int, angle) -> StateVector:
    """Apply RX, RY or RZ in place.

    ``angle`` is a float or an array broadcastable to the batch shape.
    """
    if kind not in ROTATIONS:
        raise ConfigError(f"not a rotation: {kind!r}")
    _check_wire(state, wire)
    angle = np.asarray(angle, dtype=np.float64)
    if not np.all(np.isfinite(angle)):
        raise ConfigError("rotation angle must be finite")

    t, base = _tensor(state)
    v = np.moveaxis(t, base + wire, 0)
    # broadcast per-register angles over the remaining wire axes and re/im
    extra = (1,) * (state.n_qubits - 1)
    c = np.cos(angle / 2).reshape(angle.shape + extra)
    s = np.sin(angle / 2).reshape(angle.shape + extra)

    re0, im0 = v[0, ..., 0].copy(), v[0, ..., 1].copy()
    re1, im1 = v[1, ..., 0].copy(), v[1, ..., 1].copy()
    if kind == "RY":
        # [c, -s; s, c]
        v[0, ..., 0] = c * re0 - s * re1
        v[0, ..., 1] = c * im0 - s * im1
        v[1, ..., 0] = s * re0 + c * re1
        v[1, ..., 1] = s * im0 + c * im1
    elif kind == "RX":
        # [c, -i s; -i s, c]
        v[0, ..., 0] = c * re0 + s * im1
        v[0, ..., 1] = c * im0 - s * re1
        v[1, ..., 0] = s * im0 + c * re1
        v[1, ..., 1] = c * im1 - s * re0
    else:
        # diag(e^{-i theta/2}, e^{i theta/2})
        v[0, ..., 0] = c * re0 + s * im0
        v[0, ..., 1] = c * im0 - s * re0
        v[1, ..., 0] = c * re1 - s * im1
        v[1, ..., 1] = c * im1 + s * re1
    return state


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    """Flip ``target`` on every basis state whose ``control`` bit is set (in place)."""
    _check_wire(state, control)
    _check_wire(state, target)
    if control == target:
        raise WireError(f"CNOT control and target must differ, got {control}")
    t, base = _tensor(state)
    v = np.moveaxis(t, (base + control, base + target), (0, 1))
    tmp = v[1, 0].copy()
    v[1, 0] = v[1, 1]
    v[1, 1] = tmp
    return state


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    if gate.kind == "CNOT":
        return apply_cnot(state, *gate.wires)
    return apply_rotation(state, gate.kind, gate.wires[0], gate.angle)


def run_circuit(state: StateVector, circuit: CircuitSpec) -> StateVector:
    if circuit.n_qubits != state.n_qubits:
        raise ConfigError(
            f"circuit has {circuit.n_qubits} qubits but the state has {state.n_qubits}"
        )
    for gate in circuit.gates:
        apply_gate(state, gate)
    return state


def expectation_z(state: StateVector, wire: int) -> np.ndarray | float:
    """<Z> on ``wire``: sum of |amp|^2 with sign +1 where the wire bit is 0, -1 where 1."""
    _check_wire(state, wire)
    n = state.n_qubits
    amps = state.amplitudes
    probs = amps.real**2 + amps.imag**2
    bit = (np.arange(2**n) >> (n - 1 - wire)) & 1
    signs = 1.0 - 2.0 * bit
    z = np.clip(np.sum(probs * signs, axis=-1), -1.0, 1.0)
    return float(z) if z.ndim == 0 else z


def expectation_z_all(state: StateVector) -> np.ndarray:
    """<Z_j> for every wire, stacked on a trailing axis."""
    return np.stack(
        [np.asarray(expectation_z(state, w)) for w in range(state.n_qubits)], axis=-1
    )


def build_random_layers(seed: int, n_layers: int = 1, n_qubits: int = 4) -> CircuitSpec:
    """Seeded shallow ansatz: per layer, one random rotation per wire then a CNOT ring.

    For each wire in order a kind is drawn uniformly from (RX, RY, RZ) and then
    an angle uniformly from [0, 2pi); the draws interleave kind, angle, kind,
    angle ... over wires and layers.
    """
    if n_layers < 0:
        raise ConfigError(f"n_layers must be non-negative, got {n_layers}")
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigError(f"n_qubits must be in 1..{MAX_QUBITS}, got {n_qubits}")
    if n_layers >= 1 and n_qubits < 2:
        raise ConfigError("entangling layers need at least two qubits")
    rng = SplitMix64(seed)
    gates: list[Gate] = []
    for _ in range(n_layers):
        for w in range(n_qubits):
            kind = ROTATIONS[int(rng.integers(3, 1)[0])]
            angle = float(rng.uniform(0.0, 2 * math.pi, 1)[0])
            gates.append(Gate(kind, (w,), angle))
        for w in range(n_qubits):
            gates.append(Gate("CNOT", (w, (w + 1) % n_qubits)))
    return CircuitSpec(n_qubits, tuple(gates), seed, n_layers)


def random_circuit(rng: SplitMix64, n_qubits: int, n_gates: int) -> CircuitSpec:
    """Unstructured random gate list (test and benchmark helper)."""
    gates = []
    for _ in range(n_gates):
        k = int(rng.integers(4 if n_qubits > 1 else 3, 1)[0])
        if k == 3:
            c, t = (int(x) for x in rng.integers(n_qubits, 2))
            if c == t:
                t = (c + 1) % n_qubits
            gates.append(Gate("CNOT", (c, t)))
        else:
            w = int(rng.integers(n_qubits, 1)[0])
            gates.append(Gate(ROTATIONS[k], (w,), float(rng.uniform(-2 * math.pi, 2 * math.pi, 1)[0])))
    return CircuitSpec(n_qubits, tuple(gates))


# -- Kronecker-product oracle -------------------------------------------------

_I2 = np.eye(2, dtype=np.complex128)
_P0 = np.array([[1, 0], [0, 0]], dtype=np.complex128)
_P1 = np.array([[0, 0], [0, 1]], dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)


def _rotation_matrix(kind: str, angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    return np.array([[complex(c, -s), 0], [0, complex(c, s)]])


def _kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for f in factors:
        out = np.kron(out, f)
    return out


def gate_matrix(gate: Gate, n_qubits: int) -> np.ndarray:
    """Full ``2**n x 2**n`` unitary of ``gate`` built from Kronecker products."""
    if gate.kind == "CNOT":
        c, t = gate.wires
        off = [_P0 if w == c else _I2 for w in range(n_qubits)]
        on = [_P1 if w == c else _X if w == t else _I2 for w in range(n_qubits)]
        return _kron_all(off) + _kron_all(on)
    (w,) = gate.wires
    u = _rotation_matrix(gate.kind, gate.angle)
    return _kron_all([u if i == w else _I2 for i in range(n_qubits)])


def oracle_statevector(circuit: CircuitSpec, n_qubits: int) -> StateVector:
    """Reference result by explicit matrix products on ``|0...0>``; slow on purpose."""
    if n_qubits > ORACLE_MAX_QUBITS:
        raise ConfigError(f"oracle refuses more than {ORACLE_MAX_QUBITS} qubits")
    if circuit.n_qubits != n_qubits:
        raise ConfigError("circuit/qubit-count mismatch")
    dim = 2**n_qubits
    u = np.eye(dim, dtype=np.complex128)
    for g in circuit.gates:
        u = gate_matrix(g, n_qubits) @ u
    psi = np.zeros(dim, dtype=np.complex128)
    psi[0] = 1.0
    return StateVector(n_qubits, u @ psi)
