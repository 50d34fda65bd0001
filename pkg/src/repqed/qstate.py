"""Dense state and operator algebra for small qubit registers.

Everything here works on explicit numpy arrays; registers are at most a
handful of qubits, so dense 2^n x 2^n linear algebra is both exact and fast.
Qubit 0 is the most significant bit of a basis index: for n qubits the basis
state |b0 b1 ... b(n-1)> has index sum(b_k * 2^(n-1-k)).

States and operators validate their own physicality on construction.  A
failed check raises :class:`PhysicalityError` with the offending quantity in
the message, so a simulation that drifts out of the physical set dies loudly
rather than producing plausible-looking garbage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Default tolerances.  Positivity/trace-preservation checks get the looser
# bound; unitarity and norm checks the tighter one.  Constructors accept an
# explicit atol for callers that need to loosen or tighten them.
ATOL_PHYS = 1e-9
ATOL_NORM = 1e-10

# Branches below this probability carry no usable state.
DEGENERATE_PROB = 1e-12


class PhysicalityError(ValueError):
    """A state or operator failed a physicality invariant."""


PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _as_complex_array(entries, shape_kind: str) -> np.ndarray:
    arr = np.asarray(entries, dtype=complex)
    if not np.all(np.isfinite(arr.view(float))):
        raise PhysicalityError(f"{shape_kind} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _n_qubits_for(dim: int, what: str) -> int:
    n = dim.bit_length() - 1
    if dim <= 0 or 2**n != dim:
        raise ValueError(f"{what} dimension {dim} is not a power of two")
    return n


def kron_all(factors: Iterable[np.ndarray]) -> np.ndarray:
    """Kronecker product of the given factors, left factor most significant."""
    out = np.array([[1.0 + 0j]])
    for f in factors:
        out = np.kron(out, f)
    return out


@dataclass(frozen=True)
class PureState:
    """Normalized state vector on ``n_qubits`` qubits."""

    n_qubits: int
    amplitudes: np.ndarray
    atol: float = ATOL_NORM

    def __post_init__(self):
        amps = _as_complex_array(self.amplitudes, "state vector")
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} "
                f"qubits, got shape {amps.shape}"
            )
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > self.atol:
            raise PhysicalityError(f"state vector norm {norm!r} is not 1")

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "PureState":
        if not 0 <= index < 2**n_qubits:
            raise ValueError(f"basis index {index} out of range for {n_qubits} qubits")
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "PureState":
        index = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"bit value {b!r} is not 0 or 1")
            index = (index << 1) | b
        return cls.basis(len(bits), index)

    @classmethod
    def product(cls, single_qubit_kets: Sequence[np.ndarray]) -> "PureState":
        """Tensor product of single-qubit kets, first ket = qubit 0 (MSB)."""
        kets = [np.asarray(k, dtype=complex).reshape(2) for k in single_qubit_kets]
        return cls(len(kets), kron_all(kets).reshape(-1))

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, positive-semidefinite operator with known trace.

    ``trace_weight`` records the expected trace: 1.0 for a normalized state,
    or the probability mass of an unnormalized measurement branch.  Carrying
    the weight explicitly keeps the trace check meaningful in both uses.
    """

    n_qubits: int
    entries: np.ndarray
    trace_weight: float = 1.0
    atol: float = ATOL_PHYS

    def __post_init__(self):
        mat = _as_complex_array(self.entries, "density matrix")
        object.__setattr__(self, "entries", mat)
        dim = 2**self.n_qubits
        if mat.shape != (dim, dim):
            raise ValueError(f"expected shape {(dim, dim)}, got {mat.shape}")
        herm_defect = float(np.max(np.abs(mat - mat.conj().T)))
        if herm_defect > ATOL_NORM:
            raise PhysicalityError(f"density matrix not Hermitian (defect {herm_defect:.3e})")
        tr = complex(np.trace(mat))
        if abs(tr - self.trace_weight) > self.atol:
            raise PhysicalityError(
                f"trace {tr!r} differs from expected weight {self.trace_weight!r}"
            )
        min_eig = float(np.linalg.eigvalsh(mat)[0])
        if min_eig < -self.atol:
            raise PhysicalityError(f"density matrix has negative eigenvalue {min_eig:.3e}")

    @classmethod
    def from_pure(cls, state: PureState) -> "DensityMatrix":
        return state.density()

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        dim = 2**n_qubits
        return cls(n_qubits, np.eye(dim, dtype=complex) / dim)

    @classmethod
    def product(cls, single_qubit_mats: Sequence[np.ndarray]) -> "DensityMatrix":
        """Tensor product of single-qubit density matrices, first = qubit 0."""
        mats = [np.asarray(m, dtype=complex).reshape(2, 2) for m in single_qubit_mats]
        return cls(len(mats), kron_all(mats))

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))


@dataclass(frozen=True)
class OperatorMatrix:
    """Square operator on ``arity`` qubits, optionally asserted unitary."""

    arity: int
    entries: np.ndarray
    unitary_flag: bool = False
    atol: float = ATOL_NORM

    def __post_init__(self):
        mat = _as_complex_array(self.entries, "operator")
        object.__setattr__(self, "entries", mat)
        dim = 2**self.arity
        if mat.shape != (dim, dim):
            raise ValueError(f"expected shape {(dim, dim)}, got {mat.shape}")
        if self.unitary_flag:
            defect = float(np.max(np.abs(mat.conj().T @ mat - np.eye(dim))))
            if defect > self.atol:
                raise PhysicalityError(
                    f"operator flagged unitary but U^dag U deviates from identity "
                    f"by {defect:.3e}"
                )

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.arity, self.entries.conj().T, self.unitary_flag, self.atol)


def pauli_string(ops: str) -> OperatorMatrix:
    """Tensor product of single-qubit Paulis, e.g. ``"XIX"``."""
    try:
        factors = [PAULI[c] for c in ops]
    except KeyError as exc:
        raise ValueError(f"unknown Pauli letter {exc.args[0]!r}") from None
    return OperatorMatrix(len(ops), kron_all(factors), unitary_flag=True)


@dataclass(frozen=True)
class KrausChannel:
    """Completely positive trace-preserving map given by Kraus operators."""

    arity: int
    operators: tuple = field(default_factory=tuple)
    atol: float = ATOL_PHYS

    def __post_init__(self):
        dim = 2**self.arity
        ops = []
        for k in self.operators:
            arr = _as_complex_array(k, "Kraus operator")
            if arr.shape != (dim, dim):
                raise ValueError(f"Kraus operator shape {arr.shape}, expected {(dim, dim)}")
            ops.append(arr)
        if not ops:
            raise ValueError("channel needs at least one Kraus operator")
        object.__setattr__(self, "operators", tuple(ops))
        total = sum(k.conj().T @ k for k in ops)
        defect = float(np.max(np.abs(total - np.eye(dim))))
        if defect > self.atol:
            raise PhysicalityError(
                f"Kraus operators not trace preserving (sum K^dag K defect {defect:.3e})"
            )

    @classmethod
    def identity(cls, arity: int = 1) -> "KrausChannel":
        return cls(arity, (np.eye(2**arity, dtype=complex),))


def embed(op: OperatorMatrix, targets: Sequence[int], n_qubits: int) -> OperatorMatrix:
    """Extend ``op`` to the full register, acting on ``targets`` in order.

    ``targets[i]`` receives axis i of the operator.  Implementation: tensor
    the operator with identity, then permute qubit axes into place.
    """
    targets = tuple(targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {targets}")
    if op.arity != len(targets):
        raise ValueError(f"operator arity {op.arity} != {len(targets)} targets")
    for q in targets:
        if not 0 <= q < n_qubits:
            raise ValueError(f"target {q} out of range for {n_qubits} qubits")
    if len(targets) == n_qubits and targets == tuple(range(n_qubits)):
        return op

    rest = [q for q in range(n_qubits) if q not in targets]
    full = np.kron(op.entries, np.eye(2 ** len(rest), dtype=complex))
    tensor = full.reshape([2] * (2 * n_qubits))
    # Axis i of `full` currently belongs to qubit (targets + rest)[i].
    source_axis = {q: i for i, q in enumerate(list(targets) + rest)}
    perm = [source_axis[q] for q in range(n_qubits)]
    tensor = tensor.transpose(perm + [p + n_qubits for p in perm])
    dim = 2**n_qubits
    return OperatorMatrix(n_qubits, tensor.reshape(dim, dim), op.unitary_flag, op.atol)


def apply_unitary(
    rho: DensityMatrix, op: OperatorMatrix, targets: Sequence[int] | None = None
) -> DensityMatrix:
    """Conjugate ``rho`` by a unitary acting on ``targets``."""
    if not op.unitary_flag:
        raise PhysicalityError("apply_unitary requires an operator flagged unitary")
    if targets is None:
        targets = tuple(range(op.arity))
    full = embed(op, targets, rho.n_qubits)
    out = full.entries @ rho.entries @ full.entries.conj().T
    return DensityMatrix(rho.n_qubits, out, rho.trace_weight, rho.atol)


def apply_channel(
    rho: DensityMatrix, channel: KrausChannel, targets: Sequence[int] | None = None
) -> DensityMatrix:
    """Apply a Kraus channel to ``targets`` of ``rho``."""
    if targets is None:
        targets = tuple(range(channel.arity))
    if channel.arity != len(targets):
        raise ValueError(f"channel arity {channel.arity} != {len(targets)} targets")
    out = np.zeros_like(rho.entries)
    for k in channel.operators:
        full = embed(OperatorMatrix(channel.arity, k), targets, rho.n_qubits).entries
        out += full @ rho.entries @ full.conj().T
    return DensityMatrix(rho.n_qubits, out, rho.trace_weight, rho.atol)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Trace out all qubits not in ``keep``.

    The reduced register is ordered as listed in ``keep``.
    """
    keep = tuple(keep)
    n = rho.n_qubits
    if len(set(keep)) != len(keep):
        raise ValueError(f"duplicate qubits in keep={keep}")
    for q in keep:
        if not 0 <= q < n:
            raise ValueError(f"keep qubit {q} out of range for {n} qubits")
    if keep == tuple(range(n)):
        return rho

    tensor = rho.entries.reshape([2] * (2 * n))
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for q in range(n):
        if q not in keep:
            col[q] = row[q]  # repeated index contracts the traced qubit
    out_sub = "".join(row[q] for q in keep) + "".join(col[q] for q in keep)
    reduced = np.einsum("".join(row + col) + "->" + out_sub, tensor)
    dim = 2 ** len(keep)
    return DensityMatrix(len(keep), reduced.reshape(dim, dim), rho.trace_weight, rho.atol)


def expectation(rho: DensityMatrix, observable: OperatorMatrix) -> float:
    """Real expectation value of a Hermitian observable."""
    obs = observable.entries
    herm_defect = float(np.max(np.abs(obs - obs.conj().T)))
    if herm_defect > ATOL_NORM:
        raise PhysicalityError(f"observable not Hermitian (defect {herm_defect:.3e})")
    if observable.arity != rho.n_qubits:
        raise ValueError(
            f"observable arity {observable.arity} != register size {rho.n_qubits}"
        )
    val = complex(np.trace(rho.entries @ obs))
    if abs(val.imag) > ATOL_PHYS:
        raise PhysicalityError(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def fidelity_to_pure(rho: DensityMatrix, target: PureState) -> float:
    """<target| rho |target>, clipped into [0, 1] against roundoff."""
    if target.n_qubits != rho.n_qubits:
        raise ValueError(
            f"target register size {target.n_qubits} != state size {rho.n_qubits}"
        )
    amps = target.amplitudes
    val = float(np.real(amps.conj() @ rho.entries @ amps))
    if val < -ATOL_PHYS or val > 1.0 + ATOL_PHYS:
        raise PhysicalityError(f"fidelity {val!r} outside [0, 1]")
    return min(max(val, 0.0), 1.0)
