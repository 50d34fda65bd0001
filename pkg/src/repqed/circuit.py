"""Moment-based circuits and an exact density-matrix executor.

A circuit is a sequence of moments; a moment is a set of gates, channel
insertions and measurement markers on disjoint qubits, plus a duration in
nanoseconds.  Durations drive the decoherence model: when noise is enabled,
every qubit (idle or active) accumulates one decoherence channel per moment.

Measurements never collapse to a sample here.  :func:`run_exact` enumerates
every declared outcome combination and returns one conditioned branch per
combination, so downstream metrics are exact; :func:`sample_shots` turns the
branch probabilities into a multinomial histogram when shot noise is wanted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .qstate import (
    ATOL_PHYS,
    DEGENERATE_PROB,
    DensityMatrix,
    KrausChannel,
    OperatorMatrix,
    PhysicalityError,
    embed,
)

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, types only
    from .errors import NoiseConfig

GATE_ARITY = {
    "RX": 1,
    "RY": 1,
    "RZ": 1,
    "X": 1,
    "Y": 1,
    "Z": 1,
    "CZ": 2,
    "ISWAP": 2,
    "CNOT": 2,
    "TOFFOLI": 3,
}

ROTATION_KINDS = frozenset({"RX", "RY", "RZ"})

# Nominal durations (ns).  Single-qubit pulses take 20 ns, the two-qubit
# phase gate 40 ns, the bus transfer 12 ns.  CNOT is a phase gate dressed by
# two single-qubit pulses.  TOFFOLI only appears inside the ideal decoder,
# which runs outside the noisy part of a sequence, hence zero.
DEFAULT_DURATION_NS = {
    "RX": 20.0,
    "RY": 20.0,
    "RZ": 20.0,
    "X": 20.0,
    "Y": 20.0,
    "Z": 20.0,
    "CZ": 40.0,
    "ISWAP": 12.0,
    "CNOT": 80.0,
    "TOFFOLI": 0.0,
}


@dataclass(frozen=True)
class Gate:
    """A named gate on specific qubits, with optional rotation angle."""

    kind: str
    targets: tuple[int, ...]
    theta: float | None = None
    duration: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        targets = tuple(self.targets)
        object.__setattr__(self, "targets", targets)
        if len(targets) != GATE_ARITY[self.kind]:
            raise ValueError(
                f"{self.kind} takes {GATE_ARITY[self.kind]} targets, got {targets}"
            )
        if len(set(targets)) != len(targets):
            raise ValueError(f"repeated target in {targets}")
        if self.kind in ROTATION_KINDS:
            if self.theta is None or not math.isfinite(self.theta):
                raise ValueError(f"{self.kind} needs a finite rotation angle")
        elif self.theta is not None:
            raise ValueError(f"{self.kind} takes no angle")
        if self.duration is None:
            object.__setattr__(self, "duration", DEFAULT_DURATION_NS[self.kind])
        elif self.duration < 0:
            raise ValueError(f"negative duration {self.duration}")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets


@dataclass(frozen=True)
class ChannelSite:
    """A Kraus channel inserted explicitly at a point in the circuit."""

    channel: KrausChannel
    targets: tuple[int, ...]

    def __post_init__(self):
        targets = tuple(self.targets)
        object.__setattr__(self, "targets", targets)
        if len(targets) != self.channel.arity:
            raise ValueError(
                f"channel arity {self.channel.arity} != {len(targets)} targets"
            )

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets

    duration = 0.0


@dataclass(frozen=True)
class MeasureMarker:
    """Projective readout of one qubit.

    ``basis="Z"`` projects onto |0>/|1>.  ``basis="X"`` declares the +/-
    basis: the qubit is rotated by RY(-pi/2) and then read out in Z, so |+>
    maps to declared bit 0 and |-> to declared bit 1.
    """

    qubit: int
    label: str
    basis: str = "Z"

    def __post_init__(self):
        if self.basis not in ("Z", "X"):
            raise ValueError(f"unsupported measurement basis {self.basis!r}")
        if not self.label:
            raise ValueError("measurement needs a non-empty label")

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.qubit,)

    duration = 0.0


@dataclass(frozen=True)
class Moment:
    """Entries executed in parallel; duration defaults to the longest entry."""

    entries: tuple = ()
    duration: float | None = None

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        seen: set[int] = set()
        for e in entries:
            for q in e.qubits:
                if q in seen:
                    raise ValueError(f"qubit {q} used twice in one moment")
                seen.add(q)
        if self.duration is None:
            object.__setattr__(
                self, "duration", max((e.duration for e in entries), default=0.0)
            )
        elif self.duration < 0:
            raise ValueError(f"negative moment duration {self.duration}")


@dataclass(frozen=True)
class Circuit:
    """A fixed-width register and an ordered tuple of moments."""

    n_qubits: int
    moments: tuple[Moment, ...] = ()

    def __post_init__(self):
        moments = tuple(self.moments)
        object.__setattr__(self, "moments", moments)
        if self.n_qubits <= 0:
            raise ValueError("circuit needs at least one qubit")
        labels: set[str] = set()
        for m in moments:
            for e in m.entries:
                for q in e.qubits:
                    if not 0 <= q < self.n_qubits:
                        raise ValueError(
                            f"entry targets qubit {q}, register has {self.n_qubits}"
                        )
                if isinstance(e, MeasureMarker):
                    if e.label in labels:
                        raise ValueError(f"measurement label {e.label!r} reused")
                    labels.add(e.label)

    @property
    def measurement_labels(self) -> tuple[str, ...]:
        out = []
        for m in self.moments:
            for e in m.entries:
                if isinstance(e, MeasureMarker):
                    out.append(e.label)
        return tuple(out)

    @property
    def total_duration(self) -> float:
        return sum(m.duration for m in self.moments)

    def then(self, *others: "Circuit") -> "Circuit":
        moments = list(self.moments)
        for c in others:
            if c.n_qubits != self.n_qubits:
                raise ValueError("cannot concatenate circuits of different width")
            moments.extend(c.moments)
        return Circuit(self.n_qubits, tuple(moments))


def gate_matrix(gate: Gate) -> OperatorMatrix:
    """Unitary matrix for a gate, most significant qubit = first target."""
    th = gate.theta
    if gate.kind == "RX":
        c, s = math.cos(th / 2), math.sin(th / 2)
        mat = np.array([[c, -1j * s], [-1j * s, c]])
    elif gate.kind == "RY":
        c, s = math.cos(th / 2), math.sin(th / 2)
        mat = np.array([[c, -s], [s, c]], dtype=complex)
    elif gate.kind == "RZ":
        mat = np.array([[np.exp(-1j * th / 2), 0], [0, np.exp(1j * th / 2)]])
    elif gate.kind in ("X", "Y", "Z"):
        from .qstate import PAULI

        mat = PAULI[gate.kind]
    elif gate.kind == "CZ":
        mat = np.diag([1, 1, 1, -1]).astype(complex)
    elif gate.kind == "ISWAP":
        mat = np.array(
            [[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex
        )
    elif gate.kind == "CNOT":
        mat = np.array(
            [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
        )
    elif gate.kind == "TOFFOLI":
        mat = np.eye(8, dtype=complex)
        mat[[6, 7]] = mat[[7, 6]]
    else:  # pragma: no cover - Gate validation forbids this
        raise ValueError(f"unknown gate kind {gate.kind!r}")
    return OperatorMatrix(len(gate.targets), mat, unitary_flag=True)


@dataclass(frozen=True)
class Branch:
    """One conditioned outcome of a circuit with measurements.

    ``outcomes`` maps measurement label to the declared bit (0 or 1) in the
    order the markers appear in the circuit.  ``state`` is normalized; for
    branches whose probability is numerically zero it is replaced by the
    maximally mixed state and ``degenerate`` is set.
    """

    outcomes: Mapping[str, int]
    probability: float
    state: DensityMatrix

    @property
    def degenerate(self) -> bool:
        return self.probability < DEGENERATE_PROB

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple(self.outcomes.values())


_RY_MINUS_90 = np.array(
    [
        [math.cos(math.pi / 4), math.sin(math.pi / 4)],
        [-math.sin(math.pi / 4), math.cos(math.pi / 4)],
    ],
    dtype=complex,
)
_PROJ = (
    np.array([[1, 0], [0, 0]], dtype=complex),
    np.array([[0, 0], [0, 1]], dtype=complex),
)


def run_exact(
    circuit: Circuit,
    initial: DensityMatrix,
    noise: "NoiseConfig | None" = None,
) -> list[Branch]:
    """Evolve ``initial`` through ``circuit``, enumerating every branch.

    Within a moment, gates and channels act first, then measurement markers
    split each branch in declared-outcome order.  With noise enabled, each
    moment is followed by one decoherence channel per qubit for the moment's
    duration, and declared outcomes are passed through the readout confusion
    model before the branches are returned.

    Branch probabilities sum to 1; when a readout veto discards shots the
    surviving branches are renormalized (the discarded fraction is available
    from the readout model itself).  Branches are sorted by declared bits.
    """
    if initial.n_qubits != circuit.n_qubits:
        raise ValueError(
            f"initial state has {initial.n_qubits} qubits, circuit {circuit.n_qubits}"
        )
    n = circuit.n_qubits
    decoherence = noise.decoherence if noise is not None else None
    if decoherence is not None and not decoherence.enabled:
        decoherence = None

    # Work on raw arrays; wrap into DensityMatrix only at the end.
    branches: list[tuple[tuple[int, ...], np.ndarray]] = [((), initial.entries.copy())]
    labels: list[str] = []

    for moment in circuit.moments:
        for entry in moment.entries:
            if isinstance(entry, Gate):
                u = embed(gate_matrix(entry), entry.targets, n).entries
                branches = [(o, u @ rho @ u.conj().T) for o, rho in branches]
            elif isinstance(entry, ChannelSite):
                kraus = [
                    embed(OperatorMatrix(entry.channel.arity, k), entry.targets, n).entries
                    for k in entry.channel.operators
                ]
                branches = [
                    (o, sum(k @ rho @ k.conj().T for k in kraus)) for o, rho in branches
                ]
        for entry in moment.entries:
            if not isinstance(entry, MeasureMarker):
                continue
            labels.append(entry.label)
            projectors = []
            for bit in (0, 1):
                p = _PROJ[bit]
                if entry.basis == "X":
                    p = p @ _RY_MINUS_90
                projectors.append(embed(OperatorMatrix(1, p), (entry.qubit,), n).entries)
            branches = [
                (o + (bit,), proj @ rho @ proj.conj().T)
                for o, rho in branches
                for bit, proj in enumerate(projectors)
            ]
        if decoherence is not None and moment.duration > 0:
            for q in range(n):
                channel = decoherence.channel_for(q, moment.duration)
                if channel is None:
                    continue
                kraus = [
                    embed(OperatorMatrix(1, k), (q,), n).entries
                    for k in channel.operators
                ]
                branches = [
                    (o, sum(k @ rho @ k.conj().T for k in kraus)) for o, rho in branches
                ]

    out = _finalize_branches(branches, labels, n)
    readout = noise.readout if noise is not None else None
    if readout is not None and labels and not readout.is_trivial:
        confused, retained = readout.confuse(out)
        if retained <= 0:
            raise PhysicalityError("readout veto discarded all probability mass")
        out = [
            Branch(b.outcomes, b.probability / retained, b.state) for b in confused
        ]
    return out


def _finalize_branches(
    raw: list[tuple[tuple[int, ...], np.ndarray]], labels: list[str], n: int
) -> list[Branch]:
    total = sum(float(np.real(np.trace(rho))) for _, rho in raw)
    if abs(total - 1.0) > ATOL_PHYS:
        raise PhysicalityError(f"branch probabilities sum to {total!r}, expected 1")
    out = []
    for bits, rho in sorted(raw, key=lambda item: item[0]):
        p = float(np.real(np.trace(rho)))
        p = max(p, 0.0)
        if p < DEGENERATE_PROB:
            state = DensityMatrix.maximally_mixed(n)
        else:
            state = DensityMatrix(n, rho / p)
        out.append(Branch(dict(zip(labels, bits)), p, state))
    return out


def sample_shots(
    branches: Sequence[Branch], n_shots: int, seed: int
) -> dict[tuple[int, ...], int]:
    """Multinomial histogram over branch outcomes.

    Keys are declared-bit tuples in measurement-label order.  The draw is
    reproducible: the same branches, shot count and seed give the same
    histogram.  ``n_shots == 0`` returns an empty histogram.
    """
    if n_shots < 0:
        raise ValueError(f"negative shot count {n_shots}")
    if n_shots == 0:
        return {}
    probs = np.array([b.probability for b in branches], dtype=float)
    if abs(probs.sum() - 1.0) > ATOL_PHYS:
        raise PhysicalityError(f"branch probabilities sum to {probs.sum()!r}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    counts = rng.multinomial(n_shots, probs / probs.sum())
    return {b.bits: int(c) for b, c in zip(branches, counts) if c > 0}


def _format_float(x: float) -> str:
    return repr(float(x))


def _entry_text(entry) -> str:
    if isinstance(entry, Gate):
        args = f"({_format_float(entry.theta)})" if entry.theta is not None else ""
        qubits = ",".join(str(q) for q in entry.targets)
        return f"{entry.kind}{args} q{qubits}"
    if isinstance(entry, MeasureMarker):
        return f"MEASURE[{entry.basis}] q{entry.qubit} label={entry.label}"
    if isinstance(entry, ChannelSite):
        qubits = ",".join(str(q) for q in entry.targets)
        return f"CHANNEL({len(entry.channel.operators)} kraus) q{qubits}"
    raise TypeError(f"cannot serialize {type(entry).__name__}")


def circuit_to_text(circuit: Circuit) -> str:
    """Deterministic structured-text rendering, one moment per line.

    Suitable for golden-file comparison: floats use shortest round-trip
    representation and entries keep their construction order.
    """
    lines = [f"circuit qubits={circuit.n_qubits} moments={len(circuit.moments)}"]
    for i, m in enumerate(circuit.moments):
        entries = "; ".join(_entry_text(e) for e in m.entries)
        lines.append(f"moment {i} dur={_format_float(m.duration)}ns: {entries}".rstrip())
    return "\n".join(lines) + "\n"
