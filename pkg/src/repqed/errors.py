"""Error and noise models: injected bit flips, readout confusion, relaxation.

Injected errors come in two flavours with the same strength parameter.  A
coherent error is a partial rotation RX(theta) with p_err = sin^2(theta/2);
an incoherent error is a classical mixture of full flips, enumerated as
explicit flip patterns with binomial weights so expectation values can be
computed exactly instead of sampled.

Readout confusion acts on declared measurement bits only: each declared bit
independently flips with probability eps or is vetoed (the shot discarded)
with probability veto.  Relaxation is amplitude damping plus pure dephasing
per qubit per moment, parameterized by T1 and T2 with T2 <= 2*T1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .circuit import Branch, Gate, Moment
from .qstate import DEGENERATE_PROB, DensityMatrix, KrausChannel, PAULI

ERROR_PULSE_NS = 20.0  # an injected flip is one single-qubit pulse long


@dataclass(frozen=True)
class ErrorSpec:
    """Strength and placement of an injected error round."""

    mode: str  # "coherent" | "incoherent"
    p_err: float
    targets: tuple[int, ...]

    def __post_init__(self):
        if self.mode not in ("coherent", "incoherent"):
            raise ValueError(f"unknown error mode {self.mode!r}")
        if not 0.0 <= self.p_err <= 1.0:
            raise ValueError(f"p_err {self.p_err} outside [0, 1]")
        targets = tuple(self.targets)
        if len(set(targets)) != len(targets) or not targets:
            raise ValueError(f"targets must be distinct and non-empty, got {targets}")
        object.__setattr__(self, "targets", targets)

    @property
    def theta(self) -> float:
        """Rotation angle with flip probability ``p_err``."""
        return 2.0 * math.asin(math.sqrt(self.p_err))


@dataclass(frozen=True)
class ErrorPattern:
    """One definite subset of qubits flipped, with its binomial weight."""

    flips: tuple[int, ...]
    weight: float

    @property
    def n_flips(self) -> int:
        return len(self.flips)


def flip_subsets(targets: Sequence[int]) -> list[tuple[int, ...]]:
    """All subsets of ``targets``, in lexicographic order over sorted indices."""
    base = sorted(targets)
    subsets = itertools.chain.from_iterable(
        itertools.combinations(base, r) for r in range(len(base) + 1)
    )
    return sorted(subsets)


def pattern_weight(p_err: float, n_flips: int, n_targets: int) -> float:
    return p_err**n_flips * (1.0 - p_err) ** (n_targets - n_flips)


def incoherent_patterns(spec: ErrorSpec) -> list[ErrorPattern]:
    """Exhaustive flip patterns for an incoherent error round.

    Weights are the binomial factors p^k (1-p)^(m-k) and sum to 1; the
    pattern order is deterministic (lexicographic by flipped subset).
    """
    m = len(spec.targets)
    return [
        ErrorPattern(s, pattern_weight(spec.p_err, len(s), m))
        for s in flip_subsets(spec.targets)
    ]


def coherent_error_moment(spec: ErrorSpec) -> Moment:
    """Simultaneous RX(theta) on every target; one pulse duration long."""
    gates = tuple(Gate("RX", (q,), theta=spec.theta) for q in spec.targets)
    return Moment(gates, duration=ERROR_PULSE_NS)


def pattern_moment(pattern: ErrorPattern) -> Moment:
    """Full flips on the pattern's qubits.

    The duration is one pulse even for the empty pattern, so every pattern
    of a mixture takes the same wall-clock time and decoherence weighs all
    of them equally.
    """
    gates = tuple(Gate("X", (q,)) for q in pattern.flips)
    return Moment(gates, duration=ERROR_PULSE_NS)


@dataclass(frozen=True)
class ReadoutModel:
    """Independent confusion and veto per declared parity bit."""

    eps_t: float = 0.0
    eps_b: float = 0.0
    veto_t: float = 0.0
    veto_b: float = 0.0

    def __post_init__(self):
        for name in ("eps_t", "eps_b", "veto_t", "veto_b"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.eps_t + self.veto_t > 1.0 or self.eps_b + self.veto_b > 1.0:
            raise ValueError("eps + veto exceeds 1 for one ancilla")

    @property
    def is_trivial(self) -> bool:
        return self.eps_t == self.eps_b == self.veto_t == self.veto_b == 0.0

    def params_for(self, label: str) -> tuple[float, float]:
        """(eps, veto) applied to a measurement label; unknown labels are clean."""
        if label == "P_t":
            return self.eps_t, self.veto_t
        if label == "P_b":
            return self.eps_b, self.veto_b
        return 0.0, 0.0

    def retained_fraction(self, labels: Sequence[str]) -> float:
        out = 1.0
        for lab in labels:
            out *= 1.0 - self.params_for(lab)[1]
        return out

    def confuse(self, branches: Sequence[Branch]) -> tuple[list[Branch], float]:
        """Reweight true branches into declared branches.

        Returns one branch per declared outcome combination plus the retained
        probability mass.  Output probabilities sum to the retained fraction,
        i.e. they are left unnormalized so the caller can decide whether to
        renormalize or account for the veto loss explicitly.
        """
        if not branches:
            return [], 1.0
        labels = list(branches[0].outcomes.keys())
        if not labels:
            return list(branches), 1.0
        params = [self.params_for(lab) for lab in labels]

        n = branches[0].state.n_qubits
        mass: dict[tuple[int, ...], float] = {}
        accum: dict[tuple[int, ...], np.ndarray] = {}
        for declared in itertools.product((0, 1), repeat=len(labels)):
            mass[declared] = 0.0
            accum[declared] = np.zeros((2**n, 2**n), dtype=complex)
        for b in branches:
            true_bits = tuple(b.outcomes[lab] for lab in labels)
            for declared in mass:
                w = b.probability
                for true_bit, dec_bit, (eps, veto) in zip(true_bits, declared, params):
                    w *= (1.0 - eps - veto) if dec_bit == true_bit else eps
                if w == 0.0:
                    continue
                mass[declared] += w
                accum[declared] += w * b.state.entries
        retained = self.retained_fraction(labels)

        out = []
        for declared in sorted(mass):
            p = mass[declared]
            if p < DEGENERATE_PROB:
                state = DensityMatrix.maximally_mixed(n)
            else:
                state = DensityMatrix(n, accum[declared] / p)
            out.append(Branch(dict(zip(labels, declared)), p, state))
        return out, retained


def confuse_and_postselect(
    branches: Sequence[Branch], model: ReadoutModel
) -> tuple[list[Branch], float]:
    """Apply ``model`` to declared outcomes; see :meth:`ReadoutModel.confuse`."""
    return model.confuse(branches)


def _per_qubit(value: float | Mapping[int, float], qubit: int, name: str) -> float:
    if isinstance(value, Mapping):
        if qubit not in value:
            raise ValueError(f"{name} has no entry for qubit {qubit}")
        return float(value[qubit])
    return float(value)


@lru_cache(maxsize=None)
def _relaxation_channel(t1: float, t2: float, duration: float) -> KrausChannel | None:
    gamma = 1.0 - math.exp(-duration / t1) if math.isfinite(t1) else 0.0
    phi_rate = (1.0 / t2 if math.isfinite(t2) else 0.0) - (
        1.0 / (2.0 * t1) if math.isfinite(t1) else 0.0
    )
    # T2 <= 2*T1 was validated upstream; tiny negative residue is roundoff.
    phi_rate = max(phi_rate, 0.0)
    p_z = (1.0 - math.exp(-duration * phi_rate)) / 2.0
    if gamma == 0.0 and p_z == 0.0:
        return None
    damp = [
        np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - gamma)]], dtype=complex),
        np.array([[0.0, math.sqrt(gamma)], [0.0, 0.0]], dtype=complex),
    ]
    ops = []
    for a in damp:
        for w, z in ((1.0 - p_z, PAULI["I"]), (p_z, PAULI["Z"])):
            if w > 0.0:
                ops.append(math.sqrt(w) * (z @ a))
    return KrausChannel(1, tuple(ops))


@dataclass(frozen=True)
class DecoherenceConfig:
    """Per-qubit T1/T2 relaxation applied once per moment per qubit.

    Over a window of length t the excited population decays by e^(-t/T1) and
    coherences by e^(-t/T2); pure dephasing is whatever T2 requires beyond
    the damping contribution, which forces T2 <= 2*T1.  Times are in the
    same unit as moment durations (ns).  Scalar T1/T2 apply to every qubit;
    mappings give per-qubit values.
    """

    t1: float | Mapping[int, float]
    t2: float | Mapping[int, float]
    n_qubits: int = 5
    enabled: bool = True

    def __post_init__(self):
        for q in range(self.n_qubits):
            t1, t2 = self.times_for(q)
            if not t1 > 0 or not t2 > 0:
                raise ValueError(f"qubit {q}: T1 and T2 must be positive")
            if math.isfinite(t2) and t2 > 2.0 * t1 * (1.0 + 1e-12):
                raise ValueError(f"qubit {q}: T2={t2} exceeds 2*T1={2 * t1}")

    def times_for(self, qubit: int) -> tuple[float, float]:
        return (
            _per_qubit(self.t1, qubit, "T1"),
            _per_qubit(self.t2, qubit, "T2"),
        )

    def channel_for(self, qubit: int, duration: float) -> KrausChannel | None:
        """Relaxation channel for one qubit over one moment; None if identity."""
        if not self.enabled or duration <= 0:
            return None
        t1, t2 = self.times_for(qubit)
        return _relaxation_channel(t1, t2, float(duration))


def decoherence_channels(
    config: DecoherenceConfig, moment: Moment, n_qubits: int
) -> list[tuple[KrausChannel, int]]:
    """One (channel, qubit) site per register qubit for one moment."""
    out = []
    for q in range(n_qubits):
        ch = config.channel_for(q, moment.duration)
        if ch is not None:
            out.append((ch, q))
    return out


@dataclass(frozen=True)
class NoiseConfig:
    """Bundle of every noise knob a run can enable.

    ``residual_excitation`` mixes each qubit's initial state toward |1> with
    the given probability before any gate acts.
    """

    readout: ReadoutModel | None = None
    decoherence: DecoherenceConfig | None = None
    residual_excitation: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.residual_excitation <= 1.0:
            raise ValueError(
                f"residual_excitation {self.residual_excitation} outside [0, 1]"
            )

    @classmethod
    def ideal(cls) -> "NoiseConfig":
        return cls()

    @property
    def is_ideal(self) -> bool:
        readout_ok = self.readout is None or self.readout.is_trivial
        deco_ok = self.decoherence is None or not self.decoherence.enabled
        return readout_ok and deco_ok and self.residual_excitation == 0.0

    def initial_state(self, n_qubits: int) -> DensityMatrix:
        r = self.residual_excitation
        single = np.array([[1.0 - r, 0.0], [0.0, r]], dtype=complex)
        return DensityMatrix.product([single] * n_qubits)
