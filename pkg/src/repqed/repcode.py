"""Three-qubit bit-flip repetition code with two flag ancillas.

Register layout (qubit index = significance, 0 is the most significant bit):

    0  D_t   top data qubit
    1  D_m   middle data qubit
    2  D_b   bottom data qubit
    3  A_t   ancilla reading the Z_t Z_m parity
    4  A_b   ancilla reading the Z_m Z_b parity

The default encoding is inverted: |psi> = a|0> + b|1> maps to a|111> + b|000>.
The inversion comes from folding the mid-sequence refocusing pulse on D_m into
the codewords together with the bit flips that complete the parity mapping;
``ConventionFlag`` exposes the textbook a|000> + b|111> variant for
cross-checks of the gate encoding and decoder.

A stabilizer round maps each two-qubit parity onto an ancilla through a pair
of controlled-phase interactions framed by ancilla basis rotations, then
reads both ancillas in the +/- basis.  Declared bit 0 means even parity (e),
1 means odd (o).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .circuit import Branch, Circuit, Gate, MeasureMarker, Moment, circuit_to_text, gate_matrix
from .errors import NoiseConfig
from .qstate import DensityMatrix, OperatorMatrix, PureState, partial_trace, pauli_string

D_T, D_M, D_B, A_T, A_B = 0, 1, 2, 3, 4
DATA_QUBITS = (D_T, D_M, D_B)
ANCILLA_QUBITS = (A_T, A_B)
N_QUBITS = 5

PARITY_LABELS = ("P_t", "P_b")

HALF_PI = math.pi / 2


@dataclass(frozen=True)
class ConventionFlag:
    """Which computational codeword carries logical |0>."""

    inverted: bool = True


INVERTED_CONVENTION = ConventionFlag(inverted=True)
TEXTBOOK_CONVENTION = ConventionFlag(inverted=False)

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


class Cardinal(enum.Enum):
    """The six single-qubit cardinal states (Bloch axes)."""

    ZERO = "0"
    ONE = "1"
    PLUS = "+"
    MINUS = "-"
    PLUS_I = "+i"
    MINUS_I = "-i"

    @property
    def amplitudes(self) -> tuple[complex, complex]:
        return {
            Cardinal.ZERO: (1.0, 0.0),
            Cardinal.ONE: (0.0, 1.0),
            Cardinal.PLUS: (_INV_SQRT2, _INV_SQRT2),
            Cardinal.MINUS: (_INV_SQRT2, -_INV_SQRT2),
            Cardinal.PLUS_I: (_INV_SQRT2, 1j * _INV_SQRT2),
            Cardinal.MINUS_I: (_INV_SQRT2, -1j * _INV_SQRT2),
        }[self]

    @property
    def prep_gate(self) -> Gate | None:
        """Single pulse taking |0> to this state (None for |0> itself)."""
        table = {
            Cardinal.ZERO: None,
            Cardinal.ONE: Gate("X", (D_M,)),
            Cardinal.PLUS: Gate("RY", (D_M,), theta=HALF_PI),
            Cardinal.MINUS: Gate("RY", (D_M,), theta=-HALF_PI),
            Cardinal.PLUS_I: Gate("RX", (D_M,), theta=-HALF_PI),
            Cardinal.MINUS_I: Gate("RX", (D_M,), theta=HALF_PI),
        }
        return table[self]


CARDINALS = tuple(Cardinal)


class Syndrome(enum.Enum):
    """Joint declared parity P_t P_b; e = even, o = odd."""

    EE = "ee"
    EO = "eo"
    OE = "oe"
    OO = "oo"

    @classmethod
    def from_bits(cls, bit_t: int, bit_b: int) -> "Syndrome":
        return cls("eo"[bit_t] + "eo"[bit_b])

    @classmethod
    def from_outcomes(cls, outcomes) -> "Syndrome":
        return cls.from_bits(outcomes["P_t"], outcomes["P_b"])


SYNDROMES = (Syndrome.EE, Syndrome.EO, Syndrome.OE, Syndrome.OO)


def logical_state(
    cardinal: Cardinal, convention: ConventionFlag = INVERTED_CONVENTION
) -> PureState:
    """Three-qubit codeword encoding the cardinal state."""
    a, b = cardinal.amplitudes
    amps = np.zeros(8, dtype=complex)
    if convention.inverted:
        amps[7], amps[0] = a, b
    else:
        amps[0], amps[7] = a, b
    return PureState(3, amps)


def ghz_state(phi: float) -> PureState:
    """(|000> + e^{-i phi} |111>) / sqrt(2)."""
    amps = np.zeros(8, dtype=complex)
    amps[0] = _INV_SQRT2
    amps[7] = _INV_SQRT2 * np.exp(-1j * phi)
    return PureState(3, amps)


def encode_by_gates(
    cardinal: Cardinal, convention: ConventionFlag = INVERTED_CONVENTION
) -> Circuit:
    """Unitary encoding circuit on the full register (ancillas untouched).

    Prepares the cardinal on D_m, copies it out with two CNOTs, and (in the
    inverted convention) flips all three data qubits.
    """
    moments = []
    prep = cardinal.prep_gate
    if prep is not None:
        moments.append(Moment((prep,)))
    moments.append(Moment((Gate("CNOT", (D_M, D_T)),)))
    moments.append(Moment((Gate("CNOT", (D_M, D_B)),)))
    if convention.inverted:
        moments.append(
            Moment(tuple(Gate("X", (q,)) for q in DATA_QUBITS))
        )
    return Circuit(N_QUBITS, tuple(moments))


def stabilizer_round(active: tuple[str, ...] = ("t", "b")) -> Circuit:
    """One parity-measurement round on the full register.

    Moment layout (durations in ns):

        0   20  RY(pi/2) on each active ancilla
        1   12  bus transfer window (idle pad)
        2   40  CZ(A_t, D_t) and CZ(A_b, D_m)
        3   40  CZ(A_t, D_m) and CZ(A_b, D_b)
        4   20  refocusing X on D_m
        5   12  bus transfer window (idle pad)
        6    0  +/- basis readout of active ancillas

    ``active`` selects which ancillas participate ("t", "b" or both); the
    controlled-phase interactions stay in place either way so the timing of
    the data qubits does not depend on the selection (an ancilla left in
    |0> makes its CZ act as identity).
    """
    for a in active:
        if a not in ("t", "b"):
            raise ValueError(f"unknown ancilla selector {a!r}")
    use_t, use_b = "t" in active, "b" in active

    prep = []
    if use_t:
        prep.append(Gate("RY", (A_T,), theta=HALF_PI))
    if use_b:
        prep.append(Gate("RY", (A_B,), theta=HALF_PI))
    readout = []
    if use_t:
        readout.append(MeasureMarker(A_T, "P_t", basis="X"))
    if use_b:
        readout.append(MeasureMarker(A_B, "P_b", basis="X"))

    moments = (
        Moment(tuple(prep), duration=20.0),
        Moment((), duration=12.0),
        Moment((Gate("CZ", (A_T, D_T)), Gate("CZ", (A_B, D_M))), duration=40.0),
        Moment((Gate("CZ", (A_T, D_M)), Gate("CZ", (A_B, D_B))), duration=40.0),
        Moment((Gate("X", (D_M,)),), duration=20.0),
        Moment((), duration=12.0),
        Moment(tuple(readout), duration=0.0),
    )
    return Circuit(N_QUBITS, moments)


def idle_round() -> Circuit:
    """Time-matched idle stand-in for a stabilizer round.

    Same moment durations as :func:`stabilizer_round` with every gate removed
    except the refocusing X on D_m, and no readout.  Comparing a sequence
    with the real round against one with this fragment isolates the cost and
    benefit of the parity measurement at equal wall-clock time.
    """
    durations = (20.0, 12.0, 40.0, 40.0, 20.0, 12.0, 0.0)
    moments = tuple(
        Moment((Gate("X", (D_M,)),) if i == 4 else (), duration=d)
        for i, d in enumerate(durations)
    )
    return Circuit(N_QUBITS, moments)


# Corrections conditioned on the declared syndrome, refocusing pulse already
# folded in.  Keys are (P_t, P_b) parities.
_CORRECTION_TABLE = {
    Syndrome.EE: "IXI",
    Syndrome.EO: "IXX",
    Syndrome.OE: "XXI",
    Syndrome.OO: "III",
}

# Corrections that bring each measurement-encoding branch to the inverted
# codeword of the prepared cardinal.
_ENCODING_CORRECTION_TABLE = {
    Syndrome.EE: "XIX",
    Syndrome.EO: "XII",
    Syndrome.OE: "IIX",
    Syndrome.OO: "III",
}


def correction_for(syndrome: Syndrome) -> OperatorMatrix:
    """Recovery operator (3 data qubits) after one error-detection round."""
    return pauli_string(_CORRECTION_TABLE[syndrome])


def encoding_correction_for(syndrome: Syndrome) -> OperatorMatrix:
    """Pauli frame fixing for encoding by measurement."""
    return pauli_string(_ENCODING_CORRECTION_TABLE[syndrome])


def correction_table_text() -> str:
    """Both syndrome tables as structured text, for documentation goldens."""
    lines = ["syndrome,parity_t,parity_b,detection_correction,encoding_correction"]
    for s in SYNDROMES:
        lines.append(
            ",".join(
                (
                    s.value,
                    s.value[0],
                    s.value[1],
                    _CORRECTION_TABLE[s],
                    _ENCODING_CORRECTION_TABLE[s],
                )
            )
        )
    return "\n".join(lines) + "\n"


def encode_by_measurement(
    cardinal: Cardinal, noise: NoiseConfig | None = None
) -> list[tuple[Syndrome, float, DensityMatrix]]:
    """Project a product state into the code space with one parity round.

    D_t and D_b start in |+>, D_m in the cardinal state; the stabilizer round
    then projects onto a random syndrome.  Returns (syndrome, probability,
    data state) per branch, data state reduced to the three data qubits.
    Ideally each branch has probability 1/4 and equals the inverted codeword
    up to the frame fixed by :func:`encoding_correction_for`.
    """
    prep_gates = [Gate("RY", (D_T,), theta=HALF_PI), Gate("RY", (D_B,), theta=HALF_PI)]
    card_prep = cardinal.prep_gate
    if card_prep is not None:
        prep_gates.append(card_prep)
    circuit = Circuit(N_QUBITS, (Moment(tuple(prep_gates)),)).then(stabilizer_round())

    from .circuit import run_exact

    initial = (noise or NoiseConfig.ideal()).initial_state(N_QUBITS)
    out = []
    for branch in run_exact(circuit, initial, noise):
        data = partial_trace(branch.state, DATA_QUBITS)
        out.append((Syndrome.from_outcomes(branch.outcomes), branch.probability, data))
    return out


def decoder_circuit(
    convention: ConventionFlag = INVERTED_CONVENTION,
) -> tuple[Circuit, tuple[int, ...]]:
    """Ideal majority-vote decoder on the three data qubits.

    Returns the circuit and the qubits to keep afterwards (the middle qubit,
    which carries the decoded logical state).  All gates have zero duration:
    decoding is a bookkeeping step, not part of the timed sequence.  The
    decoder inverts :func:`encode_by_gates` moment by moment and tolerates
    one residual flip anywhere in the codeword.
    """
    moments = [
        Moment((Gate("CNOT", (D_M, D_T), duration=0.0),)),
        Moment((Gate("CNOT", (D_M, D_B), duration=0.0),)),
        Moment((Gate("TOFFOLI", (D_T, D_B, D_M), duration=0.0),)),
    ]
    if convention.inverted:
        moments.append(Moment((Gate("X", (D_M,), duration=0.0),)))
    return Circuit(3, tuple(moments)), (D_M,)


def decoder_matrix(convention: ConventionFlag = INVERTED_CONVENTION) -> OperatorMatrix:
    """The decoder circuit composed into a single 8x8 unitary."""
    circuit, _ = decoder_circuit(convention)
    mat = np.eye(8, dtype=complex)
    for moment in circuit.moments:
        for gate in moment.entries:
            from .qstate import embed

            mat = embed(gate_matrix(gate), gate.targets, 3).entries @ mat
    return OperatorMatrix(3, mat, unitary_flag=True)


def stabilizer_round_text(active: tuple[str, ...] = ("t", "b")) -> str:
    return circuit_to_text(stabilizer_round(active))
