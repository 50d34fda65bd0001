"""Figures of merit for the error-detection experiments.

Everything is computed from exact branch enumeration, never from sampled
shots.  Incoherent error mixtures are handled by simulating each definite
flip pattern once and reweighting with binomial factors, which makes sweeps
over the error strength cheap: the pattern fidelities do not depend on
p_err, only the weights do.

The detected-fidelity pipeline mirrors the experimental procedure: encode,
inject the error round, run one stabilizer round, apply the syndrome-
conditioned recovery, and compare against the ideal codeword.  The idle
pipeline replaces the stabilizer round with a time-matched idle fragment
whose refocusing pulse is compensated in the reference frame.  The logical
fidelity adds a second (hypothetical, incoherent) error round and an ideal
majority-vote decoder, comparing the decoded middle qubit against the
original cardinal state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .circuit import Branch, Circuit, Gate, Moment, run_exact
from .errors import (
    ErrorPattern,
    ErrorSpec,
    NoiseConfig,
    coherent_error_moment,
    flip_subsets,
    pattern_moment,
    pattern_weight,
)
from .qstate import (
    DensityMatrix,
    OperatorMatrix,
    PureState,
    apply_unitary,
    expectation,
    fidelity_to_pure,
    kron_all,
    partial_trace,
    pauli_string,
    PAULI,
)
from . import repcode
from .repcode import (
    CARDINALS,
    DATA_QUBITS,
    D_M,
    Cardinal,
    Syndrome,
    correction_for,
    decoder_matrix,
    encode_by_gates,
    ghz_state,
    idle_round,
    logical_state,
    stabilizer_round,
)

TOL_VERDICT = 1e-9

SCENARIO_TARGETS = {
    "1": (D_M,),
    "3": DATA_QUBITS,
}


# ---------------------------------------------------------------------------
# operators


def mermin_operator() -> OperatorMatrix:
    """M = XXX - YYX - YXY - XYY on three qubits."""
    mat = (
        kron_all([PAULI["X"]] * 3)
        - kron_all([PAULI["Y"], PAULI["Y"], PAULI["X"]])
        - kron_all([PAULI["Y"], PAULI["X"], PAULI["Y"]])
        - kron_all([PAULI["X"], PAULI["Y"], PAULI["Y"]])
    )
    return OperatorMatrix(3, mat)


def mermin(rho: DensityMatrix) -> float:
    """Expectation of the Mermin combination; |value| > 2 rules out LHV."""
    return expectation(rho, mermin_operator())


def witness_operators() -> dict[str, OperatorMatrix]:
    """Two-qubit entanglement witnesses, one per Bell state.

    Each is I/2 minus the corresponding Bell projector: expectation -0.5 on
    the witnessed Bell state, >= 0 on every separable state.
    """
    ii = kron_all([PAULI["I"]] * 2)
    xx = kron_all([PAULI["X"]] * 2)
    yy = kron_all([PAULI["Y"]] * 2)
    zz = kron_all([PAULI["Z"]] * 2)
    return {
        "phi_plus": OperatorMatrix(2, (ii - xx + yy - zz) / 4),
        "phi_minus": OperatorMatrix(2, (ii + xx - yy - zz) / 4),
        "psi_plus": OperatorMatrix(2, (ii - xx - yy + zz) / 4),
        "psi_minus": OperatorMatrix(2, (ii + xx + yy + zz) / 4),
    }


@dataclass(frozen=True)
class WitnessSet:
    """The four Bell-witness expectations of one two-qubit state."""

    phi_plus: float
    phi_minus: float
    psi_plus: float
    psi_minus: float

    def __post_init__(self):
        for name in ("phi_plus", "phi_minus", "psi_plus", "psi_minus"):
            v = getattr(self, name)
            if v < -0.5 - 1e-9:
                raise ValueError(f"witness {name}={v} below the -1/2 floor")

    def as_dict(self) -> dict[str, float]:
        return {
            "phi_plus": self.phi_plus,
            "phi_minus": self.phi_minus,
            "psi_plus": self.psi_plus,
            "psi_minus": self.psi_minus,
        }


def witnesses(rho_pair: DensityMatrix) -> WitnessSet:
    ops = witness_operators()
    return WitnessSet(**{name: expectation(rho_pair, op) for name, op in ops.items()})


_PAULI_LABELS = tuple(
    "".join(p) for p in itertools.product("IXYZ", repeat=3)
)


def pauli_expectations(rho: DensityMatrix) -> dict[str, float]:
    """All 64 three-qubit Pauli-string expectations (full state tomogram)."""
    return {lab: expectation(rho, pauli_string(lab)) for lab in _PAULI_LABELS}


# ---------------------------------------------------------------------------
# parity checks on basis states


def parity_check_distribution(
    bits: tuple[int, int, int], noise: NoiseConfig | None = None
) -> dict[tuple[int, int], float]:
    """Declared (P_t, P_b) distribution for a computational basis input."""
    prep = tuple(Gate("X", (q,)) for q, b in zip(DATA_QUBITS, bits) if b)
    circuit = Circuit(repcode.N_QUBITS, (Moment(prep, duration=20.0),)).then(
        stabilizer_round()
    )
    initial = (noise or NoiseConfig.ideal()).initial_state(repcode.N_QUBITS)
    out = {}
    for branch in run_exact(circuit, initial, noise):
        out[(branch.outcomes["P_t"], branch.outcomes["P_b"])] = branch.probability
    return out


def expected_parities(bits: tuple[int, int, int]) -> tuple[int, int]:
    t, m, b = bits
    return (t ^ m, m ^ b)


def assignment_fidelity(
    results: Mapping[tuple[int, int, int], Mapping[tuple[int, int], float]]
) -> float:
    """Mean probability of declaring the correct double parity.

    ``results`` maps each prepared basis input to its declared-outcome
    distribution (probabilities or raw counts; rows are normalized here).
    """
    if not results:
        raise ValueError("need at least one prepared input")
    total = 0.0
    for bits, dist in results.items():
        norm = sum(dist.values())
        if norm <= 0:
            raise ValueError(f"input {bits}: empty outcome distribution")
        total += dist.get(expected_parities(bits), 0.0) / norm
    return total / len(results)


# ---------------------------------------------------------------------------
# entangled-state generation experiments


def ghz_preparation_circuit(phi: float, active: tuple[str, ...] = ("t", "b")) -> Circuit:
    """Product-state prep plus one stabilizer round.

    All data qubits start along +x; the middle qubit picks up a phase phi.
    With both stabilizers active the odd/odd branch is the GHZ-class state
    (|000> + e^{-i phi}|111>)/sqrt(2); with one stabilizer active the odd
    branch holds a Bell pair on that stabilizer's data qubits.
    """
    prep = Moment(tuple(Gate("RY", (q,), theta=repcode.HALF_PI) for q in DATA_QUBITS))
    phase = Moment((Gate("RZ", (D_M,), theta=phi),))
    return Circuit(repcode.N_QUBITS, (prep, phase)).then(stabilizer_round(active))


def ghz_branches(
    phi: float, noise: NoiseConfig | None = None
) -> list[tuple[Syndrome, float, DensityMatrix]]:
    """Double-stabilizer projection branches, reduced to the data qubits."""
    circuit = ghz_preparation_circuit(phi)
    initial = (noise or NoiseConfig.ideal()).initial_state(repcode.N_QUBITS)
    out = []
    for branch in run_exact(circuit, initial, noise):
        data = partial_trace(branch.state, DATA_QUBITS)
        out.append((Syndrome.from_outcomes(branch.outcomes), branch.probability, data))
    return out


def bell_branches(
    phi: float, stabilizer: str, noise: NoiseConfig | None = None
) -> list[tuple[int, float, DensityMatrix]]:
    """Single-stabilizer branches reduced to that stabilizer's data pair.

    Returns (declared bit, probability, pair state); the pair is (D_t, D_m)
    for the top stabilizer and (D_m, D_b) for the bottom one.
    """
    if stabilizer not in ("t", "b"):
        raise ValueError(f"unknown stabilizer {stabilizer!r}")
    pair = (repcode.D_T, D_M) if stabilizer == "t" else (D_M, repcode.D_B)
    circuit = ghz_preparation_circuit(phi, active=(stabilizer,))
    initial = (noise or NoiseConfig.ideal()).initial_state(repcode.N_QUBITS)
    label = "P_t" if stabilizer == "t" else "P_b"
    out = []
    for branch in run_exact(circuit, initial, noise):
        out.append((branch.outcomes[label], branch.probability, partial_trace(branch.state, pair)))
    return out


# ---------------------------------------------------------------------------
# fidelity pipelines


@dataclass(frozen=True)
class FidelityReport:
    """One fidelity curve per cardinal state over a grid of error strengths."""

    metric: str  # "F3Q" | "FL"
    pipeline: str  # "qed" | "idle"
    mode: str  # "coherent" | "incoherent"
    targets: tuple[int, ...]
    p_grid: tuple[float, ...]
    per_cardinal: Mapping[str, tuple[float, ...]]

    def __post_init__(self):
        for label, values in self.per_cardinal.items():
            if len(values) != len(self.p_grid):
                raise ValueError(f"cardinal {label}: value/grid length mismatch")
            for v in values:
                if not -1e-9 <= v <= 1.0 + 1e-9:
                    raise ValueError(f"cardinal {label}: fidelity {v} outside [0, 1]")

    @property
    def scenario(self) -> str:
        for name, targets in SCENARIO_TARGETS.items():
            if tuple(sorted(self.targets)) == tuple(sorted(targets)):
                return name
        return "custom"

    @property
    def average(self) -> tuple[float, ...]:
        cols = zip(*self.per_cardinal.values())
        return tuple(sum(c) / len(self.per_cardinal) for c in cols)

    def rows(self):
        """(metric, scenario, pipeline, mode, p_err, cardinal, value) tuples."""
        for label, values in self.per_cardinal.items():
            for p, v in zip(self.p_grid, values):
                yield (self.metric, self.scenario, self.pipeline, self.mode, p, label, v)
        for p, v in zip(self.p_grid, self.average):
            yield (self.metric, self.scenario, self.pipeline, self.mode, p, "average", v)


def _detection_branches(
    cardinal: Cardinal, error_moments: Sequence[Moment], noise: NoiseConfig | None
) -> list[tuple[Syndrome, float, DensityMatrix]]:
    """Encode, inject, measure: branches reduced to the data register."""
    circuit = encode_by_gates(cardinal).then(
        Circuit(repcode.N_QUBITS, tuple(error_moments)), stabilizer_round()
    )
    initial = (noise or NoiseConfig.ideal()).initial_state(repcode.N_QUBITS)
    out = []
    for branch in run_exact(circuit, initial, noise):
        data = partial_trace(branch.state, DATA_QUBITS)
        out.append((Syndrome.from_outcomes(branch.outcomes), branch.probability, data))
    return out


def _idle_state(
    cardinal: Cardinal, error_moments: Sequence[Moment], noise: NoiseConfig | None
) -> DensityMatrix:
    """Same sequence with the round replaced by its idle twin; no branches."""
    circuit = encode_by_gates(cardinal).then(
        Circuit(repcode.N_QUBITS, tuple(error_moments)), idle_round()
    )
    initial = (noise or NoiseConfig.ideal()).initial_state(repcode.N_QUBITS)
    (branch,) = run_exact(circuit, initial, noise)
    return partial_trace(branch.state, DATA_QUBITS)


_REFOCUS_COMP = pauli_string("IXI")  # idle reference frame: undo the refocusing pulse


def _detected_fidelity(
    branches: Sequence[tuple[Syndrome, float, DensityMatrix]], target: PureState
) -> float:
    total = 0.0
    for syndrome, prob, data in branches:
        if prob == 0.0:
            continue
        corrected = apply_unitary(data, correction_for(syndrome))
        total += prob * fidelity_to_pure(corrected, target)
    return total


def _idle_fidelity(state: DensityMatrix, target: PureState) -> float:
    return fidelity_to_pure(apply_unitary(state, _REFOCUS_COMP), target)


def _per_pattern_values(
    targets: tuple[int, ...],
    evaluate,  # (cardinal, error_moments) -> float
) -> dict[Cardinal, dict[tuple[int, ...], float]]:
    """Evaluate a pipeline once per (cardinal, definite flip pattern)."""
    out: dict[Cardinal, dict[tuple[int, ...], float]] = {}
    for cardinal in CARDINALS:
        per = {}
        for subset in flip_subsets(targets):
            moments = [pattern_moment(ErrorPattern(subset, 1.0))]
            per[subset] = evaluate(cardinal, moments)
        out[cardinal] = per
    return out


def _mix_over_grid(
    pattern_values: Mapping[tuple[int, ...], float],
    p_grid: Sequence[float],
    n_targets: int,
) -> tuple[float, ...]:
    return tuple(
        sum(
            pattern_weight(p, len(s), n_targets) * v
            for s, v in pattern_values.items()
        )
        for p in p_grid
    )


def _sweep(
    metric: str,
    pipeline: str,
    mode: str,
    targets: tuple[int, ...],
    p_grid: Sequence[float],
    evaluate,  # (cardinal, error_moments) -> float
) -> FidelityReport:
    """Shared sweep driver for both fidelity metrics and both pipelines."""
    targets = tuple(targets)
    p_grid = tuple(float(p) for p in p_grid)
    per_cardinal: dict[str, tuple[float, ...]] = {}
    if mode == "incoherent":
        values = _per_pattern_values(targets, evaluate)
        for cardinal in CARDINALS:
            per_cardinal[cardinal.value] = _mix_over_grid(
                values[cardinal], p_grid, len(targets)
            )
    elif mode == "coherent":
        for cardinal in CARDINALS:
            row = []
            for p in p_grid:
                spec = ErrorSpec("coherent", p, targets)
                row.append(evaluate(cardinal, [coherent_error_moment(spec)]))
            per_cardinal[cardinal.value] = tuple(row)
    else:
        raise ValueError(f"unknown error mode {mode!r}")
    return FidelityReport(metric, pipeline, mode, targets, p_grid, per_cardinal)


def f3q_qed(
    p_grid: Sequence[float],
    mode: str,
    targets: tuple[int, ...],
    noise: NoiseConfig | None = None,
) -> FidelityReport:
    """Three-qubit fidelity after detection and syndrome-conditioned recovery.

    For each cardinal: encode, inject one error round on ``targets``, run a
    stabilizer round, apply the recovery for the declared syndrome, and take
    the branch-averaged fidelity to the ideal codeword.
    """

    def evaluate(cardinal: Cardinal, moments) -> float:
        target = logical_state(cardinal)
        return _detected_fidelity(_detection_branches(cardinal, moments, noise), target)

    return _sweep("F3Q", "qed", mode, tuple(targets), p_grid, evaluate)


def f3q_idle(
    p_grid: Sequence[float],
    mode: str,
    targets: tuple[int, ...],
    noise: NoiseConfig | None = None,
) -> FidelityReport:
    """Three-qubit fidelity with the round idled out (no parity information)."""

    def evaluate(cardinal: Cardinal, moments) -> float:
        target = logical_state(cardinal)
        return _idle_fidelity(_idle_state(cardinal, moments, noise), target)

    return _sweep("F3Q", "idle", mode, tuple(targets), p_grid, evaluate)


def _decoded_fidelity_map(
    cardinal: Cardinal,
    data_states: Sequence[tuple[float, DensityMatrix]],
    second_subsets: Sequence[tuple[int, ...]],
) -> dict[tuple[int, ...], float]:
    """Decoded middle-qubit fidelity per second-round flip pattern.

    ``data_states`` are (weight, corrected 3-qubit state) pairs.  The second
    error round and the decoder are applied as exact operators: they model a
    hypothetical follow-up round, not a timed circuit.
    """
    a, b = cardinal.amplitudes
    target = PureState(1, np.array([a, b]))
    decoder = decoder_matrix()
    out = {}
    for subset in second_subsets:
        flips = pauli_string(
            "".join("X" if q in subset else "I" for q in DATA_QUBITS)
        )
        total = 0.0
        for weight, state in data_states:
            if weight == 0.0:
                continue
            flipped = apply_unitary(state, flips)
            decoded = apply_unitary(flipped, decoder)
            total += weight * fidelity_to_pure(partial_trace(decoded, (D_M,)), target)
        out[subset] = total
    return out


def f_logical(
    p_grid: Sequence[float],
    mode: str,
    targets: tuple[int, ...],
    pipeline: str,
    noise: NoiseConfig | None = None,
) -> FidelityReport:
    """Logical fidelity after a hypothetical second error round and decoding.

    The first error round (``mode``, ``targets``) runs through the chosen
    pipeline exactly as in the F3Q metrics.  A second, always-incoherent
    error round with the same strength then strikes all three data qubits,
    an ideal decoder majority-votes, and the decoded middle qubit is
    compared against the original cardinal state.
    """
    if pipeline not in ("qed", "idle"):
        raise ValueError(f"unknown pipeline {pipeline!r}")
    targets = tuple(targets)
    p_grid = tuple(float(p) for p in p_grid)
    second_subsets = flip_subsets(DATA_QUBITS)

    def decoded_map(cardinal: Cardinal, moments) -> dict[tuple[int, ...], float]:
        if pipeline == "qed":
            states = [
                (prob, apply_unitary(data, correction_for(syndrome)))
                for syndrome, prob, data in _detection_branches(cardinal, moments, noise)
                if prob > 0.0
            ]
        else:
            states = [
                (1.0, apply_unitary(_idle_state(cardinal, moments, noise), _REFOCUS_COMP))
            ]
        return _decoded_fidelity_map(cardinal, states, second_subsets)

    per_cardinal: dict[str, tuple[float, ...]] = {}
    if mode == "incoherent":
        for cardinal in CARDINALS:
            by_first: dict[tuple[int, ...], dict[tuple[int, ...], float]] = {}
            for subset in flip_subsets(targets):
                moments = [pattern_moment(ErrorPattern(subset, 1.0))]
                by_first[subset] = decoded_map(cardinal, moments)
            row = []
            for p in p_grid:
                total = 0.0
                for s1, decoded in by_first.items():
                    w1 = pattern_weight(p, len(s1), len(targets))
                    for s2, f in decoded.items():
                        total += w1 * pattern_weight(p, len(s2), 3) * f
                row.append(total)
            per_cardinal[cardinal.value] = tuple(row)
    elif mode == "coherent":
        for cardinal in CARDINALS:
            row = []
            for p in p_grid:
                spec = ErrorSpec("coherent", p, targets)
                decoded = decoded_map(cardinal, [coherent_error_moment(spec)])
                row.append(
                    sum(
                        pattern_weight(p, len(s2), 3) * f
                        for s2, f in decoded.items()
                    )
                )
            per_cardinal[cardinal.value] = tuple(row)
    else:
        raise ValueError(f"unknown error mode {mode!r}")
    return FidelityReport("FL", pipeline, mode, targets, p_grid, per_cardinal)


# ---------------------------------------------------------------------------
# error combination table


@dataclass(frozen=True)
class CombinationCase:
    """Logical fidelity for one labelled first/second flip-count sub-case.

    ``label`` is "m/n" with an "a" suffix when the two rounds hit overlapping
    qubits in the maximal way (same qubit, or same pair) and "b" when they do
    not; counts without an overlap choice carry no suffix.  ``verdict`` says
    which pipeline wins for deterministic errors of that shape.
    """

    label: str
    n_first: int
    n_second: int
    f_qed: float
    f_idle: float
    verdict: str
    n_pairs: int


def _case_label(s1: tuple[int, ...], s2: tuple[int, ...]) -> str:
    m, n = len(s1), len(s2)
    label = f"{m}/{n}"
    shared = len(set(s1) & set(s2))
    if (m, n) == (1, 1) or (m, n) == (2, 2):
        label += "a" if shared == min(m, n) else "b"
    elif (m, n) in ((1, 2), (2, 1)):
        label += "a" if shared == 1 else "b"
    return label


def error_combination_table(noise: NoiseConfig | None = None) -> list[CombinationCase]:
    """Logical fidelity for every deterministic first/second error pair.

    Enumerates all 64 combinations of definite flip sets, groups them by the
    m/n sub-case label, and reports the cardinal-averaged logical fidelity
    for both pipelines.  In the ideal limit every pair in a group gives the
    same value; a spread larger than 1e-9 raises, since it would mean the
    grouping is wrong.
    """
    subsets = flip_subsets(DATA_QUBITS)
    per_label: dict[str, list[tuple[float, float]]] = {}

    qed_avg: dict[tuple[int, ...], dict[tuple[int, ...], float]] = {}
    idle_avg: dict[tuple[int, ...], dict[tuple[int, ...], float]] = {}
    for s1 in subsets:
        moments = [pattern_moment(ErrorPattern(s1, 1.0))]
        q_total: dict[tuple[int, ...], float] = {s: 0.0 for s in subsets}
        i_total: dict[tuple[int, ...], float] = {s: 0.0 for s in subsets}
        for cardinal in CARDINALS:
            states = [
                (prob, apply_unitary(data, correction_for(syndrome)))
                for syndrome, prob, data in _detection_branches(cardinal, moments, noise)
                if prob > 0.0
            ]
            for s2, f in _decoded_fidelity_map(cardinal, states, subsets).items():
                q_total[s2] += f / len(CARDINALS)
            idle_state = [
                (1.0, apply_unitary(_idle_state(cardinal, moments, noise), _REFOCUS_COMP))
            ]
            for s2, f in _decoded_fidelity_map(cardinal, idle_state, subsets).items():
                i_total[s2] += f / len(CARDINALS)
        qed_avg[s1] = q_total
        idle_avg[s1] = i_total

    for s1 in subsets:
        for s2 in subsets:
            per_label.setdefault(_case_label(s1, s2), []).append(
                (qed_avg[s1][s2], idle_avg[s1][s2])
            )

    ideal = noise is None or noise.is_ideal
    rows = []
    for label in sorted(per_label, key=lambda lab: (int(lab[0]), int(lab[2]), lab[3:])):
        pairs = per_label[label]
        f_qed = sum(q for q, _ in pairs) / len(pairs)
        f_idle = sum(i for _, i in pairs) / len(pairs)
        if ideal:
            spread = max(
                max(abs(q - f_qed) for q, _ in pairs),
                max(abs(i - f_idle) for _, i in pairs),
            )
            if spread > TOL_VERDICT:
                raise AssertionError(
                    f"sub-case {label}: fidelity spread {spread} across members"
                )
        if f_qed > f_idle + TOL_VERDICT:
            verdict = "qed"
        elif f_idle > f_qed + TOL_VERDICT:
            verdict = "idle"
        else:
            verdict = "tie"
        rows.append(
            CombinationCase(
                label, int(label[0]), int(label[2]), f_qed, f_idle, verdict, len(pairs)
            )
        )
    return rows


# ---------------------------------------------------------------------------
# closed forms (ideal limit)


def f3q_qed_closed_form(p: float, n_targets: int) -> float:
    """Ideal detected fidelity for incoherent errors.

    One target: detection flags every flip, so the curve is flat at 1.
    Three targets: weight-0/1 patterns are fully repaired, weight-2 patterns
    alias to a single-flip syndrome and end one flip short of the complement
    codeword (cardinal-average 1/3), weight 3 is a clean logical flip (also
    1/3 on average): 1 - 2 p^2 + (4/3) p^3.
    """
    if n_targets == 1:
        return 1.0
    if n_targets == 3:
        return 1.0 - 2.0 * p**2 + (4.0 / 3.0) * p**3
    raise ValueError(f"no closed form for {n_targets} targets")


def f3q_idle_closed_form(p: float, n_targets: int) -> float:
    """Ideal idle fidelity for incoherent errors.

    One target: the unflipped weight survives, 1 - p.  Three targets: the
    no-flip weight plus the logical-flip weight at its 1/3 cardinal average:
    (1-p)^3 + p^3 / 3.
    """
    if n_targets == 1:
        return 1.0 - p
    if n_targets == 3:
        return (1.0 - p) ** 3 + p**3 / 3.0
    raise ValueError(f"no closed form for {n_targets} targets")
