"""End-to-end acceptance criteria.

Each test is one criterion with its tolerance pinned; the terminal summary
(see conftest) prints one PASS/FAIL line per criterion.  Expected values are
written out literally here, not imported from the package, and the heavier
ones are cross-checked against the independent oracle implementations.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest
import scipy.stats
import yaml

from repqed import metrics, repcode
from repqed.circuit import Circuit, run_exact, sample_shots
from repqed.errors import (
    DecoherenceConfig,
    ErrorPattern,
    NoiseConfig,
    ReadoutModel,
    pattern_moment,
)
from repqed.expcli import main
from repqed.qstate import PureState, apply_unitary, fidelity_to_pure, partial_trace

import oracle

TOL = 1e-9


def test_a01_syndrome_assignment_deterministic():
    # every computational basis input declares exactly the parity-arithmetic
    # syndrome, with probability 1, in under a second
    t0 = time.perf_counter()
    results = {}
    for bits in itertools.product((0, 1), repeat=3):
        dist = metrics.parity_check_distribution(bits)
        live = {k: p for k, p in dist.items() if p > TOL}
        assert live == {metrics.expected_parities(bits): pytest.approx(1.0, abs=TOL)}
        results[bits] = dist
    assert metrics.assignment_fidelity(results) == pytest.approx(1.0, abs=TOL)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, f"took {elapsed:.2f}s"
    print(f"\n[ACCEPTANCE] syndrome determinism: PASS ({elapsed * 1000:.0f} ms)")


def test_a02_readout_confusion_ceiling():
    # 4.6% per-ancilla misassignment caps the double-parity assignment
    # fidelity at (1 - 0.046)^2
    noise = NoiseConfig(readout=ReadoutModel(eps_t=0.046, eps_b=0.046))
    results = {
        bits: metrics.parity_check_distribution(bits, noise)
        for bits in itertools.product((0, 1), repeat=3)
    }
    af = metrics.assignment_fidelity(results)
    expected = (1.0 - 0.046) ** 2
    assert af == pytest.approx(expected, abs=1e-3)
    print(f"\n[ACCEPTANCE] readout ceiling: PASS (F_a = {af:.6f} ~ {expected:.6f})")


def test_a03_entangled_state_generation():
    t0 = time.perf_counter()
    phi_grid = np.linspace(-math.pi, math.pi, 13)

    # double stabilizer: odd/odd branch is the GHZ-class state, Mermin 4cos(phi)
    for phi in phi_grid:
        for syndrome, prob, data in metrics.ghz_branches(phi):
            if syndrome is repcode.Syndrome.OO:
                assert prob == pytest.approx(0.25, abs=TOL)
                assert fidelity_to_pure(data, repcode.ghz_state(phi)) == pytest.approx(
                    1.0, abs=TOL
                )
                assert metrics.mermin(data) == pytest.approx(
                    4.0 * math.cos(phi), abs=TOL
                )

    # single stabilizer: the postselected pair is a Bell state at the right
    # phase; odd heralds the even-parity witness, even its odd-parity dual
    w_odd, w_even = [], []
    for phi in phi_grid:
        for bit, _, pair in metrics.bell_branches(phi, "t"):
            w = metrics.witnesses(pair)
            (w_odd if bit == 1 else w_even).append(
                w.phi_plus if bit == 1 else w.psi_plus
            )
    assert min(w_odd) == pytest.approx(-0.5, abs=TOL)
    assert min(w_even) == pytest.approx(-0.5, abs=TOL)

    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0, f"took {elapsed:.2f}s"
    print(f"\n[ACCEPTANCE] entangled-state generation: PASS ({elapsed:.2f} s)")


def test_a04_correction_table_sound():
    # all six cardinals, all four up-to-one-flip patterns: recovery restores
    # the codeword exactly
    for cardinal in repcode.CARDINALS:
        target = repcode.logical_state(cardinal)
        for flips in [(), (0,), (1,), (2,)]:
            circuit = repcode.encode_by_gates(cardinal).then(
                Circuit(5, (pattern_moment(ErrorPattern(flips, 1.0)),)),
                repcode.stabilizer_round(),
            )
            branches = run_exact(circuit, PureState.basis(5, 0).density())
            (live,) = [b for b in branches if not b.degenerate]
            syndrome = repcode.Syndrome.from_outcomes(live.outcomes)
            data = partial_trace(live.state, repcode.DATA_QUBITS)
            corrected = apply_unitary(data, repcode.correction_for(syndrome))
            assert fidelity_to_pure(corrected, target) >= 1.0 - TOL, (cardinal, flips)
    print("\n[ACCEPTANCE] correction table soundness: PASS (24/24 at 1-1e-9)")


# ideal-limit closed forms, written out literally
F3Q_QED_S1 = lambda p: 1.0
F3Q_QED_S3 = lambda p: 1.0 - 2.0 * p**2 + (4.0 / 3.0) * p**3
F3Q_IDLE_S1 = lambda p: 1.0 - p
F3Q_IDLE_S3 = lambda p: (1.0 - p) ** 3 + p**3 / 3.0


def test_a05_f3q_curves_match_closed_forms():
    t0 = time.perf_counter()
    grid = tuple(np.linspace(0.0, 1.0, 21))
    cases = [
        (metrics.f3q_qed, (repcode.D_M,), F3Q_QED_S1, oracle.f3q_qed_oracle),
        (metrics.f3q_qed, repcode.DATA_QUBITS, F3Q_QED_S3, oracle.f3q_qed_oracle),
        (metrics.f3q_idle, (repcode.D_M,), F3Q_IDLE_S1, oracle.f3q_idle_oracle),
        (metrics.f3q_idle, repcode.DATA_QUBITS, F3Q_IDLE_S3, oracle.f3q_idle_oracle),
    ]
    for fn, targets, form, brute in cases:
        report = fn(grid, "incoherent", targets)
        for p, value in zip(grid, report.average):
            assert value == pytest.approx(form(p), abs=TOL), (fn.__name__, targets, p)
            # the closed form itself is confirmed by the independent oracle
            assert brute(p, targets) == pytest.approx(form(p), abs=TOL)
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0, f"took {elapsed:.2f}s"
    print(f"\n[ACCEPTANCE] F3Q closed forms (4 curves x 21 points): PASS ({elapsed:.2f} s)")


def test_a06_coherent_incoherent_endpoint_agreement():
    # at p=0 and p=1 a partial rotation is a definite (non-)flip, so both
    # error models must agree for every metric, pipeline and scenario
    endpoints = (0.0, 1.0)
    worst = 0.0
    for targets in ((repcode.D_M,), repcode.DATA_QUBITS):
        for fn in (metrics.f3q_qed, metrics.f3q_idle):
            coh = fn(endpoints, "coherent", targets).average
            inc = fn(endpoints, "incoherent", targets).average
            worst = max(worst, max(abs(a - b) for a, b in zip(coh, inc)))
        for pipeline in ("qed", "idle"):
            coh = metrics.f_logical(endpoints, "coherent", targets, pipeline).average
            inc = metrics.f_logical(endpoints, "incoherent", targets, pipeline).average
            worst = max(worst, max(abs(a - b) for a, b in zip(coh, inc)))
    assert worst <= TOL
    print(f"\n[ACCEPTANCE] coherent/incoherent endpoints: PASS (max dev {worst:.2e})")


EXPECTED_VERDICTS = {
    "1/1b": "qed",
    "2/2b": "qed",
    "1/2a": "idle",
    "2/1a": "idle",
}


def test_a07_error_combination_classification():
    rows = {r.label: r for r in metrics.error_combination_table()}
    assert len(rows) == 20
    for label, row in rows.items():
        expected = EXPECTED_VERDICTS.get(label, "tie")
        assert row.verdict == expected, (label, row)
        for v in (row.f_qed, row.f_idle):
            near_one = abs(v - 1.0) <= TOL
            near_third = abs(v - 1.0 / 3.0) <= TOL
            assert near_one or near_third, (label, v)
    # detection strictly wins the disjoint single-single case and exactly
    # ties the same-qubit one
    assert rows["1/1b"].f_qed > rows["1/1b"].f_idle + 0.5
    assert rows["1/1a"].f_qed == pytest.approx(rows["1/1a"].f_idle, abs=TOL)
    print("\n[ACCEPTANCE] error-combination grid: PASS (2 green, 2 grey, 16 tie)")


def test_a08_decoder_resilient_to_single_flips():
    for cardinal in repcode.CARDINALS:
        a, b = cardinal.amplitudes
        target = PureState(1, np.array([a, b]))
        for flips in [(), (0,), (1,), (2,)]:
            state = repcode.logical_state(cardinal).density()
            if flips:
                label = "".join("X" if q in flips else "I" for q in range(3))
                state = apply_unitary(state, repcode.pauli_string(label))
            circuit, keep = repcode.decoder_circuit()
            (branch,) = run_exact(circuit, state)
            middle = partial_trace(branch.state, keep)
            assert fidelity_to_pure(middle, target) >= 1.0 - TOL, (cardinal, flips)
    print("\n[ACCEPTANCE] decoder resilience: PASS (24/24 at 1-1e-9)")


def test_a09_sampled_histograms_statistically_consistent():
    # 1e5 shots per input against the exact branch probabilities, chi-square
    # at significance 0.001, under the readout-confusion profile
    noise = NoiseConfig(readout=ReadoutModel(eps_t=0.046, eps_b=0.046))
    shots = 100_000
    p_values = []
    for k, bits in enumerate(itertools.product((0, 1), repeat=3)):
        prep = tuple(
            repcode.Gate("X", (q,)) for q, b in zip(repcode.DATA_QUBITS, bits) if b
        )
        circuit = Circuit(5, (repcode.Moment(prep),)).then(repcode.stabilizer_round())
        branches = run_exact(circuit, PureState.basis(5, 0).density(), noise)
        seed = int(np.random.SeedSequence(777, spawn_key=(k,)).generate_state(1)[0])
        hist = sample_shots(branches, shots, seed)
        observed = np.array([hist.get(b.bits, 0) for b in branches], dtype=float)
        expected = np.array([b.probability * shots for b in branches])
        keep = expected > 0
        stat, p_value = scipy.stats.chisquare(observed[keep], expected[keep])
        assert p_value > 0.001, (bits, p_value)
        p_values.append(p_value)
    print(
        f"\n[ACCEPTANCE] shot-noise consistency: PASS "
        f"(min chi-square p = {min(p_values):.3f} over 8 inputs)"
    )


def test_a10_noisy_crossover_exists():
    # with decoherence + readout confusion the detection round costs more
    # than it buys at p=0 but wins from a finite error strength onwards
    noise = NoiseConfig(
        readout=ReadoutModel(eps_t=0.046, eps_b=0.046),
        decoherence=DecoherenceConfig(t1=20000.0, t2=8000.0),
        residual_excitation=0.01,
    )
    grid = tuple(np.linspace(0.0, 0.5, 11))
    qed = metrics.f3q_qed(grid, "incoherent", repcode.DATA_QUBITS, noise).average
    idle = metrics.f3q_idle(grid, "incoherent", repcode.DATA_QUBITS, noise).average
    assert qed[0] < idle[0], "detection should start below idling at p=0"
    crossover = next((p for p, q, i in zip(grid, qed, idle) if q >= i), None)
    assert crossover is not None and 0.0 < crossover <= 0.5
    print(f"\n[ACCEPTANCE] noisy break-even point: PASS (crossover at p = {crossover})")


def test_a11_reproducible_runs(tmp_path):
    config = {
        "schema_version": 1,
        "seed": 31,
        "shots": 5000,
        "p_grid": [0.0, 0.25, 0.5],
        "phi_grid": [-1.0, 0.0, 1.0],
        "noise": {"readout": {"eps_t": 0.046, "eps_b": 0.046}},
        "figures": True,
    }
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(config))
    for sub in ("a", "b"):
        code = main(
            ["qed-sweep", "--config", str(path), "--out", str(tmp_path / sub)]
        )
        assert code == 0
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    for name in manifest["outputs"]:
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b, f"{name} not byte-identical"
    m_a = json.loads((tmp_path / "a" / "manifest.json").read_text())
    m_b = json.loads((tmp_path / "b" / "manifest.json").read_text())
    m_a.pop("wall_clock_s"), m_b.pop("wall_clock_s")
    assert m_a == m_b
    # and the run verifies against its own manifest
    assert main(["verify", "--out", str(tmp_path / "a")]) == 0
    print(
        f"\n[ACCEPTANCE] reproducibility: PASS "
        f"({len(manifest['outputs'])} files byte-identical across reruns)"
    )
