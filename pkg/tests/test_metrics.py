import itertools
import math

import numpy as np
import pytest

from repqed import metrics, repcode
from repqed.errors import DecoherenceConfig, NoiseConfig, ReadoutModel
from repqed.metrics import (
    FidelityReport,
    assignment_fidelity,
    error_combination_table,
    f3q_idle,
    f3q_qed,
    f_logical,
    mermin,
    pauli_expectations,
    parity_check_distribution,
    witnesses,
)
from repqed.qstate import DensityMatrix, PureState, kron_all

import oracle


class TestMermin:
    def test_operator_is_hermitian_traceless(self):
        m = metrics.mermin_operator().entries
        assert np.allclose(m, m.conj().T)
        assert np.trace(m) == pytest.approx(0.0)

    def test_ghz_value(self):
        for phi in (-2.0, 0.0, 0.4, math.pi):
            rho = repcode.ghz_state(phi).density()
            assert mermin(rho) == pytest.approx(4 * math.cos(phi), abs=1e-12)

    def test_product_states_stay_below_lhv_bound(self):
        # pure product states cap at 1 (|Re prod(x_k + i y_k)| with Bloch
        # vectors in the unit disk), well inside the local-realistic bound 2
        rng = np.random.default_rng(2024)
        worst = -np.inf
        for _ in range(10_000):
            kets = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
            kets /= np.linalg.norm(kets, axis=1, keepdims=True)
            rho = PureState(3, kron_all(kets).reshape(-1)).density()
            worst = max(worst, abs(mermin(rho)))
        assert worst <= 1.0 + 1e-9
        assert worst > 0.98  # the product cap is actually approached

    def test_product_cap_attained_and_ghz_violates_lhv(self):
        plus = np.array([1, 1]) / math.sqrt(2)
        rho = PureState(3, kron_all([plus] * 3).reshape(-1)).density()
        assert mermin(rho) == pytest.approx(1.0, abs=1e-12)
        assert mermin(repcode.ghz_state(0.0).density()) > 2.0  # beats any LHV


class TestWitnesses:
    BELLS = {
        "phi_plus": np.array([1, 0, 0, 1]) / math.sqrt(2),
        "phi_minus": np.array([1, 0, 0, -1]) / math.sqrt(2),
        "psi_plus": np.array([0, 1, 1, 0]) / math.sqrt(2),
        "psi_minus": np.array([0, 1, -1, 0]) / math.sqrt(2),
    }

    def test_each_witness_hits_its_bell_state(self):
        for name, vec in self.BELLS.items():
            w = witnesses(PureState(2, vec).density())
            values = w.as_dict()
            assert values[name] == pytest.approx(-0.5), name
            for other, v in values.items():
                if other != name:
                    assert v == pytest.approx(0.5), (name, other)

    def test_witness_operator_identity(self):
        # each witness is I/2 minus the Bell projector
        ops = metrics.witness_operators()
        for name, vec in self.BELLS.items():
            proj = np.outer(vec, vec.conj())
            assert np.allclose(ops[name].entries, np.eye(4) / 2 - proj), name

    def test_nonnegative_on_separable_states(self):
        rng = np.random.default_rng(99)
        for _ in range(500):
            kets = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            kets /= np.linalg.norm(kets, axis=1, keepdims=True)
            w = witnesses(PureState(2, np.kron(kets[0], kets[1])).density())
            assert all(v >= -1e-12 for v in w.as_dict().values())

    def test_floor_enforced(self):
        with pytest.raises(ValueError):
            metrics.WitnessSet(-0.6, 0.0, 0.0, 0.0)


class TestPauliExpectations:
    def test_complete_and_reconstructs(self):
        rho = repcode.ghz_state(0.3).density()
        vals = pauli_expectations(rho)
        assert len(vals) == 64
        assert vals["III"] == pytest.approx(1.0)
        rebuilt = sum(
            v * kron_all([metrics.PAULI[c] for c in lab]) / 8
            for lab, v in vals.items()
        )
        assert np.allclose(rebuilt, rho.entries, atol=1e-12)


class TestParityCheck:
    def test_ideal_distributions_deterministic(self):
        for bits in itertools.product((0, 1), repeat=3):
            dist = parity_check_distribution(bits)
            live = {k: v for k, v in dist.items() if v > 1e-12}
            assert live == {metrics.expected_parities(bits): pytest.approx(1.0)}

    def test_assignment_fidelity_ideal(self):
        results = {
            bits: parity_check_distribution(bits)
            for bits in itertools.product((0, 1), repeat=3)
        }
        assert assignment_fidelity(results) == pytest.approx(1.0)

    def test_assignment_fidelity_normalizes_counts(self):
        results = {
            (0, 0, 0): {(0, 0): 90.0, (1, 0): 10.0},
            (1, 0, 0): {(1, 0): 50.0, (0, 0): 50.0},
        }
        assert assignment_fidelity(results) == pytest.approx((0.9 + 0.5) / 2)

    def test_readout_confusion_caps_fidelity(self):
        noise = NoiseConfig(readout=ReadoutModel(eps_t=0.1, eps_b=0.1))
        results = {
            bits: parity_check_distribution(bits, noise)
            for bits in itertools.product((0, 1), repeat=3)
        }
        assert assignment_fidelity(results) == pytest.approx(0.81)


class TestGhzBranches:
    def test_corrected_branches_all_ghz(self):
        for phi in (0.0, 1.1):
            for syndrome, prob, data in metrics.ghz_branches(phi):
                assert prob == pytest.approx(0.25)
                fixed = metrics.apply_unitary(
                    data, repcode.encoding_correction_for(syndrome)
                )
                assert metrics.fidelity_to_pure(
                    fixed, repcode.ghz_state(phi)
                ) == pytest.approx(1.0)

    def test_bell_branches_probabilities(self):
        for bit, prob, pair in metrics.bell_branches(0.5, "b"):
            assert prob == pytest.approx(0.5)
            assert pair.n_qubits == 2


class TestFidelityReport:
    def test_average_and_rows(self):
        report = f3q_qed([0.0, 0.5], "incoherent", (repcode.D_M,))
        assert len(report.per_cardinal) == 6
        assert report.scenario == "1"
        rows = list(report.rows())
        assert len(rows) == 7 * 2  # six cardinals + average, two grid points
        avg_rows = [r for r in rows if r[5] == "average"]
        assert [r[4] for r in avg_rows] == [0.0, 0.5]

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(ValueError):
            FidelityReport("F3Q", "qed", "incoherent", (1,), (0.0, 0.5), {"0": (1.0,)})

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            FidelityReport("F3Q", "qed", "incoherent", (1,), (0.0,), {"0": (1.5,)})


GRID = tuple(i / 10 for i in range(11))


class TestF3qAgainstOracle:
    # the invariant behind the closed forms: package pipeline (full 5-qubit
    # density-matrix simulation) against the independent statevector oracle
    @pytest.mark.parametrize("targets", [(repcode.D_M,), repcode.DATA_QUBITS])
    def test_qed(self, targets):
        report = f3q_qed(GRID, "incoherent", targets)
        for p, value in zip(GRID, report.average):
            assert value == pytest.approx(oracle.f3q_qed_oracle(p, targets), abs=1e-12)

    @pytest.mark.parametrize("targets", [(repcode.D_M,), repcode.DATA_QUBITS])
    def test_idle(self, targets):
        report = f3q_idle(GRID, "incoherent", targets)
        for p, value in zip(GRID, report.average):
            assert value == pytest.approx(oracle.f3q_idle_oracle(p, targets), abs=1e-12)

    def test_plus_minus_cardinals_immune(self):
        # |+> and |-> codewords are X-eigenstates up to relabeling: any flip
        # pattern leaves them in the codespace, so detection keeps them at 1
        report = f3q_qed(GRID, "incoherent", repcode.DATA_QUBITS)
        for label in ("+", "-"):
            assert all(v == pytest.approx(1.0) for v in report.per_cardinal[label])


class TestFLogicalAgainstOracle:
    @pytest.mark.parametrize("pipeline", ["qed", "idle"])
    def test_scenario3(self, pipeline):
        report = f_logical(GRID, "incoherent", repcode.DATA_QUBITS, pipeline)
        for p, value in zip(GRID, report.average):
            assert value == pytest.approx(
                oracle.fl_oracle(p, repcode.DATA_QUBITS, pipeline), abs=1e-12
            )

    def test_rejects_unknown_pipeline(self):
        with pytest.raises(ValueError):
            f_logical(GRID, "incoherent", repcode.DATA_QUBITS, "magic")


class TestCombinationTable:
    def test_against_oracle(self):
        rows = {r.label: r for r in error_combination_table()}
        for s1 in oracle.ALL_SUBSETS:
            for s2 in oracle.ALL_SUBSETS:
                fq = sum(
                    oracle.logical_fidelity_qed(c, s1, s2) for c in oracle.CARDINAL_AMPS
                ) / 6
                fi = sum(
                    oracle.logical_fidelity_idle(c, s1, s2) for c in oracle.CARDINAL_AMPS
                ) / 6
                row = rows[metrics._case_label(s1, s2)]
                assert row.f_qed == pytest.approx(fq, abs=1e-12), (s1, s2)
                assert row.f_idle == pytest.approx(fi, abs=1e-12), (s1, s2)

    def test_row_count_and_pair_budget(self):
        rows = error_combination_table()
        assert len(rows) == 20
        assert sum(r.n_pairs for r in rows) == 64


class TestNoiseSensitivity:
    def test_decoherence_lowers_fidelity(self):
        noise = NoiseConfig(
            decoherence=DecoherenceConfig(t1=20000.0, t2=10000.0)
        )
        ideal = f3q_qed((0.0,), "incoherent", repcode.DATA_QUBITS)
        noisy = f3q_qed((0.0,), "incoherent", repcode.DATA_QUBITS, noise)
        assert noisy.average[0] < ideal.average[0] - 1e-4

    def test_confusion_misapplies_corrections(self):
        noise = NoiseConfig(readout=ReadoutModel(eps_t=0.046, eps_b=0.046))
        noisy = f3q_qed((0.0,), "incoherent", repcode.DATA_QUBITS, noise)
        # at p=0 only misassignment hurts; the (2e - e^2) weight of wrong
        # corrections removes those branches entirely for 0/1 cardinals
        assert noisy.average[0] < 1.0
        assert noisy.average[0] > 0.85

    def test_idle_pipeline_ignores_readout(self):
        noise = NoiseConfig(readout=ReadoutModel(eps_t=0.3, eps_b=0.3))
        clean = f3q_idle(GRID, "incoherent", repcode.DATA_QUBITS)
        noisy = f3q_idle(GRID, "incoherent", repcode.DATA_QUBITS, noise)
        assert clean.average == pytest.approx(noisy.average)
