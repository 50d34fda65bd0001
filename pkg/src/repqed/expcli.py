"""Command-line driver for the error-detection experiments.

Each subcommand runs one experiment from a YAML configuration, writes
delimited data files plus rendered figures into the output directory, and
finishes with a ``manifest.json`` recording the resolved configuration, the
seed, retained postselection fractions and a SHA-256 digest of every output
file.  Identical configuration and seed produce byte-identical data files;
``verify`` re-checks a directory against its manifest.

Shot histograms are reproducible: task k of a run draws its generator from
``SeedSequence(seed, spawn_key=(k,))``, so adding or reordering other tasks
never disturbs a task's samples.

Exit codes: 0 success, 2 configuration error, 3 physicality-check failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from . import __version__, figures, metrics, repcode
from .circuit import sample_shots
from .errors import DecoherenceConfig, NoiseConfig, ReadoutModel
from .metrics import SCENARIO_TARGETS
from .qstate import PhysicalityError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICALITY = 3

DEFAULT_PHI_GRID = tuple(np.linspace(-math.pi, math.pi, 13))
DEFAULT_P_GRID = tuple(np.linspace(0.0, 1.0, 21))


class ConfigError(Exception):
    """The run configuration is missing, malformed or inconsistent."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved run settings shared by every subcommand."""

    seed: int = 0
    shots: int = 0
    error_mode: str = "incoherent"
    scenarios: tuple[str, ...] = ("1", "3")
    phi_grid: tuple[float, ...] = DEFAULT_PHI_GRID
    p_grid: tuple[float, ...] = DEFAULT_P_GRID
    noise: NoiseConfig = field(default_factory=NoiseConfig.ideal)
    figures: bool = True

    def as_dict(self) -> dict[str, Any]:
        """JSON-ready echo of the resolved configuration."""
        noise: dict[str, Any] = {"residual_excitation": self.noise.residual_excitation}
        if self.noise.readout is not None:
            r = self.noise.readout
            noise["readout"] = {
                "eps_t": r.eps_t,
                "eps_b": r.eps_b,
                "veto_t": r.veto_t,
                "veto_b": r.veto_b,
            }
        if self.noise.decoherence is not None:
            d = self.noise.decoherence
            noise["decoherence"] = {
                "enabled": d.enabled,
                "t1": {q: d.times_for(q)[0] for q in range(d.n_qubits)},
                "t2": {q: d.times_for(q)[1] for q in range(d.n_qubits)},
            }
        return {
            "seed": self.seed,
            "shots": self.shots,
            "error_mode": self.error_mode,
            "scenarios": list(self.scenarios),
            "phi_grid": list(self.phi_grid),
            "p_grid": list(self.p_grid),
            "noise": noise,
            "figures": self.figures,
        }


def _resolve_grid(raw: Any, name: str, default: tuple[float, ...]) -> tuple[float, ...]:
    if raw is None:
        return default
    if isinstance(raw, Mapping):
        try:
            start, stop, count = raw["start"], raw["stop"], int(raw["count"])
        except KeyError as exc:
            raise ConfigError(f"{name}: grid mapping needs start/stop/count ({exc})")
        if count < 2:
            raise ConfigError(f"{name}: grid needs at least 2 points")
        return tuple(float(x) for x in np.linspace(start, stop, count))
    if isinstance(raw, Sequence) and not isinstance(raw, (str, bytes)):
        if not raw:
            raise ConfigError(f"{name}: grid list is empty")
        return tuple(float(x) for x in raw)
    raise ConfigError(f"{name}: expected a list or start/stop/count mapping")


def _per_qubit_times(raw: Any, name: str) -> float | dict[int, float]:
    if isinstance(raw, Mapping):
        try:
            return {int(q): float(v) for q, v in raw.items()}
        except (TypeError, ValueError):
            raise ConfigError(f"decoherence.{name}: keys must be qubit indices")
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"decoherence.{name}: expected a number or qubit mapping")


def _build_noise(raw: Mapping[str, Any]) -> NoiseConfig:
    readout = None
    if "readout" in raw and raw["readout"] is not None:
        r = raw["readout"]
        try:
            readout = ReadoutModel(
                eps_t=float(r.get("eps_t", 0.0)),
                eps_b=float(r.get("eps_b", 0.0)),
                veto_t=float(r.get("veto_t", 0.0)),
                veto_b=float(r.get("veto_b", 0.0)),
            )
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"noise.readout: {exc}")
    decoherence = None
    if "decoherence" in raw and raw["decoherence"] is not None:
        d = raw["decoherence"]
        try:
            decoherence = DecoherenceConfig(
                t1=_per_qubit_times(d["t1"], "t1"),
                t2=_per_qubit_times(d["t2"], "t2"),
                n_qubits=repcode.N_QUBITS,
                enabled=bool(d.get("enabled", True)),
            )
        except KeyError as exc:
            raise ConfigError(f"noise.decoherence: missing {exc}")
        except ValueError as exc:
            raise ConfigError(f"noise.decoherence: {exc}")
    try:
        return NoiseConfig(
            readout=readout,
            decoherence=decoherence,
            residual_excitation=float(raw.get("residual_excitation", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"noise: {exc}")


_KNOWN_KEYS = {
    "schema_version",
    "seed",
    "shots",
    "error_mode",
    "scenarios",
    "phi_grid",
    "p_grid",
    "noise",
    "figures",
}


def load_config(
    path: str | None,
    seed: int | None = None,
    shots: int | None = None,
    ideal: bool = False,
) -> ExperimentConfig:
    """Read and validate a YAML configuration; CLI overrides win.

    ``path=None`` starts from built-in defaults (ideal noise, standard
    grids).  Any violation raises :class:`ConfigError`.
    """
    raw: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(p.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}")
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, Mapping):
            raise ConfigError("config root must be a mapping")
        raw = dict(loaded)
        unknown = set(raw) - _KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        version = raw.get("schema_version", 1)
        if version != 1:
            raise ConfigError(f"unsupported schema_version {version!r}")

    mode = raw.get("error_mode", "incoherent")
    if mode not in ("incoherent", "coherent"):
        raise ConfigError(f"error_mode must be incoherent or coherent, got {mode!r}")
    scenarios = tuple(str(s) for s in raw.get("scenarios", ("1", "3")))
    for s in scenarios:
        if s not in SCENARIO_TARGETS:
            raise ConfigError(f"unknown scenario {s!r} (have {sorted(SCENARIO_TARGETS)})")
    if not scenarios:
        raise ConfigError("scenarios must not be empty")

    try:
        cfg_seed = int(raw.get("seed", 0)) if seed is None else int(seed)
        cfg_shots = int(raw.get("shots", 0)) if shots is None else int(shots)
    except (TypeError, ValueError):
        raise ConfigError("seed and shots must be integers")
    if cfg_shots < 0:
        raise ConfigError(f"shots must be >= 0, got {cfg_shots}")

    noise = NoiseConfig.ideal()
    if not ideal and raw.get("noise"):
        if not isinstance(raw["noise"], Mapping):
            raise ConfigError("noise block must be a mapping")
        noise = _build_noise(raw["noise"])

    p_grid = _resolve_grid(raw.get("p_grid"), "p_grid", DEFAULT_P_GRID)
    for p in p_grid:
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"p_grid value {p} outside [0, 1]")

    return ExperimentConfig(
        seed=cfg_seed,
        shots=cfg_shots,
        error_mode=mode,
        scenarios=scenarios,
        phi_grid=_resolve_grid(raw.get("phi_grid"), "phi_grid", DEFAULT_PHI_GRID),
        p_grid=p_grid,
        noise=noise,
        figures=bool(raw.get("figures", True)),
    )


# ---------------------------------------------------------------------------
# deterministic file writing


def _fmt(x: Any) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload: Mapping[str, Any]) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(cfg.as_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _task_seed(root_seed: int, task_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(root_seed, spawn_key=(task_index,))


# ---------------------------------------------------------------------------
# subcommands


def cmd_parity_check(cfg: ExperimentConfig, outdir: Path) -> dict[str, Any]:
    """Declared-parity distributions for all eight basis-state inputs."""
    prob_rows = []
    hist_rows = []
    results = {}
    probs_by_input: dict[str, dict[str, float]] = {}
    for k, bits in enumerate(
        (t, m, b) for t in (0, 1) for m in (0, 1) for b in (0, 1)
    ):
        dist = metrics.parity_check_distribution(bits, cfg.noise)
        results[bits] = dist
        name = "".join(map(str, bits))
        probs_by_input[name] = {}
        for (bt, bb), p in sorted(dist.items()):
            outcome = "eo"[bt] + "eo"[bb]
            probs_by_input[name][outcome] = p
            prob_rows.append((name, outcome, p))
        if cfg.shots:
            branch_order = sorted(dist.items())
            counts = np.random.default_rng(_task_seed(cfg.seed, k)).multinomial(
                cfg.shots, [p for _, p in branch_order]
            )
            for ((bt, bb), _), c in zip(branch_order, counts):
                hist_rows.append((name, "eo"[bt] + "eo"[bb], int(c)))

    af = metrics.assignment_fidelity(results)
    sampled_af = None
    if hist_rows:
        sampled: dict[tuple, dict[tuple, float]] = {}
        for name, outcome, count in hist_rows:
            bits = tuple(int(c) for c in name)
            key = (0 if outcome[0] == "e" else 1, 0 if outcome[1] == "e" else 1)
            sampled.setdefault(bits, {})[key] = float(count)
        sampled_af = metrics.assignment_fidelity(sampled)

    _write_csv(outdir / "parity_probs.csv", ("input", "outcome", "probability"), prob_rows)
    outputs = ["parity_probs.csv"]
    if hist_rows:
        _write_csv(outdir / "parity_hist.csv", ("input", "outcome", "count"), hist_rows)
        outputs.append("parity_hist.csv")
    retained = (
        cfg.noise.readout.retained_fraction(repcode.PARITY_LABELS)
        if cfg.noise.readout
        else 1.0
    )
    summary = {
        "assignment_fidelity": af,
        "retained_fraction": retained,
    }
    if sampled_af is not None:
        summary["assignment_fidelity_sampled"] = sampled_af
    _write_json(outdir / "parity_summary.json", summary)
    outputs.append("parity_summary.json")
    if cfg.figures:
        figures.parity_check_figure(probs_by_input, str(outdir / "parity_check.png"))
        outputs.append("parity_check.png")
    return {"outputs": outputs, "retained_fraction": {"parity_check": retained}}


def cmd_entangle(cfg: ExperimentConfig, outdir: Path) -> dict[str, Any]:
    """GHZ-class generation (double stabilizer) and Bell pairs (single)."""
    ghz_rows = []
    witness_rows = []
    mermin_by_branch: dict[str, list[float]] = {}
    witness_min: dict[str, list[float]] = {}
    best = (-1.0, 0.0)  # (|mermin|, phi) on the odd/odd branch
    for phi in cfg.phi_grid:
        for syndrome, prob, data in metrics.ghz_branches(phi, cfg.noise):
            m = metrics.mermin(data)
            corrected = metrics.apply_unitary(
                data, repcode.encoding_correction_for(syndrome)
            )
            f = metrics.fidelity_to_pure(corrected, repcode.ghz_state(phi))
            ghz_rows.append((phi, syndrome.value, prob, m, f))
            mermin_by_branch.setdefault(syndrome.value, []).append(m)
            if syndrome is repcode.Syndrome.OO and abs(m) > best[0] + 1e-15:
                best = (abs(m), phi)
        for stab in ("t", "b"):
            for bit, prob, pair in metrics.bell_branches(phi, stab, cfg.noise):
                w = metrics.witnesses(pair)
                post = "eo"[bit]
                witness_rows.append(
                    (phi, stab, post, prob, w.phi_plus, w.phi_minus, w.psi_plus, w.psi_minus)
                )
                key_even = f"{stab}/{post}: phi_plus"
                key_odd = f"{stab}/{post}: psi_plus"
                witness_min.setdefault(key_even, []).append(w.phi_plus)
                witness_min.setdefault(key_odd, []).append(w.psi_plus)

    best_phi = best[1]
    oo_state = next(
        data
        for syndrome, _, data in metrics.ghz_branches(best_phi, cfg.noise)
        if syndrome is repcode.Syndrome.OO
    )
    tomogram = metrics.pauli_expectations(oo_state)

    _write_csv(
        outdir / "ghz_sweep.csv",
        ("phi", "branch", "probability", "mermin", "ghz_fidelity_corrected"),
        ghz_rows,
    )
    _write_csv(
        outdir / "bell_witness.csv",
        ("phi", "stabilizer", "postselect", "probability",
         "w_phi_plus", "w_phi_minus", "w_psi_plus", "w_psi_minus"),
        witness_rows,
    )
    _write_csv(
        outdir / "pauli_tomogram.csv",
        ("pauli", "value"),
        sorted(tomogram.items()),
    )
    summary = {
        "optimal_phi": best_phi,
        "max_abs_mermin": best[0],
        "witness_minimum": {
            key: min(vals) for key, vals in sorted(witness_min.items())
        },
    }
    _write_json(outdir / "entangle_summary.json", summary)
    outputs = ["ghz_sweep.csv", "bell_witness.csv", "pauli_tomogram.csv", "entangle_summary.json"]
    retained = {
        "ghz": cfg.noise.readout.retained_fraction(repcode.PARITY_LABELS)
        if cfg.noise.readout
        else 1.0,
        "bell": cfg.noise.readout.retained_fraction(("P_t",)) if cfg.noise.readout else 1.0,
    }
    if cfg.figures:
        figures.entangle_figure(
            cfg.phi_grid,
            mermin_by_branch,
            {k: v for k, v in witness_min.items() if k.endswith("phi_plus") or "psi" in k},
            str(outdir / "entangle.png"),
        )
        outputs.append("entangle.png")
    return {"outputs": outputs, "retained_fraction": retained}


def _first_crossing(
    p_grid: Sequence[float], qed: Sequence[float], idle: Sequence[float]
) -> float | None:
    """Smallest grid point where the detection pipeline is at least as good."""
    for p, q, i in zip(p_grid, qed, idle):
        if q >= i - 1e-12:
            return p
    return None


def cmd_qed_sweep(cfg: ExperimentConfig, outdir: Path) -> dict[str, Any]:
    """F3Q and FL curves over the error-strength grid, both pipelines."""
    f3q_rows: list[tuple] = []
    fl_rows: list[tuple] = []
    crossover: dict[str, Any] = {}
    ceilings: dict[str, Any] = {}
    for scenario in cfg.scenarios:
        targets = SCENARIO_TARGETS[scenario]
        rq = metrics.f3q_qed(cfg.p_grid, cfg.error_mode, targets, cfg.noise)
        ri = metrics.f3q_idle(cfg.p_grid, cfg.error_mode, targets, cfg.noise)
        lq = metrics.f_logical(cfg.p_grid, cfg.error_mode, targets, "qed", cfg.noise)
        li = metrics.f_logical(cfg.p_grid, cfg.error_mode, targets, "idle", cfg.noise)
        f3q_rows.extend(rq.rows())
        f3q_rows.extend(ri.rows())
        fl_rows.extend(lq.rows())
        fl_rows.extend(li.rows())
        crossover[f"F3Q/scenario{scenario}"] = _first_crossing(
            cfg.p_grid, rq.average, ri.average
        )
        crossover[f"FL/scenario{scenario}"] = _first_crossing(
            cfg.p_grid, lq.average, li.average
        )
        ceilings[f"scenario{scenario}"] = {
            "f3q_qed": rq.average[0],
            "f3q_idle": ri.average[0],
            "fl_qed": lq.average[0],
            "fl_idle": li.average[0],
        }

    header = ("metric", "scenario", "pipeline", "mode", "p_err", "cardinal", "value")
    _write_csv(outdir / "f3q.csv", header, f3q_rows)
    _write_csv(outdir / "fl.csv", header, fl_rows)
    retained = (
        cfg.noise.readout.retained_fraction(repcode.PARITY_LABELS)
        if cfg.noise.readout
        else 1.0
    )
    summary = {
        "error_mode": cfg.error_mode,
        "crossover_p": crossover,
        "fidelity_at_p0": ceilings,
        "retained_fraction": retained,
    }
    _write_json(outdir / "qed_summary.json", summary)
    outputs = ["f3q.csv", "fl.csv", "qed_summary.json"]
    if cfg.figures:
        figures.qed_sweep_figure(f3q_rows, fl_rows, str(outdir / "qed_sweep.png"))
        outputs.append("qed_sweep.png")
    return {"outputs": outputs, "retained_fraction": {"qed_pipeline": retained}}


def cmd_error_table(cfg: ExperimentConfig, outdir: Path) -> dict[str, Any]:
    """Deterministic two-round error combinations plus the syndrome tables."""
    rows = metrics.error_combination_table(cfg.noise)
    _write_csv(
        outdir / "error_table.csv",
        ("case", "n_first", "n_second", "f_qed", "f_idle", "verdict", "n_pairs"),
        [(r.label, r.n_first, r.n_second, r.f_qed, r.f_idle, r.verdict, r.n_pairs) for r in rows],
    )
    (outdir / "corrections.csv").write_text(repcode.correction_table_text())
    verdicts = {"qed": 0, "idle": 0, "tie": 0}
    for r in rows:
        verdicts[r.verdict] += 1
    _write_json(outdir / "error_table_summary.json", {"verdict_counts": verdicts})
    outputs = ["error_table.csv", "corrections.csv", "error_table_summary.json"]
    if cfg.figures:
        figures.error_table_figure(rows, str(outdir / "error_table.png"))
        outputs.append("error_table.png")
    return {"outputs": outputs, "retained_fraction": {}}


COMMANDS = {
    "parity-check": cmd_parity_check,
    "entangle": cmd_entangle,
    "qed-sweep": cmd_qed_sweep,
    "error-table": cmd_error_table,
}


@dataclass(frozen=True)
class RunManifest:
    """What a finished run wrote and under which settings."""

    command: str
    config: dict[str, Any]
    config_sha256: str
    seed: int
    outputs: dict[str, str]  # filename -> sha256
    retained_fraction: dict[str, float]
    package_version: str
    wall_clock_s: float

    def as_dict(self) -> dict[str, Any]:
        return {
            "schema_version": 1,
            "command": self.command,
            "config": self.config,
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "outputs": self.outputs,
            "retained_fraction": self.retained_fraction,
            "package_version": self.package_version,
            "wall_clock_s": self.wall_clock_s,
        }


def run_command(command: str, cfg: ExperimentConfig, outdir: str | Path) -> RunManifest:
    """Execute one experiment and write its manifest; returns the manifest."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = COMMANDS[command](cfg, out)
    manifest = RunManifest(
        command=command,
        config=cfg.as_dict(),
        config_sha256=_config_hash(cfg),
        seed=cfg.seed,
        outputs={name: _sha256(out / name) for name in sorted(result["outputs"])},
        retained_fraction=result["retained_fraction"],
        package_version=__version__,
        wall_clock_s=time.perf_counter() - t0,
    )
    _write_json(out / "manifest.json", manifest.as_dict())
    return manifest


def cmd_verify(outdir: Path) -> int:
    """Re-hash a run directory against its manifest; 0 if everything matches."""
    manifest_path = outdir / "manifest.json"
    if not manifest_path.is_file():
        print(f"verify: no manifest.json in {outdir}", file=sys.stderr)
        return 1
    manifest = json.loads(manifest_path.read_text())
    status = 0
    for name, digest in manifest.get("outputs", {}).items():
        path = outdir / name
        if not path.is_file():
            print(f"verify: missing output {name}", file=sys.stderr)
            status = 1
            continue
        actual = _sha256(path)
        if actual != digest:
            print(f"verify: digest mismatch for {name}", file=sys.stderr)
            status = 1
    canon = json.dumps(
        manifest.get("config", {}), sort_keys=True, separators=(",", ":")
    )
    if hashlib.sha256(canon.encode()).hexdigest() != manifest.get("config_sha256"):
        print("verify: config hash mismatch", file=sys.stderr)
        status = 1
    if status == 0:
        print(f"verify: {len(manifest.get('outputs', {}))} outputs match")
    return status


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repqed",
        description="Exact simulations of three-qubit bit-flip error detection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0].lower())
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--shots", type=int, help="override the configured shot count")
        p.add_argument(
            "--ideal", action="store_true", help="ignore the configured noise model"
        )
    v = sub.add_parser("verify", help="re-check a run directory against its manifest")
    v.add_argument("--out", required=True, help="run directory containing manifest.json")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "verify":
        return cmd_verify(Path(args.out))
    try:
        cfg = load_config(args.config, seed=args.seed, shots=args.shots, ideal=args.ideal)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run_command(args.command, cfg, args.out)
    except PhysicalityError as exc:
        print(f"physicality failure: {exc}", file=sys.stderr)
        return EXIT_PHYSICALITY
    print(
        f"{args.command}: wrote {len(manifest.outputs)} files to {args.out} "
        f"in {manifest.wall_clock_s:.2f}s"
    )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
