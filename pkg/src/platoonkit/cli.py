"""Command-line front end: scenario parsing, experiment orchestration, emission.

Every command writes a run manifest (command, resolved config, seed, version,
config hash, outputs) next to its outputs; `rerun` re-executes a manifest and
reproduces the outputs byte for byte.  CSVs are shaped for direct plotting and
carry no volatile fields.  Exit codes: 0 success, 2 configuration error,
3 numerical error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .channel import GilbertParams, gamma_analytic
from .control import min_headway
from .errors import ConfigError, NumericalError, PlatoonKitError
from .montecarlo import (
    ScenarioConfig,
    run_realization,
    run_safety_study,
    validate_mean_trajectory,
)
from .scenario import config_hash, load_scenario, scenario_from_dict, scenario_to_dict
from .stability import (
    build_error_system,
    cacc_error_tf,
    freq_response_mag,
    is_string_stable,
    uniform_error_bound,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

OUTDIR_ENV = "PLATOONKIT_OUTDIR"


def _fmt(x) -> str:
    """Full-precision, locale-free float formatting (round-trip repr)."""
    return repr(float(x))


def _out_dir(args: argparse.Namespace, command: str) -> Path:
    if args.out is not None:
        return Path(args.out)
    base = os.environ.get(OUTDIR_ENV, "runs")
    return Path(base) / command


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = len(columns[0])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in range(rows):
            fh.write(",".join(_fmt(col[r]) for col in columns) + "\n")


def write_summary(path: Path, fields: dict) -> None:
    """Single-line structured record: space-separated key=value pairs."""
    line = " ".join(f"{k}={v}" for k, v in fields.items())
    path.write_text(line + "\n")


@dataclass(frozen=True)
class RunManifest:
    """Record of one command invocation, sufficient to reproduce its outputs."""

    command: str
    config: dict
    base_seed: int | None
    version: str = __version__
    config_sha256: str = ""
    outputs: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.config_sha256:
            object.__setattr__(self, "config_sha256", config_hash(self.config))

    def write(self, out: Path) -> Path:
        path = out / "manifest.json"
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        try:
            data = json.loads(path.read_text())
            manifest = cls(
                command=data["command"],
                config=data["config"],
                base_seed=data.get("base_seed"),
                version=data.get("version", ""),
                config_sha256="",
                outputs=list(data.get("outputs", [])),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"manifest: malformed ({exc})") from None
        if data.get("config_sha256") != manifest.config_sha256:
            raise ConfigError("manifest: config hash mismatch")
        return manifest


def write_manifest(
    out: Path, command: str, config: dict, base_seed: int | None, outputs: list[str]
) -> Path:
    return RunManifest(command, config, base_seed, outputs=outputs).write(out)


def _load(args: argparse.Namespace) -> ScenarioConfig:
    sc = load_scenario(args.scenario)
    if getattr(args, "seed", None) is not None:
        sc = dataclasses.replace(sc, base_seed=args.seed)
    return sc


def cmd_simulate(args: argparse.Namespace, sc: ScenarioConfig | None = None) -> int:
    sc = sc if sc is not None else _load(args)
    out = _out_dir(args, "simulate")
    out.mkdir(parents=True, exist_ok=True)
    result = run_realization(sc, args.realization, include_states=args.states)

    outputs = ["spacing_errors.csv", "summary.txt"]
    header = ["time_s"] + [f"e{i + 1}_m" for i in range(sc.n_followers)]
    cols = [result.times] + [result.spacing_errors[:, i] for i in range(sc.n_followers)]
    write_csv(out / "spacing_errors.csv", header, cols)

    if args.states:
        outputs.append("states.csv")
        sheader = ["time_s"]
        scols = [result.times]
        for i in range(sc.n_vehicles):
            sheader += [f"x{i}_m", f"v{i}_mps", f"a{i}_mps2"]
            scols += [result.states[:, i, 0], result.states[:, i, 1], result.states[:, i, 2]]
        write_csv(out / "states.csv", sheader, scols)

    peaks = np.abs(result.spacing_errors).max(axis=0)
    summary = {
        "command": "simulate",
        "realization": result.index,
        "collided": int(result.collided),
        "n_collision_events": len(result.collision_events),
    }
    for i, p in enumerate(peaks):
        summary[f"peak_abs_e{i + 1}_m"] = _fmt(p)
    write_summary(out / "summary.txt", summary)
    write_manifest(out, "simulate", _simulate_config(sc, args), sc.base_seed, outputs)
    print(f"simulate: wrote {', '.join(outputs)} to {out}")
    return EXIT_OK


def _simulate_config(sc: ScenarioConfig, args: argparse.Namespace) -> dict:
    return {
        "scenario": scenario_to_dict(sc),
        "realization": args.realization,
        "states": bool(args.states),
    }


def cmd_headway(args: argparse.Namespace) -> int:
    if (args.gamma is None) == (args.gilbert is None):
        raise ConfigError("headway: give exactly one of --gamma or --gilbert P Q q")
    if args.gilbert is not None:
        p, q_, qq = args.gilbert
        gamma = gamma_analytic(GilbertParams(p_gb=p, p_bg=q_, q=qq))
    else:
        gamma = args.gamma
    h_min = min_headway(args.tau, gamma, args.ka)
    record = {
        "command": "headway",
        "tau_s": _fmt(args.tau),
        "ka": _fmt(args.ka),
        "gamma": _fmt(gamma),
        "h_min_s": _fmt(h_min),
    }
    if args.json:
        print(json.dumps(record))
    else:
        print(f"gamma = {gamma:.6g}")
        print(f"h_min = {h_min:.6g} s")
    out = _out_dir(args, "headway")
    out.mkdir(parents=True, exist_ok=True)
    write_summary(out / "headway.txt", record)
    config = {
        "tau": args.tau,
        "ka": args.ka,
        "gamma": args.gamma,
        "gilbert": list(args.gilbert) if args.gilbert else None,
    }
    write_manifest(out, "headway", config, None, ["headway.txt"])
    return EXIT_OK


def cmd_stability(args: argparse.Namespace, sc: ScenarioConfig | None = None) -> int:
    sc = sc if sc is not None else _load(args)
    out = _out_dir(args, "stability")
    out.mkdir(parents=True, exist_ok=True)
    gamma = sc.channel.effective_gamma()
    report = is_string_stable(sc.controller, sc.params.tau, gamma)
    tf = cacc_error_tf(sc.controller, sc.params.tau, gamma)
    omegas = np.concatenate([[0.0], np.logspace(-3, 3, 2000)])
    mags = np.array([freq_response_mag(tf, w) for w in omegas])
    write_csv(out / "freq_response.csv", ["omega_radps", "magnitude"], [omegas, mags])
    summary = {
        "command": "stability",
        "stable": int(report.stable),
        "hinf": _fmt(report.hinf),
        "omega_peak_radps": _fmt(report.omega_peak),
        "margin": _fmt(report.margin),
        "h_min_s": _fmt(report.h_min),
        "gamma": _fmt(gamma),
    }
    write_summary(out / "stability.txt", summary)
    write_manifest(out, "stability", {"scenario": scenario_to_dict(sc)}, sc.base_seed,
                   ["freq_response.csv", "stability.txt"])
    print(f"stable={report.stable} hinf={report.hinf:.6f} "
          f"peak_omega={report.omega_peak:.4f} h_min={report.h_min:.4f}")
    return EXIT_OK


def cmd_bound(args: argparse.Namespace, sc: ScenarioConfig | None = None) -> int:
    sc = sc if sc is not None else _load(args)
    out = _out_dir(args, "bound")
    out.mkdir(parents=True, exist_ok=True)
    gamma = sc.channel.effective_gamma()
    sys_ = build_error_system(sc.controller, sc.params.tau, gamma)

    det_sc = dataclasses.replace(
        sc,
        channel=dataclasses.replace(sc.channel, kind="deterministic", gamma=gamma, gilbert=None),
    )
    result = run_realization(det_sc, 0, include_states=True)
    w0 = result.states[:, 0, 2]  # realized lead-vehicle acceleration
    sim_max = float(np.abs(result.spacing_errors).max())

    reports = {
        variant: uniform_error_bound(sys_, args.alpha_star, w0, sc.dt, sqrt_gain=(variant == "sqrt_trace"))
        for variant in ("trace", "sqrt_trace")
    }
    summary: dict = {"command": "bound", "alpha_star": _fmt(args.alpha_star),
                     "simulated_max_error_m": _fmt(sim_max)}
    for variant, rep in reports.items():
        summary[f"bound_{variant}_m"] = _fmt(rep.bound)
        summary[f"j_star_{variant}"] = _fmt(rep.j_star)
    rep = reports["trace"]
    summary.update(
        beta2=_fmt(rep.beta2), gamma2=_fmt(rep.gamma2), eta=_fmt(rep.eta), w0_l2=_fmt(rep.w0_l2)
    )
    write_summary(out / "bound.txt", summary)
    write_manifest(out, "bound", {"scenario": scenario_to_dict(sc), "alpha_star": args.alpha_star},
                   sc.base_seed, ["bound.txt"])
    print(f"bound(trace)={reports['trace'].bound:.4f} m  "
          f"bound(sqrt_trace)={reports['sqrt_trace'].bound:.4f} m  "
          f"simulated max |e|={sim_max:.4f} m")
    return EXIT_OK


def cmd_montecarlo(args: argparse.Namespace, sc: ScenarioConfig | None = None) -> int:
    sc = sc if sc is not None else _load(args)
    out = _out_dir(args, "montecarlo")
    out.mkdir(parents=True, exist_ok=True)
    stats = run_safety_study(sc, mode=args.mode, realizations=args.realizations)
    header = ["time_s"] + [f"var_e{i + 1}_m2" for i in range(sc.n_followers)]
    cols = [stats.times] + [stats.variance_series[:, i] for i in range(sc.n_followers)]
    write_csv(out / "variance_series.csv", header, cols)
    summary = {
        "command": "montecarlo",
        "mode": args.mode or sc.controller.mode,
        "realizations": stats.n_realizations,
        "n_collided": stats.n_collided,
        "p_collision": _fmt(stats.p_collision),
        "mean_events_per_unstable": (
            _fmt(stats.mean_events_per_unstable)
            if stats.mean_events_per_unstable is not None else "none"
        ),
        "base_seed": sc.base_seed,
    }
    write_summary(out / "safety_stats.txt", summary)
    config = {"scenario": scenario_to_dict(sc), "mode": args.mode,
              "realizations": args.realizations}
    write_manifest(out, "montecarlo", config, sc.base_seed,
                   ["variance_series.csv", "safety_stats.txt"])
    print(f"mode={summary['mode']} p_collision={stats.p_collision:.4f} "
          f"mean_events={summary['mean_events_per_unstable']}")
    return EXIT_OK


def cmd_validate_mean(args: argparse.Namespace, sc: ScenarioConfig | None = None) -> int:
    sc = sc if sc is not None else _load(args)
    out = _out_dir(args, "validate-mean")
    out.mkdir(parents=True, exist_ok=True)
    report = validate_mean_trajectory(sc, args.realizations)
    summary = {
        "command": "validate-mean",
        "realizations": report.n_realizations,
        "max_deviation": _fmt(report.max_deviation),
        "within_envelope": int(report.within_envelope),
        "max_normalized": _fmt(report.max_normalized),
    }
    for i in range(sc.n_vehicles):
        summary[f"veh{i}_max_dev"] = _fmt(report.per_vehicle_max_deviation[i])
        summary[f"veh{i}_envelope"] = _fmt(report.per_vehicle_envelope_at_max[i])
    write_summary(out / "mean_validation.txt", summary)
    config = {"scenario": scenario_to_dict(sc), "realizations": args.realizations}
    write_manifest(out, "validate-mean", config, sc.base_seed, ["mean_validation.txt"])
    print(f"max deviation={report.max_deviation:.3e} within 3-sigma envelope={report.within_envelope}")
    return EXIT_OK


def cmd_rerun(args: argparse.Namespace) -> int:
    path = Path(args.manifest)
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    manifest = RunManifest.load(path)
    command = manifest.command
    config = manifest.config

    out = Path(args.out) if args.out is not None else path.parent

    if command == "headway":
        ns = argparse.Namespace(
            tau=config["tau"], ka=config["ka"], gamma=config["gamma"],
            gilbert=tuple(config["gilbert"]) if config["gilbert"] else None,
            json=False, out=str(out),
        )
        return cmd_headway(ns)

    sc = scenario_from_dict(config["scenario"])
    base = argparse.Namespace(out=str(out), seed=None)
    if command == "simulate":
        ns = argparse.Namespace(
            **vars(base), realization=config["realization"], states=config["states"]
        )
        return cmd_simulate(ns, sc)
    if command == "stability":
        return cmd_stability(base, sc)
    if command == "bound":
        ns = argparse.Namespace(**vars(base), alpha_star=config["alpha_star"])
        return cmd_bound(ns, sc)
    if command == "montecarlo":
        ns = argparse.Namespace(
            **vars(base), mode=config["mode"], realizations=config["realizations"]
        )
        return cmd_montecarlo(ns, sc)
    if command == "validate-mean":
        ns = argparse.Namespace(**vars(base), realizations=config["realizations"])
        return cmd_validate_mean(ns, sc)
    raise ConfigError(f"manifest: unknown command {command!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="platoonkit",
        description="Connected vehicle string simulation and string-stability analysis",
    )
    parser.add_argument("--version", action="version", version=f"platoonkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, scenario: bool = True) -> None:
        if scenario:
            p.add_argument("scenario", help="scenario file (.scn)")
            p.add_argument("--seed", type=int, default=None, help="override the base seed")
        p.add_argument("--out", default=None, help=f"output directory (default ${OUTDIR_ENV}/<command>)")

    p = sub.add_parser("simulate", help="run one realization and emit spacing-error series")
    add_common(p)
    p.add_argument("--realization", type=int, default=0, help="realization index (default 0)")
    p.add_argument("--states", action="store_true", help="also write full state trajectories")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("headway", help="minimum string-stable time headway")
    p.add_argument("--tau", type=float, required=True, help="actuation lag (s)")
    p.add_argument("--ka", type=float, required=True, help="feed-forward gain")
    p.add_argument("--gamma", type=float, default=None, help="packet reception probability")
    p.add_argument("--gilbert", type=float, nargs=3, metavar=("P", "Q", "q"), default=None,
                   help="Gilbert parameters; gamma computed analytically")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    add_common(p, scenario=False)
    p.set_defaults(fn=cmd_headway)

    p = sub.add_parser("stability", help="string-stability report and frequency response")
    add_common(p)
    p.set_defaults(fn=cmd_stability)

    p = sub.add_parser("bound", help="worst-case spacing-error bound vs simulation")
    add_common(p)
    p.add_argument("--alpha-star", type=float, default=0.0, help="initial-error budget")
    p.set_defaults(fn=cmd_bound)

    p = sub.add_parser("montecarlo", help="seeded safety study (collision statistics)")
    add_common(p)
    p.add_argument("--mode", choices=("acc", "cacc"), default=None,
                   help="override the controller mode")
    p.add_argument("--realizations", type=int, default=None, help="override realization count")
    p.set_defaults(fn=cmd_montecarlo)

    p = sub.add_parser("validate-mean", help="stochastic mean vs deterministic equivalent")
    add_common(p)
    p.add_argument("--realizations", type=int, required=True)
    p.set_defaults(fn=cmd_validate_mean)

    p = sub.add_parser("rerun", help="re-execute a run manifest")
    p.add_argument("manifest", help="manifest.json written by a previous run")
    p.add_argument("--out", default=None, help="output directory (default: manifest's directory)")
    p.set_defaults(fn=cmd_rerun)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PlatoonKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
