"""``bbl`` command line: synth, norm, run, sweep, lowerbound, phase-diagram.

Exit codes: 0 success (sweep: slope within tolerance; lowerbound: every
ratio >= 1), 1 the check failed, 2 invalid configuration or input.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .besov import HolderParams, besov_norm, holder_seminorm_estimate
from .config import ConfigError, InstanceConfig, StrategyConfig, default_target, frac_grid, parse_besov, validate
from .harness import lower_bound_game, phase_diagram, results_csv, run_episode, sweep_rates
from .harness import EpisodeResult
from .strategies import lattice_centers
from .wavelets import CoefficientFunction, format_float

log = logging.getLogger("besovbandit")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID = 0, 1, 2


def _write_outputs(out: Path, files: dict[str, str]) -> None:
    """Write every file via a temp file + rename, only after all content exists."""
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        fd, tmp = tempfile.mkstemp(dir=out, prefix=f".{name}.")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out / name)


def _meta() -> dict:
    return {"created": _dt.datetime.now(_dt.timezone.utc).isoformat(), "version": __version__}


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=True) + "\n"


def _load_config(path: str | None, command: str) -> dict:
    if path is None:
        doc = {}
    else:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError([f"cannot read config {path}: {exc.strerror}"]) from None
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config {path} is not valid JSON: {exc}"]) from None
    validate(command, doc)
    return doc


def cmd_synth(doc: dict, args) -> tuple[int, dict]:
    inst_cfg = InstanceConfig.from_dict(doc["instance"])
    if inst_cfg.kind not in ("theta-member", "random-besov"):
        raise ConfigError(["$.instance.kind: synth supports theta-member and random-besov"])
    seed = int(doc.get("seed", 0))
    inst = inst_cfg.build(doc.get("T"), seed)
    f: CoefficientFunction = inst.objective
    res = int(doc.get("resolution", 1 << 10))
    pts = lattice_centers(res, f.dim)
    vals = f(pts)
    header = ",".join([f"x{i + 1}" for i in range(f.dim)] + ["f"])
    lines = [header]
    for p, v in zip(pts.tolist(), vals.tolist()):
        lines.append(",".join([format_float(c) for c in p] + [format_float(v)]))
    return EXIT_OK, {"function.json": f.to_json(), "samples.csv": "\n".join(lines) + "\n"}


def cmd_norm(doc: dict, args) -> tuple[int, dict]:
    path = args.function or doc.get("function")
    if path is None:
        raise ConfigError(["$.function: a function file is required (config or --function)"])
    try:
        f = CoefficientFunction.from_json(Path(path).read_text())
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot parse function file {path}: {exc}"]) from None
    bp = parse_besov(doc["bp"])
    if bp.dim != f.dim:
        raise ConfigError([f"$.bp.dim: {bp.dim} does not match the function dimension {f.dim}"])
    norm = besov_norm(f, bp)
    s = bp.holder_exponent
    report = {"besov_norm": norm, "holder_exponent": s, "holder_seminorm_estimate": None, "ratio": None}
    if 0.0 < s <= 1.0:
        seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
        est = holder_seminorm_estimate(f, HolderParams(s, bp.L, bp.dim), int(doc.get("n_pairs", 100_000)), seed)
        report["holder_seminorm_estimate"] = est
        report["ratio"] = est / norm if norm > 0 else None
    print(json.dumps(report))
    return EXIT_OK, {}


def _run_summary(exp, trace, report) -> dict:
    return {
        "experiment": exp,
        "strategy": report.strategy,
        "instance": report.instance,
        "T": len(trace),
        "seed": report.seed,
        "simple_regret": report.simple_regret,
        "cumulative_regret": report.cumulative_regret,
        "clamped": report.clamped,
    }


def cmd_run(doc: dict, args) -> tuple[int, dict]:
    strategy_cfg = StrategyConfig.from_dict(doc["strategy"])
    inst_cfg = InstanceConfig.from_dict(doc["instance"])
    T = int(doc["T"])
    seed = int(doc.get("seed", 0))
    exp = doc.get("experiment", "run")
    inst = inst_cfg.build(T, seed)
    trace, report = run_episode(strategy_cfg.build(T, inst.dim), inst, T, seed)
    ep = EpisodeResult(T, 0, seed, report.simple_regret, report.cumulative_regret, report.strategy, report.instance)
    dim = inst.dim
    lines = [",".join(["t"] + [f"x{i + 1}" for i in range(dim)] + ["y", "regret"])]
    for (t, x, y), g in zip(trace.rows(), report.instantaneous.tolist()):
        lines.append(",".join([str(t)] + [format_float(v) for v in x] + [format_float(y), format_float(g)]))
    summary = {**_run_summary(exp, trace, report), "meta": _meta()}
    return EXIT_OK, {
        "results.csv": results_csv(exp, [ep]),
        "trace.csv": "\n".join(lines) + "\n",
        "summary.json": _dump(summary),
    }


def cmd_sweep(doc: dict, args) -> tuple[int, dict]:
    strategy_cfg = StrategyConfig.from_dict(doc["strategy"])
    inst_cfg = InstanceConfig.from_dict(doc["instance"])
    regret = doc.get("regret", "simple")
    target = float(doc["target"]) if "target" in doc else default_target(regret, inst_cfg)
    noisy = inst_cfg.noise.noisy
    reps = int(doc.get("reps", 20 if noisy else 1))
    horizons = doc["horizons"]
    tolerance = float(doc.get("tolerance", 0.1))
    exp = doc.get("experiment", "sweep")
    fit = sweep_rates(
        strategy_cfg.build, inst_cfg.build, horizons, reps, int(doc.get("seed", 0)),
        regret, target, tolerance, workers=args.threads,
    )
    summary = {"experiment": exp, "rate_fit": fit.summary(), "meta": _meta()}
    code = EXIT_OK if fit.within_tolerance else EXIT_CHECK_FAILED
    return code, {"results.csv": results_csv(exp, fit.episodes), "summary.json": _dump(summary)}


def cmd_lowerbound(doc: dict, args) -> tuple[int, dict]:
    strategy_cfg = StrategyConfig.from_dict(doc["strategy"])
    bp = parse_besov(doc["bp"])
    if not bp.supercritical:
        raise ConfigError([f"$.bp: sigma must exceed d/p (got sigma={bp.sigma}, d/p={bp.dim * bp.inv_p})"])
    horizons = doc.get("horizons", [doc.get("T", 128)])
    exp = doc.get("experiment", "lowerbound")
    games, episodes = [], []
    for T in horizons:
        game = lower_bound_game(
            strategy_cfg.build, int(T), bp, doc.get("wavelet", "haar"),
            int(doc.get("reps", 1)), int(doc.get("seed", 0)),
        )
        episodes.extend(game.pop("episodes"))
        games.append(game)
    ok = all(g["ratio"] >= 1.0 for g in games)
    summary = {"experiment": exp, "games": games, "all_ratios_at_least_one": ok, "meta": _meta()}
    return (EXIT_OK if ok else EXIT_CHECK_FAILED), {
        "results.csv": results_csv(exp, episodes),
        "summary.json": _dump(summary),
    }


def phase_diagram_csv(rows: list[dict]) -> str:
    """Float columns plus exact rational ``sigma_exact``, ``inv_p_exact``, ``alpha_exact``."""
    lines = [
        "sigma,inv_p,feasible,alpha,noiseless_exponent,crossover_eta_exponent,"
        "sigma_exact,inv_p_exact,alpha_exact"
    ]
    for r in rows:
        head = [format_float(r["sigma"]), format_float(r["inv_p"])]
        exact = [str(r["sigma"]), str(r["inv_p"])]
        if r["feasible"]:
            rest = ["true"] + [format_float(r[k]) for k in ("alpha", "noiseless_exponent", "crossover_eta_exponent")]
            exact.append(str(r["alpha"]))
        else:
            rest = ["infeasible", "", "", ""]
            exact.append("")
        lines.append(",".join(head + rest + exact))
    return "\n".join(lines) + "\n"


def cmd_phase_diagram(doc: dict, args) -> tuple[int, dict]:
    d = int(doc.get("d", 1))
    sigmas = frac_grid(doc.get("sigma", {"start": "0.1", "stop": "3", "step": "0.1"}))
    inv_ps = frac_grid(doc.get("inv_p", {"start": "0", "stop": "1", "step": "0.05"}))
    return EXIT_OK, {"phase_diagram.csv": phase_diagram_csv(phase_diagram(d, sigmas, inv_ps))}


COMMANDS = {
    "synth": cmd_synth,
    "norm": cmd_norm,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "lowerbound": cmd_lowerbound,
    "phase-diagram": cmd_phase_diagram,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bbl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, help="worker processes (fallback: BBL_THREADS)")
        p.add_argument("--quiet", action="store_true")
        if name == "norm":
            p.add_argument("--function", help="coefficient function JSON file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    if args.threads is None:
        try:
            args.threads = int(os.environ.get("BBL_THREADS", "1"))
        except ValueError:
            print("error: BBL_THREADS must be an integer", file=sys.stderr)
            return EXIT_INVALID
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_INVALID
    try:
        doc = _load_config(args.config, args.command)
        if args.seed is not None:
            doc["seed"] = args.seed
        code, files = COMMANDS[args.command](doc, args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_INVALID
    if files:
        _write_outputs(Path(args.out), files)
        if not args.quiet:
            for name in files:
                log.info("wrote %s", Path(args.out) / name)
    return code


if __name__ == "__main__":
    sys.exit(main())
