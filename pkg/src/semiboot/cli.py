"""``semiboot`` command line: fit, bootstrap, simulate and replay.

Every report is a JSON document ``{"manifest": ..., "result": ...}``.  The
manifest records the command, the fully resolved configuration, the master
seed, the library version and the SHA-256 of the input file; ``replay``
re-executes it.  Exit codes: 0 success, 2 input or configuration error,
3 optimization failure, 4 unstable bootstrap.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .estimation import FitOptions, fit, profile_curvature
from .exceptions import InvalidArgumentError, SchemaError, SemibootError
from .inference import CI_KINDS, confidence_sets, empirical_quantile, run_bootstrap
from .models import MODEL_KINDS, ModelConfig, build_model, read_csv
from .reporting import dumps, finish_manifest, make_manifest, sha256_file, strip_volatile, write_records_csv
from .simulate import EXPERIMENTS, ExperimentConfig, run_experiment
from .weights import WeightScheme

__all__ = ["main", "build_parser"]

logger = logging.getLogger("semiboot")

EXIT_OK, EXIT_INPUT, EXIT_OPTIM, EXIT_UNSTABLE = 0, 2, 3, 4
EXIT_MISMATCH = 1


class CommandFailed(Exception):
    """Carries a finished report together with a nonzero exit code."""

    def __init__(self, code: int, message: str, result: dict | None = None):
        super().__init__(message)
        self.code = code
        self.result = result


def _default_jobs() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def load_json(path) -> dict:
    """Parse a JSON file; syntax errors become :class:`SchemaError` with the position."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno} (char {exc.pos}): {exc.msg}") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: expected a JSON object at the top level")
    return doc


# ---------------------------------------------------------------------------
# resolved configurations


def _model_section(kind: str, extra: dict | None) -> dict:
    section = dict(extra or {})
    section["kind"] = kind
    return ModelConfig.from_dict(section).to_dict()


def _resolve_fit(args) -> dict:
    extra = load_json(args.config) if args.config else {}
    unknown = set(extra) - {"model", "fit"}
    if unknown:
        raise SchemaError(f"{args.config}: unknown keys {sorted(unknown)} (expected 'model', 'fit')")
    opts = dict(extra.get("fit") or {})
    opts["seed"] = int(args.seed)
    if args.starts is not None:
        opts["starts"] = int(args.starts)
    cfg = {
        "data": str(args.data),
        "model": _model_section(args.model, extra.get("model")),
        "fit": FitOptions.from_dict(opts).to_dict(),
        "variance": bool(getattr(args, "variance", False)),
    }
    if args.command == "bootstrap":
        WeightScheme.from_name(args.scheme)
        cfg.update(
            scheme=args.scheme,
            B=int(args.b),
            alpha=float(args.alpha),
            ci=list(CI_KINDS) if args.ci == "all" else [args.ci],
            studentize=args.studentize,
        )
    return cfg


def _resolve_simulate(args) -> dict:
    doc = load_json(args.config)
    name = args.experiment or doc.get("experiment")
    if name is None:
        raise InvalidArgumentError("no experiment named: pass --experiment or set 'experiment' in the config")
    if name not in EXPERIMENTS:
        raise InvalidArgumentError(f"unknown experiment {name!r}; expected one of {sorted(EXPERIMENTS)}")
    settings = ExperimentConfig.from_dict(doc)
    if args.seed is not None:
        settings = ExperimentConfig.from_dict({**settings.to_dict(), "master_seed": int(args.seed)})
    return {"experiment": name, "settings": settings.to_dict()}


# ---------------------------------------------------------------------------
# command bodies: resolved config -> result dict


def _load_data(cfg: dict):
    return read_csv(cfg["data"], cfg["model"]["kind"])


def _sigma_block(model, data, theta_hat):
    try:
        return profile_curvature(model, data, theta_hat), None
    except SemibootError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def run_fit(cfg: dict, **_) -> dict:
    data = _load_data(cfg)
    model = build_model(ModelConfig.from_dict(cfg["model"]))
    res = fit(model, data, None, FitOptions.from_dict(cfg["fit"]))
    result = {"model": cfg["model"]["kind"], "n": data.n, "d": data.d, "fit": res.to_dict(), "trace": res.trace}
    if cfg["variance"]:
        sigma, err = _sigma_block(model, data, res.theta_hat)
        result["sigma_hat"] = sigma.to_dict() if sigma is not None else None
        result["sigma_error"] = err
    if not res.converged:
        raise CommandFailed(
            EXIT_OPTIM,
            f"optimizer stopped without convergence after {res.iterations} iterations "
            f"(|grad| = {res.gradient_norm:.3g}); criterion trace: {res.trace[-5:]}",
            result,
        )
    return result


def run_bootstrap_cmd(cfg: dict, jobs: int = 1, replicates_path=None, **_) -> dict:
    data = _load_data(cfg)
    model = build_model(ModelConfig.from_dict(cfg["model"]))
    opts = FitOptions.from_dict(cfg["fit"])
    base = fit(model, data, None, opts)
    if not base.converged:
        raise CommandFailed(EXIT_OPTIM, f"full-data fit did not converge (|grad| = {base.gradient_norm:.3g}); "
                                        f"criterion trace: {base.trace[-5:]}")
    kinds = cfg["ci"]
    want_t = "t" in kinds
    sigma = err = None
    if want_t or cfg["variance"]:
        sigma, err = _sigma_block(model, data, base.theta_hat)
    boot = run_bootstrap(
        model, data, WeightScheme.from_name(cfg["scheme"]), cfg["B"], int(cfg["fit"]["seed"]), opts,
        jobs=jobs, studentize=cfg["studentize"] if want_t else None, theta_hat=base.theta_hat,
    )
    sets = confidence_sets(boot, cfg["alpha"], kinds, sigma)
    alpha = cfg["alpha"]
    quantiles = []
    for p in (alpha / 2, 1 - alpha / 2):
        tau = empirical_quantile(boot.replicates, p)
        quantiles.append({"p": p, "tau": tau, "kappa": np.sqrt(boot.n) / boot.c * (tau - boot.theta_hat)})
    result = {
        "model": cfg["model"]["kind"],
        "n": data.n,
        "theta_hat": boot.theta_hat,
        "criterion": base.criterion,
        "scheme": boot.scheme,
        "c": boot.c,
        "B": boot.B,
        "failures": boot.failures,
        "failure_indices": boot.failure_indices,
        "alpha": alpha,
        "studentize": cfg["studentize"] if want_t else None,
        "quantiles": quantiles,
        "intervals": {k: cs.to_dict() for k, cs in sets.items()},
        "sigma_hat": sigma.to_dict() if sigma is not None else None,
        "sigma_error": err,
    }
    if replicates_path is not None:
        rows = [{"b": b, "theta": row} for b, row in zip(_kept(boot), boot.replicates)]
        _write_replicates(rows, boot.d, replicates_path)
    return result


def _kept(boot):
    failed = set(boot.failure_indices)
    return [b for b in range(boot.B) if b not in failed]


def _write_replicates(rows, d: int, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["b"] + [f"theta{j + 1}" for j in range(d)])
        for row in rows:
            writer.writerow([row["b"]] + [format(float(v), ".17g") for v in row["theta"]])


def run_simulate(cfg: dict, jobs: int = 1, raw_path=None, **_) -> dict:
    settings = ExperimentConfig.from_dict({**cfg["settings"], "jobs": jobs})
    rep = run_experiment(cfg["experiment"], settings)
    if raw_path is not None:
        write_records_csv(rep.records, raw_path)
    return {"experiment": rep.experiment, "config": rep.config, "summary": rep.summary}


RUNNERS = {"fit": run_fit, "bootstrap": run_bootstrap_cmd, "simulate": run_simulate}


# ---------------------------------------------------------------------------
# driver


def execute(command: str, cfg: dict, *, input_path=None, input_sha256=None, jobs: int = 1, out=None, side=None):
    """Run ``command`` on a resolved config and write its report.

    ``input_sha256`` defaults to the hash of ``input_path``.  Returns
    ``(exit_code, report)``; the report is ``None`` when the command failed
    before producing a result.
    """
    seed = cfg["fit"]["seed"] if "fit" in cfg else cfg["settings"]["master_seed"]
    digest = input_sha256
    if digest is None and input_path is not None:
        digest = sha256_file(input_path)
    manifest = make_manifest(command, cfg, seed, input_path, digest)
    start = time.perf_counter()
    code, result = EXIT_OK, None
    try:
        result = RUNNERS[command](cfg, jobs=jobs, **(side or {}))
    except CommandFailed as exc:
        code, result = exc.code, exc.result
        print(f"semiboot {command}: {exc}", file=sys.stderr)
    if result is None:
        return code, None
    finish_manifest(manifest, time.perf_counter() - start)
    report = {"manifest": manifest, "result": result}
    text = dumps(report)
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
    return code, report


def _cmd_fit_like(args) -> int:
    cfg = _resolve_fit(args)
    side = {}
    if args.command == "bootstrap":
        side["replicates_path"] = args.replicates
    return execute(args.command, cfg, input_path=args.data, jobs=args.jobs, out=args.out, side=side)[0]


def _cmd_simulate(args) -> int:
    cfg = _resolve_simulate(args)
    return execute("simulate", cfg, input_path=args.config, jobs=args.jobs, out=args.out,
                   side={"raw_path": args.raw})[0]


def _cmd_replay(args) -> int:
    doc = load_json(args.manifest)
    manifest = doc.get("manifest", doc)
    try:
        command, cfg = manifest["command"], manifest["config"]
    except KeyError as exc:
        raise SchemaError(f"{args.manifest}: manifest lacks {exc.args[0]!r}") from None
    if command not in RUNNERS:
        raise SchemaError(f"{args.manifest}: cannot replay command {command!r}")
    input_path = (manifest.get("input") or {}).get("path")
    expected = (manifest.get("input") or {}).get("sha256")
    if command != "simulate" and expected is not None:
        if not Path(input_path).is_file():
            raise InvalidArgumentError(f"input file {input_path} is missing")
        actual = sha256_file(input_path)
        if actual != expected:
            raise SchemaError(f"input file {input_path} changed since the recorded run "
                              f"(sha256 {actual} != {expected})")
    side = {}
    if command == "bootstrap":
        side["replicates_path"] = args.replicates
    elif command == "simulate":
        side["raw_path"] = args.raw
    # a simulate replay runs from the embedded config, so the recorded hash is kept as provenance
    code, report = execute(command, cfg, input_path=input_path, input_sha256=expected, jobs=args.jobs,
                           out=args.out, side=side)
    if args.verify and "result" in doc and report is not None:
        if dumps(strip_volatile(report)) != dumps(strip_volatile(doc)):
            print("semiboot replay: report differs from the recorded one", file=sys.stderr)
            return EXIT_MISMATCH if code == EXIT_OK else code
        print("semiboot replay: report reproduced", file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semiboot", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", required=True, choices=MODEL_KINDS)
        p.add_argument("--data", required=True, help="CSV file with a header row")
        p.add_argument("--config", help="JSON with optional 'model' and 'fit' sections")
        p.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
        p.add_argument("--starts", type=int, help="extra random optimizer starts")
        p.add_argument("--jobs", type=int, default=_default_jobs())
        p.add_argument("--out", help="report path (default: stdout)")
        p.add_argument("--variance", action="store_true", help="report the profile-curvature variance")

    p_fit = sub.add_parser("fit", help="fit one dataset")
    common(p_fit)

    p_boot = sub.add_parser("bootstrap", help="exchangeable bootstrap confidence sets")
    common(p_boot)
    p_boot.add_argument("--scheme", default="efron", choices=["efron", "bayesian"])
    p_boot.add_argument("--b", type=int, default=1000, help="number of bootstrap replicates")
    p_boot.add_argument("--alpha", type=float, default=0.05)
    p_boot.add_argument("--ci", default="all", choices=list(CI_KINDS) + ["all"])
    p_boot.add_argument("--studentize", default="shared", choices=["shared", "per-replicate"])
    p_boot.add_argument("--replicates", help="CSV path for the replicate matrix")

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    p_sim.add_argument("--experiment", choices=sorted(EXPERIMENTS))
    p_sim.add_argument("--config", required=True, help="experiment configuration JSON")
    p_sim.add_argument("--seed", type=int, help="override the config's master_seed")
    p_sim.add_argument("--jobs", type=int, default=_default_jobs())
    p_sim.add_argument("--out", help="report path (default: stdout)")
    p_sim.add_argument("--raw", help="CSV path for per-replication records")

    p_rep = sub.add_parser("replay", help="re-run the manifest embedded in a report")
    p_rep.add_argument("manifest", help="report or bare manifest JSON")
    p_rep.add_argument("--out", help="report path (default: stdout)")
    p_rep.add_argument("--jobs", type=int, default=_default_jobs())
    p_rep.add_argument("--replicates", help="CSV path for the replicate matrix (bootstrap)")
    p_rep.add_argument("--raw", help="CSV path for per-replication records (simulate)")
    p_rep.add_argument("--verify", action="store_true",
                       help="compare with the recorded report; exit 1 when they differ")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    handlers = {"fit": _cmd_fit_like, "bootstrap": _cmd_fit_like, "simulate": _cmd_simulate, "replay": _cmd_replay}
    try:
        return handlers[args.command](args)
    except SemibootError as exc:
        print(f"semiboot {args.command}: error: {exc}", file=sys.stderr)
        for line in getattr(exc, "diagnostics", None) or []:
            print(f"  {line}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
