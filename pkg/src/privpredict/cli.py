"""Command-line entry point.

Exit status: 0 when every checked bound holds, 1 when one fails, 2 on usage
errors (bad flags, unreadable or invalid config).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import audit, experiments, genbounds
from .core import RandomStream
from .datasets import ensure_parent, read_dataset, read_table, synth_threshold_data, write_dataset, write_table
from .epw import WalkParams, choose_T, epw_bias
from .experiments import CSV_COLUMNS, ExperimentResult, fmt

log = logging.getLogger("privpredict")


class UsageError(Exception):
    pass


def _uint64(s):
    v = int(s)
    if not 0 <= v < 2**64:
        raise ValueError(f"{v} is not a 64-bit unsigned integer")
    return v


def _prob(s):
    v = float(s)
    if not 0 < v < 1:
        raise ValueError(f"{v} not in (0, 1)")
    return v


def _positive(s):
    v = float(s)
    if not v > 0:
        raise ValueError(f"{v} is not positive")
    return v


def _nonneg(s):
    v = float(s)
    if not v >= 0:
        raise ValueError(f"{v} is negative")
    return v


def _posint(s):
    v = int(s)
    if v < 1:
        raise ValueError(f"{v} is not a positive integer")
    return v


# name -> (type, default, help)
COMMON = {
    "seed": (_uint64, 0, "64-bit seed"),
    "output": (str, None, "output path"),
    "threads": (_posint, None, "worker threads (default: PRIVPREDICT_THREADS or CPU count)"),
}

COMMANDS = {
    "synth": {
        "N": (_posint, 20, "universe size"),
        "a": (_posint, 8, "threshold position in [1, N+1]"),
        "eta": (_nonneg, 0.0, "label-noise rate in [0, 1/2]"),
        "n": (_posint, 100, "number of examples"),
        "table": (str, None, "where to write the probability table (default: <output>.table.csv)"),
    },
    "predict": {
        "data": (str, None, "dataset CSV with header x,y"),
        "x": (int, None, "query point"),
        "epsilon": (_positive, 1.0, "privacy parameter"),
        "alpha": (_prob, 0.1, "target excess error; sets T unless --T is given"),
        "T": (_posint, None, "walk bound"),
        "N": (_posint, None, "universe size (default: from file)"),
    },
    "audit": {
        "N": (_posint, 3, "universe size"),
        "n": (_posint, 4, "dataset size"),
        "T": (_posint, 2, "walk bound"),
        "epsilon": (_positive, 0.5, "privacy parameter"),
        "r": (_posint, 3, "number of subsamples (pac, pipeline)"),
    },
    "pac-exp": {
        "alpha": (_prob, 0.1, "target error"),
        "epsilon": (_positive, 1.0, "privacy parameter"),
        "beta": (_prob, 0.1, "confidence parameter"),
        "N": (_posint, 100, "universe size"),
        "a": (_posint, 37, "true threshold"),
        "trials": (_posint, 200, "Monte-Carlo trials"),
    },
    "agnostic-exp": {
        "alpha": (_prob, 0.1, "target excess error"),
        "epsilon": (_positive, 1.0, "privacy parameter"),
        "N": (_posint, 20, "universe size"),
        "a": (_posint, 8, "threshold"),
        "eta": (_nonneg, 0.2, "label-noise rate"),
        "subsample": (_posint, 200, "examples per subsample"),
        "trials": (_posint, 500, "Monte-Carlo trials"),
    },
    "convex-exp": {
        "pairs": (_posint, 200, "neighbor pairs per stability check"),
        "cases": (_posint, 1000, "gradient-check cases"),
        "tolerance": (_positive, 1e-9, "ERM certified-gap tolerance"),
    },
    "genbounds-exp": {
        "alpha": (_prob, 0.2, "target error"),
        "epsilon": (_nonneg, 0.5, "privacy parameter"),
        "beta": (_prob, 0.1, "confidence (highprob)"),
        "k": (_posint, 1, "moment order (moment) or interval count (thr, highprob)"),
        "n": (_posint, None, "sample size (default: theorem's requirement; 20 for moment)"),
        "trials": (_posint, 2000, "Monte-Carlo trials"),
        "N": (_posint, 20, "universe size"),
        "a": (_posint, 8, "threshold"),
        "eta": (_nonneg, 0.0, "label-noise rate"),
        "table": (str, None, "probability table CSV (overrides N/a/eta)"),
    },
}

POSITIONALS = {
    "audit": ("mechanism", ["epw", "pac", "pipeline"]),
    "genbounds-exp": ("experiment", ["thr", "highprob", "moment"]),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privpredict", description="Private prediction mechanisms and checks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in COMMANDS.items():
        aliases = ["genbounds"] if name == "genbounds-exp" else []
        p = sub.add_parser(name, aliases=aliases)
        if name in POSITIONALS:
            pos, choices = POSITIONALS[name]
            p.add_argument(pos, choices=choices)
        p.add_argument("--config", help="JSON config file; flags override its fields")
        for key, (typ, _, helptext) in {**opts, **COMMON}.items():
            p.add_argument(f"--{key}", type=typ, default=None, help=helptext)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then config-file fields, then explicit flags."""
    command = "genbounds-exp" if args.command == "genbounds" else args.command
    fields = {**COMMANDS[command], **COMMON}
    cfg = {k: default for k, (_, default, _) in fields.items()}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"config: cannot read {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise UsageError("config: top level must be a JSON object")
        for key, value in raw.items():
            if key in ("command", POSITIONALS.get(command, (None,))[0]):
                continue
            if key not in fields:
                raise UsageError(f"config: unknown field '{key}' for command {command}")
            try:
                cfg[key] = None if value is None else fields[key][0](value)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"config: invalid value for field '{key}': {exc}") from None
    for key in fields:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg["command"] = command
    if command in POSITIONALS:
        cfg[POSITIONALS[command][0]] = getattr(args, POSITIONALS[command][0])
    return cfg


def _require(cfg: dict, *keys):
    for k in keys:
        if cfg.get(k) is None:
            raise UsageError(f"missing required field '{k}'")


def _provenance(cfg: dict) -> dict:
    # thread count changes scheduling only, never results
    return {k: v for k, v in cfg.items() if k != "threads"}


def _echo(cfg: dict, out) -> None:
    out.write("# config " + json.dumps(_provenance(cfg), sort_keys=True) + "\n")


def _write_rows(results: list[ExperimentResult], cfg: dict, out) -> bool:
    rows = [r.row(cfg["seed"]) for r in results]
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(rows)
    for r in results:
        if r.extra:
            out.write("# " + r.experiment + " " + " ".join(f"{k}={fmt(v)}" for k, v in sorted(r.extra.items())) + "\n")
    if cfg.get("output"):
        path = ensure_parent(cfg["output"])
        fresh = not path.exists() or path.stat().st_size == 0
        with open(path, "a", newline="") as fh:
            fw = csv.writer(fh, lineterminator="\n")
            if fresh:
                fw.writerow(CSV_COLUMNS)
            fw.writerows(rows)
        with open(str(path) + ".provenance.jsonl", "a") as fh:
            fh.write(json.dumps(_provenance(cfg), sort_keys=True) + "\n")
    return all(r.passed for r in results)


def cmd_synth(cfg, out) -> int:
    _require(cfg, "output")
    if not 1 <= cfg["a"] <= cfg["N"] + 1:
        raise UsageError(f"field 'a' must be in [1, N+1], got {cfg['a']}")
    if cfg["eta"] > 0.5:
        raise UsageError(f"field 'eta' must be in [0, 1/2], got {cfg['eta']}")
    S, dist = synth_threshold_data(cfg["N"], cfg["a"], cfg["eta"], cfg["n"], RandomStream(cfg["seed"]))
    path = ensure_parent(cfg["output"])
    write_dataset(S, path)
    table = cfg["table"] or str(path) + ".table.csv"
    write_table(dist, table)
    out.write(f"wrote {len(S)} examples to {path} and table to {table}\n")
    return 0


def cmd_predict(cfg, out) -> int:
    _require(cfg, "data", "x")
    try:
        S = read_dataset(cfg["data"], cfg["N"])
    except (OSError, ValueError) as exc:
        raise UsageError(f"data: {exc}") from None
    if not 1 <= cfg["x"] <= S.universe_size:
        raise UsageError(f"field 'x' must be in [1, {S.universe_size}], got {cfg['x']}")
    T = cfg["T"] or choose_T(cfg["alpha"], cfg["epsilon"])
    params = WalkParams(T, cfg["epsilon"])
    bias = epw_bias(S, cfg["x"], params)
    label = int(RandomStream(cfg["seed"]).uniform() < bias)
    out.write(f"T={T}\nbias={fmt(bias)}\nlabel={label}\n")
    return 0


def cmd_audit(cfg, out) -> int:
    mech = cfg["mechanism"]
    if mech == "epw":
        report = audit.audit_epw(cfg["N"], cfg["n"], WalkParams(cfg["T"], cfg["epsilon"]))
    elif mech == "pac":
        report = audit.audit_label_vectors(cfg["r"], cfg["epsilon"])
    else:
        report = audit.audit_subsample_aggregate(cfg["N"], cfg["n"], cfg["r"], cfg["epsilon"])
    doc = report.to_json()
    doc["config"] = _provenance(cfg)
    text = json.dumps(doc, sort_keys=True, indent=2, default=lambda v: float(fmt(v))) + "\n"
    out.write(text)
    if cfg.get("output"):
        ensure_parent(cfg["output"]).write_text(text)
    return 0 if report.passed else 1


def cmd_pac(cfg, out) -> int:
    res = experiments.pac_experiment(cfg["alpha"], cfg["epsilon"], cfg["beta"], cfg["N"], cfg["a"],
                                     cfg["trials"], cfg["seed"], cfg["threads"])
    return 0 if _write_rows([res], cfg, out) else 1


def cmd_agnostic(cfg, out) -> int:
    res = experiments.agnostic_experiment(cfg["alpha"], cfg["epsilon"], cfg["N"], cfg["a"], cfg["eta"],
                                          cfg["subsample"], cfg["trials"], cfg["seed"], cfg["threads"])
    return 0 if _write_rows([res], cfg, out) else 1


def cmd_convex(cfg, out) -> int:
    results = [
        experiments.erm_stability_experiment(cfg["pairs"], cfg["tolerance"], cfg["seed"], cfg["threads"]),
        experiments.psgd_stability_experiment(cfg["pairs"], cfg["seed"], cfg["threads"]),
        experiments.gradient_check(cfg["cases"], seed=cfg["seed"]),
    ]
    return 0 if _write_rows(results, cfg, out) else 1


def _distribution(cfg) -> genbounds.SourceDistribution:
    if cfg["table"]:
        try:
            return read_table(cfg["table"])
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"table: {exc}") from None
    if not 1 <= cfg["a"] <= cfg["N"] + 1 or cfg["eta"] > 0.5:
        raise UsageError("fields 'a' and 'eta' must satisfy 1 <= a <= N+1 and eta <= 1/2")
    return genbounds.SourceDistribution.threshold(cfg["N"], cfg["a"], cfg["eta"])


def cmd_genbounds(cfg, out) -> int:
    dist = _distribution(cfg)
    rng = RandomStream(cfg["seed"], stream_id=7)
    exp, alpha, eps, k = cfg["experiment"], cfg["alpha"], cfg["epsilon"], cfg["k"]
    if exp in ("thr", "highprob") and eps <= 0:
        raise UsageError("field 'epsilon' must be positive for this experiment")
    if exp == "thr":
        r = genbounds.thr_expectation_experiment(dist, alpha, eps, cfg["trials"], rng, k, cfg["n"], cfg["threads"])
        res = ExperimentResult("thr_expectation", r.n, eps, alpha, k, r.mean_population_error, r.bound, r.passed,
                               {"se": r.se, "opt": r.opt, "T": r.T})
    elif exp == "highprob":
        r = genbounds.highprob_experiment(dist, alpha, eps, cfg["beta"], cfg["trials"], rng, k, cfg["n"], cfg["threads"])
        res = ExperimentResult("thr_highprob", r.n, eps, alpha, k, r.fraction, r.bound, r.passed,
                               {"se": r.se, "max_error": r.max_error, "T": r.T})
    else:
        n = cfg["n"] or 20
        T = choose_T(alpha, eps) if eps > 0 else 1
        mech = genbounds.epw_mechanism(WalkParams(T, eps)) if eps > 0 else genbounds.constant_mechanism(0.5, dist.universe_size)
        if cfg["trials"] < 100:
            raise UsageError("field 'trials' must be at least 100 for the moment experiment")
        r = genbounds.moment_experiment(mech, dist, n, k, eps, cfg["trials"], rng, threads=cfg["threads"])
        res = ExperimentResult("moment", n, eps, alpha, k, r.lhs, r.bound, r.passed,
                               {"combined_se": r.combined_se, "rhs_raw": r.rhs, "T": T})
    return 0 if _write_rows([res], cfg, out) else 1


HANDLERS = {
    "synth": cmd_synth,
    "predict": cmd_predict,
    "audit": cmd_audit,
    "pac-exp": cmd_pac,
    "agnostic-exp": cmd_agnostic,
    "convex-exp": cmd_convex,
    "genbounds-exp": cmd_genbounds,
}


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        _echo(cfg, out)
        return HANDLERS[cfg["command"]](cfg, out)
    except UsageError as exc:
        print(f"privpredict: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"privpredict: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
