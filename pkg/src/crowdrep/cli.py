"""Command-line front end: ``compute``, ``baseline``, ``attack``, ``synth``, ``report``.

Exit codes: 0 success, 1 usage error, 2 data error. Defaults for any flag may
come from a JSON config file given by ``--config`` or ``$CROWDREP_CONFIG``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path

from . import __version__
from ._backend import BACKEND
from .attack import ALL_MODELS, BUCKET_EDGES, MODEL_ALIASES, AttackSpec, generate_synthetic, run_experiment
from .baselines import adaptive_average, normal_averages
from .engine import compute_all, result_to_json
from .graph import build_graph, filter_as_of
from .ingest import (IngestError, IntervalScheme, parse_generic, parse_interval, parse_snap, parse_timestamp,
                     parse_wikilog, write_generic)
from .trust import CREDIT_FUNCTIONS, EngineConfig

log = logging.getLogger("crowdrep")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
CONFIG_ENV = "CROWDREP_CONFIG"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x: float) -> str:
    return f"{x:.6g}"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    def __init__(self, command: str, args: argparse.Namespace):
        self.data = {
            "command": command,
            "version": __version__,
            "backend": BACKEND,
            "argv": sys.argv[1:],
            "args": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
            "inputs": [],
            "outputs": [],
            "timing_seconds": {},
        }

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        yield
        self.data["timing_seconds"][name] = round(time.perf_counter() - t0, 6)

    def add_input(self, path: Path):
        self.data["inputs"].append({"path": str(path), "sha256": _sha256(path)})

    def add_output(self, path: Path):
        self.data["outputs"].append(str(path))

    def write(self, path: Path):
        self.add_output(path)
        path.write_text(json.dumps(self.data, indent=2, default=str) + "\n")


def _engine_config(args) -> EngineConfig:
    try:
        return EngineConfig(
            scale_max=args.scale_max,
            half_life=args.half_life,
            interval_width=parse_interval(args.interval),
            credit_fn=args.credit_fn,
            consensus=args.consensus,
            fairness=args.fairness,
        )
    except (ValueError, IngestError) as exc:
        raise UsageError(str(exc)) from exc


def _load(args, config: EngineConfig, manifest: Manifest):
    path = Path(args.input)
    if not path.is_file():
        raise DataError(f"input not found: {path}")
    manifest.add_input(path)
    epoch = parse_timestamp(args.epoch) if args.epoch else None
    scheme = IntervalScheme(config.interval_width, epoch)
    with manifest.phase("ingest"), open(path, newline="", encoding="utf-8") as f:
        if args.format == "wikilog":
            res = parse_wikilog(f, scheme, args.dialect, args.exclude_self_votes)
        elif args.format == "snap":
            res = parse_snap(f, scheme, args.exclude_self_votes)
        else:
            res = parse_generic(f, scheme, config.scale_max)
    for rej in res.rejected[:20]:
        log.warning("line %d rejected: %s", rej.line, rej.reason)
    if res.n_rejected > 20:
        log.warning("... %d more rejected rows", res.n_rejected - 20)
    evals = res.evaluations
    if args.as_of is not None:
        evals = filter_as_of(evals, args.as_of)
    if not evals:
        raise DataError(f"no records in {path}")
    manifest.data["ingest"] = {
        "rows": res.n_rows,
        "accepted": len(res.evaluations),
        "rejected": res.n_rejected,
        "used": len(evals),
        "epoch": res.scheme.epoch.isoformat() if res.scheme.epoch else None,
    }
    manifest.data["config"] = config.echo()
    return evals


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header, rows, manifest: Manifest):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    manifest.add_output(path)


def _write_json(path: Path, obj, manifest: Manifest):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    manifest.add_output(path)


def cmd_compute(args) -> int:
    config = _engine_config(args)
    manifest = Manifest("compute", args)
    evals = _load(args, config, manifest)
    out = _out_dir(args)
    try:
        with manifest.phase("graph"):
            graph = build_graph(evals, args.as_of)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    with manifest.phase("model"):
        result = compute_all(graph, config, args.threads)
    with manifest.phase("write"):
        _write_csv(out / "workers.csv", ["worker", "rho", "weight", "degenerate"],
                   [(w.worker, fmt(w.rho), fmt(w.weight), int(w.degenerate)) for w in result.workers], manifest)
        _write_csv(out / "evaluators.csv", ["evaluator", "gamma", "weight"],
                   [(e.evaluator, fmt(e.gamma), fmt(e.weight)) for e in result.evaluators], manifest)
        _write_json(out / "report.json", result_to_json(result, config), manifest)
        if args.dump_graph:
            with open(out / "graph.csv", "w", newline="", encoding="utf-8") as f:
                graph.dump_csv(f)
            manifest.add_output(out / "graph.csv")
        if args.dump_fairness:
            ann = result.annotations
            _write_csv(out / "consensus.csv", ["worker", "mean", "sd"],
                       [(w, fmt(m), fmt(s)) for w, m, s in
                        zip(graph.worker_ids, ann.consensus_mean, ann.consensus_sd)], manifest)
            ev_ids, wk_ids = graph.evaluator_ids, graph.worker_ids
            _write_csv(out / "fairness.csv", ["evaluator", "worker", "pair_mean", "phi"],
                       [(ev_ids[graph.edge_evaluator[e]], wk_ids[graph.edge_worker[e]],
                         fmt(ann.pair_mean[e]), fmt(ann.phi[e])) for e in range(graph.n_edges)], manifest)
    manifest.data["counts"] = {"workers": len(result.workers), "evaluators": len(result.evaluators),
                               "edges": graph.n_edges, "evaluations": graph.n_evaluations,
                               "degenerate": sum(w.degenerate for w in result.workers)}
    manifest.write(out / "manifest.json")
    print(f"{len(result.workers)} workers, {len(result.evaluators)} evaluators -> {out}")
    return EXIT_OK


def _adaptive_kw(args) -> dict:
    if not 0 < args.damping <= 1:
        raise UsageError("--damping must lie in (0, 1]")
    return {"damping": args.damping, "tol": args.tol, "max_iter": args.max_iter}


def cmd_baseline(args) -> int:
    config = _engine_config(args)
    kw = _adaptive_kw(args)
    manifest = Manifest("baseline", args)
    evals = _load(args, config, manifest)
    out = _out_dir(args)
    graph = build_graph(evals, args.as_of)
    with manifest.phase("normal_avg"):
        normal = normal_averages(graph)
    with manifest.phase("adaptive_avg"):
        adaptive = adaptive_average(graph, config.scale_max, threads=args.threads, **kw)
    rows = [(w, "normal_avg", fmt(normal[w])) for w in graph.worker_ids]
    rows += [(w, "adaptive_avg", fmt(adaptive.scores[w])) for w in graph.worker_ids]
    _write_csv(out / "baselines.csv", ["worker", "model", "score"], rows, manifest)
    _write_json(out / "baselines.json", {
        "normal_avg": normal,
        "adaptive_avg": adaptive.scores,
        "adaptive_iterations": adaptive.iterations,
        "adaptive_converged": adaptive.converged,
    }, manifest)
    manifest.write(out / "manifest.json")
    print(f"{len(normal)} workers; adaptive averaging {'converged' if adaptive.converged else 'did NOT converge'}"
          f" after {adaptive.iterations} iterations -> {out}")
    return EXIT_OK


def _parse_models(text: str) -> list[str]:
    models = []
    for m in text.split(","):
        m = m.strip().lower()
        if m not in MODEL_ALIASES:
            raise UsageError(f"unknown model {m!r}; choose from {sorted(MODEL_ALIASES)}")
        if MODEL_ALIASES[m] not in models:
            models.append(MODEL_ALIASES[m])
    return [m for m in ALL_MODELS if m in models]


def cmd_attack(args) -> int:
    config = _engine_config(args)
    kw = _adaptive_kw(args)
    models = _parse_models(args.models)
    try:
        spec = AttackSpec(args.noise, args.support, args.attack, args.threshold, args.seed, args.global_budget)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    manifest = Manifest("attack", args)
    evals = _load(args, config, manifest)
    out = _out_dir(args)
    with manifest.phase("experiment"):
        result = run_experiment(evals, spec, config, models, args.threads, kw)
    for m, by in result.reports.items():
        full = by["full"]
        _write_csv(out / f"changes_{m}.csv", ["worker", "before", "after", "rel_change"],
                   [(w, fmt(b), fmt(a), fmt(r)) for w, b, a, r in full.rows], manifest)
        hist = []
        for cohort, rep in by.items():
            if rep is None:
                continue
            for lo, hi, c in zip(BUCKET_EDGES[:-1], BUCKET_EDGES[1:], rep.counts):
                hist.append((cohort, fmt(lo), "inf" if hi == float("inf") else fmt(hi), c, fmt(c / rep.size)))
        _write_csv(out / f"histogram_{m}.csv", ["cohort", "bucket_lo", "bucket_hi", "count", "fraction"],
                   hist, manifest)
        _write_json(out / f"changes_{m}.json",
                    {c: (r.to_json() if r else None) for c, r in by.items()}, manifest)
    summary = result.summary()
    summary["figure_cohorts"] = {
        "bucket_histogram": "full",
        "per_model_distribution": "changed" if result.changed_cohort else "full",
    }
    _write_json(out / "attack_report.json", summary, manifest)
    manifest.data["seed"] = args.seed
    manifest.write(out / "manifest.json")
    print(f"injected {result.n_injected} votes into {result.n_original}")
    for m, by in result.reports.items():
        f = by["full"]
        print(f"  {m:13s} <10% change: {fmt(100 * f.fraction_below(10))}%  mean {fmt(f.mean)}  sd {fmt(f.sd)}")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.workers < 1 or args.evaluators < 1 or args.intervals < 1 or args.votes_per_worker < 1:
        raise UsageError("--workers, --evaluators, --intervals and --votes-per-worker must be positive")
    if not 0 <= args.honest <= 1:
        raise UsageError("--honest must lie in [0, 1]")
    manifest = Manifest("synth", args)
    try:
        epoch = parse_timestamp(args.epoch) if args.epoch else datetime(2004, 1, 1)
        width = parse_interval(args.interval)
    except (ValueError, IngestError) as exc:
        raise UsageError(str(exc)) from exc
    with manifest.phase("generate"):
        evals, truth = generate_synthetic(args.workers, args.evaluators, args.intervals, args.honest, args.seed,
                                          votes_per_worker=args.votes_per_worker, noise_width=args.noise_width,
                                          epoch=epoch, interval=width, return_truth=True)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as f:
        write_generic(evals, f)
    manifest.add_output(out)
    manifest.data["seed"] = args.seed
    manifest.data["evaluations"] = len(evals)
    manifest.data["dishonest_evaluators"] = {"count": len(truth.dishonest),
                                             "fraction": len(truth.dishonest) / args.evaluators,
                                             "ids": truth.dishonest}
    manifest.write(out.with_name(out.name + ".manifest.json"))
    print(f"{len(evals)} evaluations -> {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    d = Path(args.dir)
    rep = d / "report.json"
    att = d / "attack_report.json"
    if not rep.is_file() and not att.is_file():
        raise DataError(f"no report.json or attack_report.json in {d}")
    if rep.is_file():
        data = json.loads(rep.read_text())
        key = args.sort
        rows = sorted(data["workers"].items(), key=lambda kv: (-kv[1][key], kv[0]))[: args.top]
        print(f"top {len(rows)} workers by {key} (horizon {data['horizon']})")
        print(f"  {'worker':24s} {'rho':>10s} {'weight':>10s}")
        for w, v in rows:
            print(f"  {w:24s} {fmt(v['rho']):>10s} {fmt(v['weight']):>10s}{'  (degenerate)' if v['degenerate'] else ''}")
        evs = sorted(data["evaluators"].items(), key=lambda kv: (-kv[1]["weight"], kv[0]))[: args.top]
        print(f"top {len(evs)} evaluators by fairness weight")
        print(f"  {'evaluator':24s} {'gamma':>10s} {'weight':>10s}")
        for e, v in evs:
            print(f"  {e:24s} {fmt(v['gamma']):>10s} {fmt(v['weight']):>10s}")
    if att.is_file():
        data = json.loads(att.read_text())
        print(f"attack: {data['n_injected']} injected votes, changed cohort {data['changed_cohort_size']}")
        for m, by in data["models"].items():
            for cohort, r in by.items():
                if r:
                    print(f"  {m:13s} {cohort:8s} n={r['size']:<6d} <10%: {fmt(100 * r['fraction_below_10pct'])}%"
                          f"  mean {fmt(r['mean'])}  sd {fmt(r['sd'])}")
    return EXIT_OK


def _add_input_args(p):
    p.add_argument("--input", "-i", required=True, help="input log file")
    p.add_argument("--format", choices=("wikilog", "generic", "snap"), default="generic")
    p.add_argument("--dialect", choices=("tab", "comma"), default="tab", help="wikilog field separator")
    p.add_argument("--exclude-self-votes", action="store_true", help="drop wikilog votes cast by the nominee")
    p.add_argument("--epoch", help="start of interval 1 (default: first timestamp, day start)")
    p.add_argument("--interval", default="half-year", help="interval width: day|week|month|quarter|half-year|year|<N>d")
    p.add_argument("--half-life", type=float, default=2.0, help="half-life in intervals (q = 2**(1/t))")
    p.add_argument("--scale-max", type=float, default=3.0, help="evaluation ceiling M")
    p.add_argument("--credit-fn", choices=sorted(CREDIT_FUNCTIONS), default="identity")
    p.add_argument("--consensus", choices=("pair", "flat"), default="pair")
    p.add_argument("--fairness", choices=("literal", "complement"), default="literal")
    p.add_argument("--as-of", type=int, help="horizon label; later evaluations are ignored")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", "-o", default="out")


def _add_adaptive_args(p):
    p.add_argument("--damping", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crowdrep", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help=f"JSON file of flag defaults (env: {CONFIG_ENV})")
    parser.add_argument("--verbose", "-v", action="store_true")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compute", help="worker reputations and evaluator fairness ranks")
    _add_input_args(p)
    p.add_argument("--dump-graph", action="store_true", help="also write graph.csv")
    p.add_argument("--dump-fairness", action="store_true", help="also write consensus.csv and fairness.csv")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("baseline", help="normal and adaptive averaging scores")
    _add_input_args(p)
    _add_adaptive_args(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("attack", help="unfair-vote injection experiment")
    _add_input_args(p)
    _add_adaptive_args(p)
    p.add_argument("--noise", type=float, default=0.2, help="injected votes per existing vote")
    p.add_argument("--support", type=float, default=3.0, help="value injected for workers below threshold")
    p.add_argument("--attack", type=float, default=1.0, help="value injected for workers at/above threshold")
    p.add_argument("--threshold", type=float, default=2.0, help="normal-average split between support and attack")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--global-budget", action="store_true", help="spread noise*total votes evenly over workers")
    p.add_argument("--models", default="ours,ebay,pagerank")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("synth", help="write a seeded synthetic generic-format log")
    p.add_argument("--workers", type=int, default=500)
    p.add_argument("--evaluators", type=int, default=200)
    p.add_argument("--intervals", type=int, default=8)
    p.add_argument("--votes-per-worker", type=int, default=10)
    p.add_argument("--honest", type=float, default=0.8)
    p.add_argument("--noise-width", type=float, default=0.35)
    p.add_argument("--interval", default="half-year")
    p.add_argument("--epoch", help="start of the synthetic log (default 2004-01-01)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", "-o", default="synthetic.csv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="summarise an output directory")
    p.add_argument("dir")
    p.add_argument("--sort", choices=("rho", "weight"), default="weight")
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_report)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    path = known.config or os.environ.get(CONFIG_ENV)
    if not path:
        return
    try:
        defaults = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    defaults = {k.replace("-", "_"): v for k, v in defaults.items()}
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            known_dests = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in defaults.items() if k in known_dests})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"crowdrep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("crowdrep: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"crowdrep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, IngestError, ValueError, KeyError, OSError, UnicodeDecodeError) as exc:
        print(f"crowdrep: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
