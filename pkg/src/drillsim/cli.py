"""Command-line entry points.

Subcommands: generate (simulate a trial corpus), train (fit the subtask
classifier), run (single trial, optionally with the classifier in the
loop), evaluate (classifier metrics over a corpus), metrics (controller
performance report), stability (parameter sweep map), bench (kernel
benchmark).  Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric or
instability error.
"""

import argparse
import sys
from pathlib import Path

from . import metrics as metrics_mod
from .classifier import MlpModel, evaluate as evaluate_model, train as train_model
from .config import ConfigError, load_config
from .records import read_corpus, read_trial, write_trial
from .simulate import generate_corpus, mode_setup, run_trial
from .stability import sweep_map

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def _write_resolved(cfg, out_dir: Path, stem: str = "resolved_config"):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{stem}.txt").write_text(cfg.to_text())


def cmd_generate(args) -> int:
    cfg = load_config(args.config, seed=args.seed, corpus=args.corpus)
    out = Path(args.out)
    _write_resolved(cfg, out)
    records = generate_corpus(cfg.preset(), seed=cfg.seed)
    manifest = ["file,subject,mode,rep,corpus_seed,timeout,unstable"]
    for rec in records:
        m = rec.meta
        name = f"trial_s{m['subject']:02d}_{m['mode']}_r{m['rep']}.csv"
        write_trial(rec, out / name)
        manifest.append(f"{name},{m['subject']},{m['mode']},{m['rep']},"
                        f"{m['corpus_seed']},{m['timeout']},{m['unstable']}")
    (out / "manifest.csv").write_text("\n".join(manifest) + "\n")
    n_bad = sum(r.meta["unstable"] for r in records)
    print(f"wrote {len(records)} trials to {out}"
          + (f" ({n_bad} flagged unstable)" if n_bad else ""))
    return EXIT_NUMERIC if n_bad else EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    trials = read_corpus(args.corpus_dir)
    model_path = Path(args.out)
    _write_resolved(cfg, model_path.parent)
    model, report = train_model(trials, cfg.train_config())
    model.save(model_path)
    report_path = model_path.with_suffix(".report.csv")
    report_path.write_text(report.to_csv())
    print(f"trained on {len(trials)} trials; best epoch {report.best_epoch} "
          f"(val acc {report.best_val_accuracy:.2f}%)")
    print(f"model -> {model_path}\nreport -> {report_path}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config, seed=args.seed, mode=args.mode,
                      labels=args.labels)
    out = Path(args.out)
    _write_resolved(cfg, out.parent if out.suffix else out)
    classifier = None
    source = "ground_truth"
    if cfg.labels == "classifier":
        if not args.model:
            raise ConfigError("--labels classifier requires --model")
        classifier = MlpModel.load(args.model)
        source = "classifier"
    setup = mode_setup(cfg.mode, cfg.adaptation())
    record = run_trial(cfg.scenario(), setup, seed=cfg.seed,
                       classifier=classifier, adaptation_source=source)
    path = out if out.suffix else out / "trial.csv"
    write_trial(record, path)
    print(f"trial -> {path} ({len(record)} samples, "
          f"{record.t[-1]:.2f} s, mode {record.meta['mode']})")
    if record.meta["unstable"]:
        print("instability flag set (|v| exceeded the limit)", file=sys.stderr)
        return EXIT_NUMERIC
    if record.meta["timeout"]:
        print("timeout flag set (target depth not reached)", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = MlpModel.load(args.model)
    trials = read_corpus(args.corpus_dir)
    by_mode = {}
    for rec in trials:
        by_mode.setdefault(rec.meta.get("mode", "?"), []).append(rec)
    lines = ["mode,accuracy,weighted_f1," + ",".join(
        f"conf_{i}{j}" for i in range(1, 4) for j in range(1, 4))]
    for mode in sorted(by_mode):
        rep = evaluate_model(model, by_mode[mode])
        cells = ",".join(f"{v:.2f}" for v in rep.confusion.flatten())
        lines.append(f"{mode},{rep.accuracy:.2f},{rep.weighted_f1:.2f},{cells}")
        print(f"[{mode}] {rep}")
    overall = evaluate_model(model, trials)
    cells = ",".join(f"{v:.2f}" for v in overall.confusion.flatten())
    lines.append(f"all,{overall.accuracy:.2f},{overall.weighted_f1:.2f},{cells}")
    print(f"[all] {overall}")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
        print(f"report -> {args.out}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    trials = read_corpus(args.corpus_dir)
    labels = "processed" if args.labels == "classifier" else "truth"
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["condition,metric,mean,ci_low,ci_high,delta_vs_C1"]
    for name in metrics_mod.METRIC_NAMES:
        report = metrics_mod.compare_conditions(trials, name, labels=labels)
        rows.extend(report.to_csv().splitlines()[1:])
        for cond in report.conditions:
            delta = report.delta_vs_baseline[cond]
            extra = "" if delta is None else f"  ({delta * 100.0:+.1f}% vs {report.baseline})"
            print(f"{name:8s} {cond}: {report.mean[cond]:.6g} "
                  f"[{report.ci_low[cond]:.6g}, {report.ci_high[cond]:.6g}]{extra}")
    (out / "condition_report.csv").write_text("\n".join(rows) + "\n")
    pas = ["trial,mode,subject,min_energy_J,passive"]
    n_fail = 0
    for i, rec in enumerate(trials):
        _, e_min, ok = metrics_mod.exchanged_energy(rec)
        n_fail += not ok
        pas.append(f"{i},{rec.meta.get('mode', '?')},{rec.meta.get('subject', '')},"
                   f"{e_min:.6g},{int(ok)}")
    (out / "passivity.csv").write_text("\n".join(pas) + "\n")
    print(f"reports -> {out} (passivity violations: {n_fail}/{len(trials)})")
    return EXIT_OK


def cmd_stability(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    out = Path(args.out)
    _write_resolved(cfg, out.parent if out.suffix else out)
    b, alphas, kes = cfg.sweep_axes()
    grid = sweep_map(b, alphas, kes, env=cfg.environment(), human=cfg.human(),
                     robot=cfg.robot(), mass=cfg.mass, seed=cfg.seed)
    path = out if out.suffix else out / "stability_map.csv"
    path.write_text(grid.to_csv())
    print(grid.raster())
    for alpha in alphas:
        print(f"alpha {alpha:g}: {grid.stable_count(alpha)} stable cells")
    print(f"map -> {path}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import run_benchmark

    run_benchmark(trials=args.trials)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _Parser(prog="drillsim",
                     description="subtask-adaptive admittance control simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True, seed=True):
        if config:
            p.add_argument("--config", help="key = value configuration file")
        if seed:
            p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("generate", help="simulate a trial corpus")
    add_common(p)
    p.add_argument("--corpus", choices=("testing", "training"), default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("train", help="train the subtask classifier")
    p.add_argument("corpus_dir")
    add_common(p)
    p.add_argument("--out", required=True, help="model file (.npz)")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("run", help="run a single trial")
    add_common(p)
    p.add_argument("--mode", choices=("c1", "c2", "c3"), default=None)
    p.add_argument("--labels", choices=("truth", "classifier"), default=None)
    p.add_argument("--model", help="model file for --labels classifier")
    p.add_argument("--out", required=True, help="trial CSV path or directory")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("evaluate", help="classifier metrics over a corpus")
    p.add_argument("corpus_dir")
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="report CSV path")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("metrics", help="controller performance report")
    p.add_argument("corpus_dir")
    p.add_argument("--labels", choices=("truth", "classifier"), default="truth")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("stability", help="stability map sweep")
    add_common(p)
    p.add_argument("--out", required=True, help="map CSV path or directory")
    p.set_defaults(fn=cmd_stability)

    p = sub.add_parser("bench", help="compare numba and numpy kernel paths")
    p.add_argument("--trials", type=int, default=5)
    p.set_defaults(fn=cmd_bench)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FloatingPointError as exc:  # pragma: no cover
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
