"""Command-line front end: ``osl {decompose,optimize,train,evaluate,table,plot}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import config as cfgmod
from .emd import emd_decompose
from .neural import load_model, save_model
from .optimize import VMDEntropyFitness, ga_optimize, pso_optimize, read_history_csv, write_history_csv
from .pipeline import (
    METHODS,
    Decomposition,
    ExperimentResult,
    PipelineError,
    evaluate_model,
    format_report,
    load_battery_csv,
    load_dataset,
    plan_decompositions,
    read_imf_csv,
    read_report_csv,
    run_experiment,
    write_imf_csv,
    write_report_csv,
)
from .svgplot import Panel, render
from .vmd import reconstruction_error, vmd_decompose

log = logging.getLogger("oslsoh")


class CommandError(Exception):
    pass


def _atomic_write(path, writer) -> None:
    """Run ``writer(tmp_path)`` and move the result into place only on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _config(args, **overrides) -> dict:
    return cfgmod.load_config(getattr(args, "config", None), overrides)


def cmd_decompose(args) -> None:
    cfg = _config(args, **{"vmd.K": args.k, "vmd.alpha": args.alpha, "emd.max_imfs": args.max_imfs})
    record = load_battery_csv(args.input)
    if args.method == "vmd":
        params = cfgmod.vmd_params(cfg)
        imfs = vmd_decompose(record.capacities, params)
    else:
        imfs = emd_decompose(record.capacities, cfgmod.emd_params(cfg))
    err = reconstruction_error(record.capacities, imfs)
    _atomic_write(args.out, lambda p: write_imf_csv(p, record.cycles, imfs, with_residual=args.method == "emd"))
    print(f"method={args.method} modes={imfs.K} reconstruction_error={err:.6e}")
    if args.method == "vmd":
        freqs = " ".join(f"{w:.6g}" for w in imfs.center_frequencies)
        print(f"center_frequencies={freqs} iterations={imfs.iterations_used} converged={imfs.converged}")


def cmd_optimize(args) -> None:
    cfg = _config(args, seed=args.seed)
    record = load_battery_csv(args.input, rated_capacity=cfg["rated_capacity"])
    fitness = VMDEntropyFitness(record.normalized, cfgmod.entropy_config(cfg))
    space = cfgmod.search_space(cfg)
    if args.optimizer == "pso":
        result = pso_optimize(record.normalized, space, cfgmod.pso_config(cfg), fitness)
    else:
        result = ga_optimize(record.normalized, space, cfgmod.ga_config(cfg), fitness)
    _atomic_write(args.out, lambda p: write_history_csv(p, result.history))
    print(f"K={result.best_K}")
    print(f"alpha={result.best_alpha:.6f}")
    print(f"fitness={result.best_fitness:.10f} converged_at={result.converged_at()} evaluations={result.evaluations}")


def _experiment_cfg(args):
    cfg = _config(args, seed=args.seed, method=args.method)
    return cfg, cfgmod.experiment_config(cfg)


def _decomp_meta(decomps: dict[str, Decomposition]) -> dict:
    meta = {}
    for b, d in decomps.items():
        if d.method == "vmd":
            meta[f"vmd.{b}"] = f"{d.vmd.K} {d.vmd.alpha!r}"
    return meta


def cmd_train(args) -> None:
    cfg, exp = _experiment_cfg(args)
    records = load_dataset(args.data)
    result: ExperimentResult = run_experiment(records, args.test, exp)
    meta = {"method": exp.method, "test": args.test, "seed": exp.master_seed,
            "train_batteries": ",".join(b for b in records if b != args.test)}
    meta.update(_decomp_meta(result.decompositions))
    _atomic_write(args.model, lambda p: save_model(p, result.model, meta))
    loss = result.loss_history
    if loss:
        print(f"epochs={len(loss)} first_loss={loss[0]:.6e} final_loss={loss[-1]:.6e}")
    if result.val_history:
        print(f"final_val_loss={result.val_history[-1]:.6e}")
    print(f"saved {args.model}")


def cmd_evaluate(args) -> None:
    model, meta = load_model(args.model)
    method = meta.get("method", "osl")
    cfg = _config(args, method=method, seed=int(meta.get("seed", 0)))
    exp = cfgmod.experiment_config(cfg)
    record = load_battery_csv(Path(args.data) / f"{args.test}.csv", args.test, cfg["rated_capacity"])
    if method == "emd-lstm":
        decomp = Decomposition("emd", emd=exp.emd)
    else:
        stored = meta.get(f"vmd.{args.test}")
        if stored is not None:
            K, alpha = stored.split()
            decomp = Decomposition("vmd", vmd=cfgmod.vmd_params({**cfg, "vmd.K": int(K), "vmd.alpha": float(alpha)}))
        else:
            decomp = plan_decompositions({args.test: record}, exp)[args.test]
    row = evaluate_model(model, record, decomp, method, exp.causal)
    _atomic_write(args.report, lambda p: write_report_csv(p, [row]))
    print(format_report([row]))


def cmd_table(args) -> None:
    """Full leave-one-battery-out sweep for the chosen methods."""
    cfg = _config(args, seed=args.seed)
    records = load_dataset(args.data)
    methods = args.methods.split(",") if args.methods else list(METHODS)
    held = args.test.split(",") if args.test else list(records)
    vmd_cache: dict = {}
    rows = []
    for b in held:
        for m in methods:
            exp = cfgmod.experiment_config({**cfg, "method": m})
            rows.append(run_experiment(records, b, exp, vmd_cache).row)
    _atomic_write(args.report, lambda p: write_report_csv(p, rows))
    print(format_report(rows))


def _plot_imfs(path) -> list[Panel]:
    header, data = read_imf_csv(path)
    cycles = data[:, 0]
    panels = [Panel(f"Capacity ({'+'.join(header[1:])})", "", "Ah").add("sum", cycles, data[:, 1:].sum(axis=1))]
    for j, name in enumerate(header[1:], start=1):
        panels.append(Panel(name, "cycle" if j == len(header) - 1 else "", "Ah").add("", cycles, data[:, j]))
    return panels


def _plot_history(paths) -> list[Panel]:
    panel = Panel("Best fitness per iteration", "iteration", "envelope entropy")
    for p in paths:
        hist = read_history_csv(p)
        panel.add(Path(p).stem, list(range(1, len(hist) + 1)), hist)
    return [panel]


def _plot_report(path) -> list[Panel]:
    rows = read_report_csv(path)
    batteries = list(dict.fromkeys(r.battery for r in rows))
    methods = list(dict.fromkeys(r.method for r in rows))
    panels = []
    for metric in ("rmse_pct", "mae_pct", "mape_pct"):
        panel = Panel(metric.replace("_pct", "").upper() + " (%)", "battery", "%", xticklabels=batteries)
        for m in methods:
            pts = [(batteries.index(r.battery), getattr(r, metric)) for r in rows if r.method == m]
            panel.add(m, [p[0] for p in pts], [p[1] for p in pts])
        panels.append(panel)
    return panels


def _plot_capacity(paths) -> list[Panel]:
    panel = Panel("Capacity degradation", "cycle", "capacity (Ah)")
    for p in paths:
        rec = load_battery_csv(p)
        panel.add(rec.battery_id, rec.cycles, rec.capacities)
    return [panel]


def cmd_plot(args) -> None:
    if args.imfs:
        panels = _plot_imfs(args.imfs)
    elif args.history:
        panels = _plot_history(args.history)
    elif args.report:
        panels = _plot_report(args.report)
    else:
        panels = _plot_capacity(args.capacity)
    svg = render(panels)
    _atomic_write(args.out, lambda p: Path(p).write_text(svg))
    print(f"wrote {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="osl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", "--params", dest="config", help="key = value config file")
        return p

    p = common(sub.add_parser("decompose", help="write the IMF CSV of one battery"))
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("vmd", "emd"), default="vmd")
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--max-imfs", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompose)

    p = common(sub.add_parser("optimize", help="search (K, alpha) and write the convergence history"))
    p.add_argument("--input", required=True)
    p.add_argument("--optimizer", choices=("pso", "ga"), default="pso")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_optimize)

    p = common(sub.add_parser("train", help="train on all batteries except --test"))
    p.add_argument("--data", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--seed", type=int)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("evaluate", help="score a saved model on the --test battery"))
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = common(sub.add_parser("table", help="leave-one-battery-out sweep over methods"))
    p.add_argument("--data", required=True)
    p.add_argument("--methods", help=f"comma list from {','.join(METHODS)}")
    p.add_argument("--test", help="comma list of held-out batteries (default: all)")
    p.add_argument("--seed", type=int)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("plot", help="render an IMF, history, report or capacity CSV to SVG")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--imfs")
    src.add_argument("--history", nargs="+")
    src.add_argument("--report")
    src.add_argument("--capacity", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (OSError, ValueError, PipelineError, CommandError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
