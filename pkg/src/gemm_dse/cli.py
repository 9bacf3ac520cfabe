"""Command-line entry point: ``gemm-dse <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 empty result (e.g. nothing fits).
Primary artifacts are byte-reproducible; timestamps live only in the
``*.provenance.json`` side-cars.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io as gio
from . import metrics, pipeline
from .analytical import SampleSpec
from .design_space import RESOURCE_KINDS, ConfigError, TilingConfig, enumerate_configs, pad_workload
from .dse import (
    NoFeasibleDesign,
    OraclePredictor,
    ParetoFront,
    SurrogateSet,
    compare_fronts,
    explore,
    normalize_objective,
    oracle_front,
    point_record,
    select,
)
from .features import FeatureSet
from .gbdt import BoostedModel, Hyperparams, ModelFormatError, load, save
from .oracle import MeasurementDataset, Oracle, gen_dataset

log = logging.getLogger("gemm_dse")

EXIT_OK, EXIT_INPUT, EXIT_EMPTY = 0, 2, 3

FRONT_COLUMNS = (
    "label", "M", "N", "K", *TilingConfig._fields, "n_aie", "latency_ms", "power_w",
    "throughput_gflops", "energy_eff_gflops_per_w", *(f"{k}_pct" for k in RESOURCE_KINDS), "feasible",
)


# -- shared helpers --------------------------------------------------------------


def _run_config(args) -> gio.RunConfig:
    cfg = gio.RunConfig.load(args.config) if getattr(args, "config", None) else gio.RunConfig()
    over = {}
    if getattr(args, "device", None):
        over["device"] = args.device
    if getattr(args, "workloads", None):
        over["workloads"] = args.workloads
    if getattr(args, "out", None):
        over["out_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        s = args.seed
        over["seeds"] = gio.Seeds(s, s, s)
    if over:
        cfg = gio.RunConfig(**{**asdict(cfg), "sample_spec": cfg.sample_spec, "seeds": cfg.seeds, **over})
        cfg.check_paths()
    return cfg


def _read_dataset(path) -> MeasurementDataset:
    if not path:
        raise gio.InputError("--dataset is required")
    p = Path(path)
    if not p.is_file():
        raise gio.InputError(f"dataset not found: {p}")
    return MeasurementDataset.read_csv(p)


def _load_model(path):
    p = Path(path)
    if not p.exists():
        raise gio.InputError(f"model not found: {p}")
    return load(p)


def _load_surrogates(path) -> SurrogateSet:
    p = Path(path)
    if not p.is_dir():
        raise gio.InputError(f"model directory not found: {p} (expected latency.json, power.json, resources.json)")
    for name in ("latency", "power", "resources"):
        if not (p / f"{name}.json").is_file():
            raise gio.InputError(f"{p} is missing {name}.json")
    return SurrogateSet.load_dir(p)


def _fmt(v) -> str:
    return f"{v:.10g}"


def _point_rows(points, w) -> str:
    lines = [",".join(FRONT_COLUMNS)]
    for p in points:
        c = tuple(p.config)
        vals = [w.name, w.M, w.N, w.K, *c, p.config.n_aie()]
        vals += [_fmt(p.latency_s * 1e3), _fmt(p.power_w), _fmt(p.throughput_gflops),
                 _fmt(p.energy_eff_gflops_per_w), *(_fmt(v) for v in p.resources.as_tuple()), int(p.feasible)]
        lines.append(",".join(str(v) for v in vals))
    return "\n".join(lines) + "\n"


def _sweep_csv(sw, w) -> str:
    thr = sw.throughput_gflops
    eff = thr / sw.power_w
    n_aie = sw.configs[:, 0] * sw.configs[:, 1] * sw.configs[:, 2]
    head = f"{w.name},{w.M},{w.N},{w.K},"
    lines = [",".join(FRONT_COLUMNS)]
    for i in range(len(sw.configs)):
        cfg = ",".join(str(int(v)) for v in sw.configs[i])
        res = ",".join(_fmt(v) for v in sw.resources_pct[i])
        lines.append(
            f"{head}{cfg},{n_aie[i]},{_fmt(sw.latency_s[i] * 1e3)},{_fmt(sw.power_w[i])},"
            f"{_fmt(thr[i])},{_fmt(eff[i])},{res},{int(sw.feasible[i])}"
        )
    return "\n".join(lines) + "\n"


def _gnuplot_dat(front: ParetoFront, w) -> str:
    lines = [f"# {w.name} {w.M}x{w.N}x{w.K}", "# throughput_gflops energy_eff_gflops_per_w n_aie"]
    lines += [f"{_fmt(p.throughput_gflops)} {_fmt(p.energy_eff_gflops_per_w)} {p.config.n_aie()}" for p in front]
    return "\n".join(lines) + "\n"


def _read_front_labels(path) -> set[str]:
    p = Path(path)
    if not p.is_file():
        raise gio.InputError(f"front file not found: {p}")
    lines = p.read_text().splitlines()
    if not lines or lines[0].split(",")[0] != "label":
        raise gio.InputError(f"{p}: not a front CSV")
    return {ln.split(",")[0] for ln in lines[1:] if ln}


# -- commands --------------------------------------------------------------------


def cmd_enumerate(args) -> int:
    cfg = _run_config(args)
    dev = gio.load_device(cfg.device)
    pool = gio.load_workloads(cfg.workloads)
    targets = [gio.resolve_workload(args.workload, pool)] if args.workload else pool
    rows = []
    for w in targets:
        pw = pad_workload(w, dev.tile_dim)
        configs = enumerate_configs(pw, dev)
        rows.append((w.name, w.M, w.N, w.K, "x".join(map(str, pw.tiles)), len(configs)))
        if args.out and args.workload:
            text = ",".join(TilingConfig._fields) + "\n" + "".join(",".join(map(str, c)) + "\n" for c in configs)
            gio.write_text(Path(args.out) / f"{w.name}.configs.csv", text)
    print(metrics.format_table(("label", "M", "N", "K", "tiles", "configs"), rows))
    return EXIT_OK


def cmd_gen_dataset(args) -> int:
    cfg = _run_config(args)
    dev = gio.load_device(cfg.device)
    workloads = gio.load_workloads(cfg.workloads)
    if not workloads:
        raise gio.InputError("workload list is empty")
    if args.k_random is not None:
        cfg = gio.RunConfig(**{**asdict(cfg), "seeds": cfg.seeds,
                               "sample_spec": SampleSpec(cfg.sample_spec.k_top, cfg.sample_spec.k_bottom,
                                                         args.k_random, cfg.sample_spec.relaxation)})
    ds = gen_dataset(workloads, dev, sample_spec=cfg.sample_spec, seed=cfg.seeds.dataset)
    out = Path(cfg.out_dir)
    path = out / "dataset.csv"
    digest = ds.write_csv(path)
    gio.write_provenance(
        out / "dataset.provenance.json", "gen-dataset",
        inputs={"device": cfg.device, "workloads": cfg.workloads or gio.bundled_workloads_path(),
                "config": getattr(args, "config", None)},
        params={"run_config": cfg.to_dict(), "device": dev.to_dict()},
        outputs={"dataset.csv": digest},
    )
    print(f"wrote {len(ds)} rows for {len(workloads)} workloads to {path}")
    for lab, cov in ds.coverage().items():
        log.info("%s: %s", lab, cov)
    return EXIT_OK


def _hp_from_args(args, target: str) -> Hyperparams | None:
    """None keeps the per-target (and per-member) defaults."""
    over = {k: getattr(args, k) for k in ("n_trees", "max_depth", "learning_rate") if getattr(args, k) is not None}
    if not over:
        return None
    return pipeline.DEFAULT_TARGET_HP[target].replace(**over)


def cmd_train(args) -> int:
    cfg = _run_config(args)
    dev = gio.load_device(cfg.device)
    ds = _read_dataset(args.dataset)
    targets = pipeline.TARGETS if args.target == "all" else (args.target,)
    out = Path(cfg.out_dir)
    X = pipeline.dataset_features(ds)
    outputs, reports = {}, []
    for target in targets:
        hp = _hp_from_args(args, target)
        if args.tune_budget:
            res = pipeline.tune_target(ds, target, args.features, args.tune_budget, cfg.seeds.train, cfg.hp_space)
            hp = res.best
            outputs[f"{target}.trials.json"] = gio.write_text(
                out / f"{target}.trials.json",
                gio.dumps_json({"best": asdict(res.best), "best_mape_pct": res.best_mape_pct, "trials": res.trials}),
            )
        model = pipeline.train_target(ds, target, args.features, hp, dev, X, cfg.seeds.train)
        text = save(model)
        outputs[f"{target}.json"] = gio.write_text(out / f"{target}.json", text)
        pred = model.predict(np.ascontiguousarray(X[:, : FeatureSet(args.features).width]))
        y = pipeline.target_values(ds, target)
        if y.ndim == 1:
            reports.append(metrics.evaluate(y, pred, target))
        else:
            reports += [metrics.evaluate(y[:, j], pred[:, j], f"resources.{k}") for j, k in enumerate(RESOURCE_KINDS)]
    outputs["train_report.csv"] = gio.write_text(out / "train_report.csv", metrics.reports_to_csv(reports, {"split": "train"}))
    gio.write_provenance(
        out / "train.provenance.json", "train",
        inputs={"dataset": args.dataset, "device": cfg.device},
        params={"targets": list(targets), "features": args.features, "tune_budget": args.tune_budget,
                "seed": cfg.seeds.train},
        outputs=outputs,
    )
    rows = [(r.group, r.n, r.mape_pct, r.r2) for r in reports]
    print(metrics.format_table(("target", "n", "train_mape_pct", "train_r2"), rows))
    return EXIT_OK


def _model_target(model) -> str:
    target = model.meta.get("target")
    if target not in pipeline.TARGETS:
        raise gio.InputError("model document does not record a known target")
    return target


def cmd_eval(args) -> int:
    cfg = _run_config(args)
    dev = gio.load_device(cfg.device)
    ds = _read_dataset(args.dataset)
    if not args.model:
        raise gio.InputError("--model is required")
    model = _load_model(args.model)
    target = _model_target(model)
    if isinstance(model, BoostedModel):
        hp = model.hyperparams
    else:
        hp = {k: m.hyperparams for k, m in model.members.items()}
    split = "lowo" if args.split in ("lowo", "leave-one-workload-out") else args.split
    X = pipeline.dataset_features(ds)
    evals = {fs.value: pipeline.evaluate_split(ds, target, fs, split, hp, cfg.seeds.split, X) for fs in FeatureSet}
    baseline = pipeline.analytical_eval(ds, dev, split, cfg.seeds.split) if target == "latency" else None

    out = Path(cfg.out_dir)
    parts = []
    for fs, evs in evals.items():
        for ev in evs:
            parts.append(metrics.reports_to_csv(ev.groups, {"split": split, "features": fs, "target": ev.target}))
    if baseline is not None:
        parts.append(metrics.reports_to_csv(baseline.groups, {"split": split, "features": "analytical", "target": "latency"}))
    body = parts[0] + "".join(p.split("\n", 1)[1] for p in parts[1:])
    digest = gio.write_text(out / f"eval_{target}_{split}.csv", body)
    gio.write_provenance(out / f"eval_{target}_{split}.provenance.json", "eval",
                         inputs={"dataset": args.dataset, "model": args.model},
                         params={"split": split, "seed": cfg.seeds.split}, outputs={f"eval_{target}_{split}.csv": digest})

    for k, (e1, e12) in enumerate(zip(evals["set1"], evals["set12"])):
        header = ["group", "n", "set1_mape_pct", "set12_mape_pct"]
        rows = [[g1.group, g1.n, g1.mape_pct, g12.mape_pct] for g1, g12 in zip(e1.groups, e12.groups)]
        if baseline is not None:
            header.append("analytical_mape_pct")
            for r, gb in zip(rows, baseline.groups):
                r.append(gb.mape_pct)
        med = ["median", "", pipeline.median_group_mape(e1), pipeline.median_group_mape(e12)]
        if baseline is not None:
            med.append(pipeline.median_group_mape(baseline))
        rows.append(med)
        print(f"{e1.target} ({split})")
        print(metrics.format_table(header, rows))
    return EXIT_OK


def _predictor_for(args, oracle: Oracle):
    if args.oracle_as_model:
        return OraclePredictor(oracle.zero_noise())
    if not args.model:
        raise gio.InputError("--model (directory of trained models) or --oracle-as-model is required")
    return _load_surrogates(args.model)


def cmd_dse(args) -> int:
    cfg = _run_config(args)
    dev = gio.load_device(cfg.device)
    w = gio.resolve_workload(args.workload, gio.load_workloads(cfg.workloads))
    objective = normalize_objective(args.objective)
    models = _predictor_for(args, Oracle(dev, seed=cfg.seeds.dataset))
    if isinstance(models, SurrogateSet) and FeatureSet(args.features) is not models.feature_set:
        raise gio.InputError(f"models were trained on {models.feature_set.value}, not {args.features}")
    pw = pad_workload(w, dev.tile_dim)
    res = explore(pw, dev, models)
    out = Path(cfg.out_dir)
    stem = f"{w.name}"
    outputs = {
        f"{stem}.sweep.csv": gio.write_text(out / f"{stem}.sweep.csv", _sweep_csv(res.sweep, w)),
        f"{stem}.front.csv": gio.write_text(out / f"{stem}.front.csv", _point_rows(res.front.points, w)),
        f"{stem}.front.dat": gio.write_text(out / f"{stem}.front.dat", _gnuplot_dat(res.front, w)),
    }
    try:
        best = select(res.front, objective)
    except NoFeasibleDesign:
        print(f"no feasible design for {w.name} ({len(res.sweep.configs)} candidates)", file=sys.stderr)
        return EXIT_EMPTY
    rec = {"workload": {"label": w.name, "M": w.M, "N": w.N, "K": w.K}, "objective": objective,
           "n_candidates": int(len(res.sweep.configs)), "n_feasible": int(res.sweep.feasible.sum()),
           "front_size": len(res.front), "selected": point_record(best, pw)}
    outputs[f"{stem}.selected.json"] = gio.write_text(out / f"{stem}.selected.json", gio.dumps_json(rec))
    gio.write_provenance(out / f"{stem}.dse.provenance.json", "dse",
                         inputs={"model_dir": args.model, "device": cfg.device},
                         params={"workload": w.name, "objective": objective, "features": args.features},
                         outputs=outputs)
    c = best.config
    print(f"{w.name}: {objective} -> P=({c.P_M},{c.P_N},{c.P_K}) B=({c.B_M},{c.B_N},{c.B_K}) "
          f"n_aie={c.n_aie()} {best.throughput_gflops:.1f} GFLOPS {best.energy_eff_gflops_per_w:.2f} GFLOPS/W "
          f"(front {len(res.front)} of {int(res.sweep.feasible.sum())} feasible)")
    return EXIT_OK


def cmd_pareto_compare(args) -> int:
    cfg = _run_config(args)
    dev = gio.load_device(cfg.device)
    w = gio.resolve_workload(args.workload, gio.load_workloads(cfg.workloads))
    if args.front:
        labels = _read_front_labels(args.front)
        if labels and labels != {w.name}:
            raise gio.InputError(f"front file holds workload {sorted(labels)}, not {w.name!r}")
    oracle = Oracle(dev, seed=cfg.seeds.dataset)
    models = _predictor_for(args, oracle)
    pw = pad_workload(w, dev.tile_dim)
    predicted = explore(pw, dev, models).front
    reference = oracle_front(pw, oracle)
    cmp = compare_fronts(pw, predicted, reference, oracle)
    out = Path(cfg.out_dir)
    doc = {"workload": w.name, "mode": "oracle" if args.oracle_as_model else "model", **cmp.to_dict()}
    digest = gio.write_text(out / f"{w.name}.compare.json", gio.dumps_json(doc))
    gio.write_provenance(out / f"{w.name}.compare.provenance.json", "pareto-compare",
                         inputs={"model_dir": args.model, "device": cfg.device},
                         params={"workload": w.name}, outputs={f"{w.name}.compare.json": digest})
    print(f"{w.name} hv_ratio {cmp.hv_ratio:.4f} (throughput regret {cmp.throughput_regret:.4f}, "
          f"energy regret {cmp.energy_regret:.4f}, false-feasible {cmp.false_feasible})")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config JSON")
    common.add_argument("--device", help="device profile JSON (default: built-in VCK190-like profile)")
    common.add_argument("--workloads", help="workload CSV with header label,M,N,K (default: bundled list)")
    common.add_argument("--seed", type=int, help="overrides every seed in the run config")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=_positive_int, default=1, help="worker cap (kernels are single-threaded)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gemm-dse", description="Surrogate-guided GEMM tiling exploration.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("enumerate", parents=[common], help="count (and optionally list) tiling configs")
    s.add_argument("--workload", help="label or MxNxK; default: every workload in the list")
    s.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("gen-dataset", parents=[common], help="measure sampled configs on the oracle")
    s.add_argument("--k-random", type=int, help="override the random sample count per workload")
    s.set_defaults(func=cmd_gen_dataset)

    s = sub.add_parser("train", parents=[common], help="fit surrogates on a dataset CSV")
    s.add_argument("--dataset", required=True)
    s.add_argument("--target", choices=(*pipeline.TARGETS, "all"), default="all")
    s.add_argument("--features", choices=[f.value for f in FeatureSet], default="set12")
    s.add_argument("--tune-budget", type=int, default=0, help="random-search trials (0 = use defaults)")
    s.add_argument("--n-trees", type=int)
    s.add_argument("--max-depth", type=int)
    s.add_argument("--learning-rate", type=float)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", parents=[common], help="held-out accuracy, Set-I vs Set-I&II")
    s.add_argument("--dataset", required=True)
    s.add_argument("--model", help="a trained model file; its target and hyperparameters are reused")
    s.add_argument("--split", choices=("holdout80_20", "kfold5", "lowo", "leave-one-workload-out"), default="lowo")
    s.set_defaults(func=cmd_eval)

    for name, func, helptext in (("dse", cmd_dse, "explore one workload and select a design"),
                                 ("pareto-compare", cmd_pareto_compare, "score a predicted front by hypervolume")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--workload", required=True, help="label or MxNxK")
        s.add_argument("--model", help="directory holding latency.json, power.json, resources.json")
        s.add_argument("--oracle-as-model", action="store_true", help="predict with the zero-noise oracle")
        s.add_argument("--features", choices=[f.value for f in FeatureSet], default="set12")
        if name == "dse":
            s.add_argument("--objective", choices=("throughput", "energy"), default="throughput")
        else:
            s.add_argument("--front", help="front CSV from a previous dse run; its label must match")
        s.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (gio.InputError, ConfigError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NoFeasibleDesign as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
