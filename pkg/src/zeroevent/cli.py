"""Command-line entry point: ``zeroevent <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error,
4 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline as pl
from . import textmodels as tm
from .errors import ConfigError, DataError, ZeroEventError
from .eventdetector import (DesignChoice, RankedList, read_detector, read_model_vectors, rank_videos,
                            read_ranked_list, write_detector, write_ranked_list)
from .fusion_eval import evaluate, late_fuse, read_ground_truth, report_csv
from .pseudotraining import detector_grid, generate_pseudo_positives, write_pseudo_samples
from .rdsvm import (TrainConfig, auto_relevance_train, decision_function,
                    read_dataset, save_model, train, train_cv)

log = logging.getLogger("zeroevent")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value experiment file")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="worker threads (default: CPU count)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _config(args, check_paths=True, **extra) -> pl.ExperimentConfig:
    overrides = {k: v for k, v in (("seed", args.seed), ("jobs", args.jobs), ("out", args.out))
                 if v is not None}
    overrides.update({k: v for k, v in extra.items() if v is not None})
    return pl.load_config(args.config, overrides, check_paths=check_paths)


def _out(cfg) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- subcommands ------------------------------------------------------------

def cmd_gen_synthetic(args) -> None:
    cfg = _config(args, check_paths=False)
    planted = None
    if args.planted:
        planted = tuple(tuple(int(x) for x in grp.split(",")) for grp in args.planted.split(";"))
    spec = pl.SyntheticSpec(n_events=args.events, n_concepts=args.concepts, n_videos=args.videos,
                            sigma=args.sigma, seed=cfg.seed, planted=planted,
                            vocab_size=args.vocab)
    path = pl.generate_synthetic(spec, _out(cfg))
    print(path)


def cmd_build_lm(args) -> None:
    cfg = _config(args)
    data = pl.load_data(cfg)
    out = _out(cfg)
    if args.kind == "elm":
        d = out / "elm" / args.source
        d.mkdir(parents=True, exist_ok=True)
        for ev in data.events:
            try:
                lm = tm.build_elm(ev, args.source, cfg.N, data.stopwords)
            except ZeroEventError as exc:
                log.warning("event %s: %s", ev.event_id, exc)
                continue
            tm.write_language_model(d / f"{ev.event_id}.lm", lm)
    else:
        tag = tm.SOURCE_TAGS[args.source]
        d = out / "clm" / args.source / args.weighting
        d.mkdir(parents=True, exist_ok=True)
        for c in data.pool:
            corpus = (tm.DocumentCorpus.title_only(c) if args.source == "Title"
                      else data.corpora.get(tag, c))
            try:
                lm = tm.build_clm(c, corpus, args.weighting, cfg.M, data.stopwords)
            except ZeroEventError as exc:
                log.warning("concept %d: %s", c.concept_index, exc)
                continue
            tm.write_language_model(d / f"{c.concept_index}.lm", lm)


def cmd_build_detector(args) -> None:
    cfg = _config(args, design=args.design, K=args.K)
    data = pl.load_data(cfg)
    builder = data.builder(cfg)
    d = _out(cfg) / "detectors"
    d.mkdir(parents=True, exist_ok=True)
    for ev in data.events:
        det = builder.build(ev, cfg.design_choice, cfg.K)
        for w in det.warnings:
            log.warning("%s: %s", ev.event_id, w)
        write_detector(d / f"{ev.event_id}.txt", det)


def _detector_files(paths):
    files = []
    for p in paths:
        p = Path(p)
        files += sorted(p.glob("*.txt")) if p.is_dir() else [p]
    if not files:
        raise DataError("no detector files given")
    return files


def cmd_rank(args) -> None:
    cfg = _config(args, distance=args.distance)
    if args.videos is not None:
        videos = read_model_vectors(args.videos)
    elif cfg.videos is not None:
        videos = read_model_vectors(cfg.videos)
    else:
        raise ConfigError("no model vectors: pass --videos or set videos in the config")
    d = _out(cfg) / "ranked"
    d.mkdir(parents=True, exist_ok=True)
    for f in _detector_files(args.detectors):
        det = read_detector(f)
        write_ranked_list(d / f"{det.event_id}.csv", rank_videos(det, videos, cfg.distance))


def _train_config(cfg: pl.ExperimentConfig, args) -> TrainConfig:
    tc = cfg.train_config
    kw = {k: getattr(args, k) for k in ("C", "gamma", "c", "kernel") if getattr(args, k) is not None}
    return replace(tc, **kw)


def cmd_train_rdsvm(args) -> None:
    cfg = _config(args)
    tc = _train_config(cfg, args)
    ds = read_dataset(args.data)
    out = _out(cfg)
    if args.auto:
        true = ds.u == 0
        pos = ds.X[true & (ds.y > 0)]
        neg = ds.X[true & (ds.y < 0)]
        model = auto_relevance_train(pos, neg, ds.X[ds.u == 1], tc)
    elif args.C is not None and args.gamma is not None and args.c is not None:
        model = train(ds, tc)
    else:
        model = train_cv(ds, tc)
    save_model(out / "model.txt", model)
    if args.score is not None:
        videos = read_model_vectors(args.score)
        scores = decision_function(model, videos.values)
        write_ranked_list(out / "scores.csv", RankedList.from_scores(videos.ids, scores))
    print(f"C={model.C:g} gamma={model.gamma:g} c={model.c:g} support={len(model.support)}")


def cmd_pseudo(args) -> None:
    cfg = _config(args)
    data = pl.load_data(cfg)
    builder = data.builder(cfg)
    out = _out(cfg)
    combos = detector_grid(cfg.elm_sources, cfg.clm_sources, cfg.weightings, cfg.operators)
    samples = {}
    for ev in data.events:
        failures = []
        samples[ev.event_id] = generate_pseudo_positives(ev, builder, combos, cfg.K, failures)
        for tag, msg in failures:
            log.warning("%s %s: %s", ev.event_id, tag, msg)
    write_pseudo_samples(out / "pseudo.csv", [s for e in sorted(samples) for s in samples[e]])
    if args.train:
        mode = f"T10-{args.negatives}"
        runner = pl.ModeRunner(cfg, data, pseudo=samples)
        result = runner.run(mode)
        pl.write_mode_outputs(result, out)
        print(pl.modes_table([result]), end="")


def cmd_fuse(args) -> None:
    cfg = _config(args)
    if len(args.lists) < 2:
        raise ConfigError("fuse needs at least two ranked lists")
    fused = late_fuse([read_ranked_list(p) for p in args.lists])
    out = _out(cfg)
    write_ranked_list(out / args.name, fused)


def cmd_eval(args) -> None:
    cfg = _config(args)
    gt_path = args.ground_truth or cfg.ground_truth
    if gt_path is None:
        raise ConfigError("no ground truth: pass --ground-truth or set ground_truth in the config")
    gt = read_ground_truth(gt_path)
    files = []
    for p in args.lists:
        p = Path(p)
        files += sorted(p.glob("*.csv")) if p.is_dir() else [p]
    lists = {(args.event if args.event and len(files) == 1 else f.stem): read_ranked_list(f)
             for f in files}
    per_event = evaluate(lists, gt, related_as_positive=cfg.related_as_positive, depth=cfg.ap_depth)
    text = report_csv(per_event)
    out = _out(cfg)
    (out / "eval.csv").write_text(text, encoding="utf-8")
    print(text, end="")


def cmd_sweep(args) -> None:
    cfg = _config(args)
    result = pl.run_sweep(cfg)
    pl.write_sweep_outputs(result, _out(cfg), plot_data=args.plot_data)
    print(result.to_table(top=args.top), end="")


def cmd_report(args) -> None:
    modes = tuple(args.modes.split(",")) if args.modes else None
    cfg = _config(args, modes=modes)
    data = pl.load_data(cfg)
    runner = pl.ModeRunner(cfg, data)
    out = _out(cfg)
    results = []
    for mode in cfg.modes:
        res = runner.run(mode)
        pl.write_mode_outputs(res, out)
        results.append(res)
    table = pl.modes_table(results)
    (out / "report.txt").write_text(table, encoding="utf-8")
    print(table, end="")


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zeroevent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="write a planted synthetic dataset")
    _common(p)
    p.add_argument("--events", type=int, default=10)
    p.add_argument("--concepts", type=int, default=200)
    p.add_argument("--videos", type=int, default=500)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--vocab", type=int, default=0, help="minimum vocabulary size")
    p.add_argument("--planted", help="planted concepts, e.g. '0,1,2;3,4,5'")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("build-lm", help="build event or concept language models")
    _common(p)
    p.add_argument("kind", choices=("elm", "clm"))
    p.add_argument("--source", required=True, choices=sorted({*tm.ELM_SOURCES, *tm.CLM_SOURCES}))
    p.add_argument("--weighting", default="raw-count", choices=tm.WEIGHTINGS)
    p.set_defaults(func=cmd_build_lm)

    p = sub.add_parser("build-detector", help="build one detector per event")
    _common(p)
    p.add_argument("--design", help="ELM/CLM/weighting/operator, e.g. "
                   + DesignChoice().tag)
    p.add_argument("--K", type=int)
    p.set_defaults(func=cmd_build_detector)

    p = sub.add_parser("rank", help="rank videos with detector files")
    _common(p)
    p.add_argument("detectors", nargs="+", help="detector files or directories")
    p.add_argument("--videos", type=Path)
    p.add_argument("--distance")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("train-rdsvm", help="train a relevance-degree SVM")
    _common(p)
    p.add_argument("data", type=Path, help="CSV video_id,y,u,f0,...")
    p.add_argument("--C", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--c", type=float, help="relevance degree of related samples")
    p.add_argument("--kernel", choices=("rbf", "linear"))
    p.add_argument("--auto", action="store_true",
                   help="treat u=1 rows as related and pick their label by cross-validation")
    p.add_argument("--score", type=Path, help="model vectors to score with the trained model")
    p.set_defaults(func=cmd_train_rdsvm)

    p = sub.add_parser("pseudo", help="generate pseudo-positives (and train on them)")
    _common(p)
    p.add_argument("--train", action="store_true")
    p.add_argument("--negatives", choices=("pseudo", "real"), default="pseudo")
    p.set_defaults(func=cmd_pseudo)

    p = sub.add_parser("fuse", help="late-fuse ranked lists")
    _common(p)
    p.add_argument("lists", nargs="+", type=Path)
    p.add_argument("--name", default="fused.csv")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="AP/MAP of ranked lists (file stem = event id)")
    _common(p)
    p.add_argument("lists", nargs="+", type=Path)
    p.add_argument("--ground-truth", type=Path)
    p.add_argument("--event", help="event id when evaluating a single file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="evaluate every design-choice combination")
    _common(p)
    p.add_argument("--top", type=int, default=10, help="rows to print")
    p.add_argument("--plot-data", action="store_true", help="also write gnuplot-ready data")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="run pipeline modes and tabulate AP per event")
    _common(p)
    p.add_argument("--modes", help="comma-separated, e.g. T0,P10,R10,R10+R10p")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ZeroEventError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
