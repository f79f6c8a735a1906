"""Command-line front end: synth -> train -> calibrate -> spot -> eval,
plus the feature extractor.

Every command records its full configuration (seed included) as
``<command>-config.json`` in the output directory, so any run can be
reproduced exactly. Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import features as feat
from .pipeline import (METHODS, ModelParams, calibrate_class_model, run_eval,
                       train_class_model)
from .report import (detection_record, render_eval_figures, stats_block,
                     write_detections_csv, write_eval_report_csv,
                     write_ranks_csv)
from .seqmodel import (load_dataset, load_model, save_dataset, save_model,
                       save_sequence)
from .spotting import spot
from .synth import SynthConfig, generate

DEFAULT_SEED = 7
DEFAULT_DONT_CARE = "0,2,5,10"


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (validation) instead of 2 on bad usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _write_config(out_dir: Path, command: str, config: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{command}-config.json"
    path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _params_from(args) -> ModelParams:
    return ModelParams(n_components=args.components, diagonal=args.diagonal,
                       n_projections=args.projections, p=args.proj_dim,
                       phi=args.phi)


def _add_model_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--components", type=int, default=3,
                   help="GMM components per frame (default 3)")
    p.add_argument("--diagonal", action="store_true",
                   help="diagonal covariances instead of full")
    p.add_argument("--projections", type=int, default=25,
                   help="APE random projections per frame (default 25)")
    p.add_argument("--proj-dim", type=int, default=2,
                   help="APE projection dimension (only 2 supported)")
    p.add_argument("--phi", type=float, default=0.0,
                   help="APE hull shrink/expand parameter (default 0)")


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_classes=args.classes, samples_per_class=args.samples,
        n_streams=args.streams, instances_per_stream=args.instances,
        dim=args.dim, length_jitter=0.0 if args.no_warp else args.length_jitter,
        warp=0.0 if args.no_warp else args.warp,
        scale_jitter=0.0 if args.no_warp else args.scale_jitter,
        noise=args.noise, background=args.background,
        noise_amplitude=args.noise_amplitude, seed=args.seed)
    train_ds, test_ds = generate(cfg)
    out = Path(args.out)
    save_dataset(train_ds, out / "train")
    save_dataset(test_ds, out / "test")
    _write_config(out, "synth", cfg.to_dict())
    print(f"wrote {len(train_ds.sequences)} training samples and "
          f"{len(test_ds.sequences)} streams under {out}")
    return 0


def cmd_train(args) -> int:
    dataset = load_dataset(args.data)
    params = _params_from(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cls in sorted(dataset.class_names):
        model = train_class_model(dataset, cls, args.variant, params, args.seed)
        path = save_model(model, out / f"{cls}.model.json")
        print(f"trained {args.variant} model for {cls!r} "
              f"(length {model.model_length}) -> {path}")
    _write_config(out, "train", {
        "data": str(args.data), "variant": args.variant, "seed": args.seed,
        "components": args.components, "diagonal": args.diagonal,
        "projections": args.projections, "proj_dim": args.proj_dim,
        "phi": args.phi})
    return 0


def cmd_calibrate(args) -> int:
    dataset = load_dataset(args.data)
    params = _params_from(args)
    models_dir = Path(args.models)
    reports = {}
    for cls in sorted(dataset.class_names):
        model_path = models_dir / f"{cls}.model.json"
        if not model_path.exists():
            raise FileNotFoundError(f"no model file for class {cls!r}: {model_path}")
        model = load_model(model_path)
        report = calibrate_class_model(dataset, cls, model.variant, params, args.seed)
        save_model(model.with_threshold(report.threshold), model_path)
        reports[cls] = {
            "threshold": report.threshold,
            "held_out_costs": list(report.held_out_costs),
            "candidate_grid": list(report.candidate_grid),
            "hit_counts": list(report.hit_counts),
        }
        print(f"calibrated {cls!r}: beta = {report.threshold!r} "
              f"({max(report.hit_counts)}/{len(report.held_out_costs)} hits)")
    (models_dir / "calibration-report.json").write_text(
        json.dumps(reports, indent=2, sort_keys=True) + "\n")
    _write_config(models_dir, "calibrate", {
        "data": str(args.data), "seed": args.seed,
        "components": args.components, "diagonal": args.diagonal,
        "projections": args.projections, "proj_dim": args.proj_dim,
        "phi": args.phi})
    return 0


def cmd_spot(args) -> int:
    dataset = load_dataset(args.data)
    models = [load_model(p) for p in sorted(Path(args.models).glob("*.model.json"))]
    if not models:
        raise FileNotFoundError(f"no *.model.json under {args.models}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for stream in dataset.sequences:
        stream_dets = []
        for model in models:
            dets = spot(model, stream, strict_first_hit=args.strict_first_hit,
                        move_buffer=args.move_buffer)
            stream_dets.extend(dets)
            for d in dets:
                print(json.dumps(detection_record(d, stream.id), sort_keys=True))
        stream_dets.sort(key=lambda d: (d.begin, d.end, d.class_name))
        write_detections_csv(stream_dets, out / f"detections-{stream.id}.csv")
    _write_config(out, "spot", {
        "data": str(args.data), "models": str(args.models),
        "strict_first_hit": args.strict_first_hit,
        "move_buffer": args.move_buffer, "seed": args.seed})
    return 0


def cmd_eval(args) -> int:
    train_ds = load_dataset(args.train)
    test_ds = load_dataset(args.test)
    methods = tuple(args.methods.split(","))
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
    dont_care = tuple(_int_list(args.dont_care))
    outcome = run_eval(train_ds, test_ds, methods, dont_care,
                       _params_from(args), seed=args.seed,
                       strict_first_hit=args.strict_first_hit)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_eval_report_csv(outcome, out / "eval-report.csv")
    write_ranks_csv(outcome.rank_table, outcome.experiment_ids, out / "ranks.csv")
    per_file: dict[tuple[str, str], list] = {}
    for (method, _cls, sid), dets in sorted(outcome.detections.items()):
        per_file.setdefault((method, sid), []).extend(dets)
    (out / "detections").mkdir(exist_ok=True)
    for (method, sid), dets in per_file.items():
        dets.sort(key=lambda d: (d.begin, d.end, d.class_name))
        write_detections_csv(dets, out / "detections" / f"{method}-{sid}.csv")
    stats = {
        "methods": list(outcome.methods),
        "mean_ranks": [float(v) for v in outcome.rank_table.mean_ranks],
        "friedman_x2": outcome.x2,
        "iman_davenport_f": outcome.f_f,
        "p_value": outcome.p_value,
        "critical_differences": {f"{1 - a:.2f}": cd for a, cd
                                 in outcome.critical_differences.items()},
        "thresholds": {f"{m}/{c}": t for (m, c), t in outcome.thresholds.items()},
    }
    (out / "stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    figures = render_eval_figures(outcome, out / "figures")
    _write_config(out, "eval", {
        "train": str(args.train), "test": str(args.test),
        "methods": list(methods), "dont_care": list(dont_care),
        "seed": args.seed, "strict_first_hit": args.strict_first_hit,
        "components": args.components, "diagonal": args.diagonal,
        "projections": args.projections, "proj_dim": args.proj_dim,
        "phi": args.phi})
    print(stats_block(outcome))
    print("figures: " + " ".join(str(f) for f in figures))
    return 0


def cmd_features(args) -> int:
    masks = flows = headboxes = None
    recipe = [r.strip() for r in args.recipe.split(",") if r.strip()]
    if any(r in ("ftorso", "finv", "fmov") for r in recipe):
        if args.masks is None:
            raise ValueError("recipe needs --masks")
        masks = [feat.read_mask_pgm(p)
                 for p in sorted(Path(args.masks).glob("*.pgm"))]
        if not masks:
            raise FileNotFoundError(f"no *.pgm mask files under {args.masks}")
    if "fmov" in recipe:
        if args.flows is None:
            raise ValueError("recipe needs --flows")
        flows = [feat.read_flow_csv(p)
                 for p in sorted(Path(args.flows).glob("*.flow.csv"))]
        if not flows:
            raise FileNotFoundError(f"no *.flow.csv files under {args.flows}")
    if "fhead" in recipe:
        if args.heads is None:
            raise ValueError("recipe needs --heads")
        headboxes = [feat.read_headbox_csv(p)
                     for p in sorted(Path(args.heads).glob("*.head.csv"))]
        if not headboxes:
            raise FileNotFoundError(f"no *.head.csv files under {args.heads}")
    rows, cols = (int(t) for t in args.grid.lower().split("x"))
    neighbours = _int_list(args.neighbours) if args.neighbours else []
    seq = feat.build_feature_sequence(
        args.id, recipe, masks=masks, flows=flows, headboxes=headboxes,
        subject=args.subject, neighbours=neighbours, grid=(rows, cols),
        one_hot_fhead=args.one_hot_fhead, frame_rate=args.frame_rate)
    out = Path(args.out)
    path = save_sequence(seq, out)
    _write_config(out, "features", {
        "recipe": recipe, "subject": args.subject, "neighbours": neighbours,
        "grid": [rows, cols], "one_hot_fhead": args.one_hot_fhead,
        "id": args.id, "seed": args.seed})
    print(f"wrote {len(seq)} frames of dim {seq.dim} -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gesturespot",
                     description="Temporal-pattern spotting toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic benchmark")
    common(p)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--streams", type=int, default=2)
    p.add_argument("--instances", type=int, default=10,
                   help="embedded instances per stream")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.12)
    p.add_argument("--warp", type=float, default=0.2)
    p.add_argument("--length-jitter", type=float, default=0.15)
    p.add_argument("--scale-jitter", type=float, default=0.35,
                   help="per-instance amplitude jitter")
    p.add_argument("--no-warp", action="store_true",
                   help="disable time warping, length and amplitude jitter")
    p.add_argument("--background", choices=("walk", "uniform"), default="walk",
                   help="character of the segments between instances")
    p.add_argument("--noise-amplitude", type=float, default=4.0,
                   help="uniform-background amplitude")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train per-class gesture models")
    common(p)
    p.add_argument("--data", required=True, help="training dataset directory")
    p.add_argument("--variant", choices=("gmm", "ape"), default="gmm")
    _add_model_params(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="leave-one-out threshold calibration")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--data", required=True, help="training dataset directory")
    p.add_argument("--models", required=True, help="directory of *.model.json")
    _add_model_params(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("spot", help="run begin-end detection on streams")
    common(p)
    p.add_argument("--data", required=True, help="stream dataset directory")
    p.add_argument("--models", required=True, help="directory of *.model.json")
    p.add_argument("--strict-first-hit", action="store_true",
                   help="emit at the first threshold crossing (no local-minimum refinement)")
    p.add_argument("--move-buffer", type=int, default=None,
                   help="backtracking ring-buffer depth (default 4x model length)")
    p.set_defaults(func=cmd_spot)

    p = sub.add_parser("eval", help="compare methods on labelled streams")
    common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--dont-care", default=DEFAULT_DONT_CARE)
    p.add_argument("--strict-first-hit", action="store_true")
    _add_model_params(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("features", help="extract behavioural features to a sequence file")
    common(p)
    p.add_argument("--recipe", required=True,
                   help="comma-separated subset of fhead,ftorso,finv,fmov")
    p.add_argument("--masks", help="directory of *.pgm mask frames")
    p.add_argument("--flows", help="directory of *.flow.csv frames")
    p.add_argument("--heads", help="directory of *.head.csv frames")
    p.add_argument("--subject", type=int)
    p.add_argument("--neighbours", default="")
    p.add_argument("--grid", default="4x4")
    p.add_argument("--one-hot-fhead", action="store_true")
    p.add_argument("--frame-rate", type=float, default=None)
    p.add_argument("--id", required=True, help="output sequence id")
    p.set_defaults(func=cmd_features)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits for --help and usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
