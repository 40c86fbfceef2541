"""Command-line entry point wiring every pipeline stage.

Subcommands: gen-data, build-dataset, train, eval, infer, compare, serve.
Stage errors exit 1 with one machine-readable `error: <Type>: <reason>` line
on stderr; usage errors exit 2.  Every stage writes only inside its --out
directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import LineRecError

log = logging.getLogger("linerec")


def _setup_logging() -> None:
    level = {"debug": logging.DEBUG, "info": logging.INFO, "error": logging.ERROR}.get(
        os.environ.get("OCR_LOG", "info").lower(), logging.INFO
    )
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="master random seed (default 0, or the config file's)")
    parser.add_argument("--config", type=Path, default=None,
                        help="key=value training-config file")


def _seed(args) -> int:
    return args.seed if args.seed is not None else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linerec",
        description="Text-line recognition pipeline: synthesis, training, "
                    "evaluation, inference, and the comparison service.",
    )
    parser.add_argument("--version", action="version", version=f"linerec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic degraded corpus")
    _common(p)
    p.add_argument("--alphabet", type=int, default=20, help="number of glyph classes")
    p.add_argument("--count", type=int, required=True, help="number of line images")
    p.add_argument("--profile", choices=["clean", "light", "heavy"], default="clean")
    p.add_argument("--glyph-seed", type=int, default=0,
                   help="seed of the glyph shapes (fixes the writing system)")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("build-dataset", help="clean a manifest, build dict/store/split")
    _common(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--image-root", type=Path, default=None,
                   help="base directory of manifest paths (default: manifest's directory)")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train", help="train or fine-tune a recognizer")
    _common(p)
    p.add_argument("--store", type=Path, required=True)
    p.add_argument("--split", type=Path, required=True)
    p.add_argument("--dict", type=Path, required=True)
    p.add_argument("--init-checkpoint", type=Path, default=None,
                   help="continue from an existing checkpoint (fine-tuning)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--lambda1", type=float, default=None)
    p.add_argument("--lambda2", type=float, default=None)
    p.add_argument("--kd-temperature", type=float, default=None)
    p.add_argument("--teacher-ctc-weight", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--freeze-teacher", action="store_true", default=None)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split, or a predictions file")
    _common(p)
    p.add_argument("--store", type=Path, default=None)
    p.add_argument("--split", type=Path, default=None)
    p.add_argument("--dict", type=Path, default=None)
    p.add_argument("--checkpoint", type=Path, default=None)
    p.add_argument("--subset", choices=["val", "train"], default="val")
    p.add_argument("--meta", type=Path, default=None,
                   help="meta.json from gen-data, enables blur/noise strata")
    p.add_argument("--predictions", type=Path, default=None,
                   help="pre-computed id<TAB>text<TAB>confidence file to score "
                        "instead of running inference")
    p.add_argument("--manifest", type=Path, default=None,
                   help="ground-truth manifest for --predictions mode")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("infer", help="recognize one image")
    _common(p)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--dict", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None,
                   help="directory for prediction.json (default: stdout only)")

    p = sub.add_parser("compare", help="compare two checkpoints on one image")
    _common(p)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--baseline", type=Path, required=True)
    p.add_argument("--finetuned", type=Path, required=True)
    p.add_argument("--dict", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("serve", help="run the comparison HTTP service")
    _common(p)
    p.add_argument("--baseline", type=Path, required=True)
    p.add_argument("--finetuned", type=Path, required=True)
    p.add_argument("--dict", type=Path, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--max-upload-mb", type=float, default=5.0)
    p.add_argument("--timeout", type=float, default=30.0,
                   help="keep-alive timeout seconds")
    p.add_argument("--cors-origin", action="append", default=None,
                   help="allowed CORS origin (repeatable; default: any)")
    p.add_argument("--ui-dir", type=Path, default=None,
                   help="serve a built demo UI from this directory at /")
    p.add_argument("--self-test", action="store_true",
                   help="load models, build the app, bind the port, then exit")
    return parser


def _cmd_gen_data(args) -> int:
    from .synth import generate_corpus, write_corpus

    samples, manifest = generate_corpus(
        alphabet_size=args.alphabet, count=args.count, seed=_seed(args),
        profile=args.profile, glyph_seed=args.glyph_seed,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    write_corpus(samples, manifest, args.out)
    log.info("wrote %d samples under %s", len(samples), args.out)
    return 0


def _cmd_build_dataset(args) -> int:
    from .dataset import RecordStore, build_dict, clean_manifest, split, write_manifest

    image_root = args.image_root or args.manifest.parent
    entries, rejections = clean_manifest(args.manifest, image_root)
    args.out.mkdir(parents=True, exist_ok=True)
    write_manifest(entries, args.out / "manifest.cleaned.txt")
    (args.out / "rejections.json").write_text(
        json.dumps(
            [{"line": r.line_no, "entry": r.entry, "reason": r.reason}
             for r in rejections],
            indent=1,
        ),
        encoding="utf-8",
    )
    cdict = build_dict(entries)
    cdict.to_file(args.out / "dict.txt")
    RecordStore.pack_manifest(entries, image_root, args.out / "data.ocrs")
    spec = split([e.path for e in entries], ratio=(10, 1), seed=_seed(args))
    spec.to_file(args.out / "split.json")
    log.info(
        "kept %d entries (%d rejected), dict size %d, split %d/%d",
        len(entries), len(rejections), cdict.size,
        len(spec.train_ids), len(spec.val_ids),
    )
    return 0


def _load_config(args):
    from .training import TrainConfig

    config = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    return config.with_overrides(
        seed=args.seed,  # None keeps the config file's seed

        epochs=getattr(args, "epochs", None),
        batch_size=getattr(args, "batch_size", None),
        learning_rate=getattr(args, "lr", None),
        lambda1=getattr(args, "lambda1", None),
        lambda2=getattr(args, "lambda2", None),
        kd_temperature=getattr(args, "kd_temperature", None),
        teacher_ctc_weight=getattr(args, "teacher_ctc_weight", None),
        weight_decay=getattr(args, "weight_decay", None),
        freeze_teacher=getattr(args, "freeze_teacher", None),
    )


def _cmd_train(args) -> int:
    from . import model
    from .dataset import CharDict, RecordStore, SplitSpec
    from .training import trace_to_csv, train

    store = RecordStore.open(args.store)
    spec = SplitSpec.from_file(args.split)
    cdict = CharDict.from_file(args.dict)
    config = _load_config(args)
    init = None
    if args.init_checkpoint is not None:
        init, digest = model.load_checkpoint(args.init_checkpoint)
        if digest != cdict.digest():
            from .errors import DictMismatchError

            raise DictMismatchError(
                f"init checkpoint {args.init_checkpoint} was trained on a "
                "different dictionary"
            )
    result = train(store, spec, cdict, config, init=init, log=log.info)
    args.out.mkdir(parents=True, exist_ok=True)
    model.save_checkpoint(args.out / "checkpoint.ocrm", result.params, cdict)
    (args.out / "loss_trace.csv").write_text(trace_to_csv(result.trace), encoding="utf-8")
    (args.out / "train_log.json").write_text(
        json.dumps(
            {
                "val_exact_accuracy": result.val_exact_accuracy,
                "skipped_total": result.skipped_total,
                "steps": len(result.trace),
            },
            indent=1,
        ),
        encoding="utf-8",
    )
    log.info("trained %d steps; checkpoint at %s", len(result.trace), args.out)
    return 0


def _cmd_eval(args) -> int:
    from .dataset import CharDict, RecordStore, SplitSpec
    from .metrics import (
        char_frequencies, evaluate, render_report, stratify, write_predictions_tsv,
    )
    from .model import load_checkpoint
    from .synth import DegradationMeta
    from .training import decode_batch, load_split_arrays

    if args.predictions is not None:
        return _eval_predictions_file(args)
    missing = [name for name in ("store", "split", "dict", "checkpoint")
               if getattr(args, name) is None]
    if missing:
        raise ValueError(
            "eval needs either --predictions with --manifest, or "
            + "/".join(f"--{m}" for m in missing)
        )
    store = RecordStore.open(args.store)
    spec = SplitSpec.from_file(args.split)
    cdict = CharDict.from_file(args.dict)
    params, digest = load_checkpoint(args.checkpoint)
    if digest != cdict.digest():
        from .errors import DictMismatchError

        raise DictMismatchError("checkpoint dictionary digest mismatch")
    ids = spec.val_ids if args.subset == "val" else spec.train_ids
    if not ids:
        from .errors import EmptyInputError

        raise EmptyInputError(f"{args.subset} split is empty")
    images, labels = load_split_arrays(store, ids)
    preds = decode_batch(params, images, cdict)
    report = evaluate(preds, labels)

    class _View:
        __slots__ = ("label", "meta")

        def __init__(self, label, meta):
            self.label = label
            self.meta = meta

    metas = {}
    if args.meta is not None:
        raw = json.loads(Path(args.meta).read_text(encoding="utf-8"))
        metas = {k: DegradationMeta.from_dict(v) for k, v in raw.items()}
    views = [_View(lbl, metas.get(sid)) for sid, lbl in zip(ids, labels)]
    freq = char_frequencies(store.label(k) for k in spec.train_ids)
    report.strata.extend(stratify(views, preds, "label_length"))
    report.strata.extend(stratify(views, preds, "char_rarity", train_char_freq=freq))
    if metas:
        report.strata.extend(stratify(views, preds, "blur"))
        report.strata.extend(stratify(views, preds, "noise"))

    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (args.out / "report.txt").write_text(render_report(report), encoding="utf-8")
    write_predictions_tsv(ids, preds, args.out / "predictions.tsv")
    sys.stdout.write(render_report(report))
    return 0


def _eval_predictions_file(args) -> int:
    from .metrics import evaluate, read_predictions_tsv, render_report

    if args.manifest is None:
        raise ValueError("--predictions mode needs --manifest for ground truths")
    from .dataset import read_manifest

    truths = {}
    for line in read_manifest(args.manifest):
        if line.count("\t") != 1:
            continue
        path, label = line.split("\t")
        truths[path] = label
    ids, preds = read_predictions_tsv(args.predictions)
    missing = [sid for sid in ids if sid not in truths]
    if missing:
        raise ValueError(f"{len(missing)} prediction ids missing from the manifest "
                         f"(first: {missing[0]!r})")
    report = evaluate(preds, [truths[sid] for sid in ids])
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (args.out / "report.txt").write_text(render_report(report), encoding="utf-8")
    sys.stdout.write(render_report(report))
    return 0


def _cmd_infer(args) -> int:
    from .inference import load_model, prediction_to_json, recognize

    loaded = load_model(args.checkpoint, args.dict)
    pred = recognize(args.image, loaded)
    text = prediction_to_json(pred)
    sys.stdout.write(text + "\n")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "prediction.json").write_text(text, encoding="utf-8")
    return 0


def _cmd_compare(args) -> int:
    from .inference import compare_checkpoints, load_model

    baseline = load_model(args.baseline, args.dict)
    finetuned = load_model(args.finetuned, args.dict)
    result = compare_checkpoints(args.image, baseline, finetuned)
    text = json.dumps(result.as_dict(), indent=1)
    table = (
        f"input {result.input_digest[:12]}\n"
        f"  baseline : {result.baseline.text!r}"
        f" (confidence {100 * result.baseline.confidence:.1f}%)\n"
        f"  finetuned: {result.finetuned.text!r}"
        f" (confidence {100 * result.finetuned.confidence:.1f}%)\n"
    )
    sys.stdout.write(text + "\n" + table)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "comparison.json").write_text(text, encoding="utf-8")
        (args.out / "comparison.txt").write_text(table, encoding="utf-8")
    return 0


def _cmd_serve(args) -> int:
    from .service import ServiceConfig, create_app, run_server, self_test

    cfg = ServiceConfig(
        host=args.host,
        port=args.port,
        baseline_checkpoint=args.baseline,
        finetuned_checkpoint=args.finetuned,
        dict_path=args.dict,
        max_upload_bytes=int(args.max_upload_mb * 1024 * 1024),
        request_timeout=args.timeout,
        cors_origins=args.cors_origin or ["*"],
        ui_dir=args.ui_dir,
    )
    if args.self_test:
        self_test(cfg)
        log.info("serve self-test ok")
        return 0
    app = create_app(cfg)
    run_server(app, cfg)
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "build-dataset": _cmd_build_dataset,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "infer": _cmd_infer,
    "compare": _cmd_compare,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except LineRecError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
