"""Command-line interface.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__, cache, evaluation, network, seqdata, synth, trace
from .errors import InvariantError, ValidationError
from .folding import fold_all, write_vienna

log = logging.getLogger("premir")

MODE_FLAGS = {"multimodal": "multimodal", "seq": "seq_only", "str": "str_only"}


def parse_window(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like LO:HI, got {text!r}") from None
    if lo > hi or lo < 1:
        raise argparse.ArgumentTypeError(f"invalid window {text!r}")
    return lo, hi


def run_config(args) -> dict:
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    cfg["version"] = __version__
    return cfg


def hyperparameters(args) -> network.Hyperparameters:
    return network.Hyperparameters(
        hidden_size=args.hidden,
        dropout_rate=args.dropout,
        batch_size=args.batch,
        epochs=args.epochs,
        alpha=args.lr,
        seed=args.seed,
        mode=MODE_FLAGS[args.mode],
        palindrome=args.palindrome == "on",
        min_loop=args.min_loop,
    )


def load_samples(args, need_labels=True) -> list[network.PreparedSample]:
    """Samples from ``--cache`` or from ``--pos``/``--neg`` (or ``--fasta``)."""
    if getattr(args, "cache", None) and Path(args.cache).exists() and not (args.pos or getattr(args, "fasta", None)):
        return cache.load_cache(args.cache)
    if getattr(args, "fasta", None):
        data = seqdata.load_fasta(args.fasta, 0)
    elif args.pos and args.neg:
        data = seqdata.load_labeled(args.pos, args.neg)
    elif args.pos and not need_labels:
        data = seqdata.load_fasta(args.pos, 1)
    else:
        raise ValidationError("give --cache, or --pos and --neg FASTA files")
    return cache.prepare(data, args.vienna, args.min_loop)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args):
    pos, neg = synth.synthesize(args.n_pos, args.n_neg, (args.min_len, args.max_len), args.seed)
    out = _out_dir(args)
    seqdata.write_fasta(pos, out / "pos.fa")
    seqdata.write_fasta(neg, out / "neg.fa")
    print(f"wrote {len(pos)} positives to {out / 'pos.fa'} and {len(neg)} negatives to {out / 'neg.fa'}")


def cmd_fold(args):
    if args.pos and args.neg:
        data = seqdata.load_labeled(args.pos, args.neg)
    elif args.pos or args.fasta:
        data = seqdata.load_fasta(args.pos or args.fasta, 1)
    else:
        raise ValidationError("give --pos (and optionally --neg) or --fasta")
    structures = fold_all(data, args.vienna, args.min_loop)
    write_vienna({s.id: (s.sequence, structures[s.id]) for s in data}, args.out)
    print(f"wrote {len(data)} structures to {args.out}")


def cmd_preprocess(args):
    samples = load_samples(args)
    cache.save_cache(samples, args.cache, run_config(args))
    print(f"cached {len(samples)} samples in {args.cache}")


def cmd_train(args):
    samples = load_samples(args)
    hp = hyperparameters(args)
    out = _out_dir(args)

    def progress(epoch, model):
        if args.verbose and (epoch % 10 == 0 or epoch == hp.epochs):
            log.info("epoch %d", epoch)

    result = network.train(samples, hp, on_epoch=progress)
    cfg = run_config(args)
    result.model.save(out / "weights.npz", meta={"run_config": cfg})
    with open(out / "loss.tsv", "w") as fh:
        fh.write("epoch\tloss\n")
        for e, loss in enumerate(result.losses, 1):
            fh.write(f"{e}\t{loss!r}\n")
    (out / "train.json").write_text(json.dumps(
        {"run_config": cfg, "final_loss": result.losses[-1] if result.losses else None,
         "train_accuracy": result.train_accuracy}, indent=1, sort_keys=True))
    print(f"final loss {result.losses[-1] if result.losses else float('nan'):.5f}, "
          f"training accuracy {result.train_accuracy:.3f}; weights in {out / 'weights.npz'}")


def _folds_for(samples, args):
    ds = seqdata.Dataset(tuple(seqdata.Sample(s.id, s.sequence, s.label) for s in samples))
    return seqdata.stratified_folds(ds, args.folds, args.seed)


def _window(args, hp):
    if args.window is not None:
        return args.window
    # default: the last tenth of training
    return max(1, hp.epochs - hp.epochs // 10), hp.epochs


def cmd_crossval(args):
    samples = load_samples(args)
    hp = hyperparameters(args)
    folds = _folds_for(samples, args)
    window = _window(args, hp)
    progress = (lambda f, e: log.info("fold %d epoch %d", f, e)) if args.verbose else None
    report = evaluation.cross_validate(samples, hp, folds, window, args.every, progress)
    out = _out_dir(args)
    doc = json.loads(report.to_json())
    doc["run_config"] = run_config(args)
    (out / "crossval.json").write_text(json.dumps(doc, indent=1, sort_keys=True))
    table = evaluation.format_table({"balanced": report.summary, "raw counts": report.raw_summary})
    (out / "crossval.txt").write_text(table + "\n")
    print(table)


def cmd_ablate(args):
    samples = load_samples(args)
    hp = hyperparameters(args)
    folds = _folds_for(samples, args)
    window = _window(args, hp)
    progress = (lambda v, f, e: log.info("%s fold %d epoch %d", v, f, e)) if args.verbose else None
    reports = evaluation.ablation_suite(samples, hp, folds, window, args.every, progress=progress)
    out = _out_dir(args)
    doc = {
        "run_config": run_config(args),
        "summary": evaluation._jsonable(evaluation.ablation_summary(reports)),
        "reports": {k: json.loads(r.to_json()) for k, r in reports.items()},
    }
    (out / "ablation.json").write_text(json.dumps(doc, indent=1, sort_keys=True))
    table = evaluation.format_table({k: r.summary for k, r in reports.items()})
    (out / "ablation.txt").write_text(table + "\n")
    print(table)


def cmd_predict(args):
    model = network.Model.load(args.weights)
    samples = load_samples(args, need_labels=False)
    labels, scores = model.predict(samples)
    out = Path(args.out)
    known = not args.fasta
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["id", "predicted", "score", "label"])
        for s, lab, sc in zip(samples, labels, scores):
            w.writerow([s.id, int(lab), repr(float(sc)), s.label if known else "NA"])
    print(f"wrote {len(samples)} predictions to {out}")


def cmd_trace(args):
    model = network.Model.load(args.weights)
    samples = load_samples(args, need_labels=False)
    wanted = set(args.id) if args.id else None
    chosen = [s for s in samples if wanted is None or s.id in wanted]
    if wanted and len(chosen) != len(wanted):
        missing = wanted - {s.id for s in chosen}
        raise ValidationError(f"unknown sample ids: {sorted(missing)}")
    out = _out_dir(args)
    for s in chosen:
        tr = trace.capture_trace(s, model)
        trace.write_trace_csv(tr, out, "cells")
        trace.write_trace_json(tr, out / f"{s.id}.trace.json")
    print(f"wrote traces for {len(chosen)} samples to {out}")


def _add_inputs(p, fasta=False):
    p.add_argument("--pos", type=Path, help="FASTA of positive (precursor) sequences")
    p.add_argument("--neg", type=Path, help="FASTA of negative sequences")
    if fasta:
        p.add_argument("--fasta", type=Path, help="unlabelled FASTA")
    p.add_argument("--vienna", type=Path, help="precomputed structures (Vienna format)")
    p.add_argument("--min-loop", type=int, default=3, help="minimum hairpin loop for the built-in folder")


def _add_cache(p):
    p.add_argument("--cache", type=Path, help="preprocessed cache file")


def _add_hp(p):
    d = network.Hyperparameters()
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--batch", type=int, default=d.batch_size)
    p.add_argument("--hidden", type=int, default=d.hidden_size)
    p.add_argument("--dropout", type=float, default=d.dropout_rate)
    p.add_argument("--lr", type=float, default=d.alpha, help="Adam step size")
    p.add_argument("--mode", choices=sorted(MODE_FLAGS), default="multimodal")
    p.add_argument("--palindrome", choices=("on", "off"), default="on")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="premir", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic positive/negative FASTA pair")
    p.add_argument("--n-pos", type=int, default=100)
    p.add_argument("--n-neg", type=int, default=300)
    p.add_argument("--min-len", type=int, default=70)
    p.add_argument("--max-len", type=int, default=90)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fold", help="fold sequences and write Vienna-style records")
    _add_inputs(p, fasta=True)
    p.add_argument("--out", type=Path, required=True, help="output structure file")
    p.set_defaults(func=cmd_fold)

    p = sub.add_parser("preprocess", help="fold, split and flip once; write a cache")
    _add_inputs(p)
    p.add_argument("--cache", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_preprocess)

    for name, func, helptext in (
        ("train", cmd_train, "train one model on all samples"),
        ("crossval", cmd_crossval, "k-fold cross-validation with window averaging"),
        ("ablate", cmd_ablate, "cross-validate model variants on shared folds"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_inputs(p)
        _add_cache(p)
        _add_hp(p)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=Path, required=True, help="output directory")
        if name != "train":
            p.add_argument("--folds", type=int, default=5)
            p.add_argument("--window", type=parse_window, default=None,
                           help="convergence window LO:HI (default: last tenth of the epochs)")
            p.add_argument("--every", type=int, default=10, help="snapshot interval outside the window")
        p.set_defaults(func=func)

    p = sub.add_parser("predict", help="score samples with trained weights")
    _add_inputs(p, fasta=True)
    _add_cache(p)
    p.add_argument("--weights", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output TSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("trace", help="export per-position LSTM cell states")
    _add_inputs(p, fasta=True)
    _add_cache(p)
    p.add_argument("--weights", type=Path, required=True)
    p.add_argument("--id", action="append", help="sample id to trace (repeatable; default all)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except (InvariantError, AssertionError, FloatingPointError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
