"""Command-line entry point: ``molnex <subcommand> ...``.

Exit codes: 0 success, 1 finished with per-item failures, 2 fatal error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

EXIT_OK, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2

log = logging.getLogger("molnex")


def _cfg(args, **overrides):
    from .config import load_config

    cfg = load_config(args.config)
    if args.seed is not None:
        overrides["seed"] = args.seed
    return cfg.with_values(**overrides) if overrides else cfg


def cmd_generate(args) -> int:
    from .dataset import generate_dataset

    over = {}
    if args.no_augment:
        over["augment"] = False
    summary = generate_dataset(args.smiles, args.out, _cfg(args, **over))
    print(f"wrote {summary.n_written} records, skipped {summary.n_skipped}")
    return EXIT_PARTIAL if summary.n_skipped else EXIT_OK


def cmd_train(args) -> int:
    from .train import train

    over = {}
    if args.steps is not None:
        over["steps"] = args.steps
    res = train(args.data, args.out, _cfg(args, **over), resume=args.resume)
    print(f"trained {res.steps} steps; checkpoint {res.checkpoint}")
    return EXIT_OK


def _image_paths(items) -> list[str]:
    paths = []
    for item in items:
        p = Path(item)
        if p.is_dir():
            paths += sorted(str(q) for q in p.iterdir() if q.suffix.lower() in (".png", ".jpg", ".jpeg"))
        elif p.suffix == ".txt":
            paths += [l.strip() for l in p.read_text().splitlines() if l.strip()]
        else:
            paths.append(str(p))
    return paths


def cmd_predict(args) -> int:
    from .predict import predict

    preds = predict(args.checkpoint, _image_paths(args.images), args.out, _cfg(args))
    if args.out is None:
        for p in preds:
            print(p.smiles if p.ok else f"# {p.image}: failed at {p.stage}: {p.error}")
    failed = sum(not p.ok for p in preds)
    print(f"{len(preds) - failed}/{len(preds)} images converted", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_evaluate(args) -> int:
    from .evaluate import evaluate

    report = evaluate(args.predictions, args.truth)
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n")
    print(f"exact match {report.n_exact}/{report.n_total} = {report.accuracy:.4f} (excluded {report.n_excluded})")
    return EXIT_OK


def cmd_expand(args) -> int:
    from ..abbrev import expand_superatom, load_dictionary
    from ..chemio import canonical_smiles

    dictionary = load_dictionary(args.dictionary)
    bad = 0
    for label in args.labels:
        res = expand_superatom(label, dictionary, args.sigma)
        if res.fragment is None:
            bad += 1
            print(f"{label}\t{res.provenance.value}")
            continue
        sim = "" if res.similarity is None else f"{res.similarity:.4f}"
        print(f"{label}\t{res.provenance.value}\t{res.matched or ''}\t{sim}\t{canonical_smiles(res.fragment)}")
    return EXIT_PARTIAL if bad else EXIT_OK


def cmd_canonicalize(args) -> int:
    from ..chemio import canonicalize

    src = open(args.input) if args.input else sys.stdin
    bad = 0
    with src:
        for line in src:
            s = line.strip()
            if not s:
                continue
            try:
                print(canonicalize(s.split()[0]))
            except Exception as exc:
                bad += 1
                print(f"# {s}: {exc}", file=sys.stderr)
                print("")
    return EXIT_PARTIAL if bad else EXIT_OK


def cmd_render(args) -> int:
    import numpy as np

    from ..chemio import smiles_parse
    from ..depict import CANVAS, StyleParams, fit_to_canvas, layout_2d, render, sample_style, save_png

    g = smiles_parse(args.smiles)
    size = (args.size, args.size)
    cfg = _cfg(args)
    style = sample_style(np.random.default_rng(cfg.seed), size) if args.random_style else StyleParams(
        bond_length_px=36.0 * args.size / CANVAS, image_size=size
    )
    coords = fit_to_canvas(g, layout_2d(g, seed=cfg.seed), style)
    save_png(render(g, coords, style), args.out)
    print(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="molnex", description="Chemical structure images to molecular graphs.")
    p.add_argument("--seed", type=int, default=None, help="global seed (overrides the config file)")
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render a synthetic dataset from a SMILES file")
    g.add_argument("smiles")
    g.add_argument("out")
    g.add_argument("--no-augment", action="store_true", help="clean renders only")
    g.set_defaults(fn=cmd_generate)

    t = sub.add_parser("train", help="train on a generated dataset")
    t.add_argument("data")
    t.add_argument("out")
    t.add_argument("--steps", type=int, default=None)
    t.add_argument("--resume", default=None, help="checkpoint to continue from")
    t.set_defaults(fn=cmd_train)

    pr = sub.add_parser("predict", help="convert images to SMILES and MOLfiles")
    pr.add_argument("checkpoint")
    pr.add_argument("images", nargs="+", help="image files, directories, or .txt lists")
    pr.add_argument("--out", default=None, help="directory for predictions.smi/.jsonl and MOLfiles")
    pr.set_defaults(fn=cmd_predict)

    e = sub.add_parser("evaluate", help="exact-match accuracy of predictions against ground truth")
    e.add_argument("predictions")
    e.add_argument("truth")
    e.add_argument("--report", default=None, help="write the full report as JSON")
    e.set_defaults(fn=cmd_evaluate)

    x = sub.add_parser("expand", help="expand superatom labels")
    x.add_argument("labels", nargs="+")
    x.add_argument("--dictionary", default=None)
    x.add_argument("--sigma", type=float, default=0.8)
    x.set_defaults(fn=cmd_expand)

    c = sub.add_parser("canonicalize", help="canonical SMILES for each input line")
    c.add_argument("input", nargs="?", default=None)
    c.set_defaults(fn=cmd_canonicalize)

    r = sub.add_parser("render", help="draw one SMILES to a PNG")
    r.add_argument("smiles")
    r.add_argument("out")
    r.add_argument("--size", type=int, default=384)
    r.add_argument("--random-style", action="store_true")
    r.set_defaults(fn=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except KeyboardInterrupt:
        return EXIT_FATAL
    except Exception as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        if args.verbose:
            raise
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
