"""Command-line entry point: evaluation, detection, captioning, statistics,
subsetting, serving, and an offline chat REPL.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ForestLabError
from .metrics import EvalReport

TABLE_COLUMNS = ("mIoU", "IoU_nc", "IoU_c", "B1", "B2", "B3", "B4",
                 "METEOR", "ROUGE_L", "CIDEr-D")


# --- report rendering ---------------------------------------------------------------

def _fmt(value, decimals: int = 2) -> str:
    return "-" if value is None else f"{value:.{decimals}f}"


def emit_report(report: EvalReport, format: str = "table") -> str:
    """Render an EvalReport; `table` mirrors the standard benchmark layout
    (detection columns first, caption columns after, "-" for absent channels),
    `record` is machine-readable JSON.
    """
    if format == "record":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True)
    seg, cap = report.seg, report.cap
    values = [
        _fmt(seg.miou if seg else None),
        _fmt(seg.iou_nc if seg else None),
        _fmt(seg.iou_c if seg else None),
        _fmt(cap.b1 if cap else None),
        _fmt(cap.b2 if cap else None),
        _fmt(cap.b3 if cap else None),
        _fmt(cap.b4 if cap else None),
        _fmt(cap.meteor if cap else None),
        _fmt(cap.rouge_l if cap else None),
        _fmt(cap.cider_d if cap else None),
    ]
    label = "dataset"
    name = report.dataset_id
    widths = [max(len(label), len(name))] + [
        max(len(h), len(v)) for h, v in zip(TABLE_COLUMNS, values)]
    header = "  ".join(s.ljust(w) for s, w in
                       zip((label,) + TABLE_COLUMNS, widths))
    row = "  ".join(s.ljust(w) for s, w in zip([name] + values, widths))
    lines = [header.rstrip(), row.rstrip()]
    for note in report.notes:
        lines.append(f"# {note}")
    return "\n".join(lines)


# --- subcommand implementations --------------------------------------------------------

def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _cmd_eval(args) -> int:
    from .pipeline import evaluate_manifest
    split = None if args.split == "all" else args.split
    report = evaluate_manifest(args.manifest, pred_dir=args.pred_dir,
                               captions=args.captions, split=split,
                               include_per_pair=args.per_pair)
    _write_or_print(emit_report(report, args.format), args.out)
    return 0


def _cmd_detect(args) -> int:
    from .analytics import compare_masks, compute_stats
    from .metrics import iou_from_confusion
    from .perception import DetectionParams, Direction, detect_changes
    from .raster import (load_image_pair, load_mask, binarize_mask,
                         render_comparison_overlay, save_mask, save_raster)

    pair = load_image_pair(args.image_a, args.image_b)
    params = DetectionParams(kernel_radius=args.kernel_radius,
                             min_area_px=args.min_area,
                             direction=Direction(args.direction))
    result = detect_changes(pair, params)
    stats = compute_stats(result.mask)
    print(f"change: {stats.change_percent:.2f} percent in "
          f"{stats.num_patches} patches")
    if result.warning:
        print(f"warning: {result.warning}")
    if args.out_mask:
        save_mask(result.mask, args.out_mask)
        print(f"mask written to {args.out_mask}")
    reference = binarize_mask(load_mask(args.mask)) if args.mask else result.mask
    if args.mask:
        scores = iou_from_confusion(compare_masks(reference, result.mask))
        print(f"against reference: iou_c={_fmt(scores.iou_c)} "
              f"miou={_fmt(scores.miou)}")
    if args.out_overlay:
        overlay = render_comparison_overlay(reference, result.mask,
                                            base=pair.epoch_a)
        save_raster(overlay, args.out_overlay)
        print(f"overlay written to {args.out_overlay}")
    return 0


def _cmd_caption(args) -> int:
    from .analytics import compute_stats
    from .captions import generate_rule_captions
    from .raster import binarize_mask, load_mask

    mask = binarize_mask(load_mask(args.mask))
    captions = generate_rule_captions(compute_stats(mask),
                                      pair_id=Path(args.mask).stem)
    for caption in captions.captions:
        print(caption.text)
    return 0


def _cmd_stats(args) -> int:
    from .datasets import corpus_statistics, load_manifest
    from .pipeline import _restrict

    dataset = load_manifest(args.manifest, root_override=args.data_root)
    if args.split != "all":
        dataset = _restrict(dataset, args.split)
    stats = corpus_statistics(dataset)
    if args.format == "record":
        _write_or_print(json.dumps(stats.to_dict(), indent=2, sort_keys=True),
                        args.out)
        return 0
    lines = [f"dataset: {dataset.id}"]
    for name in ("train", "val", "test", "total"):
        lines.append(f"pairs[{name}]: {stats.n_pairs.get(name, 0)}")
    lines.append(f"coverage mean: {stats.coverage_mean:.2f} percent")
    lines.append(f"coverage max: {stats.coverage_max:.2f} percent")
    lines.append("coverage histogram (5 percent bins): "
                 + " ".join(str(c) for c in stats.coverage_histogram))
    lines.append(f"caption length mean: {stats.caption_length_mean:.2f} tokens")
    lines.append(f"vocabulary: {stats.vocabulary_size} words")
    _write_or_print("\n".join(lines), args.out)
    return 0


def _cmd_subset(args) -> int:
    from .datasets import (DEFAULT_TREE_KEYWORDS, build_levir_trees_manifest,
                           save_manifest)

    keywords = (frozenset(args.keywords) if args.keywords
                else DEFAULT_TREE_KEYWORDS)
    subset = build_levir_trees_manifest(args.manifest, keywords)
    for name in ("train", "val", "test"):
        print(f"{name}: {len(subset.split_ids(name))} pairs")
    print(f"total: {len(subset.entries)} pairs")
    if args.out:
        save_manifest(subset, args.out)
        print(f"manifest written to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(data_root=args.data_root, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port,
                log_level="debug" if args.verbose else "info")
    return 0


def _run_chat_turn(session, message: str, planner: str, out) -> None:
    from .agent.session import respond

    record = respond(session, message, planner=planner)
    out.write(f"> {message}\n")
    plan_names = ", ".join(c.tool for c in record.calls) or "(no tools)"
    out.write(f"plan: {plan_names}\n")
    out.write(record.answer + "\n\n")


def _cmd_chat(args) -> int:
    from .agent.session import Session, respond
    from .raster import binarize_mask, load_image_pair, load_mask

    session = Session()
    if args.image_a and args.image_b:
        session.attach_pair(load_image_pair(args.image_a, args.image_b))
    if args.mask:
        session.attach_reference_mask(binarize_mask(load_mask(args.mask)))

    if args.script:
        for line in Path(args.script).read_text().splitlines():
            message = line.strip()
            if not message or message.startswith("#"):
                continue
            _run_chat_turn(session, message, args.planner, sys.stdout)
        return 0
    print(f"forestlab chat ({args.planner} planner; 'exit' to quit)")
    while True:
        try:
            message = input("> ").strip()
        except EOFError:
            break
        if message in ("exit", "quit"):
            break
        if not message:
            continue
        record = respond(session, message, planner=args.planner)
        plan_names = ", ".join(c.tool for c in record.calls) or "(no tools)"
        sys.stdout.write(f"plan: {plan_names}\n{record.answer}\n")
    return 0


# --- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forestlab",
        description="Forest-change analysis workbench: detection, captioning, "
                    "metrics, datasets, agent chat, and serving.",
        epilog="LLM planner environment variables: FORESTLAB_LLM_BASE_URL, "
               "FORESTLAB_LLM_MODEL, FORESTLAB_LLM_API_KEY, "
               "FORESTLAB_LLM_TIMEOUT.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="score predictions/captions against a "
                                    "manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred-dir")
    p.add_argument("--captions")
    p.add_argument("--split", default="test",
                   help="train, val, test, or all (default: test)")
    p.add_argument("--format", choices=("table", "record"), default="table")
    p.add_argument("--per-pair", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("detect", help="run classical change detection on a "
                                      "pair")
    p.add_argument("--image-a", required=True)
    p.add_argument("--image-b", required=True)
    p.add_argument("--mask", help="optional reference mask for comparison")
    p.add_argument("--out-mask")
    p.add_argument("--out-overlay")
    p.add_argument("--kernel-radius", type=int, default=1)
    p.add_argument("--min-area", type=int, default=16)
    p.add_argument("--direction", choices=("loss", "gain", "both"),
                   default="loss")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("caption", help="generate the four rule captions for "
                                       "a mask")
    p.add_argument("--mask", required=True)
    p.set_defaults(func=_cmd_caption)

    p = sub.add_parser("stats", help="corpus statistics for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="all")
    p.add_argument("--format", choices=("table", "record"), default="table")
    p.add_argument("--data-root", help="override the manifest root directory")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("subset", help="derive the tree-keyword subset of a "
                                      "manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--keywords", nargs="*",
                   help="whole-token keywords (default: built-in tree set)")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_subset)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--data-root")
    p.add_argument("--ui-dir")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("chat", help="offline chat REPL (deterministic "
                                    "planner by default)")
    p.add_argument("--image-a")
    p.add_argument("--image-b")
    p.add_argument("--mask")
    p.add_argument("--script", help="file of messages, one per line")
    p.add_argument("--planner", choices=("deterministic", "llm"),
                   default="deterministic")
    p.set_defaults(func=_cmd_chat)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except ForestLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
