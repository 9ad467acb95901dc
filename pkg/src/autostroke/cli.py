"""Command line entry points: batch synthesis, inference reports, rendering.

Exit codes: 0 success, 1 the pipeline declined to produce anything
(no exemplar, empty region, empty synthesis), 2 bad input or I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import SuggestionSuppressed
from .imagery import ImageLoadError, load_reference
from .model import load_document, save_document
from .region import mask_to_rle, rle_to_mask
from .render import render_to_png, save_render
from .session import SessionStateError, inference_report, run_batch

OK, SUPPRESSED, INVALID = 0, 1, 2


def _load_region_mask(path: str) -> dict:
    """Read a region mask as RLE: either an RLE JSON file or an image file
    where nonzero pixels are inside."""
    p = Path(path)
    if p.suffix.lower() == ".json":
        payload = json.loads(p.read_text(encoding="utf-8"))
        rle_to_mask(payload)  # validates
        return payload
    from PIL import Image

    with Image.open(p) as im:
        mask = np.asarray(im.convert("L")) > 0
    return mask_to_rle(mask)


def _triple_from_args(args) -> tuple[float, float, float] | None:
    if args.spacing is None:
        if args.lightness is not None or args.gradient is not None:
            raise SessionStateError("--lightness/--gradient need --spacing")
        return None
    return (args.spacing, args.lightness or 0.0, args.gradient or 0.0)


def cmd_synth(args) -> int:
    doc = load_document(args.document)
    if args.image:
        doc.image = args.image
    image = load_reference(doc.image, doc.labels)
    region_rle = _load_region_mask(args.region_mask) if args.region_mask else None
    exemplar_ids = (
        [int(t) for t in args.exemplar_ids.split(",")] if args.exemplar_ids else None
    )
    doc, ids, _ = run_batch(
        doc,
        image=image,
        seed=args.seed,
        exemplar_ids=exemplar_ids,
        triple=_triple_from_args(args),
        region_rle=region_rle,
        orientation_mode=args.orientation,
        iterations=args.iterations,
        mu=args.mu,
    )
    if not ids:
        print("no suggestion produced", file=sys.stderr)
        return SUPPRESSED
    save_document(doc, args.out)
    render_path = args.render_out or str(Path(args.out).with_suffix(".png"))
    render_to_png(doc, render_path, provenance=args.provenance)
    print(
        json.dumps(
            {"committed": len(ids), "document": args.out, "render": render_path}
        )
    )
    return OK


def cmd_infer(args) -> int:
    doc = load_document(args.document)
    if args.image:
        doc.image = args.image
    image = load_reference(doc.image, doc.labels)
    report = inference_report(doc, image=image, seed=args.seed)
    print(json.dumps(report, indent=2, sort_keys=True))
    return OK


def cmd_render(args) -> int:
    doc = load_document(args.document)
    save_render(doc, args.out, provenance=args.provenance)
    print(args.out)
    return OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    doc = load_document(args.document)  # fail fast on a bad document
    load_reference(doc.image, doc.labels)
    app = create_app(
        doc_path=args.document, static_dir=args.static, base_seed=args.seed
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autostroke", description="stroke autocomplete engine"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="run one batch synthesis and commit it")
    synth.add_argument("document", help="input document JSON")
    synth.add_argument("--out", required=True, help="output document JSON path")
    synth.add_argument("--image", help="override the document's reference image path")
    synth.add_argument("--render-out", help="rendered PNG path (default: out with .png)")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--iterations", type=int, default=None)
    synth.add_argument("--mu", type=float, default=None)
    synth.add_argument("--spacing", type=float, default=None)
    synth.add_argument("--lightness", type=float, default=None)
    synth.add_argument("--gradient", type=float, default=None)
    synth.add_argument("--region-mask", help="region as RLE JSON or nonzero-pixel image")
    synth.add_argument("--exemplar-ids", help="comma-separated stroke ids to use as the exemplar")
    synth.add_argument("--orientation", choices=["global", "flow"], default=None)
    synth.add_argument("--provenance", action="store_true",
                       help="color the render by stroke provenance")
    synth.set_defaults(func=cmd_synth)

    infer = sub.add_parser("infer", help="print the inference report as JSON")
    infer.add_argument("document")
    infer.add_argument("--image", help="override the document's reference image path")
    infer.add_argument("--seed", type=int, default=0)
    infer.set_defaults(func=cmd_infer)

    render = sub.add_parser("render", help="rasterize a document to PNG or SVG")
    render.add_argument("document")
    render.add_argument("out", help="output path; .png or .svg")
    render.add_argument("--provenance", action="store_true",
                        help="manual strokes black, autocompleted red")
    render.set_defaults(func=cmd_render)

    serve = sub.add_parser("serve", help="serve the UI and session socket")
    serve.add_argument("document")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--static", default=None, help="static assets directory")
    serve.add_argument("--seed", type=int, default=0)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SuggestionSuppressed as exc:
        print(f"suppressed: {exc}", file=sys.stderr)
        return SUPPRESSED
    except (OSError, ValueError, KeyError, ImageLoadError, SessionStateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INVALID


if __name__ == "__main__":
    sys.exit(main())
