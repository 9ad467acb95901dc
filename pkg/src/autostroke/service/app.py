"""HTTP/WebSocket service around the engine.

REST endpoints take documents inline and are stateless.  The WebSocket
endpoint serves the interactive protocol: one Session per connection,
working on a private copy of the document the server was started with.
Suggestion results are computed on worker threads and posted back through
an asyncio queue, so slow synthesis never blocks frame ingestion.
"""

from __future__ import annotations

import asyncio
import base64
import io
import json
import logging
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..errors import SuggestionSuppressed
from ..imagery import ImageLoadError, ReferenceImage, load_reference
from ..model import (
    Document,
    _stroke_to_obj,
    document_from_json,
    document_to_json,
    load_document,
)
from ..region import livewire_path, mask_to_rle
from ..render import document_to_svg, render_document
from ..session import Session, SessionStateError, SuggestionSet, inference_report, run_batch
from .schemas import (
    ExemplarReport,
    InferRequest,
    InferResponse,
    RadiusReport,
    RegionReport,
    RenderRequest,
    RenderResponse,
    RlePayload,
    SynthRequest,
    SynthResponse,
)

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1


def _doc_from_payload(payload: dict) -> Document:
    return document_from_json(json.dumps(payload))


def _doc_to_payload(doc: Document) -> dict:
    return json.loads(document_to_json(doc))


def _suggestion_frame(seq: int, suggestion: SuggestionSet) -> dict:
    return {
        "type": "suggestion",
        "seq": seq,
        "set_id": suggestion.id,
        "strokes": [_stroke_to_obj(s) for s in suggestion.strokes],
        "region": mask_to_rle(suggestion.region.mask),
        "exemplar_ids": suggestion.exemplar_ids,
        "triple": list(suggestion.params_triple),
        "orientation_mode": suggestion.orientation_mode,
    }


class _Connection:
    """Per-socket state: the session and the dispatch table."""

    def __init__(self, session: Session, post):
        self.session = session
        self.post = post  # thread-safe frame sender

    def _pipeline_reporter(self, seq: int):
        def on_done(suggestion, superseded: bool) -> None:
            if superseded:
                self.post({"type": "no_suggestion", "seq": seq, "superseded": True})
            elif suggestion is None:
                self.post({"type": "no_suggestion", "seq": seq, "superseded": False})
            else:
                self.post(_suggestion_frame(seq, suggestion))

        return on_done

    # each handler returns frames to send immediately (async results go
    # through self.post)

    def handle(self, frame: dict) -> list[dict]:
        kind = frame.get("type")
        seq = frame.get("seq", -1)
        if not isinstance(seq, int):
            raise SessionStateError("seq must be an integer")
        handler = getattr(self, f"_on_{kind}", None)
        if handler is None:
            raise SessionStateError(f"unknown frame type {kind!r}")
        return handler(frame, seq)

    def _on_stroke_added(self, frame: dict, seq: int) -> list[dict]:
        stroke = frame.get("stroke")
        if not isinstance(stroke, dict) or "points" not in stroke:
            raise SessionStateError("stroke_added needs a stroke with points")
        committed = self.session.handle_stroke(stroke, on_done=self._pipeline_reporter(seq))
        return [{"type": "committed", "seq": seq, "ids": [committed.id], "indices": []}]

    def _on_resolve(self, frame: dict, seq: int) -> list[dict]:
        decision = frame.get("decision")
        pending = self.session.pending
        before = list(pending.strokes) if pending is not None else []
        ids = self.session.resolve_suggestions(decision, polygon=frame.get("polygon"))
        still = self.session.pending
        kept = {id(s) for s in still.strokes} if still is not None else set()
        indices = [i for i, s in enumerate(before) if id(s) not in kept] if ids else []
        return [
            {
                "type": "committed",
                "seq": seq,
                "ids": ids,
                "indices": indices,
                "remaining": len(still.strokes) if still is not None else 0,
            }
        ]

    def _on_set_params(self, frame: dict, seq: int) -> list[dict]:
        try:
            triple = (
                float(frame["spacing"]),
                float(frame.get("lightness", 0.0)),
                float(frame.get("gradient", 0.0)),
            )
        except (KeyError, TypeError, ValueError):
            raise SessionStateError("set_params needs numeric spacing/lightness/gradient")
        self.session.set_params(triple, on_done=self._pipeline_reporter(seq))
        return []

    def _on_edit_region(self, frame: dict, seq: int) -> list[dict]:
        self.session.edit_region_op(
            frame.get("op"),
            polygon=frame.get("polygon"),
            width=frame.get("width"),
            on_done=self._pipeline_reporter(seq),
        )
        return []

    def _on_edit_orientation(self, frame: dict, seq: int) -> list[dict]:
        kwargs = {}
        if "brush_radius" in frame:
            kwargs["brush_radius"] = float(frame["brush_radius"])
        self.session.edit_orientation(
            mode=frame.get("mode"),
            gesture=frame.get("gesture"),
            on_done=self._pipeline_reporter(seq),
            **kwargs,
        )
        return []

    def _on_toggle_autocomplete(self, frame: dict, seq: int) -> list[dict]:
        self.session.toggle_autocomplete(bool(frame.get("enabled")))
        return [{"type": "ack", "seq": seq, "op": "toggle_autocomplete"}]

    def _on_toggle_autocolor(self, frame: dict, seq: int) -> list[dict]:
        self.session.toggle_autocolor(bool(frame.get("enabled")))
        ids = frame.get("stroke_ids")
        if ids:
            self.session.autocolor_strokes([int(i) for i in ids])
            return [self._doc_ack(seq, "toggle_autocolor")]
        return [{"type": "ack", "seq": seq, "op": "toggle_autocolor"}]

    def _on_post_edit(self, frame: dict, seq: int) -> list[dict]:
        self.session.post_edit(
            [int(i) for i in frame.get("stroke_ids", [])],
            frame.get("property"),
            frame.get("value"),
        )
        return [self._doc_ack(seq, "post_edit")]

    def _on_undo(self, frame: dict, seq: int) -> list[dict]:
        self.session.undo()
        return [self._doc_ack(seq, "undo")]

    def _on_redo(self, frame: dict, seq: int) -> list[dict]:
        self.session.redo()
        return [self._doc_ack(seq, "redo")]

    def _on_batch_fill(self, frame: dict, seq: int) -> list[dict]:
        triple = None
        if frame.get("spacing") is not None:
            triple = (
                float(frame["spacing"]),
                float(frame.get("lightness", 0.0)),
                float(frame.get("gradient", 0.0)),
            )
        try:
            suggestion = self.session.batch_fill(
                exemplar_ids=frame.get("exemplar_ids"),
                triple=triple,
                region_rle=frame.get("region"),
                orientation_mode=frame.get("orientation_mode"),
                seed=frame.get("seed"),
            )
        except SuggestionSuppressed:
            suggestion = None
        if suggestion is None:
            return [{"type": "no_suggestion", "seq": seq, "superseded": False}]
        return [_suggestion_frame(seq, suggestion)]

    def _on_save(self, frame: dict, seq: int) -> list[dict]:
        path = self.session.save(frame.get("path"))
        return [{"type": "ack", "seq": seq, "op": "save", "path": path}]

    def _on_livewire(self, frame: dict, seq: int) -> list[dict]:
        try:
            sx, sy = (float(v) for v in frame["start"])
            ex, ey = (float(v) for v in frame["end"])
        except (KeyError, TypeError, ValueError):
            raise SessionStateError("livewire needs start and end [x, y] pairs")
        path = livewire_path(self.session.image, (sx, sy), (ex, ey))
        return [
            {
                "type": "livewire_path",
                "seq": seq,
                "path": [[float(x), float(y)] for x, y in path],
            }
        ]

    def _doc_ack(self, seq: int, op: str) -> dict:
        return {
            "type": "ack",
            "seq": seq,
            "op": op,
            "document": _doc_to_payload(self.session.doc),
        }


def create_app(
    doc_path: str | None = None,
    static_dir: str | None = None,
    base_seed: int = 0,
) -> FastAPI:
    """Build the service; ``doc_path`` is the document the socket serves."""
    app = FastAPI(title="autostroke", version="1.0")
    app.state.doc_path = doc_path
    app.state.base_seed = base_seed
    app.state.image_cache: dict[tuple[str, str | None], ReferenceImage] = {}

    def cached_image(doc: Document) -> ReferenceImage:
        key = (doc.image, doc.labels)
        if key not in app.state.image_cache:
            app.state.image_cache[key] = load_reference(doc.image, doc.labels)
        return app.state.image_cache[key]

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "protocol": PROTOCOL_VERSION}

    @app.get("/api/reference")
    def reference():
        if app.state.doc_path is None:
            return JSONResponse(status_code=404, content={"detail": "no document loaded"})
        try:
            doc = load_document(app.state.doc_path)
            image = cached_image(doc)
        except (OSError, ValueError, ImageLoadError) as exc:
            return JSONResponse(status_code=404, content={"detail": str(exc)})
        from PIL import Image
        from fastapi.responses import Response

        buf = io.BytesIO()
        Image.fromarray(image.rgb).save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.post("/api/synth", response_model=SynthResponse)
    def synth(req: SynthRequest):
        try:
            doc = _doc_from_payload(req.document)
            image = cached_image(doc)
        except (ValueError, KeyError, ImageLoadError) as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        try:
            doc, ids, suggestion = run_batch(
                doc,
                image=image,
                seed=req.seed,
                exemplar_ids=req.exemplar_ids,
                triple=req.triple(),
                region_rle=req.region.to_dict() if req.region else None,
                orientation_mode=req.orientation_mode,
                iterations=req.iterations,
                mu=req.mu,
            )
        except SuggestionSuppressed as exc:
            return SynthResponse(
                document=req.document, committed_ids=[], count=0, suppressed=str(exc)
            )
        except SessionStateError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        if suggestion is None:
            return SynthResponse(
                document=req.document,
                committed_ids=[],
                count=0,
                suppressed="no exemplar or empty synthesis",
            )
        return SynthResponse(
            document=_doc_to_payload(doc),
            committed_ids=ids,
            count=len(ids),
            region=RlePayload(**mask_to_rle(suggestion.region.mask)),
            triple=suggestion.params_triple,
            orientation_mode=suggestion.orientation_mode,
        )

    @app.post("/api/infer", response_model=InferResponse)
    def infer(req: InferRequest):
        try:
            doc = _doc_from_payload(req.document)
            image = cached_image(doc)
        except (ValueError, KeyError, ImageLoadError) as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        report = inference_report(doc, image=image, seed=app.state.base_seed)
        if report["exemplar"] is None:
            return InferResponse(exemplar=None)
        return InferResponse(
            exemplar=ExemplarReport(**report["exemplar"]),
            region=RegionReport(**report["region"]),
            orientation_mode=report["orientation_mode"],
            radius=RadiusReport(
                mode=report["radius"]["mode"],
                triple=tuple(report["radius"]["triple"]),
                r_squared=report["radius"]["r_squared"],
            ),
        )

    @app.post("/api/render", response_model=RenderResponse)
    def render(req: RenderRequest):
        try:
            doc = _doc_from_payload(req.document)
        except (ValueError, KeyError) as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        if req.format == "svg":
            markup = document_to_svg(doc, provenance=req.provenance)
            from ..render import canvas_size

            w, h = canvas_size(doc)
            return RenderResponse(format="svg", data=markup, width=w, height=h)
        img = render_document(doc, provenance=req.provenance)
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return RenderResponse(
            format="png",
            data=base64.b64encode(buf.getvalue()).decode("ascii"),
            width=img.width,
            height=img.height,
        )

    @app.websocket("/ws")
    async def socket(ws: WebSocket) -> None:
        await ws.accept()
        loop = asyncio.get_running_loop()
        outbox: asyncio.Queue = asyncio.Queue()

        def post(frame: dict) -> None:
            loop.call_soon_threadsafe(
                outbox.put_nowait, json.dumps(frame, separators=(",", ":"))
            )

        if app.state.doc_path is None:
            post({"type": "error", "seq": 0, "code": "no_document",
                  "message": "server started without a document"})
            await ws.send_text(await outbox.get())
            await ws.close()
            return
        try:
            base = load_document(app.state.doc_path)
            image = cached_image(base)
            # private copy so concurrent connections stay independent
            session = Session(
                document_from_json(document_to_json(base)),
                image=image,
                doc_path=app.state.doc_path,
                base_seed=app.state.base_seed,
            )
        except (OSError, ValueError, ImageLoadError) as exc:
            post({"type": "error", "seq": 0, "code": "load_failed", "message": str(exc)})
            await ws.send_text(await outbox.get())
            await ws.close()
            return

        conn = _Connection(session, post)
        post(
            {
                "type": "hello",
                "seq": 0,
                "protocol": PROTOCOL_VERSION,
                "document": _doc_to_payload(session.doc),
                "image": {"width": image.width, "height": image.height},
                "autocomplete": session.autocomplete_enabled,
                "autocolor": session.autocolor_enabled,
            }
        )

        async def pump() -> None:
            while True:
                await ws.send_text(await outbox.get())

        sender = asyncio.create_task(pump())
        try:
            while True:
                text = await ws.receive_text()
                seq = -1
                try:
                    frame = json.loads(text)
                    if not isinstance(frame, dict):
                        raise ValueError("frame must be a JSON object")
                    seq = frame.get("seq", -1)
                    replies = await asyncio.to_thread(conn.handle, frame)
                    for reply in replies:
                        post(reply)
                except (ValueError, KeyError, SessionStateError) as exc:
                    post(
                        {
                            "type": "error",
                            "seq": seq if isinstance(seq, int) else -1,
                            "code": "bad_request",
                            "message": str(exc),
                        }
                    )
                except Exception as exc:  # session must survive any frame
                    logger.exception("frame handling failed")
                    post(
                        {
                            "type": "error",
                            "seq": seq if isinstance(seq, int) else -1,
                            "code": "internal",
                            "message": str(exc),
                        }
                    )
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            session.toggle_autocomplete(False)  # cancels any running pipeline

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
