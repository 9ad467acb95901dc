"""Live drawing session: history, the suggestion pipeline, and undo/redo.

Every finished stroke triggers the inference pipeline (exemplar, region,
orientation, radius) and synthesis in a cancellable background job; the
newest stroke always supersedes a running job.  User edits to the region,
spacing triple, or orientation persist as session context and re-run
synthesis on the last inferred exemplar.  Undo restores full snapshots
(document plus session context), so round-trips are byte-identical.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, replace

import numpy as np

from .constraints import (
    OrientationMap,
    OrientationMode,
    apply_gesture,
    fit_radius_model,
    infer_orientation,
    radius_from_params,
)
from .errors import PipelineCancelled, SuggestionSuppressed
from .grouping import GroupingParams, infer_exemplar
from .imagery import FlowField, ReferenceImage, compute_etf, load_reference
from .model import (
    Document,
    Stroke,
    StrokePoint,
    StrokeSource,
    document_from_json,
    document_to_json,
    save_document,
    summarize,
)
from .region import RegionMask, edit_region, infer_region, mask_to_rle, rle_to_mask
from .synthesis import SynthesisContext, synthesize

logger = logging.getLogger(__name__)

DEFAULT_GESTURE_BRUSH = 16.0


class SessionStateError(ValueError):
    """An operation that needs state the session does not have."""


@dataclass
class SuggestionSet:
    """One batch of suggested strokes awaiting a decision.

    Stroke ids inside a pending set are provisional (0..n-1); document ids
    are assigned at commit time.
    """

    id: int
    strokes: list[Stroke]
    exemplar_ids: list[int]
    region: RegionMask
    params_triple: tuple[float, float, float]
    orientation_mode: str
    layer_id: int
    seed: int
    state: str = "pending"  # pending | superseded | resolved


@dataclass
class _Trigger:
    cancel: threading.Event
    on_done: object = None  # callable(suggestion | None, superseded: bool)
    finished: bool = False
    thread: threading.Thread | None = None


@dataclass
class _Inference:
    exemplar_ids: list[int]
    region: RegionMask
    orientation: OrientationMap
    triple: tuple[float, float, float]


def point_in_polygon(points: np.ndarray, polygon: list[tuple[float, float]]) -> np.ndarray:
    """Even-odd rule membership test for an (N, 2) array of points."""
    pts = np.asarray(points, dtype=np.float64)
    poly = np.asarray(polygon, dtype=np.float64)
    inside = np.zeros(len(pts), dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        crosses = ((y1 > pts[:, 1]) != (y2 > pts[:, 1])) & (
            pts[:, 0] < (x2 - x1) * (pts[:, 1] - y1) / (y2 - y1 + 1e-300) + x1
        )
        inside ^= crosses
    return inside


class Session:
    """Owns one document and the interactive autocomplete loop around it."""

    def __init__(
        self,
        document: Document,
        image: ReferenceImage | None = None,
        doc_path: str | None = None,
        base_seed: int = 0,
        synchronous: bool = False,
    ):
        self.doc = document
        self.doc_path = doc_path
        self.image = image if image is not None else load_reference(document.image, document.labels)
        self.base_flow = compute_etf(self.image)
        self.base_seed = int(base_seed)
        self.synchronous = synchronous

        # resume on the first layer that has work on it
        self.active_layer_id = next(
            (ly.id for ly in document.layers if ly.strokes), document.layers[0].id
        )
        self.autocomplete_enabled = True
        self.autocolor_enabled = False
        self.pending: SuggestionSet | None = None
        self.provenance: dict[int, int] = {}

        # user-set constraint context; None means "infer"
        self._region: RegionMask | None = None
        self._triple: tuple[float, float, float] | None = None
        self._orientation_override: str | None = None
        self._flow_edits: list[tuple[list[tuple[float, float]], float]] = []
        self._flow_cache: FlowField | None = None
        self._last_inference: _Inference | None = None

        self.log: list[dict] = []
        self._undo_stack: list[tuple[str, str, str]] = []  # (label, before, after)
        self._redo_stack: list[tuple[str, str, str]] = []

        self._lock = threading.RLock()
        self._trigger: _Trigger | None = None
        self._trigger_count = 0
        self._suggestion_count = 0

    # ------------------------------------------------------------------ state

    def _active_layer(self):
        return self.doc.layer_by_id(self.active_layer_id)

    def current_flow(self) -> FlowField:
        """Base edge tangent field with all gesture edits replayed."""
        if self._flow_cache is None:
            flow = self.base_flow
            for gesture, brush in self._flow_edits:
                flow = apply_gesture(flow, gesture, brush)
            self._flow_cache = flow
        return self._flow_cache

    def _snapshot(self) -> str:
        ctx = {
            "document": document_to_json(self.doc),
            "region": mask_to_rle(self._region.mask) if self._region is not None else None,
            "region_provenance": self._region.provenance if self._region else None,
            "triple": list(self._triple) if self._triple is not None else None,
            "orientation_override": self._orientation_override,
            "flow_edits": [[g, b] for g, b in self._flow_edits],
            "autocolor": self.autocolor_enabled,
            "provenance": {str(k): v for k, v in self.provenance.items()},
        }
        return json.dumps(ctx, separators=(",", ":"))

    def _restore(self, snapshot: str) -> None:
        ctx = json.loads(snapshot)
        self.doc = document_from_json(ctx["document"])
        if ctx["region"] is not None:
            self._region = RegionMask(
                mask=rle_to_mask(ctx["region"]),
                provenance=ctx["region_provenance"] or "inferred",
            )
        else:
            self._region = None
        self._triple = tuple(ctx["triple"]) if ctx["triple"] is not None else None
        self._orientation_override = ctx["orientation_override"]
        self._flow_edits = [
            ([(float(x), float(y)) for x, y in gesture], float(brush))
            for gesture, brush in ctx["flow_edits"]
        ]
        self._flow_cache = None
        self.autocolor_enabled = ctx["autocolor"]
        self.provenance = {int(k): v for k, v in ctx["provenance"].items()}
        if self.active_layer_id not in {ly.id for ly in self.doc.layers}:
            self.active_layer_id = self.doc.layers[0].id

    def _commit_op(self, label: str, before: str, detail: dict | None = None) -> None:
        """Record an undoable mutation that already happened."""
        after = self._snapshot()
        self._undo_stack.append((label, before, after))
        self._redo_stack.clear()
        self.log.append({"op": label, **(detail or {})})

    # ------------------------------------------------------------- undo/redo

    def undo(self) -> None:
        with self._lock:
            if not self._undo_stack:
                raise SessionStateError("nothing to undo")
            self._cancel_running()
            label, before, after = self._undo_stack.pop()
            self._redo_stack.append((label, before, after))
            self._restore(before)
            self._drop_pending()
            self.log.append({"op": "undo", "of": label})

    def redo(self) -> None:
        with self._lock:
            if not self._redo_stack:
                raise SessionStateError("nothing to redo")
            self._cancel_running()
            label, before, after = self._redo_stack.pop()
            self._undo_stack.append((label, before, after))
            self._restore(after)
            self._drop_pending()
            self.log.append({"op": "redo", "of": label})

    def _drop_pending(self) -> None:
        if self.pending is not None:
            self.pending.state = "resolved"
            self.pending = None

    # ---------------------------------------------------------------- strokes

    def _coerce_stroke(self, data: Stroke | dict) -> Stroke:
        if isinstance(data, Stroke):
            stroke = replace(data, id=self.doc.next_stroke_id())
        else:
            base_t = self.doc.max_t() + 1.0
            points = []
            for entry in data["points"]:
                x, y = float(entry[0]), float(entry[1])
                t = float(entry[2]) if len(entry) > 2 else base_t
                pressure = float(entry[3]) if len(entry) > 3 else 1.0
                points.append(StrokePoint(x, y, t, pressure))
            color = tuple(int(c) for c in data.get("color", (0, 0, 0, 255)))
            stroke = Stroke(
                id=self.doc.next_stroke_id(),
                points=points,
                width=float(data.get("width", 2.0)),
                color=color,  # type: ignore[arg-type]
                source=StrokeSource.MANUAL,
            )
        if self.autocolor_enabled:
            stroke = self._autocolored(stroke)
        return stroke

    def _autocolored(self, stroke: Stroke) -> Stroke:
        cx, cy = summarize(stroke).centroid
        r, g, b = self.image.rgb_at(cx, cy)
        return replace(stroke, color=(r, g, b, stroke.color[3]))

    def handle_stroke(self, data: Stroke | dict, on_done=None) -> Stroke:
        """Append a finished stroke and (re)start the suggestion pipeline.

        Returns the stroke as committed to the document (with its assigned
        id).  The pipeline outcome is reported through ``on_done(suggestion,
        superseded)`` exactly once per trigger; in synchronous mode the
        pipeline has finished (and ``pending`` is current) on return.
        """
        with self._lock:
            before = self._snapshot()
            stroke = self._coerce_stroke(data)
            self._active_layer().strokes.append(stroke)
            self._commit_op("add_stroke", before, {"stroke_id": stroke.id})
            self._cancel_running()
            if not self.autocomplete_enabled:
                if on_done is not None:
                    on_done(None, False)
                return stroke
            trigger = _Trigger(cancel=threading.Event(), on_done=on_done)
            self._trigger = trigger
            self._trigger_count += 1
            seed = self.base_seed + self._trigger_count
        if self.synchronous:
            self._run_trigger(trigger, seed)
            return stroke
        thread = threading.Thread(
            target=self._run_trigger, args=(trigger, seed), daemon=True
        )
        trigger.thread = thread
        thread.start()
        return stroke

    def _cancel_running(self) -> None:
        trigger = self._trigger
        if trigger is None:
            return
        trigger.cancel.set()
        done_cb = None
        with self._lock:
            if not trigger.finished:
                trigger.finished = True
                done_cb = trigger.on_done
        if done_cb is not None:
            done_cb(None, True)

    def _run_trigger(self, trigger: _Trigger, seed: int) -> SuggestionSet | None:
        try:
            suggestion = self._compute_suggestion(trigger.cancel, seed)
        except PipelineCancelled:
            suggestion = None
        except SuggestionSuppressed:
            suggestion = None
        except Exception:
            logger.exception("suggestion pipeline failed; suppressing")
            suggestion = None
        with self._lock:
            if trigger.finished or trigger.cancel.is_set():
                return None
            trigger.finished = True
            if self._trigger is trigger:
                self._trigger = None
            if suggestion is not None:
                if self.pending is not None:
                    self.pending.state = "superseded"
                self.pending = suggestion
            done_cb = trigger.on_done
        if done_cb is not None:
            done_cb(suggestion, False)
        return suggestion

    def wait_idle(self, timeout: float = 30.0) -> None:
        trigger = self._trigger
        if trigger is not None and trigger.thread is not None:
            trigger.thread.join(timeout)

    # --------------------------------------------------------------- pipeline

    def _compute_suggestion(
        self, cancel: threading.Event, seed: int
    ) -> SuggestionSet | None:
        with self._lock:
            strokes = list(self._active_layer().strokes)
            layer_id = self.active_layer_id
            params = dict(self.doc.params)
            user_region = self._region
            user_triple = self._triple
        grouping = GroupingParams.from_params(params)
        exemplar = infer_exemplar(strokes, self.image, grouping)
        if exemplar is None:
            return None
        if cancel.is_set():
            raise PipelineCancelled("superseded during grouping")

        if user_region is not None and user_region.provenance == "user_edited":
            region = user_region
        else:
            region = infer_region(
                self.image, exemplar, seed=self.base_seed, should_cancel=cancel.is_set
            )
        if cancel.is_set():
            raise PipelineCancelled("superseded during region inference")

        orientation = self._resolve_orientation(exemplar)
        if user_triple is not None:
            radius = radius_from_params(self.image, user_triple)
        else:
            radius, _ = fit_radius_model(exemplar, self.image)

        ctx = SynthesisContext(
            exemplar=exemplar,
            image=self.image,
            mask=region.mask,
            orientation=orientation,
            radius=radius,
            existing=strokes,
            seed=seed,
            iterations=int(params.get("iterations", 15)),
            mu=float(params.get("mu", 0.1)),
            n_in=int(params.get("n_in", 4)),
            n_out=int(params.get("n_out", 1)),
            should_cancel=cancel.is_set,
        )
        result = synthesize(ctx)
        if not result.strokes:
            return None
        with self._lock:
            self._suggestion_count += 1
            suggestion = SuggestionSet(
                id=self._suggestion_count,
                strokes=result.strokes,
                exemplar_ids=[s.id for s in exemplar.strokes],
                region=region,
                params_triple=radius.params,
                orientation_mode=orientation.mode.value,
                layer_id=layer_id,
                seed=seed,
            )
            self._last_inference = _Inference(
                exemplar_ids=suggestion.exemplar_ids,
                region=region,
                orientation=orientation,
                triple=radius.params,
            )
        return suggestion

    def _resolve_orientation(self, exemplar) -> OrientationMap:
        flow = self.current_flow()
        if self._orientation_override == "global":
            return OrientationMap(mode=OrientationMode.GLOBAL)
        if self._orientation_override == "flow":
            return OrientationMap(mode=OrientationMode.FLOW, field=flow)
        return infer_orientation(exemplar, flow)

    # ------------------------------------------------------------ resolutions

    def resolve_suggestions(
        self, decision: str, polygon: list[tuple[float, float]] | None = None
    ) -> list[int]:
        """Commit or discard pending strokes; returns committed document ids."""
        with self._lock:
            if self.pending is None:
                raise SessionStateError("no pending suggestions")
            pending = self.pending
            if decision == "reject_all":
                pending.state = "resolved"
                self.pending = None
                self.log.append({"op": "reject_suggestions", "set": pending.id})
                return []
            if decision == "accept_all":
                chosen = list(range(len(pending.strokes)))
            elif decision == "accept_lasso":
                if not polygon or len(polygon) < 3:
                    raise SessionStateError("lasso decision needs a polygon")
                centroids = np.array(
                    [summarize(s).centroid for s in pending.strokes]
                )
                chosen = list(np.nonzero(point_in_polygon(centroids, polygon))[0])
            else:
                raise SessionStateError(f"unknown decision {decision!r}")
            if not chosen:
                return []

            before = self._snapshot()
            layer = self.doc.layer_by_id(pending.layer_id)
            base_t = self.doc.max_t()
            committed: list[int] = []
            chosen_set = set(int(i) for i in chosen)
            for j, idx in enumerate(sorted(chosen_set)):
                src = pending.strokes[idx]
                new_id = self.doc.next_stroke_id()
                points = [
                    StrokePoint(p.x, p.y, base_t + j + 1.0, p.pressure)
                    for p in src.points
                ]
                layer.strokes.append(
                    Stroke(
                        id=new_id,
                        points=points,
                        width=src.width,
                        color=src.color,
                        source=StrokeSource.AUTOCOMPLETED,
                    )
                )
                self.provenance[new_id] = pending.id
                committed.append(new_id)
            remaining = [
                s for i, s in enumerate(pending.strokes) if i not in chosen_set
            ]
            if remaining:
                pending.strokes = remaining
            else:
                pending.state = "resolved"
                self.pending = None
            self._commit_op(
                "accept_suggestions",
                before,
                {"set": pending.id, "committed": committed},
            )
            return committed

    # ------------------------------------------------------------- auxiliary

    def toggle_autocomplete(self, enabled: bool) -> None:
        with self._lock:
            self.autocomplete_enabled = bool(enabled)
            if not enabled:
                self._cancel_running()
            self.log.append({"op": "toggle_autocomplete", "enabled": bool(enabled)})

    def toggle_autocolor(self, enabled: bool) -> None:
        with self._lock:
            before = self._snapshot()
            self.autocolor_enabled = bool(enabled)
            self._commit_op("toggle_autocolor", before, {"enabled": bool(enabled)})

    def autocolor_strokes(self, stroke_ids: list[int]) -> None:
        """Recolor the given strokes from the reference; one undo unit."""
        with self._lock:
            before = self._snapshot()
            for layer in self.doc.layers:
                for i, s in enumerate(layer.strokes):
                    if s.id in stroke_ids:
                        layer.strokes[i] = self._autocolored(s)
            self._commit_op("autocolor", before, {"ids": list(stroke_ids)})

    def post_edit(self, stroke_ids: list[int], prop: str, value) -> None:
        """Batch width/color update on committed strokes; one undo unit."""
        if prop not in ("width", "color"):
            raise SessionStateError(f"unknown property {prop!r}")
        if not stroke_ids:
            return
        if prop == "width":
            value = float(value)
            if value <= 0:
                raise SessionStateError(f"width must be positive, got {value}")
        else:
            value = tuple(int(c) for c in value)
            if len(value) != 4 or any(not 0 <= c <= 255 for c in value):
                raise SessionStateError(f"color must be 4 bytes, got {value!r}")
        with self._lock:
            before = self._snapshot()
            for layer in self.doc.layers:
                for i, s in enumerate(layer.strokes):
                    if s.id in set(stroke_ids):
                        layer.strokes[i] = replace(s, **{prop: value})
            self._commit_op("post_edit", before, {"ids": list(stroke_ids), "prop": prop})

    # ----------------------------------------------------- constraint editing

    def set_params(self, triple: tuple[float, float, float], on_done=None) -> None:
        """Set the spacing triple and re-synthesize on the last exemplar."""
        with self._lock:
            before = self._snapshot()
            self._triple = (float(triple[0]), float(triple[1]), float(triple[2]))
            self._commit_op("edit_params", before, {"triple": list(self._triple)})
        self._recompute(on_done)

    def edit_region_op(
        self,
        op: str,
        polygon: list[tuple[float, float]] | None = None,
        width: float | None = None,
        on_done=None,
    ) -> None:
        """Apply a region edit and re-synthesize with it."""
        with self._lock:
            before = self._snapshot()
            base = self._region
            if base is None and self._last_inference is not None:
                base = self._last_inference.region
            shape = (self.image.height, self.image.width)
            self._region = edit_region(base, op, polygon=polygon, width=width, shape=shape)
            self._commit_op("edit_region", before, {"edit": op})
        self._recompute(on_done)

    def edit_orientation(
        self,
        mode: str | None = None,
        gesture: list[tuple[float, float]] | None = None,
        brush_radius: float = DEFAULT_GESTURE_BRUSH,
        on_done=None,
    ) -> None:
        """Set the orientation mode or paint a flow gesture, then re-synthesize."""
        with self._lock:
            before = self._snapshot()
            if gesture is not None:
                self._flow_edits.append(
                    ([(float(x), float(y)) for x, y in gesture], float(brush_radius))
                )
                self._flow_cache = None
                self._orientation_override = "flow"
            elif mode is not None:
                if mode not in ("global", "flow", "auto"):
                    raise SessionStateError(f"unknown orientation mode {mode!r}")
                self._orientation_override = None if mode == "auto" else mode
            else:
                raise SessionStateError("edit_orientation needs a mode or gesture")
            self._commit_op("edit_orientation", before, {"mode": mode})
        self._recompute(on_done)

    def _recompute(self, on_done=None) -> None:
        """Re-run the pipeline after a constraint edit (needs prior strokes)."""
        with self._lock:
            strokes = self._active_layer().strokes
            if len(strokes) < 2 or not self.autocomplete_enabled:
                if on_done is not None:
                    on_done(None, False)
                return
            self._cancel_running()
            trigger = _Trigger(cancel=threading.Event(), on_done=on_done)
            self._trigger = trigger
            self._trigger_count += 1
            seed = self.base_seed + self._trigger_count
        if self.synchronous:
            self._run_trigger(trigger, seed)
            return
        thread = threading.Thread(
            target=self._run_trigger, args=(trigger, seed), daemon=True
        )
        trigger.thread = thread
        thread.start()

    def batch_fill(
        self,
        exemplar_ids: list[int] | None = None,
        triple: tuple[float, float, float] | None = None,
        region_rle: dict | None = None,
        orientation_mode: str | None = None,
        seed: int | None = None,
    ) -> SuggestionSet | None:
        """Explicitly invoked synthesis with optional overrides, synchronous.

        The trigger pipeline with the trigger replaced by a direct call: the
        exemplar comes from explicit stroke ids or the usual inference.
        """
        with self._lock:
            strokes = list(self._active_layer().strokes)
            layer_id = self.active_layer_id
            params = dict(self.doc.params)
        grouping = GroupingParams.from_params(params)
        if exemplar_ids:
            id_set = set(exemplar_ids)
            subset = [s for s in strokes if s.id in id_set]
            if len(subset) < 2:
                raise SessionStateError("explicit exemplar needs >= 2 known stroke ids")
            from .grouping import Exemplar

            exemplar = Exemplar(strokes=subset, shared_features={"color"})
        else:
            exemplar = infer_exemplar(strokes, self.image, grouping)
            if exemplar is None:
                return None

        if region_rle is not None:
            region = RegionMask(mask=rle_to_mask(region_rle), provenance="user_edited")
        elif self._region is not None:
            region = self._region
        else:
            region = infer_region(self.image, exemplar, seed=self.base_seed)

        if orientation_mode == "global":
            orientation = OrientationMap(mode=OrientationMode.GLOBAL)
        elif orientation_mode == "flow":
            orientation = OrientationMap(
                mode=OrientationMode.FLOW, field=self.current_flow()
            )
        else:
            orientation = self._resolve_orientation(exemplar)

        use_triple = triple if triple is not None else self._triple
        if use_triple is not None:
            radius = radius_from_params(self.image, use_triple)
        else:
            radius, _ = fit_radius_model(exemplar, self.image)

        with self._lock:
            self._trigger_count += 1
            run_seed = seed if seed is not None else self.base_seed + self._trigger_count
        ctx = SynthesisContext(
            exemplar=exemplar,
            image=self.image,
            mask=region.mask,
            orientation=orientation,
            radius=radius,
            existing=strokes,
            seed=run_seed,
            iterations=int(params.get("iterations", 15)),
            mu=float(params.get("mu", 0.1)),
        )
        result = synthesize(ctx)
        if not result.strokes:
            return None
        with self._lock:
            self._suggestion_count += 1
            suggestion = SuggestionSet(
                id=self._suggestion_count,
                strokes=result.strokes,
                exemplar_ids=[s.id for s in exemplar.strokes],
                region=region,
                params_triple=radius.params,
                orientation_mode=orientation.mode.value,
                layer_id=layer_id,
                seed=run_seed,
            )
            if self.pending is not None:
                self.pending.state = "superseded"
            self.pending = suggestion
            self._last_inference = _Inference(
                exemplar_ids=suggestion.exemplar_ids,
                region=region,
                orientation=orientation,
                triple=radius.params,
            )
        return suggestion

    def save(self, path: str | None = None) -> str:
        """Write the document to disk; returns the path used."""
        target = path or self.doc_path
        if not target:
            raise SessionStateError("no document path to save to")
        save_document(self.doc, target)
        return target


def run_batch(
    document: Document,
    image: ReferenceImage | None = None,
    seed: int = 0,
    exemplar_ids: list[int] | None = None,
    triple: tuple[float, float, float] | None = None,
    region_rle: dict | None = None,
    orientation_mode: str | None = None,
    iterations: int | None = None,
    mu: float | None = None,
) -> tuple[Document, list[int], SuggestionSet | None]:
    """One-shot synthesis: run the pipeline once and commit every suggestion.

    Mutates and returns the given document.  The suggestion set is returned
    for inspection (None when the pipeline produced nothing).
    """
    if iterations is not None:
        document.params["iterations"] = int(iterations)
    if mu is not None:
        document.params["mu"] = float(mu)
    sess = Session(document, image=image, base_seed=seed, synchronous=True)
    suggestion = sess.batch_fill(
        exemplar_ids=exemplar_ids,
        triple=triple,
        region_rle=region_rle,
        orientation_mode=orientation_mode,
        seed=seed,
    )
    if suggestion is None:
        return sess.doc, [], None
    ids = sess.resolve_suggestions("accept_all")
    return sess.doc, ids, suggestion


def inference_report(
    document: Document, image: ReferenceImage | None = None, seed: int = 0
) -> dict:
    """Machine-readable dump of every inference stage on the newest strokes."""
    img = image if image is not None else load_reference(document.image, document.labels)
    strokes = document.layers[0].strokes
    for layer in document.layers:
        if layer.strokes:
            strokes = layer.strokes
            break
    grouping = GroupingParams.from_params(document.params)
    exemplar = infer_exemplar(strokes, img, grouping)
    if exemplar is None:
        return {"exemplar": None}
    report: dict = {
        "exemplar": {
            "k": exemplar.k,
            "stroke_ids": [s.id for s in exemplar.strokes],
            "shared_features": sorted(exemplar.shared_features),
        }
    }
    try:
        region = infer_region(img, exemplar, seed=seed)
        report["region"] = {
            "area": int(region.area),
            "provenance": region.provenance,
        }
    except SuggestionSuppressed as exc:
        report["region"] = {"area": 0, "provenance": f"failed: {exc}"}
    orientation = infer_orientation(exemplar, compute_etf(img))
    report["orientation_mode"] = orientation.mode.value
    radius, fit = fit_radius_model(exemplar, img)
    report["radius"] = {
        "mode": radius.mode.value,
        "triple": list(radius.params),
        "r_squared": fit.r_squared,
    }
    return report
