/**
 * Browser entry point: wires the canvas, pointer events, hotkeys, and the
 * parameter panel to the session socket. All document mutations round-trip
 * through the protocol; this file only renders what the server confirmed
 * plus the transient overlays (live ink, lasso, suggestions).
 */

import { StrokeCapture } from "./capture.js";
import { debounce, SLIDER_DEBOUNCE_MS } from "./debounce.js";
import { decimatePolyline, Sample } from "./geometry.js";
import {
  ACCEPTED_GREEN,
  applyCommitted,
  applySuggestion,
  clearOverlays,
  emptyOverlays,
  opaqueStyle,
  overlayDrawList,
  Overlays,
  REGION_PALE_RED,
} from "./overlays.js";
import {
  DocumentPayload,
  ProtocolClient,
  WireStroke,
} from "./protocol.js";
import { decodeMask } from "./rle.js";
import { hotkeyAction, ViewState } from "./view.js";

const canvas = document.getElementById("board") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const status = document.getElementById("status")!;

const view = new ViewState();
const capture = new StrokeCapture();
const client = new ProtocolClient();

let doc: DocumentPayload | null = null;
let overlays: Overlays = emptyOverlays();
let reference: HTMLImageElement | null = null;
let regionCanvas: HTMLCanvasElement | null = null; // pale red wash, pre-rasterized
let lassoPath: [number, number][] = [];
let gesturePath: [number, number][] = [];
let scissorAnchor: [number, number] | null = null;
let scissorBoundary: [number, number][] = [];
let livewirePreview: [number, number][] = [];
let flashUntil = 0;

function say(message: string): void {
  status.textContent = message;
}

function allStrokes(): WireStroke[] {
  if (doc === null) return [];
  return doc.layers.flatMap((layer) => layer.strokes);
}

// -------------------------------------------------------------- rendering

function rasterizeRegion(): void {
  regionCanvas = null;
  if (overlays.region === null) return;
  const { w, h } = overlays.region;
  const mask = decodeMask(overlays.region);
  const off = document.createElement("canvas");
  off.width = w;
  off.height = h;
  const octx = off.getContext("2d")!;
  const img = octx.createImageData(w, h);
  // parse "rgba(r, g, b, a)" once instead of hardcoding a second copy
  const [r, g, b, a] = REGION_PALE_RED.match(/[\d.]+/g)!.map(Number);
  for (let i = 0; i < mask.length; i++) {
    if (mask[i] === 1) {
      img.data[i * 4] = r;
      img.data[i * 4 + 1] = g;
      img.data[i * 4 + 2] = b;
      img.data[i * 4 + 3] = Math.round(a * 255);
    }
  }
  octx.putImageData(img, 0, 0);
  regionCanvas = off;
}

function drawPolyline(points: [number, number][], style: string, width: number): void {
  if (points.length === 0) return;
  ctx.strokeStyle = style;
  ctx.fillStyle = style;
  ctx.lineWidth = width;
  ctx.lineCap = "round";
  ctx.lineJoin = "round";
  if (points.length === 1) {
    ctx.beginPath();
    ctx.arc(points[0][0], points[0][1], width / 2, 0, Math.PI * 2);
    ctx.fill();
    return;
  }
  ctx.beginPath();
  ctx.moveTo(points[0][0], points[0][1]);
  for (let i = 1; i < points.length; i++) ctx.lineTo(points[i][0], points[i][1]);
  ctx.stroke();
}

function render(): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  const refAlpha = view.referenceOpacity();
  if (reference !== null && refAlpha > 0) {
    ctx.globalAlpha = refAlpha;
    ctx.drawImage(reference, 0, 0);
    ctx.globalAlpha = 1;
  }

  if (view.drawingVisible()) {
    const flashing = Date.now() < flashUntil ? new Set(overlays.flashIds) : null;
    for (const stroke of allStrokes()) {
      const style =
        flashing !== null && flashing.has(stroke.id) ? ACCEPTED_GREEN : opaqueStyle(stroke);
      drawPolyline(stroke.points.map((p) => [p[0], p[1]]), style, stroke.width);
    }
    if (regionCanvas !== null) ctx.drawImage(regionCanvas, 0, 0);
    for (const cmd of overlayDrawList(overlays, allStrokes())) {
      drawPolyline(cmd.points, cmd.style, cmd.width);
    }
  }

  if (capture.isActive) {
    drawPolyline(
      capture.preview.map((s) => [s.x, s.y]),
      opaqueStyle({ color: view.brushColor, width: view.brushWidth } as WireStroke),
      view.brushWidth,
    );
  }
  if (lassoPath.length > 1) drawPolyline(lassoPath, "rgba(80, 80, 80, 0.8)", 1);
  if (gesturePath.length > 1) drawPolyline(gesturePath, "rgba(200, 120, 20, 0.9)", 2);
  if (scissorBoundary.length > 1) drawPolyline(scissorBoundary, "rgba(200, 40, 40, 0.9)", 1);
  if (livewirePreview.length > 1) drawPolyline(livewirePreview, "rgba(200, 40, 40, 0.4)", 1);

  if (Date.now() < flashUntil) requestAnimationFrame(render);
}

// ------------------------------------------------------------------ panel

function panelInput(id: string): HTMLInputElement {
  return document.getElementById(id) as HTMLInputElement;
}

function updatePanel(): void {
  if (overlays.triple !== null) {
    panelInput("spacing").value = overlays.triple[0].toFixed(1);
    panelInput("lightness").value = overlays.triple[1].toFixed(3);
    panelInput("gradient").value = overlays.triple[2].toFixed(3);
  }
  document.getElementById("orientation-mode")!.textContent =
    overlays.orientationMode ?? "auto";
  document.getElementById("view-mode")!.textContent = view.mode;
  document
    .querySelectorAll<HTMLButtonElement>("[data-tool]")
    .forEach((b) => b.classList.toggle("active", b.dataset.tool === view.tool));
}

const sendParams = debounce(() => {
  const spacing = parseFloat(panelInput("spacing").value);
  if (!Number.isFinite(spacing) || spacing <= 0) return;
  client.send({
    type: "set_params",
    spacing,
    lightness: parseFloat(panelInput("lightness").value) || 0,
    gradient: parseFloat(panelInput("gradient").value) || 0,
  });
}, SLIDER_DEBOUNCE_MS);

// --------------------------------------------------------------- pointers

function sampleOf(ev: PointerEvent): Sample {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ev.clientX - rect.left,
    y: ev.clientY - rect.top,
    t: ev.timeStamp,
    pressure: ev.pressure > 0 ? ev.pressure : 1.0,
  };
}

const sendLivewire = debounce((x: number, y: number) => {
  if (scissorAnchor !== null) {
    client.send({ type: "livewire", start: scissorAnchor, end: [x, y] });
  }
}, 60);

canvas.addEventListener("pointerdown", (ev) => {
  canvas.setPointerCapture(ev.pointerId);
  const s = sampleOf(ev);
  switch (view.tool) {
    case "brush":
      capture.begin(s);
      break;
    case "lasso":
      lassoPath = [[s.x, s.y]];
      break;
    case "gesture_orient":
      gesturePath = [[s.x, s.y]];
      break;
    case "region_scissors":
      if (scissorAnchor === null) {
        scissorAnchor = [s.x, s.y];
        scissorBoundary = [[s.x, s.y]];
      } else {
        scissorBoundary.push(...livewirePreview);
        scissorAnchor = [s.x, s.y];
        livewirePreview = [];
      }
      break;
    case "region_expand":
      client.send({ type: "edit_region", op: "expand", width: view.expandWidth });
      break;
  }
  render();
});

canvas.addEventListener("pointermove", (ev) => {
  const s = sampleOf(ev);
  switch (view.tool) {
    case "brush":
      if (capture.isActive) {
        capture.extend(s);
        render();
      }
      break;
    case "lasso":
      if (lassoPath.length > 0 && ev.buttons !== 0) {
        lassoPath.push([s.x, s.y]);
        render();
      }
      break;
    case "gesture_orient":
      if (gesturePath.length > 0 && ev.buttons !== 0) {
        gesturePath.push([s.x, s.y]);
        render();
      }
      break;
    case "region_scissors":
      sendLivewire(s.x, s.y);
      break;
  }
});

canvas.addEventListener("pointerup", () => {
  switch (view.tool) {
    case "brush": {
      const stroke = capture.finish({ width: view.brushWidth, color: view.brushColor });
      if (stroke !== null) {
        client.send({ type: "stroke_added", stroke });
        if (client.pendingCount > 0) say("offline: stroke queued, will send on reconnect");
      }
      break;
    }
    case "lasso":
      if (lassoPath.length >= 3) {
        client.send({
          type: "resolve",
          decision: "accept_lasso",
          polygon: decimatePolyline(
            lassoPath.map(([x, y]) => ({ x, y })),
            1.0,
          ).map((p) => [p.x, p.y] as [number, number]),
        });
      }
      lassoPath = [];
      break;
    case "gesture_orient":
      if (gesturePath.length >= 2) {
        client.send({ type: "edit_orientation", gesture: gesturePath.slice() });
      }
      gesturePath = [];
      break;
  }
  render();
});

canvas.addEventListener("dblclick", () => {
  // scissors: double click closes the collected boundary into a region edit
  if (view.tool === "region_scissors" && scissorBoundary.length >= 3) {
    client.send({ type: "edit_region", op: "create", polygon: scissorBoundary.slice() });
  }
  scissorAnchor = null;
  scissorBoundary = [];
  livewirePreview = [];
  render();
});

// ---------------------------------------------------------------- hotkeys

document.addEventListener("keydown", (ev) => {
  if ((ev.target as HTMLElement).tagName === "INPUT") return;
  const action = hotkeyAction(ev.key);
  if (action === null) return;
  ev.preventDefault();
  if (action === "cycle_view") {
    view.cycleView();
  } else if (overlays.suggested.length > 0) {
    client.send({ type: "resolve", decision: action });
  }
  updatePanel();
  render();
});

// ----------------------------------------------------------- server frames

client.on("hello", (frame) => {
  doc = frame.document;
  canvas.width = frame.image.width;
  canvas.height = frame.image.height;
  const img = new Image();
  img.onload = () => {
    reference = img;
    render();
  };
  img.src = "/api/reference";
  (document.getElementById("autocomplete") as HTMLInputElement).checked =
    frame.autocomplete;
  (document.getElementById("autocolor") as HTMLInputElement).checked = frame.autocolor;
  say(`connected, protocol ${frame.protocol}`);
  render();
});

client.on("suggestion", (frame) => {
  overlays = applySuggestion(frame);
  rasterizeRegion();
  updatePanel();
  say(`${frame.strokes.length} suggestions (Enter accept, Esc reject, lasso for part)`);
  render();
});

client.on("no_suggestion", () => {
  overlays = clearOverlays(overlays);
  rasterizeRegion();
  say("no suggestion");
  render();
});

client.on("committed", (frame) => {
  if (doc !== null && frame.indices.length > 0 && overlays.suggested.length > 0) {
    // adopt the accepted suggestion strokes under their server-assigned ids
    const layer = doc.layers[0];
    frame.indices.forEach((index, j) => {
      const stroke = overlays.suggested[index];
      if (stroke !== undefined && frame.ids[j] !== undefined) {
        layer.strokes.push({ ...stroke, id: frame.ids[j], source: "autocompleted" });
      }
    });
  }
  overlays = applyCommitted(overlays, frame.ids, frame.indices, frame.remaining);
  flashUntil = Date.now() + 600;
  render();
});

client.on("ack", (frame) => {
  if (frame.document !== undefined) {
    doc = frame.document;
    overlays = clearOverlays(overlays);
    rasterizeRegion();
  }
  if (frame.op === "save") say(`saved to ${frame.path}`);
  render();
});

client.on("error", (frame) => say(`error (${frame.code}): ${frame.message}`));

client.on("livewire_path", (frame) => {
  livewirePreview = frame.path;
  render();
});

// --------------------------------------------------------------- controls

function bindControls(): void {
  document.getElementById("accept")!.addEventListener("click", () => {
    client.send({ type: "resolve", decision: "accept_all" });
  });
  document.getElementById("reject")!.addEventListener("click", () => {
    client.send({ type: "resolve", decision: "reject_all" });
  });
  document.getElementById("undo")!.addEventListener("click", () => {
    client.send({ type: "undo" });
  });
  document.getElementById("redo")!.addEventListener("click", () => {
    client.send({ type: "redo" });
  });
  document.getElementById("save")!.addEventListener("click", () => {
    client.send({ type: "save" });
  });
  document.getElementById("batch")!.addEventListener("click", () => {
    const spacing = parseFloat(panelInput("spacing").value);
    client.send(
      Number.isFinite(spacing) && spacing > 0
        ? { type: "batch_fill", spacing }
        : { type: "batch_fill" },
    );
  });
  document.getElementById("autocomplete")!.addEventListener("change", (ev) => {
    client.send({
      type: "toggle_autocomplete",
      enabled: (ev.target as HTMLInputElement).checked,
    });
  });
  document.getElementById("autocolor")!.addEventListener("change", (ev) => {
    client.send({
      type: "toggle_autocolor",
      enabled: (ev.target as HTMLInputElement).checked,
    });
  });
  document.getElementById("brush-width")!.addEventListener("change", (ev) => {
    view.brushWidth = parseFloat((ev.target as HTMLInputElement).value) || 2;
  });
  document.getElementById("brush-color")!.addEventListener("change", (ev) => {
    const hex = (ev.target as HTMLInputElement).value;
    view.brushColor = [
      parseInt(hex.slice(1, 3), 16),
      parseInt(hex.slice(3, 5), 16),
      parseInt(hex.slice(5, 7), 16),
      255,
    ];
  });
  for (const id of ["spacing", "lightness", "gradient"]) {
    document.getElementById(id)!.addEventListener("input", () => sendParams());
  }
  document.querySelectorAll<HTMLButtonElement>("[data-tool]").forEach((button) => {
    button.addEventListener("click", () => {
      view.setTool(button.dataset.tool as never);
      scissorAnchor = null;
      scissorBoundary = [];
      livewirePreview = [];
      updatePanel();
    });
  });
  document.getElementById("orientation-global")!.addEventListener("click", () => {
    client.send({ type: "edit_orientation", mode: "global" });
  });
  document.getElementById("orientation-flow")!.addEventListener("click", () => {
    client.send({ type: "edit_orientation", mode: "flow" });
  });
  document.getElementById("orientation-auto")!.addEventListener("click", () => {
    client.send({ type: "edit_orientation", mode: "auto" });
  });
}

// ------------------------------------------------------------- connection

function connect(): void {
  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  const socket = new WebSocket(`${proto}//${location.host}/ws`);
  client.attach(socket);
  socket.addEventListener("open", () => client.onOpen());
  socket.addEventListener("message", (ev) => client.handleMessage(ev.data as string));
  socket.addEventListener("close", () => {
    say("disconnected, retrying in 2s (new strokes are queued)");
    setTimeout(connect, 2000);
  });
}

bindControls();
updatePanel();
connect();
