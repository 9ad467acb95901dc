/**
 * Overlay model: what gets drawn on top of the document between server
 * frames. Everything here derives from the last suggestion/committed frame;
 * nothing touches document state.
 *
 * Color semantics: exemplar strokes are tinted blue, the inferred region is
 * washed pale red, pending suggestions render semi-transparent in their own
 * colors, and freshly accepted strokes flash green before settling into the
 * normal document rendering.
 */

import type { RlePayload, SuggestionFrame, WireStroke } from "./protocol.js";

export const EXEMPLAR_BLUE = "rgba(56, 110, 245, 0.9)";
export const REGION_PALE_RED = "rgba(244, 92, 92, 0.22)";
export const ACCEPTED_GREEN = "rgba(46, 168, 90, 0.9)";
export const SUGGESTION_OPACITY = 0.45;

export interface Overlays {
  /** Pending suggested strokes still awaiting a decision. */
  suggested: WireStroke[];
  /** Document ids of the strokes the suggestion was inferred from. */
  exemplarIds: number[];
  /** Inferred or user-edited target region, still run-length encoded. */
  region: RlePayload | null;
  /** (spacing, lightness, gradient) mirrored into the parameter panel. */
  triple: [number, number, number] | null;
  orientationMode: string | null;
  /** Ids committed by the last resolve, for the brief green flash. */
  flashIds: number[];
}

export function emptyOverlays(): Overlays {
  return {
    suggested: [],
    exemplarIds: [],
    region: null,
    triple: null,
    orientationMode: null,
    flashIds: [],
  };
}

export function applySuggestion(frame: SuggestionFrame): Overlays {
  return {
    suggested: frame.strokes.slice(),
    exemplarIds: frame.exemplar_ids.slice(),
    region: frame.region,
    triple: [frame.triple[0], frame.triple[1], frame.triple[2]],
    orientationMode: frame.orientation_mode,
    flashIds: [],
  };
}

/** no_suggestion, reject, or a new drawing context: drop every overlay. */
export function clearOverlays(_overlays: Overlays): Overlays {
  return emptyOverlays();
}

/**
 * A committed frame accepts some (or all) pending strokes: remove them from
 * the overlay by their position in the pending set and flash the new ids.
 */
export function applyCommitted(
  overlays: Overlays,
  ids: number[],
  indices: number[],
  remaining: number | undefined,
): Overlays {
  if (remaining === 0 || overlays.suggested.length === 0) {
    return { ...emptyOverlays(), flashIds: ids.slice() };
  }
  const gone = new Set(indices);
  return {
    ...overlays,
    suggested: overlays.suggested.filter((_, i) => !gone.has(i)),
    flashIds: ids.slice(),
  };
}

/** rgba() string for one suggested stroke: its own color, faded. */
export function suggestionStyle(stroke: WireStroke): string {
  const [r, g, b, a] = stroke.color;
  return `rgba(${r}, ${g}, ${b}, ${((a / 255) * SUGGESTION_OPACITY).toFixed(3)})`;
}

export function opaqueStyle(stroke: WireStroke): string {
  const [r, g, b, a] = stroke.color;
  return `rgba(${r}, ${g}, ${b}, ${(a / 255).toFixed(3)})`;
}

export interface DrawCommand {
  points: [number, number][];
  style: string;
  width: number;
}

/**
 * Flatten the overlay state into draw commands: exemplar tints first (under
 * the suggestions), then one semi-transparent command per suggested stroke.
 * The pale-red region wash is rasterized separately from the RLE payload.
 */
export function overlayDrawList(
  overlays: Overlays,
  documentStrokes: WireStroke[],
): DrawCommand[] {
  const commands: DrawCommand[] = [];
  const exemplar = new Set(overlays.exemplarIds);
  for (const stroke of documentStrokes) {
    if (exemplar.has(stroke.id)) {
      commands.push({
        points: stroke.points.map((p) => [p[0], p[1]]),
        style: EXEMPLAR_BLUE,
        width: stroke.width + 2, // halo slightly wider than the ink
      });
    }
  }
  for (const stroke of overlays.suggested) {
    commands.push({
      points: stroke.points.map((p) => [p[0], p[1]]),
      style: suggestionStyle(stroke),
      width: stroke.width,
    });
  }
  return commands;
}
