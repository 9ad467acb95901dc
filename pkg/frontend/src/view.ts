/**
 * View and tool state. Exactly one view mode and one tool are active at a
 * time, enforced by representation. Space cycles the three view modes;
 * Enter/Escape resolve the pending suggestion set.
 */

export type ViewMode = "canvas" | "reference" | "drawing_only";
export type ToolName =
  | "brush"
  | "lasso"
  | "region_scissors"
  | "region_expand"
  | "gesture_orient";

const MODE_ORDER: ViewMode[] = ["canvas", "reference", "drawing_only"];

// the reference shows semi-transparently under the drawing in canvas mode
export const CANVAS_REFERENCE_OPACITY = 0.4;

export class ViewState {
  mode: ViewMode = "canvas";
  tool: ToolName = "brush";
  brushWidth = 2;
  brushColor: [number, number, number, number] = [0, 0, 0, 255];
  expandWidth = 10;
  /** Panel values mirroring the last inferred (spacing, lightness, gradient). */
  triple: [number, number, number] | null = null;

  cycleView(): ViewMode {
    const next = (MODE_ORDER.indexOf(this.mode) + 1) % MODE_ORDER.length;
    this.mode = MODE_ORDER[next];
    return this.mode;
  }

  setTool(tool: ToolName): void {
    this.tool = tool;
  }

  referenceOpacity(): number {
    switch (this.mode) {
      case "canvas":
        return CANVAS_REFERENCE_OPACITY;
      case "reference":
        return 1.0;
      case "drawing_only":
        return 0.0;
    }
  }

  drawingVisible(): boolean {
    return this.mode !== "reference";
  }
}

export type HotkeyAction = "accept_all" | "reject_all" | "cycle_view" | null;

export function hotkeyAction(key: string): HotkeyAction {
  switch (key) {
    case "Enter":
      return "accept_all";
    case "Escape":
      return "reject_all";
    case " ":
      return "cycle_view";
    default:
      return null;
  }
}
