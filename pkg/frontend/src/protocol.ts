/**
 * Wire types and the socket client for the session protocol.
 *
 * The server is the single source of truth: every mutation goes out as a
 * client frame and the authoritative result comes back as a server frame.
 * Frames carry a client-assigned `seq`; pipeline results (suggestion /
 * no_suggestion) echo the seq of the frame that started them, which is how
 * stale results are dropped when the user keeps drawing.
 */

// [x, y, t, pressure]
export type WirePoint = [number, number, number, number];

export interface WireStroke {
  id: number;
  width: number;
  color: [number, number, number, number];
  source: "manual" | "autocompleted";
  points: WirePoint[];
}

export interface RlePayload {
  w: number;
  h: number;
  rle: string;
}

export interface DocumentPayload {
  version: number;
  image: string;
  labels?: string | null;
  layers: { id: number; name: string; strokes: WireStroke[] }[];
  params: Record<string, unknown>;
}

// ---------------------------------------------------------- server frames

export interface HelloFrame {
  type: "hello";
  seq: 0;
  protocol: number;
  document: DocumentPayload;
  image: { width: number; height: number };
  autocomplete: boolean;
  autocolor: boolean;
}

export interface SuggestionFrame {
  type: "suggestion";
  seq: number;
  set_id: number;
  strokes: WireStroke[];
  region: RlePayload;
  exemplar_ids: number[];
  triple: [number, number, number];
  orientation_mode: string;
}

export interface NoSuggestionFrame {
  type: "no_suggestion";
  seq: number;
  superseded: boolean;
}

export interface CommittedFrame {
  type: "committed";
  seq: number;
  ids: number[];
  indices: number[];
  remaining?: number;
}

export interface AckFrame {
  type: "ack";
  seq: number;
  op: string;
  path?: string;
  document?: DocumentPayload;
}

export interface ErrorFrame {
  type: "error";
  seq: number;
  code: string;
  message: string;
}

export interface LivewirePathFrame {
  type: "livewire_path";
  seq: number;
  path: [number, number][];
}

export type ServerFrame =
  | HelloFrame
  | SuggestionFrame
  | NoSuggestionFrame
  | CommittedFrame
  | AckFrame
  | ErrorFrame
  | LivewirePathFrame;

// ---------------------------------------------------------- client frames

export interface StrokePayload {
  points: number[][]; // [x, y] / [x, y, t] / [x, y, t, pressure]
  width?: number;
  color?: [number, number, number, number];
}

export type ClientFrame =
  | { type: "stroke_added"; stroke: StrokePayload }
  | {
      type: "resolve";
      decision: "accept_all" | "reject_all" | "accept_lasso";
      polygon?: [number, number][];
    }
  | { type: "set_params"; spacing: number; lightness?: number; gradient?: number }
  | {
      type: "edit_region";
      op: "create" | "add" | "subtract" | "expand";
      polygon?: [number, number][];
      width?: number;
    }
  | {
      type: "edit_orientation";
      mode?: "global" | "flow" | "auto";
      gesture?: [number, number][];
      brush_radius?: number;
    }
  | { type: "toggle_autocomplete"; enabled: boolean }
  | { type: "toggle_autocolor"; enabled: boolean; stroke_ids?: number[] }
  | { type: "post_edit"; stroke_ids: number[]; property: "width" | "color"; value: unknown }
  | { type: "undo" }
  | { type: "redo" }
  | {
      type: "batch_fill";
      exemplar_ids?: number[];
      spacing?: number;
      lightness?: number;
      gradient?: number;
      region?: RlePayload;
      orientation_mode?: "global" | "flow";
      seed?: number;
    }
  | { type: "save"; path?: string }
  | { type: "livewire"; start: [number, number]; end: [number, number] };

// ----------------------------------------------------------------- client

/** The subset of WebSocket the client needs; tests supply a fake. */
export interface SocketLike {
  readonly readyState: number;
  send(data: string): void;
}

const SOCKET_OPEN = 1; // WebSocket.OPEN without requiring the DOM global

type Handler<F> = (frame: F) => void;

/**
 * Sequencing, offline queueing, and stale-result suppression around a socket.
 *
 * Outgoing frames are numbered from 1 (the server reserves seq 0 for hello).
 * Frames sent while the socket is not open are queued and flushed on open,
 * never dropped. Incoming suggestion/no_suggestion frames are delivered only
 * if they are the newest pipeline result seen so far; an old result arriving
 * after a newer one is ignored, as is any result the server itself marked
 * superseded.
 */
export class ProtocolClient {
  private socket: SocketLike | null = null;
  private nextSeq = 1;
  private queue: string[] = [];
  private newestPipelineSeq = 0;
  private handlers = new Map<ServerFrame["type"], Handler<never>[]>();

  attach(socket: SocketLike): void {
    this.socket = socket;
  }

  /** Call when the underlying socket opens; flushes anything queued. */
  onOpen(): void {
    const socket = this.socket;
    if (socket === null || socket.readyState !== SOCKET_OPEN) return;
    for (const text of this.queue.splice(0)) socket.send(text);
  }

  get pendingCount(): number {
    return this.queue.length;
  }

  /** Assigns a seq, sends (or queues) the frame, and returns the seq. */
  send(frame: ClientFrame): number {
    const seq = this.nextSeq++;
    const text = JSON.stringify({ ...frame, seq });
    if (this.socket !== null && this.socket.readyState === SOCKET_OPEN) {
      this.socket.send(text);
    } else {
      this.queue.push(text);
    }
    return seq;
  }

  on<T extends ServerFrame["type"]>(
    type: T,
    handler: Handler<Extract<ServerFrame, { type: T }>>,
  ): void {
    const list = this.handlers.get(type) ?? [];
    list.push(handler as Handler<never>);
    this.handlers.set(type, list);
  }

  /** Parse and dispatch one incoming message. Returns the frame, or null if dropped. */
  handleMessage(text: string): ServerFrame | null {
    const frame = JSON.parse(text) as ServerFrame;
    if (frame.type === "suggestion" || frame.type === "no_suggestion") {
      if (frame.seq < this.newestPipelineSeq) return null; // stale result
      this.newestPipelineSeq = frame.seq;
      if (frame.type === "no_suggestion" && frame.superseded) return null;
    }
    for (const handler of this.handlers.get(frame.type) ?? []) {
      (handler as Handler<ServerFrame>)(frame);
    }
    return frame;
  }
}
