/**
 * Run-length mask codec, byte-compatible with the server.
 *
 * Format: alternating run lengths over the row-major flattened mask,
 * starting with a run of zeros (possibly empty), little-endian uint32,
 * base64-encoded.
 */

import type { RlePayload } from "./protocol.js";

/** Decode a payload to a row-major 0/1 array of length w*h. */
export function decodeMask(payload: RlePayload): Uint8Array {
  const raw = atob(payload.rle);
  if (raw.length % 4 !== 0) {
    throw new Error("rle payload length is not a multiple of 4");
  }
  const bytes = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) bytes[i] = raw.charCodeAt(i);
  const runs = new DataView(bytes.buffer);

  const total = payload.w * payload.h;
  const mask = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (let i = 0; i < bytes.length; i += 4) {
    const run = runs.getUint32(i, true);
    if (value === 1) mask.fill(1, pos, pos + run);
    pos += run;
    value ^= 1;
  }
  if (pos !== total) {
    throw new Error(`rle runs cover ${pos} pixels, expected ${total}`);
  }
  return mask;
}

/** Encode a row-major 0/1 array back to the wire payload. */
export function encodeMask(mask: Uint8Array, w: number, h: number): RlePayload {
  if (mask.length !== w * h) throw new Error("mask size does not match w*h");
  const runs: number[] = [];
  if (mask.length > 0) {
    if (mask[0] === 1) runs.push(0); // encoding always starts with a zeros run
    let current = mask[0];
    let run = 0;
    for (const v of mask) {
      if (v === current) {
        run++;
      } else {
        runs.push(run);
        current = v;
        run = 1;
      }
    }
    runs.push(run);
  }
  const bytes = new Uint8Array(runs.length * 4);
  const view = new DataView(bytes.buffer);
  runs.forEach((run, i) => view.setUint32(i * 4, run, true));
  let binary = "";
  for (let i = 0; i < bytes.length; i += 0x1000) {
    binary += String.fromCharCode(...bytes.subarray(i, i + 0x1000));
  }
  return { w, h, rle: btoa(binary) };
}

export function maskArea(mask: Uint8Array): number {
  let area = 0;
  for (const v of mask) area += v;
  return area;
}
