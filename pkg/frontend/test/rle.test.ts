import { describe, expect, it } from "vitest";

import { decodeMask, encodeMask, maskArea } from "../src/rle.js";

// vectors produced by the server-side codec, pasted verbatim
const SERVER_VECTORS = [
  { w: 4, h: 4, rle: "EAAAAA==", area: 0 },
  { w: 2, h: 2, rle: "AAAAAAQAAAA=", area: 4 },
  { w: 4, h: 3, rle: "BQAAAAIAAAABAAAAAQAAAAMAAAA=", area: 3 },
  {
    w: 3,
    h: 3,
    rle: "AAAAAAEAAAABAAAAAQAAAAEAAAABAAAAAQAAAAEAAAABAAAAAQAAAA==",
    area: 5,
  },
];

describe("rle codec", () => {
  it("decodes the server's wire vectors to the reported pixel counts", () => {
    for (const vec of SERVER_VECTORS) {
      const mask = decodeMask(vec);
      expect(mask.length).toBe(vec.w * vec.h);
      expect(maskArea(mask)).toBe(vec.area);
    }
  });

  it("decodes the mid-block vector to the exact pixels", () => {
    // 4x3, ones at (1,1), (1,2), (2,0) in (row, col)
    const mask = decodeMask(SERVER_VECTORS[2]);
    const expected = [0, 0, 0, 0, 0, 1, 1, 0, 1, 0, 0, 0];
    expect(Array.from(mask)).toEqual(expected);
  });

  it("round-trips through encode byte-for-byte", () => {
    for (const vec of SERVER_VECTORS) {
      const mask = decodeMask(vec);
      expect(encodeMask(mask, vec.w, vec.h)).toEqual({ w: vec.w, h: vec.h, rle: vec.rle });
    }
  });

  it("round-trips random masks", () => {
    for (let trial = 0; trial < 20; trial++) {
      const w = 1 + ((trial * 7) % 13);
      const h = 1 + ((trial * 5) % 11);
      const mask = new Uint8Array(w * h);
      for (let i = 0; i < mask.length; i++) {
        mask[i] = (i * 2654435761 + trial) % 7 < 3 ? 1 : 0;
      }
      const decoded = decodeMask(encodeMask(mask, w, h));
      expect(Array.from(decoded)).toEqual(Array.from(mask));
    }
  });

  it("rejects padding and coverage mismatches", () => {
    expect(() => decodeMask({ w: 4, h: 4, rle: "AAA=" })).toThrow(/multiple of 4/);
    expect(() => decodeMask({ w: 5, h: 4, rle: "EAAAAA==" })).toThrow(/expected 20/);
  });
});
