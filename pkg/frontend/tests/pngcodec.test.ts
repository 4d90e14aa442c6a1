import { describe, expect, it } from "vitest";

import { encodeGrayPngB64, encodeRgbPngB64 } from "../src/pngcodec.js";
import { decodePngB64 } from "./png_node.js";

describe("png encoder", () => {
  it("round-trips RGB pixel data exactly", async () => {
    const width = 13;
    const height = 7;
    const data = new Uint8ClampedArray(width * height * 4);
    for (let i = 0; i < width * height; i++) {
      data[i * 4] = (i * 37) % 256;
      data[i * 4 + 1] = (i * 101) % 256;
      data[i * 4 + 2] = (i * 11) % 256;
      data[i * 4 + 3] = 255;
    }
    const b64 = await encodeRgbPngB64({ width, height, data });
    const back = await decodePngB64(b64);
    expect(back.width).toBe(width);
    expect(back.height).toBe(height);
    for (let i = 0; i < width * height; i++) {
      expect(back.data[i * 4]).toBe(data[i * 4]);
      expect(back.data[i * 4 + 1]).toBe(data[i * 4 + 1]);
      expect(back.data[i * 4 + 2]).toBe(data[i * 4 + 2]);
    }
  });

  it("round-trips grayscale masks exactly", async () => {
    const width = 9;
    const height = 5;
    const data = new Uint8Array(width * height);
    for (let i = 0; i < data.length; i++) data[i] = i % 2 ? 255 : 0;
    const b64 = await encodeGrayPngB64({ width, height, data });
    const back = await decodePngB64(b64);
    expect(back.width).toBe(width);
    for (let i = 0; i < width * height; i++) {
      const v = back.data[i * 4];
      expect(v).toBe(data[i]);
      expect(back.data[i * 4 + 1]).toBe(data[i]); // gray expands to equal channels
    }
  });
});
