/** Node-side twin of src/png.ts: decode service PNGs without a browser
 * canvas (pngjs), for unit and e2e tests. Encoding comes from
 * src/pngcodec.ts, which is environment-independent. */

import { PNG } from "pngjs";

import type { Raster } from "../src/state.js";

export function decodePngB64(b64: string): Raster {
  const png = PNG.sync.read(Buffer.from(b64, "base64"));
  return {
    width: png.width,
    height: png.height,
    data: new Uint8ClampedArray(png.data),
  };
}
