/** Browser-side PNG decode: draw onto an untransformed canvas of the
 * exact image size and read pixels back — a 1:1 copy with no scaling or
 * resampling.  Encoding for uploads lives in pngcodec.ts, which writes
 * the exact pixel modes the service expects.  Node tests use a
 * pngjs-backed twin of this decode (tests/png_node.ts).
 */

import type { GrayRaster, Raster } from "./state.js";

export function decodePngB64(b64: string): Promise<Raster> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => {
      const canvas = document.createElement("canvas");
      canvas.width = img.naturalWidth;
      canvas.height = img.naturalHeight;
      const ctx = canvas.getContext("2d", { willReadFrequently: true });
      if (!ctx) return reject(new Error("2d context unavailable"));
      ctx.drawImage(img, 0, 0);
      const data = ctx.getImageData(0, 0, canvas.width, canvas.height);
      resolve({ width: canvas.width, height: canvas.height, data: data.data });
    };
    img.onerror = () => reject(new Error("undecodable PNG payload"));
    img.src = `data:image/png;base64,${b64}`;
  });
}

/** Grayscale mask -> RGBA raster for canvas preview overlays. */
export function grayToRaster(mask: GrayRaster): Raster {
  const data = new Uint8ClampedArray(mask.width * mask.height * 4);
  for (let i = 0; i < mask.data.length; i++) {
    const v = mask.data[i]!;
    data[i * 4] = v;
    data[i * 4 + 1] = v;
    data[i * 4 + 2] = v;
    data[i * 4 + 3] = 255;
  }
  return { width: mask.width, height: mask.height, data };
}
