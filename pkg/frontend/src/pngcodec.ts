/** Minimal PNG encoder for the two exact pixel modes the service
 * accepts: 8-bit RGB (edit uploads) and 8-bit grayscale (mask uploads).
 *
 * Canvas toDataURL always produces RGBA files, which the service rejects
 * to keep its lossless-transport contract unambiguous; encoding here from
 * the raw composite buffer (filter 0, zlib via CompressionStream) keeps
 * the uploaded pixels byte-identical to what the user sees.  Works in
 * browsers and node >= 18.
 */

import type { GrayRaster, Raster } from "./state.js";

const SIGNATURE = Uint8Array.of(137, 80, 78, 71, 13, 10, 26, 10);

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(...chunks: Uint8Array[]): number {
  let c = 0xffffffff;
  for (const chunk of chunks) {
    for (const byte of chunk) c = CRC_TABLE[(c ^ byte) & 0xff]! ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function u32(value: number): Uint8Array {
  const out = new Uint8Array(4);
  new DataView(out.buffer).setUint32(0, value >>> 0);
  return out;
}

function chunk(type: string, body: Uint8Array): Uint8Array[] {
  const tag = new TextEncoder().encode(type);
  return [u32(body.length), tag, body, u32(crc32(tag, body))];
}

async function zlibDeflate(data: Uint8Array): Promise<Uint8Array> {
  const stream = new Blob([data as BlobPart]).stream().pipeThrough(new CompressionStream("deflate"));
  return new Uint8Array(await new Response(stream).arrayBuffer());
}

function concat(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let at = 0;
  for (const p of parts) {
    out.set(p, at);
    at += p.length;
  }
  return out;
}

function toB64(bytes: Uint8Array): string {
  let bin = "";
  for (const b of bytes) bin += String.fromCharCode(b);
  return btoa(bin);
}

async function encode(
  width: number,
  height: number,
  colorType: 0 | 2,
  scanline: (y: number) => Uint8Array,
): Promise<string> {
  const header = new Uint8Array(13);
  const view = new DataView(header.buffer);
  view.setUint32(0, width);
  view.setUint32(4, height);
  header[8] = 8; // bit depth
  header[9] = colorType;
  const raw = new Uint8Array(height * (1 + scanline(0).length));
  const rowBytes = scanline(0).length;
  for (let y = 0; y < height; y++) {
    raw[y * (rowBytes + 1)] = 0; // filter: none
    raw.set(scanline(y), y * (rowBytes + 1) + 1);
  }
  const idat = await zlibDeflate(raw);
  const file = concat([
    SIGNATURE,
    ...chunk("IHDR", header),
    ...chunk("IDAT", idat),
    ...chunk("IEND", new Uint8Array(0)),
  ]);
  return toB64(file);
}

/** RGBA raster -> base64 of an 8-bit RGB PNG (alpha dropped; composites
 * are fully opaque by construction). */
export function encodeRgbPngB64(raster: Raster): Promise<string> {
  const { width, height, data } = raster;
  return encode(width, height, 2, (y) => {
    const row = new Uint8Array(width * 3);
    for (let x = 0; x < width; x++) {
      const src = (y * width + x) * 4;
      row[x * 3] = data[src]!;
      row[x * 3 + 1] = data[src + 1]!;
      row[x * 3 + 2] = data[src + 2]!;
    }
    return row;
  });
}

/** Gray mask -> base64 of an 8-bit grayscale PNG. */
export function encodeGrayPngB64(mask: GrayRaster): Promise<string> {
  const { width, height, data } = mask;
  return encode(width, height, 0, (y) => data.subarray(y * width, (y + 1) * width));
}
