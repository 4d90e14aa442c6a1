/** Workbench UI wiring.
 *
 * All geometry (warping, tracking, masks) happens on the service; this
 * file only paints layers, uploads exact composites, and renders what
 * comes back.  Results render side-by-side with the previous result so
 * edits can be compared and refined.
 */

import { ApiError, Client, type TrackPoint } from "./api.js";
import { decodePngB64, grayToRaster } from "./png.js";
import { encodeGrayPngB64, encodeRgbPngB64 } from "./pngcodec.js";
import { Sequencer } from "./sequencer.js";
import {
  addEditStroke,
  addMaskStroke,
  addPickedPoint,
  advanceFrame,
  clearLayers,
  compositeEdit,
  compositeMask,
  newState,
  setSession,
  undo,
  type CanvasState,
  type Raster,
  type Stroke,
} from "./state.js";

type Tool = "scribble" | "mask" | "track";

interface ResultStrip {
  label: string;
  frames: string[]; // base64 PNGs straight from the service
}

interface UiState {
  canvas: CanvasState;
  tool: Tool;
  color: string;
  brushWidth: number;
  current: ResultStrip | null;
  previous: ResultStrip | null;
  trajectory: TrackPoint[] | null;
  masks: Raster[] | null;
  banner: { code: string; message: string } | null;
}

const api = new Client(
  new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8321",
);
const sequencer = new Sequencer();

const ui: UiState = {
  canvas: newState(),
  tool: "scribble",
  color: "#ff2f2f",
  brushWidth: 3,
  current: null,
  previous: null,
  trajectory: null,
  masks: null,
  banner: null,
};

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

function showBanner(code: string, message: string): void {
  ui.banner = { code, message };
  render();
}

function pushResult(strip: ResultStrip): void {
  ui.previous = ui.current;
  ui.current = strip;
  ui.canvas = { ...ui.canvas, playback: { frame: 0, playing: true } };
}

async function guarded<T>(label: string, task: () => Promise<T>, apply: (value: T) => void) {
  const settled = await sequencer.dispatch(task);
  if (settled.stale) return; // superseded by a newer action
  if (settled.error !== undefined) {
    const err = settled.error;
    if (err instanceof ApiError) showBanner(err.code, err.message);
    else showBanner("client_error", String(err));
    return;
  }
  apply(settled.value as T);
  render();
}

// ---------------------------------------------------------------------------
// workflows

function hexToRgb(hex: string): [number, number, number] {
  const v = parseInt(hex.slice(1), 16);
  return [(v >> 16) & 255, (v >> 8) & 255, v & 255];
}

function newSample(): void {
  const seed = Number(($("seed") as HTMLInputElement).value) || 0;
  void guarded(
    "session",
    async () => {
      const sess = await api.newSession(seed);
      const canonical = await decodePngB64(sess.canonical_png_b64);
      const frames = await api.resample(sess.session_id, seed);
      return { sess, canonical, frames };
    },
    ({ sess, canonical, frames }) => {
      ui.canvas = setSession(ui.canvas, sess.session_id, canonical);
      ui.trajectory = null;
      ui.masks = null;
      ui.previous = null;
      ui.current = null;
      pushResult({ label: `sample seed=${seed}`, frames: frames.frames_png_b64 });
    },
  );
}

function propagateEdit(): void {
  const { canonical, sessionId, editStrokes } = ui.canvas;
  if (!canonical || !sessionId) return showBanner("no_session", "sample first");
  void guarded(
    "edit",
    async () => {
      const composite = compositeEdit(canonical, editStrokes);
      const png = await encodeRgbPngB64(composite);
      return api.edit(sessionId, png);
    },
    (frames) => pushResult({ label: "edit propagation", frames: frames.frames_png_b64 }),
  );
}

function propagateMask(): void {
  const { canonical, sessionId, maskStrokes } = ui.canvas;
  if (!canonical || !sessionId) return showBanner("no_session", "sample first");
  void guarded(
    "mask",
    async () => {
      const mask = compositeMask(canonical.width, canonical.height, maskStrokes);
      const png = await encodeGrayPngB64(mask);
      const resp = await api.mask(sessionId, png);
      return Promise.all(resp.masks_png_b64.map(decodePngB64));
    },
    (masks) => {
      ui.masks = masks;
    },
  );
}

function trackAt(x: number, y: number): void {
  const { sessionId } = ui.canvas;
  if (!sessionId) return showBanner("no_session", "sample first");
  ui.canvas = addPickedPoint(ui.canvas, { x, y });
  void guarded(
    "track",
    () => api.track(sessionId, x, y),
    (resp) => {
      ui.trajectory = resp.trajectory;
    },
  );
}

function resampleMotion(): void {
  const { sessionId } = ui.canvas;
  if (!sessionId) return showBanner("no_session", "sample first");
  const motionSeed = Number(($("motion-seed") as HTMLInputElement).value) || 0;
  void guarded(
    "resample",
    () => api.resample(sessionId, motionSeed),
    (frames) => {
      ui.trajectory = null; // fields changed; old overlays no longer apply
      ui.masks = null;
      pushResult({ label: `motion seed=${motionSeed}`, frames: frames.frames_png_b64 });
    },
  );
}

// ---------------------------------------------------------------------------
// editing canvas (canonical + layers)

let dragging: Stroke | null = null;

function canvasPoint(ev: MouseEvent, el: HTMLCanvasElement): { x: number; y: number } {
  const rect = el.getBoundingClientRect();
  const scaleX = el.width / rect.width;
  const scaleY = el.height / rect.height;
  return { x: (ev.clientX - rect.left) * scaleX, y: (ev.clientY - rect.top) * scaleY };
}

function wireEditor(el: HTMLCanvasElement): void {
  el.addEventListener("mousedown", (ev) => {
    if (!ui.canvas.canonical) return;
    const p = canvasPoint(ev, el);
    if (ui.tool === "track") {
      trackAt(Math.round(p.x), Math.round(p.y));
      render();
      return;
    }
    dragging = {
      points: [p],
      color: hexToRgb(ui.color),
      width: ui.brushWidth,
    };
  });
  el.addEventListener("mousemove", (ev) => {
    if (!dragging) return;
    dragging.points.push(canvasPoint(ev, el));
    render();
  });
  const finish = () => {
    if (!dragging) return;
    ui.canvas =
      ui.tool === "mask"
        ? addMaskStroke(ui.canvas, dragging)
        : addEditStroke(ui.canvas, dragging);
    dragging = null;
    render();
  };
  el.addEventListener("mouseup", finish);
  el.addEventListener("mouseleave", finish);
}

function drawEditor(el: HTMLCanvasElement): void {
  const { canonical } = ui.canvas;
  if (!canonical) return;
  el.width = canonical.width;
  el.height = canonical.height;
  const ctx = el.getContext("2d");
  if (!ctx) return;
  const editStrokes = [...ui.canvas.editStrokes];
  if (dragging && ui.tool === "scribble") editStrokes.push(dragging);
  const composite = compositeEdit(canonical, editStrokes);
  const img = ctx.createImageData(composite.width, composite.height);
  img.data.set(composite.data);
  ctx.putImageData(img, 0, 0);

  const maskStrokes = [...ui.canvas.maskStrokes];
  if (dragging && ui.tool === "mask") maskStrokes.push(dragging);
  if (maskStrokes.length > 0) {
    const mask = compositeMask(canonical.width, canonical.height, maskStrokes);
    ctx.save();
    ctx.globalAlpha = 0.45;
    const tint = ctx.createImageData(mask.width, mask.height);
    for (let i = 0; i < mask.data.length; i++) {
      if (mask.data[i]) {
        tint.data[i * 4] = 64;
        tint.data[i * 4 + 1] = 255;
        tint.data[i * 4 + 2] = 64;
        tint.data[i * 4 + 3] = 255;
      }
    }
    const off = document.createElement("canvas");
    off.width = mask.width;
    off.height = mask.height;
    off.getContext("2d")?.putImageData(tint, 0, 0);
    ctx.drawImage(off, 0, 0);
    ctx.restore();
  }

  for (const p of ui.canvas.pickedPoints) {
    ctx.strokeStyle = "#00e5ff";
    ctx.lineWidth = 1;
    ctx.strokeRect(p.x - 1.5, p.y - 1.5, 3, 3);
  }
}

// ---------------------------------------------------------------------------
// playback

function stripFrames(strip: ResultStrip | null): string[] {
  return strip ? strip.frames : [];
}

function drawPlayback(): void {
  const el = $("playback") as HTMLCanvasElement;
  const frames = stripFrames(ui.current);
  const ctx = el.getContext("2d");
  if (!ctx) return;
  const idx = Math.min(ui.canvas.playback.frame, Math.max(0, frames.length - 1));
  const b64 = frames[idx];
  if (b64 === undefined) {
    ctx.clearRect(0, 0, el.width, el.height);
    return;
  }
  const img = new Image();
  img.onload = () => {
    el.width = img.naturalWidth;
    el.height = img.naturalHeight;
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(img, 0, 0);
    const mask = ui.masks?.[idx];
    if (mask) {
      ctx.save();
      ctx.globalAlpha = 0.4;
      const off = document.createElement("canvas");
      off.width = mask.width;
      off.height = mask.height;
      const octx = off.getContext("2d");
      if (octx) {
        const tint = octx.createImageData(mask.width, mask.height);
        for (let p = 0; p < mask.width * mask.height; p++) {
          if (mask.data[p * 4]! > 127) {
            tint.data[p * 4] = 64;
            tint.data[p * 4 + 1] = 255;
            tint.data[p * 4 + 2] = 64;
            tint.data[p * 4 + 3] = 255;
          }
        }
        octx.putImageData(tint, 0, 0);
        ctx.drawImage(off, 0, 0);
      }
      ctx.restore();
    }
    const hit = ui.trajectory?.[idx];
    if (hit) {
      ctx.strokeStyle = hit.valid ? "#00e5ff" : "#ff8800";
      ctx.lineWidth = 1;
      ctx.beginPath();
      ctx.arc(hit.x, hit.y, 2.5, 0, Math.PI * 2);
      ctx.stroke();
    }
  };
  img.src = `data:image/png;base64,${b64}`;
}

function drawStrip(containerId: string, strip: ResultStrip | null): void {
  const el = $(containerId);
  el.innerHTML = "";
  if (!strip) return;
  const title = document.createElement("div");
  title.className = "strip-label";
  title.textContent = strip.label;
  el.appendChild(title);
  strip.frames.forEach((b64, i) => {
    const img = document.createElement("img");
    img.src = `data:image/png;base64,${b64}`;
    img.className = i === ui.canvas.playback.frame ? "frame active" : "frame";
    img.onclick = () => {
      ui.canvas = { ...ui.canvas, playback: { frame: i, playing: false } };
      render();
    };
    el.appendChild(img);
  });
}

// ---------------------------------------------------------------------------
// render loop

function render(): void {
  drawEditor($("editor") as HTMLCanvasElement);
  drawPlayback();
  drawStrip("strip-current", ui.current);
  drawStrip("strip-previous", ui.previous);

  const banner = $("banner");
  banner.hidden = ui.banner === null;
  if (ui.banner) {
    $("banner-text").textContent = `${ui.banner.code}: ${ui.banner.message}`;
  }
  $("busy").hidden = !sequencer.busy;
  ($("play") as HTMLButtonElement).textContent = ui.canvas.playback.playing ? "pause" : "play";
  const scrub = $("scrub") as HTMLInputElement;
  const n = stripFrames(ui.current).length;
  scrub.max = String(Math.max(0, n - 1));
  scrub.value = String(ui.canvas.playback.frame);
}

export function start(): void {
  wireEditor($("editor") as HTMLCanvasElement);
  $("new-sample").onclick = newSample;
  $("propagate").onclick = propagateEdit;
  $("apply-mask").onclick = propagateMask;
  $("resample").onclick = resampleMotion;
  $("undo").onclick = () => {
    ui.canvas = undo(ui.canvas);
    render();
  };
  $("clear").onclick = () => {
    ui.canvas = clearLayers(ui.canvas);
    render();
  };
  $("banner-close").onclick = () => {
    ui.banner = null;
    render();
  };
  $("play").onclick = () => {
    ui.canvas = {
      ...ui.canvas,
      playback: { ...ui.canvas.playback, playing: !ui.canvas.playback.playing },
    };
    render();
  };
  ($("scrub") as HTMLInputElement).oninput = (ev) => {
    const frame = Number((ev.target as HTMLInputElement).value);
    ui.canvas = { ...ui.canvas, playback: { frame, playing: false } };
    render();
  };
  for (const tool of ["scribble", "mask", "track"] as Tool[]) {
    $(`tool-${tool}`).onclick = () => {
      ui.tool = tool;
      document
        .querySelectorAll(".tool")
        .forEach((b) => b.classList.toggle("active", b.id === `tool-${tool}`));
    };
  }
  ($("color") as HTMLInputElement).oninput = (ev) => {
    ui.color = (ev.target as HTMLInputElement).value;
  };
  ($("brush") as HTMLInputElement).oninput = (ev) => {
    ui.brushWidth = Number((ev.target as HTMLInputElement).value);
  };

  setInterval(() => {
    const n = stripFrames(ui.current).length;
    const next = advanceFrame(ui.canvas.playback, n);
    if (next !== ui.canvas.playback) {
      ui.canvas = { ...ui.canvas, playback: next };
      render();
    }
  }, 150);

  void api.health().then((ok) => {
    if (!ok) showBanner("unreachable", "service not reachable; start `warpgen serve`");
  });
  render();
}

start();
