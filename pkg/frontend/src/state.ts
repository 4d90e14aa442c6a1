/** Canvas-side state: canonical raster, scribble/mask layers, picked
 * points, playback.  All raster math is pure and integer-deterministic so
 * the composite uploaded to the service is byte-reproducible; the undo
 * stack stores immutable layer snapshots, so undoing replays to an
 * identical composite by construction (covered by tests).
 */

export interface Raster {
  width: number;
  height: number;
  /** RGBA, row-major, matches browser ImageData layout. */
  data: Uint8ClampedArray;
}

export interface GrayRaster {
  width: number;
  height: number;
  data: Uint8Array;
}

export interface Point {
  x: number;
  y: number;
}

export interface Stroke {
  points: Point[];
  color: [number, number, number];
  width: number;
}

export interface Playback {
  frame: number;
  playing: boolean;
}

interface Layers {
  editStrokes: readonly Stroke[];
  maskStrokes: readonly Stroke[];
  pickedPoints: readonly Point[];
}

export interface CanvasState extends Layers {
  canonical: Raster | null;
  sessionId: string | null;
  playback: Playback;
  undoStack: readonly Layers[];
}

export function newState(): CanvasState {
  return {
    canonical: null,
    sessionId: null,
    editStrokes: [],
    maskStrokes: [],
    pickedPoints: [],
    playback: { frame: 0, playing: false },
    undoStack: [],
  };
}

function layers(state: CanvasState): Layers {
  return {
    editStrokes: state.editStrokes,
    maskStrokes: state.maskStrokes,
    pickedPoints: state.pickedPoints,
  };
}

/** New sample: layers and history reset so they stay aligned with the
 * fresh canonical raster. */
export function setSession(state: CanvasState, sessionId: string, canonical: Raster): CanvasState {
  return {
    ...newState(),
    sessionId,
    canonical,
  };
}

function push(state: CanvasState, change: Partial<Layers>): CanvasState {
  return {
    ...state,
    ...change,
    undoStack: [...state.undoStack, layers(state)],
  };
}

export function addEditStroke(state: CanvasState, stroke: Stroke): CanvasState {
  return push(state, { editStrokes: [...state.editStrokes, stroke] });
}

export function addMaskStroke(state: CanvasState, stroke: Stroke): CanvasState {
  return push(state, { maskStrokes: [...state.maskStrokes, stroke] });
}

export function addPickedPoint(state: CanvasState, point: Point): CanvasState {
  return push(state, { pickedPoints: [...state.pickedPoints, point] });
}

export function clearLayers(state: CanvasState): CanvasState {
  return push(state, { editStrokes: [], maskStrokes: [], pickedPoints: [] });
}

export function undo(state: CanvasState): CanvasState {
  const prev = state.undoStack[state.undoStack.length - 1];
  if (prev === undefined) return state;
  return { ...state, ...prev, undoStack: state.undoStack.slice(0, -1) };
}

export function setPlayback(state: CanvasState, playback: Playback): CanvasState {
  return { ...state, playback };
}

export function advanceFrame(playback: Playback, frameCount: number): Playback {
  if (!playback.playing || frameCount < 1) return playback;
  return { ...playback, frame: (playback.frame + 1) % frameCount };
}

// ---------------------------------------------------------------------------
// rasterization — round brush stamped along the polyline

function stamp(
  width: number,
  height: number,
  cx: number,
  cy: number,
  radius: number,
  paint: (index: number) => void,
): void {
  const r2 = radius * radius;
  const x0 = Math.max(0, Math.floor(cx - radius));
  const x1 = Math.min(width - 1, Math.ceil(cx + radius));
  const y0 = Math.max(0, Math.floor(cy - radius));
  const y1 = Math.min(height - 1, Math.ceil(cy + radius));
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const dx = x - cx;
      const dy = y - cy;
      if (dx * dx + dy * dy <= r2) paint(y * width + x);
    }
  }
}

function walkStroke(
  width: number,
  height: number,
  stroke: Stroke,
  paint: (index: number) => void,
): void {
  const radius = Math.max(0.5, stroke.width / 2);
  const pts = stroke.points;
  if (pts.length === 0) return;
  const first = pts[0]!;
  stamp(width, height, first.x, first.y, radius, paint);
  for (let i = 1; i < pts.length; i++) {
    const a = pts[i - 1]!;
    const b = pts[i]!;
    const steps = Math.max(1, Math.ceil(Math.max(Math.abs(b.x - a.x), Math.abs(b.y - a.y))));
    for (let s = 1; s <= steps; s++) {
      const t = s / steps;
      stamp(width, height, a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, radius, paint);
    }
  }
}

/** Canonical raster with the edit strokes painted opaquely on top — the
 * exact bytes uploaded to /edit (no client-side resampling). */
export function compositeEdit(canonical: Raster, strokes: readonly Stroke[]): Raster {
  const out = new Uint8ClampedArray(canonical.data);
  const { width, height } = canonical;
  for (const stroke of strokes) {
    const [r, g, b] = stroke.color;
    walkStroke(width, height, stroke, (index) => {
      out[index * 4] = r;
      out[index * 4 + 1] = g;
      out[index * 4 + 2] = b;
      out[index * 4 + 3] = 255;
    });
  }
  return { width, height, data: out };
}

/** Binary mask layer (0/255), same dimensions as the canonical raster. */
export function compositeMask(
  width: number,
  height: number,
  strokes: readonly Stroke[],
): GrayRaster {
  const out = new Uint8Array(width * height);
  for (const stroke of strokes) {
    walkStroke(width, height, stroke, (index) => {
      out[index] = 255;
    });
  }
  return { width, height, data: out };
}

export function rastersEqual(a: Raster, b: Raster): boolean {
  if (a.width !== b.width || a.height !== b.height) return false;
  for (let i = 0; i < a.data.length; i++) if (a.data[i] !== b.data[i]) return false;
  return true;
}

/** Count of differing pixels — the client-side zero-diff check for the
 * empty-edit workflow. */
export function diffPixels(a: Raster, b: Raster): number {
  if (a.width !== b.width || a.height !== b.height) return a.width * a.height;
  let count = 0;
  for (let p = 0; p < a.width * a.height; p++) {
    const i = p * 4;
    if (
      a.data[i] !== b.data[i] ||
      a.data[i + 1] !== b.data[i + 1] ||
      a.data[i + 2] !== b.data[i + 2]
    ) {
      count++;
    }
  }
  return count;
}
