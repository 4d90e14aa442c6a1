import { describe, expect, it } from "vitest";

import {
  addEditStroke,
  addMaskStroke,
  addPickedPoint,
  advanceFrame,
  clearLayers,
  compositeEdit,
  compositeMask,
  diffPixels,
  newState,
  rastersEqual,
  setSession,
  undo,
  type Raster,
  type Stroke,
} from "../src/state.js";

function gray(width = 16, height = 12, value = 100): Raster {
  const data = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < width * height; i++) {
    data[i * 4] = value;
    data[i * 4 + 1] = value;
    data[i * 4 + 2] = value;
    data[i * 4 + 3] = 255;
  }
  return { width, height, data };
}

const dot = (x: number, y: number, width = 1): Stroke => ({
  points: [{ x, y }],
  color: [255, 0, 0],
  width,
});

describe("compositing", () => {
  it("no strokes returns the canonical bytes", () => {
    const base = gray();
    const out = compositeEdit(base, []);
    expect(rastersEqual(out, base)).toBe(true);
    expect(out.data).not.toBe(base.data); // copy, not alias
  });

  it("single-pixel stroke paints exactly one pixel", () => {
    const base = gray();
    const out = compositeEdit(base, [dot(5, 3)]);
    expect(diffPixels(out, base)).toBe(1);
    const i = (3 * 16 + 5) * 4;
    expect([out.data[i], out.data[i + 1], out.data[i + 2]]).toEqual([255, 0, 0]);
  });

  it("is deterministic", () => {
    const strokes = [
      { points: [{ x: 1.3, y: 2.7 }, { x: 9.9, y: 8.1 }], color: [0, 255, 0], width: 3 },
    ] as Stroke[];
    const a = compositeEdit(gray(), strokes);
    const b = compositeEdit(gray(), strokes);
    expect(rastersEqual(a, b)).toBe(true);
  });

  it("strokes clamp to the raster bounds", () => {
    const out = compositeEdit(gray(), [dot(-5, -5, 4), dot(100, 100, 4)]);
    expect(out.width).toBe(16);
    expect(out.data.length).toBe(16 * 12 * 4);
  });

  it("mask layer aligns pixel-for-pixel with the canonical raster", () => {
    const mask = compositeMask(16, 12, [dot(2, 2, 2)]);
    expect(mask.width).toBe(16);
    expect(mask.height).toBe(12);
    expect(mask.data[2 * 16 + 2]).toBe(255);
    expect(new Set(mask.data)).toEqual(new Set([0, 255]));
  });
});

describe("undo stack", () => {
  it("undo after a stroke replays to an identical composite", () => {
    const base = gray();
    let state = setSession(newState(), "s1", base);
    const before = compositeEdit(base, state.editStrokes);
    state = addEditStroke(state, dot(4, 4, 3));
    state = undo(state);
    expect(rastersEqual(compositeEdit(base, state.editStrokes), before)).toBe(true);
  });

  it("partial undo leaves earlier strokes intact", () => {
    const base = gray();
    let state = setSession(newState(), "s1", base);
    state = addEditStroke(state, dot(2, 2));
    const afterFirst = compositeEdit(base, state.editStrokes);
    state = addEditStroke(state, dot(9, 9));
    state = undo(state);
    expect(rastersEqual(compositeEdit(base, state.editStrokes), afterFirst)).toBe(true);
  });

  it("undo restores cleared layers", () => {
    let state = setSession(newState(), "s1", gray());
    state = addEditStroke(state, dot(2, 2));
    state = addMaskStroke(state, dot(3, 3));
    state = addPickedPoint(state, { x: 1, y: 1 });
    const layers = {
      edit: state.editStrokes.length,
      mask: state.maskStrokes.length,
      points: state.pickedPoints.length,
    };
    state = clearLayers(state);
    expect(state.editStrokes).toHaveLength(0);
    state = undo(state);
    expect(state.editStrokes).toHaveLength(layers.edit);
    expect(state.maskStrokes).toHaveLength(layers.mask);
    expect(state.pickedPoints).toHaveLength(layers.points);
  });

  it("undo on an empty stack is a no-op", () => {
    const state = newState();
    expect(undo(state)).toBe(state);
  });

  it("a new session clears layers and history", () => {
    let state = setSession(newState(), "s1", gray());
    state = addEditStroke(state, dot(2, 2));
    state = setSession(state, "s2", gray(8, 8));
    expect(state.editStrokes).toHaveLength(0);
    expect(state.undoStack).toHaveLength(0);
    expect(state.sessionId).toBe("s2");
  });
});

describe("playback", () => {
  it("advances and wraps when playing", () => {
    let p = { frame: 0, playing: true };
    p = advanceFrame(p, 3);
    expect(p.frame).toBe(1);
    p = advanceFrame(advanceFrame(p, 3), 3);
    expect(p.frame).toBe(0);
  });

  it("does not advance when paused or empty", () => {
    const paused = { frame: 1, playing: false };
    expect(advanceFrame(paused, 5)).toBe(paused);
    const playing = { frame: 0, playing: true };
    expect(advanceFrame(playing, 0)).toBe(playing);
  });
});
