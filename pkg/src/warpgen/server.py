"""HTTP service exposing sampling and propagation to the workbench UI.

Endpoints (JSON bodies, base64 PNG images — lossless so propagation
identities survive transport):

    POST /session                    {checkpoint?, seed, frames?}
    POST /session/{id}/resample      {motion_seed}
    POST /session/{id}/edit          {edited_canonical_png_b64}
    POST /session/{id}/track         {x, y}
    POST /session/{id}/mask          {mask_png_b64}

The canonical image is quantized to 8 bits once at session creation and
every frame is warped from that dequantized image; editing with the
untouched canonical therefore reproduces the resample output byte for
byte.  Requests for one session are serialized by a per-session lock.
"""

from __future__ import annotations

import base64
import io
import itertools
import threading
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel

from . import apps
from .grids import warp
from .nets import GeneratorBundle, NetConfig, sample_video


def quantize(img: np.ndarray) -> np.ndarray:
    """(3, H, W) float in [-1, 1] -> (H, W, 3) uint8."""
    return (
        np.clip(np.round((img.transpose(1, 2, 0) + 1.0) * 127.5), 0, 255).astype(np.uint8)
    )


def dequantize(raster: np.ndarray) -> np.ndarray:
    """(H, W, 3) uint8 -> (3, H, W) float32 in [-1, 1]."""
    return (raster.astype(np.float32) / 127.5 - 1.0).transpose(2, 0, 1)


def _png_b64(raster: np.ndarray, mode: str) -> str:
    buf = io.BytesIO()
    Image.fromarray(raster, mode=mode).save(buf, format="PNG", optimize=False)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _from_png_b64(text: str, mode: str) -> np.ndarray:
    try:
        img = Image.open(io.BytesIO(base64.b64decode(text, validate=True)))
        img.load()
    except Exception:
        raise HTTPException(400, {"error": "bad_image", "message": "undecodable PNG payload"})
    if img.mode != mode:
        raise HTTPException(
            400, {"error": "bad_image", "message": f"expected mode {mode}, got {img.mode}"}
        )
    return np.asarray(img)


@dataclass
class Session:
    bundle: GeneratorBundle
    seed: int
    n_frames: int
    canonical_u8: np.ndarray  # (H, W, 3)
    canonical: np.ndarray  # dequantized (3, H, W) float32
    fields: np.ndarray  # (T, 2, H, W) for the current motion seed
    motion_seed: int
    lock: threading.Lock = field(default_factory=threading.Lock)

    def frames_png(self) -> list[str]:
        frames = np.stack([warp(self.canonical, f) for f in self.fields])
        return [_png_b64(quantize(f), "RGB") for f in frames]


class SessionBody(BaseModel):
    checkpoint: str | None = None
    seed: int = 0
    frames: int | None = None


class ResampleBody(BaseModel):
    motion_seed: int


class EditBody(BaseModel):
    edited_canonical_png_b64: str


class TrackBody(BaseModel):
    x: float
    y: float


class MaskBody(BaseModel):
    mask_png_b64: str


def build_app(default_checkpoint: str | None = None, frames: int = 16) -> FastAPI:
    app = FastAPI(title="warpgen service")
    # the workbench is a static page on another origin (or file://)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()
    ids = itertools.count(1)
    bundles: dict[str, GeneratorBundle] = {}

    @app.exception_handler(RequestValidationError)
    async def invalid_body(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"detail": {"error": "invalid_body", "message": str(exc.errors()[:3])}},
        )

    def load_bundle(path: str | None, seed: int) -> GeneratorBundle:
        if path is None:
            return GeneratorBundle(NetConfig(), seed=seed)
        with registry_lock:
            if path not in bundles:
                bundles[path] = GeneratorBundle.load(path)
            return bundles[path]

    def get_session(session_id: str) -> Session:
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(
                404, {"error": "unknown_session", "message": f"no session {session_id!r}"}
            )
        return session

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/session")
    def create_session(body: SessionBody):
        path = body.checkpoint or default_checkpoint
        try:
            bundle = load_bundle(path, body.seed)
        except (OSError, ValueError, KeyError) as exc:
            raise HTTPException(400, {"error": "bad_checkpoint", "message": str(exc)})
        n_frames = body.frames or frames
        result = sample_video(bundle, seed=body.seed, n_frames=n_frames)
        canonical_u8 = quantize(result.canonical)
        session = Session(
            bundle=bundle,
            seed=body.seed,
            n_frames=n_frames,
            canonical_u8=canonical_u8,
            canonical=dequantize(canonical_u8),
            fields=result.fields,
            motion_seed=body.seed,
        )
        with registry_lock:
            session_id = f"s{next(ids)}"
            sessions[session_id] = session
        return {
            "session_id": session_id,
            "canonical_png_b64": _png_b64(canonical_u8, "RGB"),
        }

    @app.post("/session/{session_id}/resample")
    def resample(session_id: str, body: ResampleBody):
        session = get_session(session_id)
        with session.lock:
            result = sample_video(
                session.bundle, seed=session.seed, n_frames=session.n_frames,
                motion_seed=body.motion_seed,
            )
            session.fields = result.fields
            session.motion_seed = body.motion_seed
            return {"frames_png_b64": session.frames_png()}

    @app.post("/session/{session_id}/edit")
    def edit(session_id: str, body: EditBody):
        session = get_session(session_id)
        raster = _from_png_b64(body.edited_canonical_png_b64, "RGB")
        with session.lock:
            if raster.shape != session.canonical_u8.shape:
                raise HTTPException(
                    400,
                    {
                        "error": "bad_image",
                        "message": f"expected {session.canonical_u8.shape}, got {raster.shape}",
                    },
                )
            clip = apps.propagate_edit(dequantize(raster), session.fields)
            return {"frames_png_b64": [_png_b64(quantize(f), "RGB") for f in clip.frames]}

    @app.post("/session/{session_id}/track")
    def track(session_id: str, body: TrackBody):
        session = get_session(session_id)
        with session.lock:
            try:
                traj = apps.track_point((body.x, body.y), session.fields)
            except ValueError as exc:
                raise HTTPException(400, {"error": "bad_point", "message": str(exc)})
            return {
                "trajectory": [
                    {"x": float(x), "y": float(y), "valid": bool(v)}
                    for (x, y), v in zip(traj.positions, traj.valid)
                ]
            }

    @app.post("/session/{session_id}/mask")
    def mask(session_id: str, body: MaskBody):
        session = get_session(session_id)
        raster = _from_png_b64(body.mask_png_b64, "L")
        with session.lock:
            if raster.shape != session.canonical_u8.shape[:2]:
                raise HTTPException(
                    400,
                    {
                        "error": "bad_mask",
                        "message": f"expected {session.canonical_u8.shape[:2]}, got {raster.shape}",
                    },
                )
            seq = apps.propagate_mask((raster >= 128).astype(np.uint8), session.fields)
            return {
                "masks_png_b64": [_png_b64(m * np.uint8(255), "L") for m in seq.masks]
            }

    return app
