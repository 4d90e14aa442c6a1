/** Typed client for the warpgen HTTP service.
 *
 * The UI performs no geometry math: every warp/track/mask result comes
 * from these endpoints. `fetch` is injectable so tests can stub the
 * transport.
 */

export interface SessionResponse {
  session_id: string;
  canonical_png_b64: string;
}

export interface FramesResponse {
  frames_png_b64: string[];
}

export interface TrackPoint {
  x: number;
  y: number;
  valid: boolean;
}

export interface TrackResponse {
  trajectory: TrackPoint[];
}

export interface MasksResponse {
  masks_png_b64: string[];
}

/** Machine-readable service error (the body's detail object). */
export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function post<T>(fetchFn: FetchLike, url: string, body: unknown): Promise<T> {
  let resp: Response;
  try {
    resp = await fetchFn(url, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  } catch (err) {
    throw new ApiError(0, "unreachable", String(err));
  }
  if (!resp.ok) {
    let code = "unknown_error";
    let message = `HTTP ${resp.status}`;
    try {
      const data = (await resp.json()) as { detail?: { error?: string; message?: string } };
      code = data.detail?.error ?? code;
      message = data.detail?.message ?? message;
    } catch {
      // non-JSON error body: keep the fallback code
    }
    throw new ApiError(resp.status, code, message);
  }
  return (await resp.json()) as T;
}

export class Client {
  constructor(
    private base: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  newSession(seed: number, frames?: number, checkpoint?: string): Promise<SessionResponse> {
    const body: Record<string, unknown> = { seed };
    if (frames !== undefined) body.frames = frames;
    if (checkpoint !== undefined) body.checkpoint = checkpoint;
    return post(this.fetchFn, `${this.base}/session`, body);
  }

  resample(sessionId: string, motionSeed: number): Promise<FramesResponse> {
    return post(this.fetchFn, `${this.base}/session/${sessionId}/resample`, {
      motion_seed: motionSeed,
    });
  }

  edit(sessionId: string, editedCanonicalPngB64: string): Promise<FramesResponse> {
    return post(this.fetchFn, `${this.base}/session/${sessionId}/edit`, {
      edited_canonical_png_b64: editedCanonicalPngB64,
    });
  }

  track(sessionId: string, x: number, y: number): Promise<TrackResponse> {
    return post(this.fetchFn, `${this.base}/session/${sessionId}/track`, { x, y });
  }

  mask(sessionId: string, maskPngB64: string): Promise<MasksResponse> {
    return post(this.fetchFn, `${this.base}/session/${sessionId}/mask`, {
      mask_png_b64: maskPngB64,
    });
  }

  async health(): Promise<boolean> {
    try {
      const resp = await this.fetchFn(`${this.base}/health`);
      return resp.ok;
    } catch {
      return false;
    }
  }
}
