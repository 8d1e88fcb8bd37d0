// Typed client for the inpainting service.

export interface InpaintResponse {
  image_b64: string;
  landmarks: number[]; // 136 normalized values, x/y interleaved
  width: number;
  height: number;
  latency_ms: number;
  noop: boolean;
  warnings: string[];
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

/** POST the original image bytes and the exported mask PNG to /inpaint. */
export async function submitInpaint(
  baseUrl: string,
  imageBytes: Uint8Array,
  imageName: string,
  maskPng: Uint8Array,
): Promise<InpaintResponse> {
  const form = new FormData();
  form.append("image", new Blob([imageBytes.slice().buffer]), imageName);
  form.append("mask", new Blob([maskPng.slice().buffer], { type: "image/png" }), "mask.png");
  const url = baseUrl.replace(/\/+$/, "") + "/inpaint";
  let response: Response;
  try {
    response = await fetch(url, { method: "POST", body: form });
  } catch (err) {
    throw new ApiError(0, `network error: ${err instanceof Error ? err.message : String(err)}`);
  }
  if (!response.ok) {
    let reason = `${response.status} ${response.statusText}`;
    try {
      const body = await response.json();
      if (body && typeof body.error === "string") reason = body.error;
    } catch {
      // non-JSON error body: keep the status line
    }
    throw new ApiError(response.status, reason);
  }
  const body = (await response.json()) as InpaintResponse;
  if (!Array.isArray(body.landmarks) || body.landmarks.length !== 136) {
    throw new ApiError(502, `service returned ${body.landmarks?.length ?? 0} landmark values, expected 136`);
  }
  return body;
}

export async function checkHealth(baseUrl: string): Promise<{ status: string; checkpoint_hash: string }> {
  const response = await fetch(baseUrl.replace(/\/+$/, "") + "/health");
  if (!response.ok) throw new ApiError(response.status, "health check failed");
  return response.json();
}
