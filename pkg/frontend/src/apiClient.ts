/**
 * Thin client for the inpainting service. The fetch implementation is
 * injectable so tests can run without a live server.
 */

export interface InpaintResult {
  blob: Blob;
  modelId: string;
  processingMs: number;
}

export interface HealthInfo {
  loaded: boolean;
  modelId: string | null;
  version: string;
  uptimeSeconds: number;
}

/** Error body shape the service returns: {code, message, detail}. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly detail: unknown;

  constructor(status: number, code: string, message: string, detail: unknown = null) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.detail = detail;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let code = "http_error";
  let message = `request failed with status ${response.status}`;
  let detail: unknown = null;
  try {
    const body = await response.json();
    if (body && typeof body === "object") {
      if (typeof body.code === "string") code = body.code;
      if (typeof body.message === "string") message = body.message;
      detail = body.detail ?? null;
    }
  } catch {
    // non-JSON body; keep the generic message
  }
  throw new ApiError(response.status, code, message, detail);
}

export class InpaintClient {
  readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  async health(): Promise<HealthInfo> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/health`);
    await raiseForStatus(response);
    const body = await response.json();
    return {
      loaded: Boolean(body.loaded),
      modelId: body.model_id ?? null,
      version: String(body.version ?? ""),
      uptimeSeconds: Number(body.uptime_seconds ?? 0),
    };
  }

  async inpaint(image: Blob, maskPng: Uint8Array): Promise<InpaintResult> {
    const form = new FormData();
    form.append("image", image, "image.png");
    form.append("mask", new Blob([maskPng.slice()], { type: "image/png" }), "mask.png");
    const response = await this.fetchFn(`${this.baseUrl}/v1/inpaint`, {
      method: "POST",
      body: form,
    });
    await raiseForStatus(response);
    const blob = await response.blob();
    return {
      blob,
      modelId: response.headers.get("x-model-id") ?? "",
      processingMs: Number(response.headers.get("x-processing-time-ms") ?? 0),
    };
  }
}
