/** Typed client for the forestlab HTTP API (everything under /v1). */

export interface PlanStep {
  tool: string;
  args: Record<string, unknown>;
  status: string;
  result_ref: string | null;
  error: string | null;
  cached: boolean;
}

export interface PlanRecord {
  steps: PlanStep[];
  rationale: string | null;
  source: string;
  fallback: boolean;
}

export interface TurnRecord {
  message: string;
  plan: PlanRecord;
  calls: PlanStep[];
  answer: string;
  artifact_ids: string[];
}

export interface ArtifactRecord {
  id: string;
  kind: string; // pair | mask | stats | captions | overlay | report
  summary: string;
  source_tool: string;
  inputs: string[];
  data: Record<string, unknown>;
}

export interface SessionRecord {
  session_id: string;
  pair_id: string | null;
  reference_mask: string | null;
  turns: TurnRecord[];
  artifacts: ArtifactRecord[];
}

export interface UploadResult {
  pair_id: string;
  width: number;
  height: number;
  artifact_ids: string[];
}

export interface EvalRequest {
  manifest: string;
  pred_dir?: string;
  captions?: string;
  split?: string;
}

export interface EvalJob {
  job_id: string;
  status: "pending" | "running" | "done" | "failed";
  report?: Record<string, unknown>;
  error?: string;
}

export interface BinaryArtifact {
  bytes: Uint8Array;
  contentType: string;
}

/** Error body the service uses everywhere: {code, message, field}. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly field: string | null = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface UploadFiles {
  imageA: Blob;
  imageB: Blob;
  mask?: Blob | null;
  pairId?: string | null;
}

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let code = "http_error";
  let message = `request failed with status ${resp.status}`;
  let field: string | null = null;
  try {
    const body = (await resp.json()) as Record<string, unknown>;
    if (typeof body.code === "string") code = body.code;
    if (typeof body.message === "string") message = body.message;
    if (typeof body.field === "string") field = body.field;
  } catch {
    // non-JSON error body: keep the generic message
  }
  throw new ApiError(resp.status, code, message, field);
}

export class ForestLabClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  url(path: string): string {
    return `${this.baseUrl}/v1${path}`;
  }

  artifactUrl(sessionId: string, artifactId: string): string {
    return this.url(`/sessions/${encodeURIComponent(sessionId)}/artifacts/${encodeURIComponent(artifactId)}`);
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.url(path));
    await raiseForStatus(resp);
    return (await resp.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.url(path), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    await raiseForStatus(resp);
    return (await resp.json()) as T;
  }

  async health(): Promise<{ status: string; sessions: number }> {
    return this.getJson("/health");
  }

  async createSession(): Promise<string> {
    const resp = await this.fetchImpl(this.url("/sessions"), { method: "POST" });
    await raiseForStatus(resp);
    const body = (await resp.json()) as { session_id: string };
    return body.session_id;
  }

  async getSession(sessionId: string): Promise<SessionRecord> {
    return this.getJson(`/sessions/${encodeURIComponent(sessionId)}`);
  }

  async uploadPair(sessionId: string, files: UploadFiles): Promise<UploadResult> {
    const form = new FormData();
    form.append("image_a", files.imageA, "image_a.png");
    form.append("image_b", files.imageB, "image_b.png");
    if (files.mask) form.append("mask", files.mask, "mask.png");
    if (files.pairId) form.append("pair_id", files.pairId);
    const resp = await this.fetchImpl(
      this.url(`/sessions/${encodeURIComponent(sessionId)}/pair`),
      { method: "POST", body: form },
    );
    await raiseForStatus(resp);
    return (await resp.json()) as UploadResult;
  }

  async sendMessage(
    sessionId: string,
    text: string,
    planner: "deterministic" | "llm" = "deterministic",
  ): Promise<TurnRecord> {
    return this.postJson(`/sessions/${encodeURIComponent(sessionId)}/messages`, {
      text,
      planner,
    });
  }

  async fetchArtifact(sessionId: string, artifactId: string): Promise<BinaryArtifact> {
    const resp = await this.fetchImpl(this.artifactUrl(sessionId, artifactId));
    await raiseForStatus(resp);
    const buf = await resp.arrayBuffer();
    return {
      bytes: new Uint8Array(buf),
      contentType: resp.headers.get("content-type") ?? "application/octet-stream",
    };
  }

  async startEval(request: EvalRequest): Promise<EvalJob> {
    return this.postJson("/eval", request);
  }

  async getEval(jobId: string): Promise<EvalJob> {
    return this.getJson(`/eval/${encodeURIComponent(jobId)}`);
  }

  /** Poll an eval job until it leaves pending/running. */
  async waitForEval(jobId: string, timeoutMs = 30000, intervalMs = 150): Promise<EvalJob> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.getEval(jobId);
      if (job.status === "done" || job.status === "failed") return job;
      if (Date.now() >= deadline) {
        throw new ApiError(0, "timeout", `eval job ${jobId} still ${job.status} after ${timeoutMs} ms`);
      }
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }
}
