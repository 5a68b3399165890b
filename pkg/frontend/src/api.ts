import { AnnotationTask, LabelSubmission, Status, SubmitAck } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(private base = "", private token: string | null = null) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T | null> {
    const headers: Record<string, string> = {
      "Content-Type": "application/json",
    };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    let res: Response;
    try {
      res = await fetch(this.base + path, { ...init, headers });
    } catch (e) {
      throw new ApiError(0, `service unreachable: ${e}`);
    }
    if (res.status === 204) return null;
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = await res.json();
        if (body && body.detail !== undefined) detail = String(body.detail);
      } catch {
        // non-JSON error body, keep the status text
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  async status(): Promise<Status> {
    return (await this.request<Status>("/api/status"))!;
  }

  /** Open tasks, most important first. 204 from the server means none. */
  async tasks(limit?: number): Promise<AnnotationTask[]> {
    const q = limit !== undefined ? `?limit=${limit}` : "";
    return (await this.request<AnnotationTask[]>(`/api/tasks${q}`)) ?? [];
  }

  async submit(body: LabelSubmission): Promise<SubmitAck> {
    return (await this.request<SubmitAck>("/api/labels", {
      method: "POST",
      body: JSON.stringify(body),
    }))!;
  }
}
