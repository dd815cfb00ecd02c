/**
 * Audit-service API client.
 *
 * Configuration is a single endpoint URL plus a bearer token. All request
 * bodies are schema-validated before sending; responses are parsed against
 * the versioned response schemas.
 */
import {
  AssignRequestSchema,
  AssignResponseSchema,
  CreateBatchRequest,
  CreateBatchRequestSchema,
  CreateBatchResponseSchema,
  ExportResponseSchema,
  HealthResponseSchema,
  Phase,
  QcResponseSchema,
  ReviewRequest,
  ReviewRequestSchema,
  Task,
  TaskResponseSchema,
  ValidateRequest,
  ValidateRequestSchema,
} from "./schemas";

export interface WireResponse {
  status: number;
  body: unknown;
}

/** Transport abstraction so tests can replay recorded exchanges. */
export interface Transport {
  request(
    method: "GET" | "POST",
    path: string,
    body: unknown | null,
    headers: Record<string, string>
  ): Promise<WireResponse>;
}

export class FetchTransport implements Transport {
  constructor(private readonly baseUrl: string) {}

  async request(
    method: "GET" | "POST",
    path: string,
    body: unknown | null,
    headers: Record<string, string>
  ): Promise<WireResponse> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: { "Content-Type": "application/json", ...headers },
      body: body === null ? undefined : JSON.stringify(body),
    });
    return { status: response.status, body: await response.json().catch(() => ({})) };
  }
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string
  ) {
    super(`audit service ${status}: ${detail}`);
  }
}

export class AuditApiClient {
  constructor(
    private readonly transport: Transport,
    private readonly token: string
  ) {}

  private headers(): Record<string, string> {
    return { Authorization: `Bearer ${this.token}` };
  }

  private async call(method: "GET" | "POST", path: string, body: unknown | null): Promise<unknown> {
    const { status, body: payload } = await this.transport.request(
      method,
      path,
      body,
      this.headers()
    );
    if (status !== 200) {
      const detail =
        typeof payload === "object" && payload !== null && "detail" in payload
          ? JSON.stringify((payload as { detail: unknown }).detail)
          : String(status);
      throw new ApiError(status, detail);
    }
    return payload;
  }

  async health() {
    return HealthResponseSchema.parse(await this.call("GET", "/healthz", null));
  }

  async createBatch(request: CreateBatchRequest) {
    const body = CreateBatchRequestSchema.parse(request);
    return CreateBatchResponseSchema.parse(await this.call("POST", "/batches", body));
  }

  async assignNext(phase: Phase): Promise<Task | null> {
    const body = AssignRequestSchema.parse({ phase });
    const response = AssignResponseSchema.parse(await this.call("POST", "/assign", body));
    return response.task;
  }

  async submitReview(taskId: string, request: ReviewRequest): Promise<Task> {
    const body = ReviewRequestSchema.parse(request);
    const response = TaskResponseSchema.parse(
      await this.call("POST", `/tasks/${taskId}/review`, body)
    );
    return response.task;
  }

  async submitValidation(taskId: string, request: ValidateRequest): Promise<Task> {
    const body = ValidateRequestSchema.parse(request);
    const response = TaskResponseSchema.parse(
      await this.call("POST", `/tasks/${taskId}/validate`, body)
    );
    return response.task;
  }

  async runBatchQc(batchId: string) {
    return QcResponseSchema.parse(await this.call("POST", `/batches/${batchId}/qc`, null));
  }

  async exportDataset(name: string) {
    return ExportResponseSchema.parse(await this.call("GET", `/export/${name}`, null));
  }
}
