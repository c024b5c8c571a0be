/** Thin fetch client for the /v1 API; server errors surface as ApiError
 * so views can render them inline instead of crashing. */

import type {
  ApiErrorBody,
  CoverageReport,
  FeedbackAck,
  FeedbackRequest,
  MappingResult,
  SystemStatus,
} from './types';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }

  /** 409/422 are user-recoverable: adjust the input and retry. */
  get retryGuidance(): string {
    if (this.status === 409) {
      return 'This feedback id was already submitted; reload to fetch the latest state.';
    }
    if (this.status === 422) {
      return 'The request was rejected as invalid; fix the highlighted input and retry.';
    }
    if (this.status === 404) {
      return 'Unknown regulation or resource; check the selector.';
    }
    return 'Unexpected server error; retry once the service is reachable.';
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let body: ApiErrorBody | { detail?: string } | null = null;
  try {
    body = await response.json();
  } catch {
    /* non-JSON error body */
  }
  const code = body && 'code' in body && body.code ? body.code : `HTTP${response.status}`;
  const message =
    body && 'message' in body && body.message
      ? body.message
      : body && 'detail' in body && body.detail
        ? String(body.detail)
        : response.statusText;
  return new ApiError(response.status, code, message);
}

export class ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: body !== undefined ? { 'Content-Type': 'application/json' } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  map(text: string, regulationId: string, threshold: number, maxHits = 50): Promise<MappingResult> {
    return this.request<MappingResult>('POST', '/v1/map', {
      text,
      regulation_id: regulationId,
      threshold,
      max_hits: maxHits,
    });
  }

  submitFeedback(payload: FeedbackRequest): Promise<FeedbackAck> {
    return this.request<FeedbackAck>('POST', '/v1/feedback', payload);
  }

  status(): Promise<SystemStatus> {
    return this.request<SystemStatus>('GET', '/v1/status');
  }

  coverage(regulationId: string): Promise<CoverageReport> {
    return this.request<CoverageReport>(
      'GET',
      `/v1/coverage?regulation=${encodeURIComponent(regulationId)}`,
    );
  }
}
