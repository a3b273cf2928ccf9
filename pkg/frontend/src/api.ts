// Typed client for the curation service. The fetch implementation is
// injectable so tests can run against recorded fixtures.

import type { Candidate, ExportResult, Job, SessionSummary, WorldInfo } from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.status = status;
    this.detail = detail;
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === 'string') detail = body.detail;
        else if (body) detail = JSON.stringify(body.detail ?? body);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  getSession(sessionId: string): Promise<SessionSummary> {
    return this.request(`/sessions/${sessionId}`);
  }

  getPendingCandidates(sessionId: string): Promise<Candidate[]> {
    return this.request(`/sessions/${sessionId}/candidates?status=pending`);
  }

  submitScores(
    sessionId: string,
    scores: { candidate_id: string; score: number }[],
  ): Promise<SessionSummary> {
    return this.request(`/sessions/${sessionId}/scores`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ scores }),
    });
  }

  startGeneration(sessionId: string, batch: number): Promise<{ job_id: string }> {
    return this.request(`/sessions/${sessionId}/next`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ batch }),
    });
  }

  getJob(jobId: string): Promise<Job> {
    return this.request(`/jobs/${jobId}`);
  }

  exportSession(sessionId: string, testFraction: number, seed: number): Promise<ExportResult> {
    return this.request(`/sessions/${sessionId}/export`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ test_fraction: testFraction, seed }),
    });
  }

  getWorld(mapId: string): Promise<WorldInfo> {
    return this.request(`/worlds/${mapId}`);
  }
}
