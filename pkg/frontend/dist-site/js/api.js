// Typed client for the curation service. The fetch implementation is
// injectable so tests can run against recorded fixtures.
export class ApiError extends Error {
    constructor(status, detail) {
        super(`HTTP ${status}: ${detail}`);
        this.status = status;
        this.detail = detail;
    }
}
export class ApiClient {
    constructor(baseUrl, fetchImpl = (url, init) => fetch(url, init)) {
        this.baseUrl = baseUrl;
        this.fetchImpl = fetchImpl;
    }
    async request(path, init) {
        const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
        if (!response.ok) {
            let detail = response.statusText;
            try {
                const body = await response.json();
                if (body && typeof body.detail === 'string')
                    detail = body.detail;
                else if (body)
                    detail = JSON.stringify(body.detail ?? body);
            }
            catch {
                // non-JSON error body; keep the status text
            }
            throw new ApiError(response.status, detail);
        }
        return (await response.json());
    }
    getSession(sessionId) {
        return this.request(`/sessions/${sessionId}`);
    }
    getPendingCandidates(sessionId) {
        return this.request(`/sessions/${sessionId}/candidates?status=pending`);
    }
    submitScores(sessionId, scores) {
        return this.request(`/sessions/${sessionId}/scores`, {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify({ scores }),
        });
    }
    startGeneration(sessionId, batch) {
        return this.request(`/sessions/${sessionId}/next`, {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify({ batch }),
        });
    }
    getJob(jobId) {
        return this.request(`/jobs/${jobId}`);
    }
    exportSession(sessionId, testFraction, seed) {
        return this.request(`/sessions/${sessionId}/export`, {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify({ test_fraction: testFraction, seed }),
        });
    }
    getWorld(mapId) {
        return this.request(`/worlds/${mapId}`);
    }
}
