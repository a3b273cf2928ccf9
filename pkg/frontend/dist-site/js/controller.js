// Session controller: holds server state, drives polling, and exposes the
// user actions. Rendering and timers are injected so the whole loop runs
// under test against a fixture service.
import { ApiError } from './api.js';
import { draftIsSubmittable, draftPayload, emptyDraft, setScore } from './state.js';
const POLL_INTERVAL_MS = 1000;
const BACKOFF_MAX_MS = 10000;
export class SessionController {
    constructor(api, sessionId, onChange) {
        this.api = api;
        this.sessionId = sessionId;
        this.onChange = onChange;
        this.summary = null;
        this.candidates = [];
        this.draft = new Map();
        this.world = null;
        this.job = null;
        this.jobId = null;
        this.notice = null;
        this.stale = false;
        this.backoffMs = POLL_INTERVAL_MS;
    }
    view() {
        if (!this.summary)
            throw new Error('controller not loaded yet');
        return {
            summary: this.summary,
            candidates: this.candidates,
            draft: this.draft,
            world: this.world,
            job: this.job,
            notice: this.notice,
            stale: this.stale,
        };
    }
    /** Delay until the next poll; grows while the service is unreachable. */
    nextPollDelay() {
        return this.stale ? this.backoffMs : POLL_INTERVAL_MS;
    }
    async load() {
        this.summary = await this.api.getSession(this.sessionId);
        await this.refreshCandidates();
        try {
            this.world = await this.api.getWorld(this.candidates[0]?.map_id ?? '');
        }
        catch {
            this.world = null; // sketch is optional; scoring works without it
        }
        this.emit();
    }
    async poll() {
        const before = this.fingerprint();
        try {
            const summary = await this.api.getSession(this.sessionId);
            const pendingChanged = summary.pending_count !== this.summary?.pending_count;
            this.summary = summary;
            if (this.jobId) {
                this.job = await this.api.getJob(this.jobId);
                if (this.job.state === 'done' || this.job.state === 'failed') {
                    if (this.job.state === 'failed' && this.job.error) {
                        this.notice = `generation failed: ${this.job.error}`;
                    }
                    this.jobId = null;
                }
            }
            if (pendingChanged)
                await this.refreshCandidates();
            this.stale = false;
            this.backoffMs = POLL_INTERVAL_MS;
        }
        catch (error) {
            if (error instanceof ApiError) {
                this.notice = error.message;
            }
            else {
                this.stale = true;
                this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
            }
        }
        // quiet polls must not re-render: that would steal focus from the inputs
        if (this.fingerprint() !== before)
            this.emit();
    }
    fingerprint() {
        return JSON.stringify([this.summary, this.job, this.notice, this.stale]);
    }
    // No emit here: a full re-render would blow away input focus mid-keystroke.
    // The caller refreshes just the submit control from canSubmit().
    updateScore(candidateId, raw) {
        this.draft = setScore(this.draft, candidateId, raw);
    }
    canSubmit() {
        return draftIsSubmittable(this.draft);
    }
    async submitScores() {
        if (!this.canSubmit()) {
            this.notice = 'every candidate needs a score between 0 and 10';
            this.emit();
            return;
        }
        try {
            this.summary = await this.api.submitScores(this.sessionId, draftPayload(this.draft));
            this.notice = null;
            await this.refreshCandidates();
        }
        catch (error) {
            this.notice = error instanceof ApiError ? error.message : String(error);
        }
        this.emit();
    }
    async generateNext(batch = 5) {
        try {
            const { job_id } = await this.api.startGeneration(this.sessionId, batch);
            this.jobId = job_id;
            this.job = { state: 'queued', dropped_count: null, error: null };
            this.notice = null;
        }
        catch (error) {
            this.notice = error instanceof ApiError ? error.message : String(error);
        }
        this.emit();
    }
    async exportDataset(testFraction = 0.25, seed = 0) {
        try {
            const result = await this.api.exportSession(this.sessionId, testFraction, seed);
            this.notice = `exported: ${result.train_path} / ${result.test_path}`;
        }
        catch (error) {
            this.notice = error instanceof ApiError ? error.message : String(error);
        }
        this.emit();
    }
    async refreshCandidates() {
        this.candidates = await this.api.getPendingCandidates(this.sessionId);
        this.draft = emptyDraft(this.candidates);
    }
    emit() {
        if (this.summary)
            this.onChange(this.view());
    }
}
