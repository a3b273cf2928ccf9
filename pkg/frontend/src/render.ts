// Pure HTML renderers. Everything here is a string function of server state,
// which keeps the views snapshot-testable without a DOM.

import type { Candidate, Job, SessionSummary, WorldInfo } from './types.js';
import { BUCKET_LABELS, BUCKET_ORDER } from './types.js';
import type { ScoreDraft } from './state.js';
import { draftIsSubmittable } from './state.js';
import { renderSketch } from './sketch.js';

export function renderHeader(summary: SessionSummary, stale: boolean): string {
  const badge = stale ? '<span class="badge stale">stale — retrying</span>' : '';
  return [
    '<header class="session-header">',
    `<h1>Session ${escapeHtml(summary.session_id)}</h1>`,
    `<span class="badge status-${summary.status}">${summary.status}</span>`,
    `<span class="round">round ${summary.round}</span>`,
    badge,
    '</header>',
  ].join('');
}

export function renderBuckets(summary: SessionSummary): string {
  const rows = BUCKET_ORDER.map((bucket) => {
    const { target, accepted } = summary.buckets[bucket];
    const pct = target > 0 ? Math.round((accepted / target) * 100) : 0;
    return [
      `<div class="bucket-row" data-bucket="${bucket}">`,
      `<span class="bucket-label">${BUCKET_LABELS[bucket]}</span>`,
      `<div class="bar"><div class="bar-fill" style="width:${pct}%"></div></div>`,
      `<span class="bucket-count">${accepted}/${target}</span>`,
      '</div>',
    ].join('');
  });
  return `<section class="buckets">${rows.join('')}</section>`;
}

export function renderCandidates(
  candidates: Candidate[],
  draft: ScoreDraft,
  world: WorldInfo | null,
): string {
  if (candidates.length === 0) {
    return '<section class="candidates"><p class="empty">No candidates waiting for scores.</p></section>';
  }
  const cards = candidates.map((candidate) => {
    const value = draft.get(candidate.id);
    const sketch = world ? renderSketch(world, candidate) : '';
    return [
      `<article class="candidate" data-candidate="${escapeHtml(candidate.id)}">`,
      `<p class="task-text">${escapeHtml(candidate.task)}</p>`,
      `<p class="meta">${candidate.num_goals} goal(s) · bucket ${candidate.bucket} · round ${candidate.round}</p>`,
      sketch,
      `<label>score (0-10) <input type="number" min="0" max="10" step="0.5" class="score-input" ` +
        `data-candidate="${escapeHtml(candidate.id)}" value="${value ?? ''}"></label>`,
      '</article>',
    ].join('');
  });
  return `<section class="candidates">${cards.join('')}</section>`;
}

export function renderControls(summary: SessionSummary, draft: ScoreDraft, job: Job | null): string {
  const submitDisabled = !draftIsSubmittable(draft) ? ' disabled' : '';
  const generating = job !== null && (job.state === 'queued' || job.state === 'running');
  const generateDisabled = summary.status !== 'collecting' || generating ? ' disabled' : '';
  const exportDisabled = summary.status !== 'complete';
  const exportTitle = exportDisabled
    ? ' title="available once every bucket target is met"'
    : '';
  const spinner = generating ? '<span class="spinner" aria-label="generating"></span>' : '';
  const dropped =
    job && job.state === 'done' && job.dropped_count
      ? `<span class="dropped">${job.dropped_count} candidate(s) dropped</span>`
      : '';
  return [
    '<section class="controls">',
    `<button id="submit-scores"${submitDisabled}>Submit scores</button>`,
    `<button id="generate-next"${generateDisabled}>Generate next round</button>${spinner}${dropped}`,
    `<button id="export-dataset"${exportDisabled ? ' disabled' : ''}${exportTitle}>Export dataset</button>`,
    '</section>',
  ].join('');
}

export function renderNotice(message: string | null, kind: 'error' | 'info' = 'error'): string {
  if (!message) return '<div class="notice hidden"></div>';
  return `<div class="notice ${kind}">${escapeHtml(message)}</div>`;
}

export function renderApp(view: {
  summary: SessionSummary;
  candidates: Candidate[];
  draft: ScoreDraft;
  world: WorldInfo | null;
  job: Job | null;
  notice: string | null;
  stale: boolean;
}): string {
  return [
    renderHeader(view.summary, view.stale),
    renderNotice(view.notice),
    renderBuckets(view.summary),
    renderControls(view.summary, view.draft, view.job),
    renderCandidates(view.candidates, view.draft, view.world),
  ].join('\n');
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}
