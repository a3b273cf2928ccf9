// Score-entry bookkeeping for the scoring screen. Validation only gates the
// submit action; acceptance decisions always come back from the server.
export function emptyDraft(candidates) {
    return new Map(candidates.map((c) => [c.id, null]));
}
export function setScore(draft, candidateId, raw) {
    const next = new Map(draft);
    if (raw.trim() === '') {
        next.set(candidateId, null);
        return next;
    }
    const value = Number(raw);
    next.set(candidateId, Number.isFinite(value) ? value : null);
    return next;
}
export function scoreProblems(draft) {
    const problems = [];
    for (const [id, value] of draft) {
        if (value === null)
            problems.push(`${id}: score missing`);
        else if (value < 0 || value > 10)
            problems.push(`${id}: score must be 0-10`);
    }
    return problems;
}
export function draftIsSubmittable(draft) {
    return draft.size > 0 && scoreProblems(draft).length === 0;
}
export function draftPayload(draft) {
    return [...draft.entries()].map(([candidate_id, score]) => ({
        candidate_id,
        score: score,
    }));
}
