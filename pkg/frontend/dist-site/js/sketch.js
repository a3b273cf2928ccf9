// SVG map sketch: landmarks plus a candidate's proposed goal points.
// Deliberately no occupancy grid; the human only needs to sanity-check that
// goals sit on plausible landmarks and in the right order.
const WIDTH = 260;
const HEIGHT = 180;
const PAD = 16;
export function renderSketch(world, candidate) {
    const [ox, oy] = world.origin;
    const spanX = world.n_cols * world.resolution_m;
    const spanY = world.n_rows * world.resolution_m;
    const sx = (x) => PAD + ((x - ox) / spanX) * (WIDTH - 2 * PAD);
    // flip y so world "up" renders upward
    const sy = (y) => HEIGHT - PAD - ((y - oy) / spanY) * (HEIGHT - 2 * PAD);
    const parts = [
        `<svg class="sketch" viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="map sketch">`,
        `<rect x="1" y="1" width="${WIDTH - 2}" height="${HEIGHT - 2}" class="sketch-frame"/>`,
    ];
    for (const lm of world.landmarks) {
        const x = sx(lm.x).toFixed(1);
        const y = sy(lm.y).toFixed(1);
        parts.push(`<circle cx="${x}" cy="${y}" r="3" class="landmark"/>`);
        parts.push(`<text x="${x}" y="${(sy(lm.y) - 5).toFixed(1)}" class="landmark-label">${escapeXml(lm.name)}</text>`);
    }
    if (candidate) {
        const points = candidate.goals.map(([x, y]) => [sx(x), sy(y)]);
        if (points.length > 1) {
            const d = points.map(([x, y], i) => `${i === 0 ? 'M' : 'L'}${x.toFixed(1)} ${y.toFixed(1)}`).join(' ');
            parts.push(`<path d="${d}" class="goal-path" fill="none"/>`);
        }
        points.forEach(([x, y], i) => {
            parts.push(`<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="6" class="goal"/>`);
            parts.push(`<text x="${x.toFixed(1)}" y="${(y + 3).toFixed(1)}" class="goal-order">${i + 1}</text>`);
        });
    }
    parts.push('</svg>');
    return parts.join('');
}
function escapeXml(text) {
    return text
        .replace(/&/g, '&amp;')
        .replace(/</g, '&lt;')
        .replace(/>/g, '&gt;')
        .replace(/"/g, '&quot;');
}
