// Browser entry point: wires the controller to the DOM and the 1 s poll loop.

import { ApiClient } from './api.js';
import { SessionController } from './controller.js';
import { renderApp } from './render.js';

function param(name: string): string | null {
  return new URLSearchParams(window.location.search).get(name);
}

async function boot(): Promise<void> {
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app element');

  const sessionId = param('session');
  if (!sessionId) {
    root.innerHTML = '<p class="notice error">Add ?session=&lt;session-id&gt; to the URL.</p>';
    return;
  }
  const base = param('api') ?? '';
  const api = new ApiClient(base);

  const controller = new SessionController(api, sessionId, (view) => {
    root.innerHTML = renderApp(view);
  });

  root.addEventListener('input', (event) => {
    const target = event.target as HTMLInputElement;
    if (target.classList.contains('score-input')) {
      const id = target.dataset.candidate;
      if (id) {
        controller.updateScore(id, target.value);
        const submit = root.querySelector<HTMLButtonElement>('#submit-scores');
        if (submit) submit.disabled = !controller.canSubmit();
      }
    }
  });
  root.addEventListener('click', (event) => {
    const target = event.target as HTMLElement;
    if (target.id === 'submit-scores') void controller.submitScores();
    if (target.id === 'generate-next') void controller.generateNext();
    if (target.id === 'export-dataset') void controller.exportDataset();
  });

  try {
    await controller.load();
  } catch (error) {
    root.innerHTML = `<p class="notice error">cannot load session: ${String(error)}</p>`;
    return;
  }

  const tick = async () => {
    await controller.poll();
    window.setTimeout(tick, controller.nextPollDelay());
  };
  window.setTimeout(tick, controller.nextPollDelay());
}

void boot();
