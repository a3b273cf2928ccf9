import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import type { FetchLike } from '../src/api.js';

const here = dirname(fileURLToPath(import.meta.url));

export function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(here, 'fixtures', name), 'utf-8')) as T;
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

export type Route = {
  method: string;
  path: string;
  reply: (body: unknown) => Response | Promise<Response>;
};

/** Tiny fixture service: routes are matched on "METHOD path" with query kept. */
export function fakeFetch(
  handler: (method: string, path: string, body: unknown) => Response | Promise<Response>,
): FetchLike {
  return async (url, init) => {
    const parsed = new URL(url, 'http://fixture.test');
    const method = init?.method ?? 'GET';
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    return handler(method, parsed.pathname + parsed.search, body);
  };
}
