import { readFileSync } from "node:fs";
import { join } from "node:path";

import { FetchLike, ResponseLike } from "../src/client.js";

/**
 * Load a recorded service response from fixtures/.  These were captured
 * from a live service run, so their field names and float values are the
 * real wire format.
 */
export function loadFixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(process.cwd(), "fixtures", name), "utf8")) as T;
}

export function jsonResponse(payload: unknown, status = 200): ResponseLike {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: () => Promise.resolve(payload),
  };
}

export interface Route {
  match: (url: string) => boolean;
  reply: (url: string) => ResponseLike | Promise<ResponseLike>;
}

/** A fetch stub that answers from routes and records every URL it saw. */
export function routedFetch(routes: Route[]): FetchLike & { calls: string[] } {
  const calls: string[] = [];
  const fetchFn = async (url: string): Promise<ResponseLike> => {
    calls.push(url);
    for (const route of routes) {
      if (route.match(url)) return route.reply(url);
    }
    throw new Error(`unrouted url in test: ${url}`);
  };
  return Object.assign(fetchFn, { calls });
}

/** A promise with its resolver exposed, for ordering async races in tests. */
export function deferred<T>(): { promise: Promise<T>; resolve: (value: T) => void } {
  let resolve!: (value: T) => void;
  const promise = new Promise<T>((r) => {
    resolve = r;
  });
  return { promise, resolve };
}
