/**
 * Replay helper: serves the recorded facade, request for request.
 *
 * Responses queue per canonical request key (method + path + body), so a
 * repeated identical request gets the recorded answers in recorded order
 * (the backend is stateful across index mutations). Any request outside
 * the recording fails the test: the console may only speak the documented
 * protocol, exactly as exercised.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { FetchLike } from "../src/api.js";

export interface RecordedExchange {
  name: string;
  request: { method: string; path: string; body: unknown };
  response: { status: number; body: unknown };
}

export interface Recording {
  base_sql: string;
  join_sql: string;
  bad_sql: string;
  session_id: string;
  exchanges: RecordedExchange[];
}

const FIXTURE = join(dirname(fileURLToPath(import.meta.url)),
  "..", "fixtures", "recorded_facade.json");

export function loadRecording(): Recording {
  return JSON.parse(readFileSync(FIXTURE, "utf-8")) as Recording;
}

export function stableStringify(value: unknown): string {
  if (Array.isArray(value)) {
    return `[${value.map(stableStringify).join(",")}]`;
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => `${JSON.stringify(k)}:${stableStringify(v)}`);
    return `{${entries.join(",")}}`;
  }
  return JSON.stringify(value);
}

function keyOf(method: string, path: string, body: unknown): string {
  return `${method} ${path} ${body === undefined || body === null
    ? "-" : stableStringify(body)}`;
}

export interface RecordedFacade {
  fetch: FetchLike;
  baseUrl: string;
  served: string[];
  unservedNames(): string[];
}

export function recordedFacade(recording: Recording): RecordedFacade {
  const queues = new Map<string, RecordedExchange[]>();
  for (const exchange of recording.exchanges) {
    const key = keyOf(exchange.request.method, exchange.request.path,
      exchange.request.body);
    const queue = queues.get(key) ?? [];
    queue.push(exchange);
    queues.set(key, queue);
  }
  const baseUrl = "http://recorded";
  const served: string[] = [];
  const fetchImpl: FetchLike = async (url, init) => {
    if (!url.startsWith(baseUrl)) {
      throw new Error(`request outside the recorded facade: ${url}`);
    }
    const path = url.slice(baseUrl.length);
    const method = init?.method ?? "GET";
    const body = init?.body !== undefined ? JSON.parse(init.body) : null;
    const key = keyOf(method, path, body);
    const queue = queues.get(key);
    const exchange = queue?.shift();
    if (exchange === undefined) {
      throw new Error(`unrecorded request: ${method} ${path} ` +
        `(body ${init?.body?.slice(0, 200) ?? "-"})`);
    }
    served.push(exchange.name);
    return {
      status: exchange.response.status,
      json: async () => JSON.parse(JSON.stringify(exchange.response.body)),
    };
  };
  return {
    fetch: fetchImpl,
    baseUrl,
    served,
    unservedNames: () =>
      [...queues.values()].flat().map((e) => e.name),
  };
}

export function exchange(recording: Recording, name: string): RecordedExchange {
  const found = recording.exchanges.find((e) => e.name === name);
  if (found === undefined) throw new Error(`no recorded exchange ${name}`);
  return found;
}

/** Every number that appears anywhere in a recorded response body. */
export function responseNumbers(recording: Recording): Set<number> {
  const numbers = new Set<number>();
  const walk = (value: unknown): void => {
    if (typeof value === "number") numbers.add(value);
    else if (Array.isArray(value)) value.forEach(walk);
    else if (value !== null && typeof value === "object") {
      Object.values(value as Record<string, unknown>).forEach(walk);
    }
  };
  for (const e of recording.exchanges) walk(e.response.body);
  return numbers;
}
