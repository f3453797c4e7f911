/**
 * Line protocol shared with the pipeline's worker gateway.
 *
 * Request:  {"id": <int>, "cap": "ping|fill|score|embed|attention", "tokens": [...]}
 * Response: {"id": <int>, "result": ...} or {"id": <int>, "error": "..."}
 *
 * The client opens with {"id":0,"cap":"ping"} and expects {"id":0,"result":"pong"}.
 * One JSON object per line, newline-terminated, UTF-8.
 */

export const MASK = "<mask>";
export const FUSE = "<fuse>";

// sentinel items: <LABEL>, </LABEL>, <mask>, <fuse>
const RESERVED = /^<\/?[A-Za-z]+>$/;

export function isReserved(token: string): boolean {
  return RESERVED.test(token);
}

export const CAPABILITIES = ["ping", "fill", "score", "embed", "attention"] as const;

export type Capability = (typeof CAPABILITIES)[number];

export interface WorkerRequest {
  id: number;
  cap: Capability;
  tokens: string[];
}

export type WorkerResponse =
  | { id: number; result: unknown }
  | { id: number; error: string };

export class ProtocolError extends Error {}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

/** Best-effort id recovery so a malformed request can still get an error reply. */
export function salvageId(value: unknown): number | null {
  if (isRecord(value) && typeof value.id === "number" && Number.isInteger(value.id)) {
    return value.id;
  }
  return null;
}

export function parseRequest(value: unknown): WorkerRequest {
  if (!isRecord(value)) {
    throw new ProtocolError("request is not an object");
  }
  const { id, cap, tokens } = value;
  if (typeof id !== "number" || !Number.isInteger(id)) {
    throw new ProtocolError("request id must be an integer");
  }
  if (typeof cap !== "string" || !(CAPABILITIES as readonly string[]).includes(cap)) {
    throw new ProtocolError(`unknown capability ${JSON.stringify(cap)}`);
  }
  if (tokens === undefined) {
    return { id, cap: cap as Capability, tokens: [] };
  }
  if (!Array.isArray(tokens) || tokens.some((t) => typeof t !== "string")) {
    throw new ProtocolError("tokens must be an array of strings");
  }
  return { id, cap: cap as Capability, tokens: tokens as string[] };
}

export function encodeResponse(response: WorkerResponse): string {
  return JSON.stringify(response) + "\n";
}
