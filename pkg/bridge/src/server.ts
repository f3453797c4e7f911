/** Request dispatch: one fitted model per capability, errors as envelopes. */

import type { CorpusRecord } from "./corpus.js";
import { BigramModel, CooccurrenceAttention, TfidfEmbedder, fillMasks } from "./models.js";
import {
  ProtocolError,
  WorkerRequest,
  WorkerResponse,
  encodeResponse,
  parseRequest,
  salvageId,
} from "./protocol.js";

export class Bridge {
  constructor(
    private readonly lm: BigramModel,
    private readonly embedder: TfidfEmbedder,
    private readonly attention: CooccurrenceAttention,
  ) {}

  handle(request: WorkerRequest): WorkerResponse {
    try {
      return { id: request.id, result: this.answer(request) };
    } catch (err) {
      return { id: request.id, error: err instanceof Error ? err.message : String(err) };
    }
  }

  private answer(request: WorkerRequest): unknown {
    switch (request.cap) {
      case "ping":
        return "pong";
      case "fill":
        return fillMasks(this.lm, request.tokens);
      case "score":
        return this.lm.score(request.tokens);
      case "embed":
        return this.embedder.embed(request.tokens);
      case "attention":
        return this.attention.attention(request.tokens);
    }
  }
}

export interface BridgeOptions {
  smoothing?: number;
}

export function buildBridge(records: CorpusRecord[], options: BridgeOptions = {}): Bridge {
  const smoothing = options.smoothing ?? 1.0;
  const sentences = records.map((record) => record.tokens);
  return new Bridge(
    new BigramModel(sentences, smoothing),
    new TfidfEmbedder(sentences),
    new CooccurrenceAttention(sentences, smoothing),
  );
}

/**
 * One protocol line in, one response line (or null) out.
 *
 * A line whose id is recoverable gets an error envelope; anything less
 * parseable is dropped, matching what the client tolerates.
 */
export function handleLine(bridge: Bridge, line: string): string | null {
  const trimmed = line.trim();
  if (!trimmed) return null;
  let value: unknown;
  try {
    value = JSON.parse(trimmed);
  } catch {
    return null;
  }
  try {
    return encodeResponse(bridge.handle(parseRequest(value)));
  } catch (err) {
    if (err instanceof ProtocolError) {
      const id = salvageId(value);
      if (id !== null) {
        return encodeResponse({ id, error: err.message });
      }
      return null;
    }
    throw err;
  }
}
