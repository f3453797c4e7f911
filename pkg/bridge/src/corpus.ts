/**
 * Reader for the pipeline's corpus jsonl: one {"id", "tokens", "spans"}
 * object per line.  The bridge only consumes token sequences; spans are
 * carried through untouched.
 */

import { readFileSync } from "node:fs";

export interface CorpusRecord {
  id: string;
  tokens: string[];
  spans: [number, number, string][];
}

export function parseCorpus(text: string): CorpusRecord[] {
  const records: CorpusRecord[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = (lines[i] ?? "").trim();
    if (!line) continue;
    let value: unknown;
    try {
      value = JSON.parse(line);
    } catch {
      throw new Error(`corpus line ${i + 1} is not valid JSON`);
    }
    const record = value as Partial<CorpusRecord>;
    if (
      typeof record.id !== "string" ||
      !Array.isArray(record.tokens) ||
      record.tokens.length === 0 ||
      record.tokens.some((t) => typeof t !== "string")
    ) {
      throw new Error(`corpus line ${i + 1} lacks a string id and token list`);
    }
    records.push({
      id: record.id,
      tokens: record.tokens as string[],
      spans: Array.isArray(record.spans) ? (record.spans as [number, number, string][]) : [],
    });
  }
  if (records.length === 0) {
    throw new Error("corpus file is empty");
  }
  return records;
}

export function readCorpus(path: string): CorpusRecord[] {
  return parseCorpus(readFileSync(path, "utf-8"));
}
