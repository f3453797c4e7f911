/**
 * Stdio worker entry point.
 *
 * Usage: node dist/main.js --corpus <corpus.jsonl> [--smoothing <alpha>]
 *
 * Wire it into a pipeline run with any of
 *   fill_backend = worker:node bridge/dist/main.js --corpus corpus.jsonl
 *   worker = node bridge/dist/main.js --corpus corpus.jsonl
 *   NESTAUG_WORKER="node bridge/dist/main.js --corpus corpus.jsonl"
 */

import { createInterface } from "node:readline";
import { readCorpus } from "./corpus.js";
import { buildBridge, handleLine } from "./server.js";

interface Args {
  corpus: string;
  smoothing: number;
}

function parseArgs(argv: string[]): Args {
  let corpus: string | undefined;
  let smoothing = 1.0;
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    if (flag === "--corpus") {
      corpus = argv[++i];
    } else if (flag === "--smoothing") {
      smoothing = Number(argv[++i]);
    } else {
      throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!corpus) {
    throw new Error("missing required flag --corpus <corpus.jsonl>");
  }
  if (!Number.isFinite(smoothing) || smoothing <= 0) {
    throw new Error(`--smoothing must be a positive number, got ${smoothing}`);
  }
  return { corpus, smoothing };
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const bridge = buildBridge(readCorpus(args.corpus), { smoothing: args.smoothing });

  const lines = createInterface({ input: process.stdin, terminal: false });
  for await (const line of lines) {
    const response = handleLine(bridge, line);
    if (response !== null) {
      process.stdout.write(response);
    }
  }
}

main().catch((err) => {
  process.stderr.write(`${err instanceof Error ? err.message : String(err)}\n`);
  process.exit(1);
});
