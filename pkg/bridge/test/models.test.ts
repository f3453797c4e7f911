import { describe, expect, it } from "vitest";

import { BigramModel, CooccurrenceAttention, TfidfEmbedder, fillMasks } from "../src/models.js";
import { MASK, isReserved } from "../src/protocol.js";

// counts for [["a","b","a"],["a","c"]]: unigrams a:3 b:1 c:1, total 5,
// bigrams (a,b):1 (b,a):1 (a,c):1, context totals a:2 b:1, vocab size 3
const TINY = [
  ["a", "b", "a"],
  ["a", "c"],
];

function scripted(values: number[]): () => number {
  let i = 0;
  return () => {
    const value = values[i % values.length]!;
    i += 1;
    return value;
  };
}

describe("BigramModel", () => {
  const model = new BigramModel(TINY);

  it("scores with add-one smoothing, unigram start then bigram chain", () => {
    // P(a) = 4/8, P(b|a) = 2/5
    expect(model.score(["a", "b"])).toBeCloseTo((Math.log(0.5) + Math.log(0.4)) / 2, 12);
    // unseen context c: P(x|c) = 1/3
    expect(model.score(["c", "b"])).toBeCloseTo((Math.log(2 / 8) + Math.log(1 / 3)) / 2, 12);
  });

  it("rejects empty input and bad smoothing", () => {
    expect(() => model.score([])).toThrow(/empty/);
    expect(() => new BigramModel(TINY, 0)).toThrow(/smoothing/);
    expect(() => new BigramModel([["<PER>", "</PER>"]])).toThrow(/no text tokens/);
  });

  it("ignores sentinel items when fitting", () => {
    const withSentinels = new BigramModel([["<PER>", "a", "</PER>", "b", "a"], ["a", "c"]]);
    expect(withSentinels.score(["a", "b"])).toBeCloseTo(model.score(["a", "b"]), 12);
  });

  it("samples by cumulative walk over the sorted vocabulary", () => {
    // unigram denominator 8, cumulative a:4 b:6 c:8
    expect(model.sampleNext(null, scripted([0.4]))).toBe("a");
    expect(model.sampleNext(null, scripted([0.6]))).toBe("b");
    expect(model.sampleNext(null, scripted([0.9]))).toBe("c");
    // context a: denominator 5, cumulative a:1 b:3 c:5
    expect(model.sampleNext("a", scripted([0.1]))).toBe("a");
    expect(model.sampleNext("a", scripted([0.5]))).toBe("b");
    expect(model.sampleNext("a", scripted([0.9]))).toBe("c");
  });
});

describe("fillMasks", () => {
  const model = new BigramModel(TINY);

  it("replaces every mask with one to three text tokens", () => {
    for (let trial = 0; trial < 25; trial++) {
      const tokens = ["<GPE>", `probe${trial}`, "</GPE>", MASK];
      const filled = fillMasks(model, tokens);
      expect(filled.slice(0, 3)).toEqual(tokens.slice(0, 3));
      const tail = filled.slice(3);
      expect(tail.length).toBeGreaterThanOrEqual(1);
      expect(tail.length).toBeLessThanOrEqual(3);
      expect(tail.every((t) => !isReserved(t))).toBe(true);
    }
  });

  it("leaves mask-free input untouched", () => {
    const tokens = ["<PER>", "a", "</PER>", "<fuse>", "b"];
    expect(fillMasks(model, tokens)).toEqual(tokens);
  });

  it("preserves the sentinel sequence around multiple masks", () => {
    const tokens = [MASK, "<VEH>", "a", "b", "</VEH>", MASK, "<fuse>", MASK];
    const filled = fillMasks(model, tokens);
    expect(filled.includes(MASK)).toBe(false);
    expect(filled.filter(isReserved)).toEqual(["<VEH>", "</VEH>", "<fuse>"]);
  });

  it("is a pure function of the request content", () => {
    const tokens = ["a", MASK, "<fuse>", "b", MASK];
    const again = new BigramModel(TINY);
    expect(fillMasks(model, tokens)).toEqual(fillMasks(model, tokens));
    expect(fillMasks(again, tokens)).toEqual(fillMasks(model, tokens));
    // different content, different stream
    expect(fillMasks(model, ["b", MASK, "<fuse>", "b", MASK])).not.toEqual(
      fillMasks(model, tokens),
    );
  });
});

describe("TfidfEmbedder", () => {
  // df over [["a","b"],["b","c"]]: a:1 b:2 c:1, two documents
  const embedder = new TfidfEmbedder([
    ["a", "b"],
    ["b", "c"],
  ]);

  it("exposes one dimension per distinct term", () => {
    expect(embedder.dim).toBe(3);
  });

  it("weights by idf and L2-normalizes", () => {
    const idfA = Math.log(2) + 1;
    const norm = Math.sqrt(idfA * idfA + 1);
    const vector = embedder.embed(["a", "b"]);
    expect(vector[0]).toBeCloseTo(idfA / norm, 12);
    expect(vector[1]).toBeCloseTo(1 / norm, 12);
    expect(vector[2]).toBeCloseTo(0, 12);
  });

  it("folds case and skips sentinels", () => {
    expect(embedder.embed(["A", "B"])).toEqual(embedder.embed(["a", "b"]));
    expect(embedder.embed(["<GPE>", "a", "</GPE>", "b"])).toEqual(embedder.embed(["a", "b"]));
  });

  it("embeds unknown-only input to the zero vector", () => {
    expect(embedder.embed(["zzz", "yyy"])).toEqual([0, 0, 0]);
  });

  it("unit-norms every non-zero vector", () => {
    const vector = embedder.embed(["a", "b", "b", "c"]);
    const norm = Math.hypot(...vector);
    expect(norm).toBeCloseTo(1, 12);
  });
});

describe("CooccurrenceAttention", () => {
  const attention = new CooccurrenceAttention([["a", "b"]]);

  it("builds smoothed row-stochastic rows", () => {
    // row a: counts (a,a)=0 (a,b)=1, +1 smoothing => [1,2]/3
    expect(attention.attention(["a", "b"])).toEqual([
      [1 / 3, 2 / 3],
      [2 / 3, 1 / 3],
    ]);
  });

  it("answers the empty sentence with no rows", () => {
    expect(attention.attention([])).toEqual([]);
  });

  it("stays square and normalized on unknown tokens", () => {
    const rows = attention.attention(["x", "a", "y"]);
    expect(rows).toHaveLength(3);
    for (const row of rows) {
      expect(row).toHaveLength(3);
      expect(row.every((w) => w > 0)).toBe(true);
      expect(row.reduce((acc, w) => acc + w, 0)).toBeCloseTo(1, 12);
    }
  });

  it("rejects non-positive smoothing", () => {
    expect(() => new CooccurrenceAttention([["a"]], -1)).toThrow(/smoothing/);
  });
});
