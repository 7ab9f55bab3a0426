import { describe, expect, it } from "vitest";
import type { IndicatorPayload } from "../src/api";
import { buildChunks, indicatorKey, SpanError } from "../src/highlight";

function indicator(
  type: IndicatorPayload["type"],
  value: string,
  occurrences: [number, number][],
): IndicatorPayload {
  return { value, type, occurrences, my_label: null };
}

function byteSpanOf(text: string, value: string, nth = 0): [number, number] {
  const bytes = Buffer.from(text, "utf-8");
  const needle = Buffer.from(value, "utf-8");
  let from = 0;
  for (let i = 0; ; i += 1) {
    const at = bytes.indexOf(needle, from);
    if (at < 0) throw new Error(`${value} not found`);
    if (i === nth) return [at, at + needle.length];
    from = at + 1;
  }
}

describe("buildChunks", () => {
  it("covers the whole text in order with one chunk per occurrence", () => {
    const text = "seen evil.com then 10.0.0.1 then evil.com again";
    const indicators = [
      indicator("domain", "evil.com", [
        byteSpanOf(text, "evil.com", 0),
        byteSpanOf(text, "evil.com", 1),
      ]),
      indicator("ip4", "10.0.0.1", [byteSpanOf(text, "10.0.0.1")]),
    ];
    const plan = buildChunks(text, indicators);
    expect(plan.occurrenceCount).toBe(3);
    expect(plan.chunks.filter((c) => c.kind === "occurrence")).toHaveLength(3);
    expect(plan.chunks.map((c) => c.text).join("")).toBe(text);
    const keys = plan.chunks.flatMap((c) => (c.kind === "occurrence" ? [c.indicatorKey] : []));
    expect(keys).toEqual(["domain:evil.com", "ip4:10.0.0.1", "domain:evil.com"]);
  });

  it("maps byte offsets through multibyte text correctly", () => {
    const text = "café ☕ notes: evil.com — done";
    const span = byteSpanOf(text, "evil.com");
    expect(span[0]).toBeGreaterThan(text.indexOf("evil.com"));
    const plan = buildChunks(text, [indicator("domain", "evil.com", [span])]);
    const occ = plan.chunks.find((c) => c.kind === "occurrence");
    expect(occ?.text).toBe("evil.com");
    expect(plan.chunks.map((c) => c.text).join("")).toBe(text);
  });

  it("rejects spans past the end of the text", () => {
    const text = "short";
    expect(() => buildChunks(text, [indicator("domain", "x.com", [[2, 99]])])).toThrow(SpanError);
  });

  it("rejects inverted and negative spans", () => {
    const text = "plenty of room here";
    expect(() => buildChunks(text, [indicator("domain", "x.com", [[5, 5]])])).toThrow(SpanError);
    expect(() => buildChunks(text, [indicator("domain", "x.com", [[-1, 4]])])).toThrow(SpanError);
  });

  it("rejects spans that start inside a multibyte character", () => {
    const text = "☕evil.com";
    expect(() => buildChunks(text, [indicator("domain", "evil.com", [[1, 9]])])).toThrow(
      SpanError,
    );
  });

  it("rejects overlapping spans rather than rendering partially", () => {
    const text = "abcdefghij";
    const indicators = [
      indicator("domain", "abcd.e", [[0, 6]]),
      indicator("domain", "def.gh", [[3, 9]]),
    ];
    expect(() => buildChunks(text, indicators)).toThrow(SpanError);
  });

  it("names indicators by type and value", () => {
    expect(indicatorKey("ip4", "10.0.0.1")).toBe("ip4:10.0.0.1");
  });
});
