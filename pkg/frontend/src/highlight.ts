import type { IndicatorPayload } from "./api";

/** Raised when occurrence spans cannot be laid onto the text. */
export class SpanError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SpanError";
  }
}

export type Chunk =
  | { kind: "text"; text: string }
  | { kind: "occurrence"; text: string; indicatorKey: string; occurrence: number };

export function indicatorKey(type: string, value: string): string {
  return `${type}:${value}`;
}

function utf8Length(codePoint: number): number {
  if (codePoint < 0x80) return 1;
  if (codePoint < 0x800) return 2;
  if (codePoint < 0x10000) return 3;
  return 4;
}

// Spans arrive as byte offsets into the UTF-8 text; map them to the
// UTF-16 indices that string slicing needs. Offsets that land inside a
// code point have no entry and are rejected.
function byteToCharTable(text: string): Map<number, number> {
  const table = new Map<number, number>();
  let byteOffset = 0;
  let charIndex = 0;
  for (const ch of text) {
    table.set(byteOffset, charIndex);
    byteOffset += utf8Length(ch.codePointAt(0)!);
    charIndex += ch.length;
  }
  table.set(byteOffset, charIndex);
  return table;
}

export interface HighlightPlan {
  chunks: Chunk[];
  occurrenceCount: number;
}

/**
 * Split the report text into plain-text and occurrence chunks. Every
 * occurrence from the payload becomes exactly one chunk; any span that is
 * out of bounds, inverted, misaligned, or overlapping aborts the whole
 * plan so the caller never renders a partial document.
 */
export function buildChunks(text: string, indicators: IndicatorPayload[]): HighlightPlan {
  const table = byteToCharTable(text);
  const spans: { start: number; end: number; key: string }[] = [];
  for (const indicator of indicators) {
    const key = indicatorKey(indicator.type, indicator.value);
    for (const [start, end] of indicator.occurrences) {
      if (start < 0 || end <= start || !table.has(start) || !table.has(end)) {
        throw new SpanError(`span [${start}, ${end}) is out of bounds for ${key}`);
      }
      spans.push({ start, end, key });
    }
  }
  spans.sort((a, b) => a.start - b.start || a.end - b.end);
  for (let i = 1; i < spans.length; i += 1) {
    if (spans[i]!.start < spans[i - 1]!.end) {
      throw new SpanError(
        `span [${spans[i]!.start}, ${spans[i]!.end}) overlaps [${spans[i - 1]!.start}, ${spans[i - 1]!.end})`,
      );
    }
  }

  const chunks: Chunk[] = [];
  let cursor = 0;
  spans.forEach((span, index) => {
    const start = table.get(span.start)!;
    const end = table.get(span.end)!;
    if (start > cursor) {
      chunks.push({ kind: "text", text: text.slice(cursor, start) });
    }
    chunks.push({
      kind: "occurrence",
      text: text.slice(start, end),
      indicatorKey: span.key,
      occurrence: index,
    });
    cursor = end;
  });
  if (cursor < text.length) {
    chunks.push({ kind: "text", text: text.slice(cursor) });
  }
  return { chunks, occurrenceCount: spans.length };
}
