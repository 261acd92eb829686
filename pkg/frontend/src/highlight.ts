// Evidence-span highlighting. Spans arrive as verbatim character offsets
// from the report; segmenting must reproduce the turn text exactly so the
// highlighted region equals the span's resolved excerpt.

export interface Span {
  start: number;
  end: number; // half-open
  key: string; // identifies the evidence chip that owns the span
}

export interface Segment {
  text: string;
  keys: string[]; // empty = plain text
}

/** Split text into contiguous segments; segments covered by one or more
 * spans carry those spans' keys. Concatenating segment texts always yields
 * the original string. */
export function segmentText(text: string, spans: Span[]): Segment[] {
  const bounded = spans
    .filter((s) => s.start >= 0 && s.end <= text.length && s.start < s.end)
    .sort((a, b) => a.start - b.start || a.end - b.end);
  if (bounded.length === 0) {
    return text.length > 0 ? [{ text, keys: [] }] : [];
  }

  const cuts = new Set<number>([0, text.length]);
  for (const span of bounded) {
    cuts.add(span.start);
    cuts.add(span.end);
  }
  const points = [...cuts].sort((a, b) => a - b);

  const segments: Segment[] = [];
  for (let i = 0; i < points.length - 1; i++) {
    const [from, to] = [points[i], points[i + 1]];
    if (from === to) continue;
    const keys = bounded.filter((s) => s.start <= from && to <= s.end).map((s) => s.key);
    segments.push({ text: text.slice(from, to), keys });
  }
  return segments;
}

/** The exact text a span addresses (what a click should highlight). */
export function excerptOf(text: string, span: Pick<Span, "start" | "end">): string {
  return text.slice(span.start, span.end);
}
