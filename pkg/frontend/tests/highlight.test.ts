import { describe, expect, it } from "vitest";

import { excerptOf, segmentText, type Span } from "../src/highlight.js";

const TEXT = "That sounds exhausting. Anxiety wears a person down.";

describe("segmentText", () => {
  it("returns one plain segment when there are no spans", () => {
    expect(segmentText(TEXT, [])).toEqual([{ text: TEXT, keys: [] }]);
  });

  it("concatenation always reproduces the original text", () => {
    const spans: Span[] = [
      { start: 5, end: 21, key: "a" },
      { start: 24, end: 31, key: "b" },
    ];
    const joined = segmentText(TEXT, spans).map((s) => s.text).join("");
    expect(joined).toBe(TEXT);
  });

  it("highlighted segment text equals the span's resolved excerpt", () => {
    const span: Span = { start: 24, end: 31, key: "k" };
    const segments = segmentText(TEXT, [span]);
    const marked = segments.filter((s) => s.keys.includes("k"));
    expect(marked.map((s) => s.text).join("")).toBe(excerptOf(TEXT, span));
    expect(excerptOf(TEXT, span)).toBe("Anxiety");
  });

  it("handles overlapping spans by splitting at every boundary", () => {
    const spans: Span[] = [
      { start: 0, end: 11, key: "a" },
      { start: 5, end: 23, key: "b" },
    ];
    const segments = segmentText(TEXT, spans);
    expect(segments.map((s) => s.text).join("")).toBe(TEXT);
    const shared = segments.find((s) => s.keys.length === 2);
    expect(shared?.text).toBe(TEXT.slice(5, 11));
  });

  it("ignores out-of-bounds spans instead of corrupting the text", () => {
    const segments = segmentText(TEXT, [{ start: 10, end: 9999, key: "x" }]);
    expect(segments).toEqual([{ text: TEXT, keys: [] }]);
  });

  it("spans touching the ends are preserved exactly", () => {
    const spans: Span[] = [
      { start: 0, end: 4, key: "head" },
      { start: TEXT.length - 5, end: TEXT.length, key: "tail" },
    ];
    const segments = segmentText(TEXT, spans);
    expect(segments[0]).toEqual({ text: "That", keys: ["head"] });
    expect(segments[segments.length - 1].keys).toEqual(["tail"]);
    expect(segments.map((s) => s.text).join("")).toBe(TEXT);
  });

  it("unicode offsets address code units consistently with slice", () => {
    const text = "café au lait";
    const span: Span = { start: 0, end: 4, key: "c" };
    expect(excerptOf(text, span)).toBe("café");
    const marked = segmentText(text, [span]).find((s) => s.keys.includes("c"));
    expect(marked?.text).toBe("café");
  });
});
