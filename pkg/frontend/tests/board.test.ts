// @vitest-environment happy-dom
import { describe, expect, it } from "vitest";
import type { SceneView } from "../src/api.js";
import { renderBoard, tooltipText } from "../src/board.js";
import { renderSummary, renderTranscript } from "../src/transcript.js";

function scene(n: number): SceneView {
  return {
    id: 0,
    objects: Array.from({ length: n }, (_, i) => ({
      id: i,
      category: "dog",
      attributes: i % 2 === 0 ? { color: "red", size: "small" } : { size: "large" },
      box: [0.1 * i, 0.05, 0.1 * i + 0.08, 0.2] as [number, number, number, number],
    })),
  };
}

describe("scene board", () => {
  it("renders one selectable region per object", () => {
    const clicks: number[] = [];
    const svg = renderBoard(scene(8), null, { onSelect: (id) => clicks.push(id) });
    const groups = svg.querySelectorAll("g.object");
    expect(groups).toHaveLength(8);
    (groups[3] as SVGGElement).dispatchEvent(new MouseEvent("click", { bubbles: true }));
    expect(clicks).toEqual([3]);
  });

  it("is keyboard selectable", () => {
    const clicks: number[] = [];
    const svg = renderBoard(scene(2), null, { onSelect: (id) => clicks.push(id) });
    const group = svg.querySelector("g.object")!;
    expect(group.getAttribute("tabindex")).toBe("0");
    group.dispatchEvent(new KeyboardEvent("keydown", { key: "Enter", bubbles: true }));
    expect(clicks).toEqual([0]);
  });

  it("tooltip omits absent optional attributes", () => {
    const view = scene(2);
    expect(tooltipText(view.objects[0])).toContain("color=red");
    expect(tooltipText(view.objects[1])).not.toContain("color");
    expect(tooltipText(view.objects[1])).toContain("size=large");
  });

  it("marks the selected object", () => {
    const svg = renderBoard(scene(3), 2, { onSelect: () => {} });
    const groups = svg.querySelectorAll("g.object");
    expect(groups[2].getAttribute("aria-selected")).toBe("true");
    expect(groups[0].getAttribute("aria-selected")).toBe("false");
  });

  it("renders from the payload alone (no target-dependent output)", () => {
    const a = renderBoard(scene(4), null, { onSelect: () => {} }).outerHTML;
    const b = renderBoard(scene(4), null, { onSelect: () => {} }).outerHTML;
    expect(a).toBe(b);
    expect(a).not.toContain("target");
  });

  it("highlights the revealed target after a guess", () => {
    const svg = renderBoard(scene(3), 0, { onSelect: () => {} }, 1);
    const rects = svg.querySelectorAll("rect");
    expect(rects[1].getAttribute("stroke-dasharray")).not.toBeNull();
  });
});

describe("transcript and summary", () => {
  it("renders question-answer rounds in order", () => {
    const list = renderTranscript([
      { round: 1, question: "is it red ?", answer: "Yes" },
      { round: 2, question: "is it small ?", answer: "NA" },
    ]);
    const items = list.querySelectorAll("li");
    expect(items).toHaveLength(2);
    expect(items[0].textContent).toContain("is it red ?");
    expect(items[1].textContent).toContain("NA");
  });

  it("summary shows accuracy and per-checkpoint rows", () => {
    const box = renderSummary({
      overall: { sessions: 4, correct: 3, accuracy: 0.75 },
      by_checkpoint: { demo: { sessions: 4, correct: 3, accuracy: 0.75 } },
    });
    expect(box.textContent).toContain("75.0%");
    expect(box.textContent).toContain("demo");
  });

  it("summary handles the empty study", () => {
    const box = renderSummary(null);
    expect(box.textContent).toContain("no completed sessions");
  });
});
