// Schematic scene board: each object is a labeled, selectable box drawn at
// its scene coordinates. Rendering depends only on the server's scene view.

import { SceneObjectView, SceneView } from "./api.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const COLOR_HEX: Record<string, string> = {
  red: "#d64545",
  green: "#3f9b55",
  blue: "#3f6fb5",
  yellow: "#d6b545",
};

export function tooltipText(obj: SceneObjectView): string {
  const attrs = Object.entries(obj.attributes).map(([k, v]) => `${k}=${v}`);
  return [`#${obj.id} ${obj.category}`, ...attrs].join(" ");
}

export interface BoardHandlers {
  onSelect(objectId: number): void;
}

export function renderBoard(
  scene: SceneView,
  selected: number | null,
  handlers: BoardHandlers,
  revealedTarget: number | null = null,
): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", "0 0 1000 1000");
  svg.setAttribute("class", "board");
  svg.setAttribute("role", "listbox");
  svg.setAttribute("aria-label", "scene objects");

  for (const obj of scene.objects) {
    const [x0, y0, x1, y1] = obj.box;
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("class", "object");
    group.setAttribute("data-object-id", String(obj.id));
    group.setAttribute("tabindex", "0");
    group.setAttribute("role", "option");
    group.setAttribute("aria-selected", String(obj.id === selected));

    const rect = document.createElementNS(SVG_NS, "rect");
    rect.setAttribute("x", String(x0 * 1000));
    rect.setAttribute("y", String(y0 * 1000));
    rect.setAttribute("width", String((x1 - x0) * 1000));
    rect.setAttribute("height", String((y1 - y0) * 1000));
    rect.setAttribute("rx", "8");
    rect.setAttribute("fill", COLOR_HEX[obj.attributes["color"] ?? ""] ?? "#999999");
    rect.setAttribute("fill-opacity", "0.55");
    rect.setAttribute("stroke", obj.id === selected ? "#111" : "#555");
    rect.setAttribute("stroke-width", obj.id === selected ? "14" : "4");
    if (revealedTarget !== null && obj.id === revealedTarget) {
      rect.setAttribute("stroke", "#d6459b");
      rect.setAttribute("stroke-width", "16");
      rect.setAttribute("stroke-dasharray", "22 10");
    }

    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = tooltipText(obj);

    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String((x0 + x1) * 500));
    label.setAttribute("y", String((y0 + y1) * 500));
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("dominant-baseline", "middle");
    label.setAttribute("font-size", "42");
    label.textContent = `${obj.id}:${obj.category}`;

    const select = () => handlers.onSelect(obj.id);
    group.addEventListener("click", select);
    group.addEventListener("keydown", (ev) => {
      const key = (ev as KeyboardEvent).key;
      if (key === "Enter" || key === " ") {
        ev.preventDefault();
        select();
      }
    });

    group.appendChild(rect);
    group.appendChild(title);
    group.appendChild(label);
    svg.appendChild(group);
  }
  return svg;
}
