// Question-answer transcript list and the study summary box.

import { QaRound, StudySummary } from "./api.js";

export function renderTranscript(rounds: QaRound[]): HTMLElement {
  const list = document.createElement("ol");
  list.className = "transcript";
  for (const qa of rounds) {
    const item = document.createElement("li");
    item.dataset.round = String(qa.round);
    const q = document.createElement("span");
    q.className = "question";
    q.textContent = qa.question;
    const a = document.createElement("span");
    a.className = "answer";
    a.textContent = qa.answer;
    item.append(q, " → ", a);
    list.appendChild(item);
  }
  return list;
}

export function renderSummary(summary: StudySummary | null): HTMLElement {
  const box = document.createElement("div");
  box.className = "summary";
  if (!summary || summary.overall.sessions === 0) {
    box.textContent = "no completed sessions yet";
    return box;
  }
  const overall = document.createElement("p");
  const pct = ((summary.overall.accuracy ?? 0) * 100).toFixed(1);
  overall.textContent =
    `study accuracy: ${pct}% over ${summary.overall.sessions} sessions`;
  box.appendChild(overall);
  const perCkpt = document.createElement("ul");
  for (const [name, row] of Object.entries(summary.by_checkpoint)) {
    const item = document.createElement("li");
    item.textContent = `${name}: ${(row.accuracy * 100).toFixed(1)}% (${row.sessions})`;
    perCkpt.appendChild(item);
  }
  box.appendChild(perCkpt);
  return box;
}
