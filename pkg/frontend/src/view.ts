import { heat, SentenceSession } from "./controller.js";
import type { QueueItem, Stats } from "./types.js";

export function renderStats(el: HTMLElement, stats: Stats | null): void {
  el.innerHTML = "";
  if (!stats) return;
  const entries: Array<[string, string]> = [
    ["reviewed", `${stats.reviewed}/${stats.total}`],
    ["correct", String(stats.by_verdict.correct)],
    ["mislabeled", String(stats.by_verdict.mislabeled)],
    ["skipped", String(stats.by_verdict.skipped)],
    ["precision", `${(100 * stats.precision_so_far).toFixed(1)}%`],
  ];
  for (const [name, value] of entries) {
    const span = document.createElement("span");
    const b = document.createElement("b");
    b.textContent = value;
    span.append(`${name} `, b);
    el.append(span);
  }
}

export function renderBanner(el: HTMLElement, message: string | null, kind: "error" | "info" = "error"): void {
  el.textContent = message ?? "";
  el.className = kind === "info" ? "info" : "";
  el.style.display = message ? "block" : "none";
}

export function renderQueue(
  tbody: HTMLElement,
  items: QueueItem[],
  cursor: number,
  onOpen: (index: number) => void,
): void {
  tbody.innerHTML = "";
  items.forEach((item, i) => {
    const tr = document.createElement("tr");
    tr.className = i === cursor ? "row active" : "row";
    for (const text of [String(item.id), item.score.toPrecision(4), item.text]) {
      const td = document.createElement("td");
      td.textContent = text;
      tr.append(td);
    }
    const verdictTd = document.createElement("td");
    if (item.verdict) {
      verdictTd.textContent = item.verdict;
      verdictTd.className = `verdict ${item.verdict}`;
    }
    tr.append(verdictTd);
    tr.addEventListener("click", () => onOpen(i));
    tbody.append(tr);
  });
}

function predictionTitle(session: SentenceSession, index: number): string {
  const preds = session.detail.top_predictions?.[index];
  if (!preds) return "";
  return preds.map((p) => `${p.name} ${p.prob.toPrecision(3)}`).join(", ");
}

export function renderDetail(
  head: HTMLElement,
  tokensEl: HTMLElement,
  session: SentenceSession,
  onLabel: (index: number, cls: number) => void,
): void {
  const { detail } = session;
  const reviewed = detail.review ? ` | last verdict: ${detail.review.verdict}` : "";
  head.textContent = `sentence ${detail.id} | token scores: ${detail.token_method}${reviewed}`;
  tokensEl.innerHTML = "";
  detail.tokens.forEach((token, i) => {
    const div = document.createElement("div");
    div.className = "tok";
    const q = detail.quality?.[i];
    if (q !== undefined) {
      div.style.background = `rgba(220, 38, 38, ${(0.8 * heat(q)).toFixed(3)})`;
    }
    if (detail.flags?.[i]) div.classList.add("flagged");
    if (session.labels[i] !== detail.given_labels[i]) div.classList.add("edited");
    div.title = predictionTitle(session, i);

    const word = document.createElement("div");
    word.textContent = token;
    div.append(word);

    const picker = document.createElement("select");
    detail.classes.forEach((name, cls) => {
      const opt = document.createElement("option");
      opt.value = String(cls);
      opt.textContent = name;
      if (cls === session.labels[i]) opt.selected = true;
      picker.append(opt);
    });
    picker.addEventListener("change", () => onLabel(i, Number(picker.value)));
    div.append(picker);

    const given = document.createElement("span");
    given.className = "lbl";
    given.textContent = detail.given_label_names[i] ?? "";
    div.append(given);

    tokensEl.append(div);
  });
}
