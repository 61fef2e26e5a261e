import { ApiClient } from "./api.js";
import { ReviewController } from "./controller.js";
import { renderBanner, renderDetail, renderQueue, renderStats } from "./view.js";

function must(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

const controller = new ReviewController(new ApiClient(), 20);

const statsEl = must("stats");
const methodEl = must("method");
const bannerEl = must("banner");
const queueBody = must("queue-body");
const pageInfo = must("page-info");
const detailHead = must("detail-head");
const tokensEl = must("tokens");
const noteEl = must("note") as HTMLTextAreaElement;
const mislabelBtn = must("mislabel") as HTMLButtonElement;

let infoMessage: string | null = null;

function repaint(): void {
  renderStats(statsEl, controller.stats);
  const sel = controller.selection;
  methodEl.textContent = sel ? sel.method + (sel.tokenMethod ? ` + ${sel.tokenMethod}` : "") : "";
  if (controller.lastError) renderBanner(bannerEl, controller.lastError, "error");
  else renderBanner(bannerEl, infoMessage, "info");

  const page = controller.page;
  renderQueue(queueBody, page?.sentences ?? [], controller.cursor, (i) => run(() => controller.open(i)));
  pageInfo.textContent =
    page && page.sentences.length > 0
      ? `${page.offset + 1}-${page.offset + page.sentences.length} of ${page.total}`
      : "empty";

  if (controller.session) {
    noteEl.value = controller.session.note;
    renderDetail(detailHead, tokensEl, controller.session, (i, cls) => {
      controller.session?.setLabel(i, cls);
      repaint();
    });
  } else {
    detailHead.textContent = "queue is empty";
    tokensEl.innerHTML = "";
  }
  mislabelBtn.disabled = !controller.canSubmit("mislabeled");
}

function run(fn: () => Promise<unknown>): void {
  infoMessage = null;
  fn()
    .catch((err) => {
      controller.lastError = err instanceof Error ? err.message : String(err);
    })
    .finally(repaint);
}

function exportCorrected(): void {
  run(async () => {
    const res = await controller.export();
    if (res) infoMessage = `wrote ${res.path} (${res.n_corrected} sentence(s) corrected)`;
  });
}

must("accept").addEventListener("click", () => run(() => controller.submit("correct")));
mislabelBtn.addEventListener("click", () => run(() => controller.submit("mislabeled")));
must("skip").addEventListener("click", () => run(() => controller.submit("skipped")));
must("export").addEventListener("click", exportCorrected);
must("next").addEventListener("click", () => run(() => controller.nextPage()));
must("prev").addEventListener("click", () => run(() => controller.prevPage()));

noteEl.addEventListener("input", () => {
  if (controller.session) controller.session.note = noteEl.value;
  mislabelBtn.disabled = !controller.canSubmit("mislabeled");
});

document.addEventListener("keydown", (ev) => {
  const target = ev.target as HTMLElement | null;
  if (target && ["TEXTAREA", "INPUT", "SELECT"].includes(target.tagName)) return;
  const nItems = controller.page?.sentences.length ?? 0;
  switch (ev.key) {
    case "a":
      run(() => controller.submit("correct"));
      break;
    case "x":
      run(() => controller.submit("mislabeled"));
      break;
    case "s":
      run(() => controller.submit("skipped"));
      break;
    case "e":
      exportCorrected();
      break;
    case "j":
      if (controller.cursor + 1 < nItems) run(() => controller.open(controller.cursor + 1));
      break;
    case "k":
      if (controller.cursor > 0) run(() => controller.open(controller.cursor - 1));
      break;
  }
});

run(() => controller.init());
