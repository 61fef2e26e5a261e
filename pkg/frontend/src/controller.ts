import type { ReviewApi } from "./api.js";
import type {
  ExportResponse,
  MethodsResponse,
  QueueItem,
  QueuePage,
  ReviewRequest,
  SentenceDetail,
  Stats,
  Verdict,
} from "./types.js";

// Token shading: low quality scores show hot. Quality arrives from the API
// already in [0, 1]; the clamp only guards odd inputs.
export function heat(quality: number): number {
  if (!Number.isFinite(quality)) return 0;
  return Math.min(1, Math.max(0, 1 - quality));
}

// One sentence being reviewed: the staged labels start as the given labels
// and the session is dirty once any of them differ.
export class SentenceSession {
  readonly detail: SentenceDetail;
  readonly labels: number[];
  note = "";

  constructor(detail: SentenceDetail) {
    this.detail = detail;
    this.labels = [...detail.given_labels];
  }

  setLabel(index: number, cls: number): void {
    if (index < 0 || index >= this.labels.length) {
      throw new RangeError(`token index ${index} outside 0..${this.labels.length - 1}`);
    }
    if (cls < 0 || cls >= this.detail.classes.length) {
      throw new RangeError(`class ${cls} outside 0..${this.detail.classes.length - 1}`);
    }
    this.labels[index] = cls;
  }

  get dirty(): boolean {
    return this.labels.some((l, i) => l !== this.detail.given_labels[i]);
  }
}

export interface Selection {
  method: string;
  tokenMethod: string | null;
}

// Drives a review session against the API. The queue order is whatever the
// server returned; nothing is re-ranked or re-scored here.
export class ReviewController {
  info: MethodsResponse | null = null;
  selection: Selection | null = null;
  page: QueuePage | null = null;
  cursor = 0;
  session: SentenceSession | null = null;
  stats: Stats | null = null;
  lastError: string | null = null;

  constructor(
    private readonly api: ReviewApi,
    readonly pageSize: number = 20,
  ) {}

  get current(): QueueItem | null {
    return this.page?.sentences[this.cursor] ?? null;
  }

  async init(): Promise<void> {
    this.info = await this.api.methods();
    this.selection = {
      method: this.info.default.method,
      tokenMethod: this.info.default.token_method || null,
    };
    this.stats = await this.api.stats();
    await this.loadPage(0);
  }

  async loadPage(offset: number): Promise<void> {
    if (!this.selection) throw new Error("call init() before loading pages");
    this.page = await this.api.queue({
      method: this.selection.method,
      tokenMethod: this.selection.tokenMethod,
      sort: "score",
      offset,
      limit: this.pageSize,
    });
    const items = this.page.sentences;
    if (items.length === 0) {
      this.cursor = 0;
      this.session = null;
      return;
    }
    const firstOpen = items.findIndex((it) => it.verdict === null);
    await this.open(firstOpen >= 0 ? firstOpen : 0);
  }

  async setSelection(method: string, tokenMethod: string | null): Promise<void> {
    this.selection = { method, tokenMethod };
    await this.loadPage(0);
  }

  async nextPage(): Promise<void> {
    const page = this.page;
    if (page && page.offset + page.limit < page.total) {
      await this.loadPage(page.offset + page.limit);
    }
  }

  async prevPage(): Promise<void> {
    const page = this.page;
    if (page && page.offset > 0) {
      await this.loadPage(Math.max(0, page.offset - page.limit));
    }
  }

  async open(index: number): Promise<void> {
    const item = this.page?.sentences[index];
    if (!item) throw new RangeError(`no queue item at index ${index}`);
    this.cursor = index;
    const detail = await this.api.sentence(item.id, this.selection?.tokenMethod ?? undefined);
    this.session = new SentenceSession(detail);
  }

  canSubmit(verdict: Verdict): boolean {
    const session = this.session;
    if (!session || !this.current) return false;
    if (verdict !== "mislabeled") return true;
    return session.dirty || session.note.trim() !== "";
  }

  // Submits the verdict for the open sentence. Returns false (leaving the
  // cursor in place, lastError set) if the verdict is incomplete or the
  // server rejects it; the incomplete case never reaches the network.
  async submit(verdict: Verdict): Promise<boolean> {
    const item = this.current;
    const session = this.session;
    if (!item || !session) {
      this.lastError = "no sentence is open";
      return false;
    }
    if (!this.canSubmit(verdict)) {
      this.lastError = "mislabeled needs a corrected label or a note";
      return false;
    }
    const body: ReviewRequest = { verdict };
    if (verdict === "mislabeled" && session.dirty) body.corrected_labels = [...session.labels];
    const note = session.note.trim();
    if (note) body.reviewer_note = note;
    if (this.info) body.fingerprint = this.info.fingerprint;
    try {
      const res = await this.api.submitReview(item.id, body);
      this.stats = res.stats;
      item.verdict = verdict;
      this.lastError = null;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      return false;
    }
    await this.advance();
    return true;
  }

  async export(path?: string): Promise<ExportResponse | null> {
    try {
      const res = await this.api.exportCorrected(path);
      this.lastError = null;
      return res;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      return null;
    }
  }

  // Move to the next unreviewed sentence, crossing into the next page when
  // the current one is exhausted.
  private async advance(): Promise<void> {
    const page = this.page;
    if (!page) return;
    const items = page.sentences;
    for (let i = this.cursor + 1; i < items.length; i++) {
      if (items[i]?.verdict === null) {
        await this.open(i);
        return;
      }
    }
    if (page.offset + items.length < page.total) {
      await this.loadPage(page.offset + page.limit);
    }
  }
}
