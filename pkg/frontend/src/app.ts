/**
 * Curation UI.
 *
 * One reviewer walks the intent classes, ticks exactly k utterances per
 * class from the served shortlist, and exports the manifest once every
 * class is done. All durable state lives in the service: the page can be
 * reloaded at any time and reconstructs exactly the acknowledged picks.
 * Unsubmitted ticks are deliberately ephemeral.
 *
 * Keyboard: 1-9 and 0 toggle candidates, arrows (or j/k) switch class,
 * Enter submits the current class, e exports the manifest.
 */

import { ApiError, CurationClient } from "./api.js";
import type { ClassState, SessionState } from "./api.js";

export class CurationApp {
  private session: SessionState | null = null;
  private order: number[] = []; // label ids in listing order
  private cursor = 0; // position in `order`
  private drafts = new Map<number, Set<number>>(); // unsubmitted ticks
  private manifestText: string | null = null;
  private notice = "";
  private busy = false;
  private readonly onKeyDown = (event: KeyboardEvent) => this.handleKey(event);

  constructor(
    private readonly client: CurationClient,
    private readonly root: HTMLElement,
  ) {}

  async start(sessionId: string): Promise<void> {
    this.session = await this.client.getSession(sessionId);
    this.order = Object.values(this.session.classes)
      .map((c) => c.label_id)
      .sort((a, b) => a - b);
    this.cursor = 0;
    this.drafts.clear();
    for (const state of Object.values(this.session.classes)) {
      this.drafts.set(state.label_id, new Set(state.selections));
    }
    this.root.ownerDocument.addEventListener("keydown", this.onKeyDown);
    this.render();
  }

  destroy(): void {
    this.root.ownerDocument.removeEventListener("keydown", this.onKeyDown);
  }

  // ---- state helpers ----

  private get current(): ClassState {
    const labelId = this.order[this.cursor];
    const state = this.session?.classes[String(labelId)];
    if (!state) throw new Error(`no class at cursor ${this.cursor}`);
    return state;
  }

  private draftFor(labelId: number): Set<number> {
    let draft = this.drafts.get(labelId);
    if (!draft) {
      draft = new Set();
      this.drafts.set(labelId, draft);
    }
    return draft;
  }

  private doneCount(): number {
    if (!this.session) return 0;
    return Object.values(this.session.classes).filter(
      (c) => c.status === "done",
    ).length;
  }

  private allDone(): boolean {
    return this.session !== null && this.doneCount() === this.order.length;
  }

  private canSubmit(): boolean {
    if (!this.session || this.busy) return false;
    return this.draftFor(this.current.label_id).size ===
      this.session.picks_per_class;
  }

  // ---- actions ----

  private toggle(rowIndex: number): void {
    const draft = this.draftFor(this.current.label_id);
    if (draft.has(rowIndex)) draft.delete(rowIndex);
    else draft.add(rowIndex);
    this.notice = "";
    this.render();
  }

  private move(delta: number): void {
    const next = this.cursor + delta;
    if (next < 0 || next >= this.order.length) return;
    this.cursor = next;
    this.notice = "";
    this.render();
  }

  private jumpTo(position: number): void {
    if (position < 0 || position >= this.order.length) return;
    this.cursor = position;
    this.notice = "";
    this.render();
  }

  private async submit(): Promise<void> {
    if (!this.session || !this.canSubmit()) return;
    const state = this.current;
    const picks = [...this.draftFor(state.label_id)].sort((a, b) => a - b);
    this.busy = true;
    this.render();
    try {
      const updated = await this.client.putSelection(
        this.session.session_id,
        state.label_id,
        picks,
      );
      this.session.classes[String(state.label_id)] = updated;
      this.drafts.set(state.label_id, new Set(updated.selections));
      this.manifestText = null; // a changed selection invalidates any export
      this.notice = `saved ${updated.label_name}`;
    } catch (err) {
      this.notice = err instanceof ApiError ? err.detail : String(err);
    } finally {
      this.busy = false;
    }
    this.render();
  }

  private async exportManifest(): Promise<void> {
    if (!this.session || !this.allDone() || this.busy) return;
    this.busy = true;
    this.render();
    try {
      const manifest = await this.client.getManifest(this.session.session_id);
      this.manifestText = JSON.stringify(manifest, null, 2);
      this.notice = "manifest exported";
    } catch (err) {
      this.notice = err instanceof ApiError ? err.detail : String(err);
    } finally {
      this.busy = false;
    }
    this.render();
  }

  private handleKey(event: KeyboardEvent): void {
    if (!this.session || !this.root.isConnected) return;
    const key = event.key;
    if (key >= "1" && key <= "9") {
      const candidate = this.current.candidates[Number(key) - 1];
      if (candidate) this.toggle(candidate[0]);
    } else if (key === "0") {
      const candidate = this.current.candidates[9];
      if (candidate) this.toggle(candidate[0]);
    } else if (key === "ArrowDown" || key === "j") {
      this.move(1);
    } else if (key === "ArrowUp" || key === "k") {
      this.move(-1);
    } else if (key === "Enter") {
      void this.submit();
    } else if (key === "e") {
      void this.exportManifest();
    }
  }

  // ---- rendering ----

  private render(): void {
    if (!this.session) return;
    const doc = this.root.ownerDocument;
    this.root.textContent = "";

    this.root.appendChild(this.renderHeader(doc));
    const body = el(doc, "div", "layout");
    body.appendChild(this.renderNav(doc));
    body.appendChild(this.renderPanel(doc));
    this.root.appendChild(body);

    if (this.notice) {
      const note = el(doc, "p", "notice");
      note.textContent = this.notice;
      this.root.appendChild(note);
    }
    if (this.manifestText !== null) {
      const pre = el(doc, "pre", "manifest");
      pre.textContent = this.manifestText;
      this.root.appendChild(pre);
    }
    const keys = el(doc, "p", "keys");
    keys.textContent =
      "keys: 1-9/0 toggle, arrows or j/k switch class, Enter submit, e export";
    this.root.appendChild(keys);
  }

  private renderHeader(doc: Document): HTMLElement {
    const session = this.session!;
    const header = el(doc, "header", "header");
    const title = el(doc, "h1");
    title.textContent = `curation: ${session.dataset_path}`;
    header.appendChild(title);

    const progress = el(doc, "span", "progress");
    progress.textContent =
      `${this.doneCount()} / ${this.order.length} classes done`;
    header.appendChild(progress);

    const exportBtn = el(doc, "button", "export") as HTMLButtonElement;
    exportBtn.textContent = "Export manifest";
    exportBtn.disabled = !this.allDone() || this.busy;
    exportBtn.addEventListener("click", () => void this.exportManifest());
    header.appendChild(exportBtn);
    return header;
  }

  private renderNav(doc: Document): HTMLElement {
    const session = this.session!;
    const nav = el(doc, "nav", "classes");
    this.order.forEach((labelId, position) => {
      const state = session.classes[String(labelId)]!;
      const item = el(doc, "button", "class-item") as HTMLButtonElement;
      item.dataset.labelId = String(labelId);
      if (position === this.cursor) item.classList.add("active");
      if (state.status === "done") item.classList.add("done");

      const name = el(doc, "span", "name");
      name.textContent = state.label_name;
      item.appendChild(name);
      const badge = el(doc, "span", "badge");
      badge.textContent = state.status;
      item.appendChild(badge);

      item.addEventListener("click", () => this.jumpTo(position));
      nav.appendChild(item);
    });
    return nav;
  }

  private renderPanel(doc: Document): HTMLElement {
    const session = this.session!;
    const state = this.current;
    const draft = this.draftFor(state.label_id);
    const k = session.picks_per_class;

    const panel = el(doc, "main", "panel");
    const heading = el(doc, "h2");
    heading.textContent = state.label_name;
    const badge = el(doc, "span", "badge");
    badge.textContent = state.status;
    heading.appendChild(badge);
    panel.appendChild(heading);

    if (state.short_class) {
      const warn = el(doc, "p", "warning");
      warn.textContent =
        "short class: fewer members than the requested shortlist";
      panel.appendChild(warn);
    }

    const hint = el(doc, "p", "hint");
    hint.textContent = `pick exactly ${k} (${draft.size} picked)`;
    panel.appendChild(hint);

    const list = el(doc, "ol", "candidates");
    state.candidates.forEach(([rowIndex, text]) => {
      const item = el(doc, "li", "candidate");
      const label = el(doc, "label");
      const box = el(doc, "input") as HTMLInputElement;
      box.type = "checkbox";
      box.checked = draft.has(rowIndex);
      box.dataset.row = String(rowIndex);
      box.addEventListener("change", () => this.toggle(rowIndex));
      label.appendChild(box);

      const row = el(doc, "span", "row-id");
      row.textContent = `#${rowIndex}`;
      label.appendChild(row);
      // textContent keeps the utterance verbatim, markup and all.
      const utterance = el(doc, "span", "text");
      utterance.textContent = text;
      label.appendChild(utterance);

      item.appendChild(label);
      list.appendChild(item);
    });
    panel.appendChild(list);

    const submit = el(doc, "button", "submit") as HTMLButtonElement;
    submit.textContent = `Submit selection (${draft.size}/${k})`;
    submit.disabled = !this.canSubmit();
    submit.addEventListener("click", () => void this.submit());
    panel.appendChild(submit);
    return panel;
  }
}

function el(doc: Document, tag: string, className?: string): HTMLElement {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  return node;
}
