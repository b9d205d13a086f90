/** DOM rendering and input wiring.
 *
 * Every mutation goes through the agent: edits POST to the loopback API
 * and the next poll (or the response) refreshes the view. All three
 * input paths (typing, paste, fill-down) pass the same read-only gate
 * in GridState before anything is sent.
 */

import { addrToA1, colLetters, parseRect, rectToA1 } from "./a1";
import { AgentClient, ApiError } from "./api";
import type { GridState, PollDiff } from "./state";
import type { EditSource } from "./types";

interface Selection {
  sheet: string;
  top: number;
  left: number;
  bottom: number;
  right: number;
}

const OVERLAY_COLORS = ["ov-a", "ov-b", "ov-c", "ov-d", "ov-e"];

export class GridRenderer {
  private selection: Selection | null = null;
  private statusLine = "";

  constructor(
    private root: HTMLElement,
    private state: GridState,
    private client: AgentClient,
  ) {
    this.root.addEventListener("paste", (event) => this.onPaste(event as ClipboardEvent));
    document.addEventListener("keydown", (event) => this.onKey(event));
  }

  refresh(diff?: PollDiff): void {
    const snapshot = this.state.snapshot;
    this.root.innerHTML = "";
    this.root.append(
      this.header(),
      this.formulaBar(),
      this.sheetTabs(),
      this.gridTable(diff),
      this.panels(),
      this.statusBar(),
    );
  }

  // -- chrome ---------------------------------------------------------------

  private header(): HTMLElement {
    const snapshot = this.state.snapshot;
    const el = div("header");
    const dot = div(`conn conn-${this.state.connectivity}`);
    dot.title = this.state.connectivity;
    const label = span(
      `${snapshot.workbook_id || "(no workbook)"} — ${snapshot.user || "?"} ` +
      `[${snapshot.roles.join(", ") || "Detached"}]`);
    el.append(dot, label);
    const exportBtn = button("Export selection…", () => this.exportDialog());
    const tickBtn = button("Sync now", () => {
      void this.client.tick().then(() => this.note("sync requested"));
    });
    el.append(exportBtn, tickBtn);
    return el;
  }

  private formulaBar(): HTMLElement {
    const el = div("formula-bar");
    const sel = this.selection;
    const label = span(sel
      ? addrToA1({ sheet: sel.sheet, row: sel.top, col: sel.left })
      : "");
    label.className = "addr-label";
    const input = document.createElement("input");
    input.className = "formula-input";
    input.value = sel
      ? this.state.cellInput(sel.sheet, sel.top, sel.left)
      : "";
    input.addEventListener("keydown", (event) => {
      if (event.key === "Enter" && this.selection) {
        const addr = addrToA1({
          sheet: this.selection.sheet,
          row: this.selection.top,
          col: this.selection.left,
        });
        void this.submitEdit(addr, input.value, "type");
      }
    });
    el.append(label, input);
    return el;
  }

  private sheetTabs(): HTMLElement {
    const el = div("tabs");
    for (const name of this.state.sheetNames()) {
      const tab = button(name, () => {
        this.state.activeSheet = name;
        this.refresh();
      });
      if (name === this.state.activeSheet) {
        tab.className = "active";
      }
      el.append(tab);
    }
    return el;
  }

  // -- the grid ----------------------------------------------------------------

  private gridTable(diff?: PollDiff): HTMLElement {
    const sheet = this.state.activeSheet;
    const { rows, cols } = this.state.extent(sheet);
    const exportColor = new Map<string, string>();
    this.state.snapshot.exports.forEach((exp, index) => {
      exportColor.set(exp.id, OVERLAY_COLORS[index % OVERLAY_COLORS.length]);
    });

    const table = document.createElement("table");
    table.className = "grid";
    const head = table.createTHead().insertRow();
    head.insertCell();
    for (let col = 1; col <= cols; col += 1) {
      head.insertCell().textContent = colLetters(col);
    }
    const body = table.createTBody();
    const byPos = new Map<string, { display: string; kind: string }>();
    const view = this.state.snapshot.sheets.find(
      (s) => s.name.toLowerCase() === sheet.toLowerCase());
    for (const cell of view?.cells ?? []) {
      byPos.set(`${cell.row}:${cell.col}`, cell);
    }
    for (let row = 1; row <= rows; row += 1) {
      const tr = body.insertRow();
      tr.insertCell().textContent = String(row);
      for (let col = 1; col <= cols; col += 1) {
        const td = tr.insertCell();
        const cell = byPos.get(`${row}:${col}`);
        td.textContent = cell?.display ?? "";
        td.dataset.row = String(row);
        td.dataset.col = String(col);
        if (cell?.kind === "e") {
          td.classList.add("error");
        }
        if (this.state.isImportCell(sheet, row, col)) {
          td.classList.add("import-overlay");
          td.title = "imported range (read-only)";
        }
        for (const exportId of this.state.exportIdsAt(sheet, row, col)) {
          td.classList.add("export-overlay", exportColor.get(exportId) ?? "ov-a");
        }
        if (diff?.changedCells.has(`${sheet}!${colLetters(col)}${row}`)) {
          td.classList.add("flash");
        }
        if (this.inSelection(sheet, row, col)) {
          td.classList.add("selected");
        }
        td.addEventListener("mousedown", (event) =>
          this.onCellClick(sheet, row, col, event.shiftKey));
        td.addEventListener("dblclick", () => this.inlineEdit(td, sheet, row, col));
      }
    }
    return table;
  }

  private inSelection(sheet: string, row: number, col: number): boolean {
    const sel = this.selection;
    return !!sel && sel.sheet === sheet &&
      row >= sel.top && row <= sel.bottom &&
      col >= sel.left && col <= sel.right;
  }

  private onCellClick(sheet: string, row: number, col: number, extend: boolean): void {
    if (extend && this.selection && this.selection.sheet === sheet) {
      this.selection = {
        sheet,
        top: Math.min(this.selection.top, row),
        left: Math.min(this.selection.left, col),
        bottom: Math.max(this.selection.top, row),
        right: Math.max(this.selection.left, col),
      };
    } else {
      this.selection = { sheet, top: row, left: col, bottom: row, right: col };
    }
    this.refresh();
  }

  private inlineEdit(td: HTMLTableCellElement, sheet: string, row: number, col: number): void {
    const addr = addrToA1({ sheet, row, col });
    const verdict = this.state.attemptEdit(addr, "type");
    if (!verdict.ok) {
      td.classList.add("rejected");
      this.note(verdict.reason ?? "read-only");
      return;
    }
    const input = document.createElement("input");
    input.value = this.state.cellInput(sheet, row, col);
    td.textContent = "";
    td.append(input);
    input.focus();
    input.addEventListener("keydown", (event) => {
      if (event.key === "Enter") {
        void this.submitEdit(addr, input.value, "type");
      } else if (event.key === "Escape") {
        this.refresh();
      }
    });
    input.addEventListener("blur", () => this.refresh());
  }

  // -- input paths beyond typing ----------------------------------------------

  private onPaste(event: ClipboardEvent): void {
    if (!this.selection) {
      return;
    }
    const text = event.clipboardData?.getData("text/plain") ?? "";
    if (!text) {
      return;
    }
    event.preventDefault();
    const { sheet, top, left } = this.selection;
    const lines = text.replace(/\r/g, "").split("\n").filter((l) => l.length);
    void (async () => {
      for (let dr = 0; dr < lines.length; dr += 1) {
        const fields = lines[dr].split("\t");
        for (let dc = 0; dc < fields.length; dc += 1) {
          const addr = addrToA1({ sheet, row: top + dr, col: left + dc });
          await this.submitEdit(addr, fields[dc], "paste", true);
        }
      }
      this.refresh();
    })();
  }

  private onKey(event: KeyboardEvent): void {
    if ((event.ctrlKey || event.metaKey) && event.key.toLowerCase() === "d") {
      event.preventDefault();
      void this.fillDown();
    }
  }

  /** Ctrl+D: copy the selection's top row into the rows below it. */
  private async fillDown(): Promise<void> {
    const sel = this.selection;
    if (!sel || sel.bottom === sel.top) {
      return;
    }
    for (let col = sel.left; col <= sel.right; col += 1) {
      const source = this.state.cellInput(sel.sheet, sel.top, col);
      for (let row = sel.top + 1; row <= sel.bottom; row += 1) {
        const addr = addrToA1({ sheet: sel.sheet, row, col });
        await this.submitEdit(addr, source, "fill", true);
      }
    }
    this.refresh();
  }

  private async submitEdit(addr: string, text: string, source: EditSource,
                           deferRefresh = false): Promise<void> {
    const verdict = this.state.attemptEdit(addr, source);
    if (!verdict.ok) {
      this.note(verdict.reason ?? "rejected");
      if (!deferRefresh) {
        this.refresh();
      }
      return;
    }
    try {
      await this.client.editCell(addr, text);
      this.note(`${addr} updated`);
    } catch (err) {
      this.note(err instanceof ApiError ? err.message : String(err));
    }
    if (!deferRefresh) {
      await this.pullNow();
    }
  }

  private async pullNow(): Promise<void> {
    try {
      const snapshot = await this.client.getGrid();
      this.refresh(this.state.apply(snapshot));
    } catch {
      this.refresh(this.state.markUnreachable());
    }
  }

  // -- panels -------------------------------------------------------------------

  private panels(): HTMLElement {
    const el = div("panels");
    el.append(this.exportsPanel(), this.importsPanel(), this.catalogPanel(),
              this.eventsPanel());
    return el;
  }

  private exportsPanel(): HTMLElement {
    const el = div("panel");
    el.append(h3("My exports"));
    for (const exp of this.state.snapshot.exports) {
      const flags = [
        exp.space_wide ? "space-wide" : "restricted",
        exp.paused ? "PAUSED" : "",
        exp.revoked ? "REVOKED" : "",
      ].filter(Boolean).join(", ");
      el.append(div("row",
        `${exp.name} (${exp.range}) v${exp.latest_version} — ${flags}`));
    }
    return el;
  }

  private importsPanel(): HTMLElement {
    const el = div("panel");
    el.append(h3("My imports"));
    for (const imp of this.state.snapshot.imports) {
      const row = div("row", `${imp.export_id} → ${imp.target} v${imp.applied_version}`);
      if (imp.stale) {
        row.append(badge("stale"));
      }
      if (imp.flagged) {
        row.append(badge(`flagged: ${imp.flagged}`));
      }
      el.append(row);
    }
    return el;
  }

  private catalogPanel(): HTMLElement {
    const el = div("panel");
    el.append(h3("Catalog (accessible exports)"));
    for (const entry of this.state.snapshot.catalog) {
      const row = div("row",
        `${entry.name} — ${entry.owner} (${entry.range}) v${entry.latest_version}` +
        (entry.description ? ` — ${entry.description}` : ""));
      if (entry.revoked) {
        row.append(badge("revoked"));
      } else {
        row.append(button("Import here", () => void this.importDialog(entry.id, entry.range)));
      }
      el.append(row);
    }
    return el;
  }

  private eventsPanel(): HTMLElement {
    const el = div("panel");
    el.append(h3("Events"));
    for (const event of this.state.snapshot.events.slice(-8)) {
      el.append(div("row event", event));
    }
    return el;
  }

  private statusBar(): HTMLElement {
    return div("status", this.statusLine);
  }

  private note(text: string): void {
    this.statusLine = text;
    const bar = this.root.querySelector(".status");
    if (bar) {
      bar.textContent = text;
    }
  }

  // -- dialogs ---------------------------------------------------------------------

  private exportDialog(): void {
    const sel = this.selection;
    if (!sel) {
      this.note("select a rectangle first");
      return;
    }
    const name = window.prompt("Export name:");
    if (!name) {
      this.note("export needs a non-empty name");
      return;
    }
    const description = window.prompt("Description:") ?? "";
    const space = window.prompt("Space id:") ?? "";
    const to = window.prompt("Restrict to users (comma-separated; empty = whole space):") ?? "";
    const range = rectToA1(sel);
    void this.client.registerExport({
      space,
      name,
      description,
      range,
      space_wide: to.trim() === "",
      allowed: to.trim() === "" ? [] : to.split(",").map((s) => s.trim()),
    }).then(
      (created) => {
        this.note(`export ${created.id} registered on ${created.range}`);
        void this.pullNow();
      },
      (err) => this.note(err instanceof ApiError ? err.message : String(err)),
    );
  }

  private async importDialog(exportId: string, sourceRange: string): Promise<void> {
    const sel = this.selection;
    if (!sel) {
      this.note("select the target's top-left cell first");
      return;
    }
    const source = parseRect(sourceRange);
    const target = rectToA1({
      sheet: sel.sheet,
      top: sel.top,
      left: sel.left,
      bottom: sel.top + (source.bottom - source.top),
      right: sel.left + (source.right - source.left),
    });
    try {
      const binding = await this.client.registerImport(exportId, target);
      this.note(`import ${binding.id} bound to ${binding.target}`);
      await this.pullNow();
    } catch (err) {
      this.note(err instanceof ApiError ? err.message : String(err));
    }
  }
}

// -- tiny DOM helpers ---------------------------------------------------------

function div(className: string, text?: string): HTMLDivElement {
  const el = document.createElement("div");
  el.className = className;
  if (text !== undefined) {
    el.textContent = text;
  }
  return el;
}

function span(text: string): HTMLSpanElement {
  const el = document.createElement("span");
  el.textContent = text;
  return el;
}

function h3(text: string): HTMLHeadingElement {
  const el = document.createElement("h3");
  el.textContent = text;
  return el;
}

function badge(text: string): HTMLSpanElement {
  const el = span(text);
  el.className = "badge";
  return el;
}

function button(label: string, onClick: () => void): HTMLButtonElement {
  const el = document.createElement("button");
  el.textContent = label;
  el.addEventListener("click", onClick);
  return el;
}
