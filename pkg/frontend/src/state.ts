/** Grid view-model state.
 *
 * Holds the last snapshot delivered by the agent, computes which cells
 * changed between polls (for flash highlighting), and gates every edit
 * path through one read-only check for import overlays. The grid never
 * invents values: everything shown was either typed locally (and came
 * back from the agent) or arrived as a committed version via a poll.
 */

import { parseAddr, parseRect, rectContains, type Rect } from "./a1";
import type {
  Connectivity,
  EditSource,
  EditVerdict,
  GridSnapshot,
} from "./types";

export interface PollDiff {
  changedCells: Set<string>; // "Sheet!B2"
  snapshotChanged: boolean;
  connectivityChanged: boolean;
}

const EMPTY: GridSnapshot = {
  revision: -1,
  user: "",
  workbook_id: "",
  online: false,
  roles: [],
  sheets: [],
  exports: [],
  imports: [],
  catalog: [],
  events: [],
};

export class GridState {
  snapshot: GridSnapshot = EMPTY;
  connectivity: Connectivity = "unreachable";
  activeSheet = "";
  private importRects: Rect[] = [];
  private exportRects: Map<string, Rect> = new Map();

  /** Apply a fresh snapshot; returns what changed for the renderer. */
  apply(snapshot: GridSnapshot): PollDiff {
    const previous = this.snapshot;
    const previousConnectivity = this.connectivity;
    this.connectivity = snapshot.online ? "online" : "agent-offline";
    if (snapshot.revision === previous.revision) {
      return {
        changedCells: new Set(),
        snapshotChanged: false,
        connectivityChanged: this.connectivity !== previousConnectivity,
      };
    }
    const changed = diffCells(previous, snapshot);
    this.snapshot = snapshot;
    this.importRects = snapshot.imports.map((imp) => parseRect(imp.target));
    this.exportRects = new Map(
      snapshot.exports.map((exp) => [exp.id, parseRect(exp.range)]),
    );
    if (!this.activeSheet && snapshot.sheets.length > 0) {
      this.activeSheet = snapshot.sheets[0].name;
    }
    return {
      changedCells: changed,
      snapshotChanged: true,
      connectivityChanged: this.connectivity !== previousConnectivity,
    };
  }

  /** The backend did not answer at all. */
  markUnreachable(): PollDiff {
    const changedConnectivity = this.connectivity !== "unreachable";
    this.connectivity = "unreachable";
    return {
      changedCells: new Set(),
      snapshotChanged: false,
      connectivityChanged: changedConnectivity,
    };
  }

  /** One gate for every input path: typing, paste, and fill all ask here. */
  attemptEdit(addrA1: string, _source: EditSource): EditVerdict {
    let addr;
    try {
      addr = parseAddr(addrA1);
    } catch (err) {
      return { ok: false, reason: String(err) };
    }
    for (const rect of this.importRects) {
      if (rectContains(rect, addr)) {
        return {
          ok: false,
          reason: `${addrA1} is inside an imported range and is read-only`,
        };
      }
    }
    return { ok: true };
  }

  isImportCell(sheet: string, row: number, col: number): boolean {
    const addr = { sheet, row, col };
    return this.importRects.some((rect) => rectContains(rect, addr));
  }

  /** Export ids whose overlay covers the cell (several may overlap). */
  exportIdsAt(sheet: string, row: number, col: number): string[] {
    const addr = { sheet, row, col };
    const out: string[] = [];
    for (const [id, rect] of this.exportRects) {
      if (rectContains(rect, addr)) {
        out.push(id);
      }
    }
    return out;
  }

  cellInput(sheet: string, row: number, col: number): string {
    const view = this.snapshot.sheets.find(
      (s) => s.name.toLowerCase() === sheet.toLowerCase(),
    );
    const cell = view?.cells.find((c) => c.row === row && c.col === col);
    return cell ? cell.input : "";
  }

  /** Grid extent for rendering: data plus breathing room. */
  extent(sheet: string): { rows: number; cols: number } {
    let rows = 12;
    let cols = 8;
    const view = this.snapshot.sheets.find(
      (s) => s.name.toLowerCase() === sheet.toLowerCase(),
    );
    for (const cell of view?.cells ?? []) {
      rows = Math.max(rows, cell.row + 2);
      cols = Math.max(cols, cell.col + 2);
    }
    for (const rect of [...this.importRects, ...this.exportRects.values()]) {
      if (rect.sheet.toLowerCase() === sheet.toLowerCase()) {
        rows = Math.max(rows, rect.bottom + 2);
        cols = Math.max(cols, rect.right + 2);
      }
    }
    return { rows, cols };
  }

  sheetNames(): string[] {
    return this.snapshot.sheets.map((s) => s.name);
  }

  staleImports(): string[] {
    return this.snapshot.imports
      .filter((imp) => imp.stale || imp.flagged)
      .map((imp) => imp.id);
  }
}

function diffCells(before: GridSnapshot, after: GridSnapshot): Set<string> {
  const previous = new Map<string, string>();
  for (const sheet of before.sheets) {
    for (const cell of sheet.cells) {
      previous.set(`${sheet.name}!${cell.addr}`, cell.display);
    }
  }
  const changed = new Set<string>();
  const seen = new Set<string>();
  for (const sheet of after.sheets) {
    for (const cell of sheet.cells) {
      const key = `${sheet.name}!${cell.addr}`;
      seen.add(key);
      if (previous.get(key) !== cell.display) {
        changed.add(key);
      }
    }
  }
  for (const key of previous.keys()) {
    if (!seen.has(key)) {
      changed.add(key); // cell went blank
    }
  }
  return changed;
}
