/** JSON shapes served by the agent's loopback API (GET /local/grid). */

export interface CellView {
  addr: string; // "B2", sheet-local
  row: number;
  col: number;
  display: string;
  input: string; // formula source or literal text
  kind: string; // n | s | b | e | blank
}

export interface SheetView {
  name: string;
  cells: CellView[];
}

export interface ExportOverlay {
  id: string;
  name: string;
  range: string; // "Sheet!A2:D6"
  space: string;
  latest_version: number;
  space_wide: boolean;
  paused: boolean;
  revoked: boolean;
}

export interface ImportOverlay {
  id: string;
  export_id: string;
  target: string; // "Sheet!A2:D6"
  applied_version: number;
  stale: boolean;
  flagged: string | null;
}

export interface CatalogEntry {
  id: string;
  name: string;
  description: string;
  owner: string;
  space: string;
  range: string;
  latest_version: number;
  revoked: boolean;
}

export interface GridSnapshot {
  revision: number;
  user: string;
  workbook_id: string;
  online: boolean;
  roles: string[];
  sheets: SheetView[];
  exports: ExportOverlay[];
  imports: ImportOverlay[];
  catalog: CatalogEntry[];
  events: string[];
}

export type EditSource = "type" | "paste" | "fill";

export interface EditVerdict {
  ok: boolean;
  reason?: string;
}

export type Connectivity = "online" | "agent-offline" | "unreachable";
