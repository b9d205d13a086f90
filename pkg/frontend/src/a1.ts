/** A1-notation helpers for addresses ("Sheet!B2") and ranges ("Sheet!A2:D6"). */

export interface Addr {
  sheet: string;
  col: number; // 1-based
  row: number; // 1-based
}

export interface Rect {
  sheet: string;
  top: number;
  left: number;
  bottom: number;
  right: number;
}

export function colLetters(col: number): string {
  let out = "";
  while (col > 0) {
    const rem = (col - 1) % 26;
    out = String.fromCharCode(65 + rem) + out;
    col = Math.floor((col - 1) / 26);
  }
  return out;
}

export function colIndex(letters: string): number {
  let col = 0;
  for (const ch of letters.toUpperCase()) {
    col = col * 26 + (ch.charCodeAt(0) - 64);
  }
  return col;
}

function splitSheet(text: string): [string, string] {
  if (text.startsWith("'")) {
    let i = 1;
    let name = "";
    while (i < text.length) {
      if (text[i] === "'") {
        if (text[i + 1] === "'") {
          name += "'";
          i += 2;
          continue;
        }
        break;
      }
      name += text[i];
      i += 1;
    }
    return [name, text.slice(i + 2)]; // skip "'!"
  }
  const bang = text.indexOf("!");
  if (bang < 0) {
    throw new Error(`address needs a sheet: ${text}`);
  }
  return [text.slice(0, bang), text.slice(bang + 1)];
}

const BODY = /^([A-Za-z]+)([0-9]+)$/;

export function parseAddr(text: string): Addr {
  const [sheet, body] = splitSheet(text);
  const match = BODY.exec(body);
  if (!match) {
    throw new Error(`bad cell address: ${text}`);
  }
  return { sheet, col: colIndex(match[1]), row: parseInt(match[2], 10) };
}

export function parseRect(text: string): Rect {
  const [sheet, body] = splitSheet(text);
  const parts = body.split(":");
  const first = BODY.exec(parts[0]);
  const second = BODY.exec(parts.length > 1 ? parts[1] : parts[0]);
  if (!first || !second) {
    throw new Error(`bad range: ${text}`);
  }
  return {
    sheet,
    left: colIndex(first[1]),
    top: parseInt(first[2], 10),
    right: colIndex(second[1]),
    bottom: parseInt(second[2], 10),
  };
}

export function quoteSheet(name: string): string {
  return /^[A-Za-z_][A-Za-z0-9_]*$/.test(name)
    ? name
    : `'${name.replace(/'/g, "''")}'`;
}

export function addrToA1(addr: Addr): string {
  return `${quoteSheet(addr.sheet)}!${colLetters(addr.col)}${addr.row}`;
}

export function rectToA1(rect: Rect): string {
  return `${quoteSheet(rect.sheet)}!${colLetters(rect.left)}${rect.top}:` +
    `${colLetters(rect.right)}${rect.bottom}`;
}

export function rectContains(rect: Rect, addr: Addr): boolean {
  return (
    rect.sheet.toLowerCase() === addr.sheet.toLowerCase() &&
    addr.col >= rect.left && addr.col <= rect.right &&
    addr.row >= rect.top && addr.row <= rect.bottom
  );
}
