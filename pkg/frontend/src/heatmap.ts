import type { HeatmapCell, HeatmapMatrix } from "./types.js";

/** Order in which legend entries render; the text shown for each state. */
const LEGEND_LABELS: Record<string, string> = {
  "0": "0 · no violation",
  "1": "1 · minor ambiguity",
  "2": "2 · ambiguous",
  "3": "3 · possible risk",
  "4": "4 · probable violation",
  "5": "5 · clear violation",
  skipped: "skipped (filtered as irrelevant)",
  unscored: "unscored (provider failure)",
};

function cellKey(cell: HeatmapCell): string {
  if (cell.state === "scored") return String(cell.score);
  return cell.state;
}

function cellGlyph(cell: HeatmapCell): string {
  if (cell.state === "scored") return String(cell.score);
  return cell.state === "skipped" ? "·" : "?";
}

/** Render the served matrix exactly: one <td> per cell, colors from the
 * server legend, hover tooltip revealing the rationale verbatim. */
export function renderHeatmap(matrix: HeatmapMatrix): HTMLElement {
  const root = document.createElement("div");
  root.className = "heatmap";

  const table = document.createElement("table");
  table.className = "heatmap-grid";
  table.dataset.policy = matrix.policy_id;

  const head = table.createTHead().insertRow();
  head.appendChild(document.createElement("th"));
  for (const col of matrix.cols) {
    const th = document.createElement("th");
    th.scope = "col";
    th.textContent = col;
    head.appendChild(th);
  }

  const body = table.createTBody();
  matrix.rows.forEach((sectionName, r) => {
    const tr = body.insertRow();
    const th = document.createElement("th");
    th.scope = "row";
    th.textContent = sectionName;
    tr.appendChild(th);
    const cells = matrix.cells[r] ?? [];
    cells.forEach((cell, c) => {
      const td = tr.insertCell();
      td.className = `cell cell-${cell.state}`;
      td.style.backgroundColor = matrix.legend[cellKey(cell)] ?? "";
      td.textContent = cellGlyph(cell);
      td.dataset.section = sectionName;
      td.dataset.article = matrix.cols[c] ?? "";
      if (cell.rationale !== null) td.dataset.rationale = cell.rationale;
    });
  });
  root.appendChild(table);

  const tooltip = document.createElement("div");
  tooltip.className = "heatmap-tooltip";
  tooltip.style.display = "none";
  root.appendChild(tooltip);

  table.addEventListener("mouseover", (event) => {
    const td = (event.target as HTMLElement).closest("td");
    if (!(td instanceof HTMLTableCellElement)) return;
    const rationale = td.dataset.rationale;
    tooltip.textContent = rationale
      ? `${td.dataset.section} × Art. ${td.dataset.article}: ${rationale}`
      : `${td.dataset.section} × Art. ${td.dataset.article}`;
    tooltip.style.display = "block";
  });
  table.addEventListener("mouseout", () => {
    tooltip.style.display = "none";
  });

  root.appendChild(renderLegend(matrix.legend));
  return root;
}

function renderLegend(legend: Record<string, string>): HTMLElement {
  const list = document.createElement("ul");
  list.className = "heatmap-legend";
  for (const key of Object.keys(LEGEND_LABELS)) {
    const color = legend[key];
    if (!color) continue;
    const item = document.createElement("li");
    item.dataset.state = key;
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.backgroundColor = color;
    item.appendChild(swatch);
    item.appendChild(document.createTextNode(LEGEND_LABELS[key] ?? key));
    list.appendChild(item);
  }
  return list;
}
