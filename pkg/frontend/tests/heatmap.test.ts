import { describe, expect, it } from "vitest";

import { renderHeatmap } from "../src/heatmap.js";
import type { HeatmapMatrix } from "../src/types.js";
import heatmapFixture from "./fixtures/heatmap_atc.json";

const matrix = heatmapFixture as HeatmapMatrix;

describe("heatmap", () => {
  it("renders the served matrix exactly", () => {
    const view = renderHeatmap(matrix);
    const table = view.querySelector("table.heatmap-grid")!;
    expect(table.getAttribute("data-policy")).toBe(matrix.policy_id);

    const bodyRows = table.querySelectorAll("tbody tr");
    expect(bodyRows.length).toBe(matrix.rows.length);
    bodyRows.forEach((tr, r) => {
      expect(tr.querySelector("th")!.textContent).toBe(matrix.rows[r]);
      const cells = tr.querySelectorAll("td");
      expect(cells.length).toBe(matrix.cols.length);
      cells.forEach((td, c) => {
        const cell = matrix.cells[r]![c]!;
        if (cell.state === "scored") {
          expect(td.textContent).toBe(String(cell.score));
        } else {
          expect(td.classList.contains(`cell-${cell.state}`)).toBe(true);
        }
      });
    });
  });

  it("matches the snapshot", () => {
    const view = renderHeatmap(matrix);
    expect(view.querySelector("table")!.outerHTML).toMatchSnapshot();
  });

  it("reveals the rationale verbatim on hover", () => {
    const view = renderHeatmap(matrix);
    document.body.appendChild(view);

    let expected: { r: number; c: number; rationale: string } | null = null;
    outer: for (let r = 0; r < matrix.cells.length; r++) {
      for (let c = 0; c < matrix.cells[r]!.length; c++) {
        const cell = matrix.cells[r]![c]!;
        if (cell.rationale) {
          expected = { r, c, rationale: cell.rationale };
          break outer;
        }
      }
    }
    expect(expected).not.toBeNull();

    const row = view.querySelectorAll("tbody tr")[expected!.r]!;
    const td = row.querySelectorAll("td")[expected!.c]!;
    td.dispatchEvent(new MouseEvent("mouseover", { bubbles: true }));

    const tooltip = view.querySelector<HTMLElement>(".heatmap-tooltip")!;
    expect(tooltip.style.display).toBe("block");
    expect(tooltip.textContent).toContain(expected!.rationale);

    td.dispatchEvent(new MouseEvent("mouseout", { bubbles: true }));
    expect(tooltip.style.display).toBe("none");
  });

  it("legend enumerates all seven score/skip states", () => {
    const view = renderHeatmap(matrix);
    const states = Array.from(
      view.querySelectorAll(".heatmap-legend li"),
      (li) => (li as HTMLElement).dataset.state,
    );
    for (const required of ["0", "1", "2", "3", "4", "5", "skipped"]) {
      expect(states).toContain(required);
    }
  });
});
