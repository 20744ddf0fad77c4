import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { renderReport } from "../src/app.js";
import type { ComplianceReport, IssuesResponse } from "../src/types.js";
import reportFixture from "./fixtures/report.json";
import issuesAll from "./fixtures/issues_all.json";
import issuesAdaa from "./fixtures/issues_adaa.json";

const report = reportFixture as unknown as ComplianceReport;

function jsonResponse(data: unknown): Response {
  return new Response(JSON.stringify(data), {
    status: 200,
    headers: { "content-type": "application/json" },
  });
}

afterEach(() => {
  vi.restoreAllMocks();
});

describe("report view", () => {
  it("renders every server layer without recomputing numbers", () => {
    const container = document.createElement("div");
    renderReport(container, report, new ApiClient(), report.run_id);

    const headings = Array.from(container.querySelectorAll("h2"), (h) => h.textContent);
    expect(headings).toContain("Overall");
    for (const policyId of report.policy_ids) {
      expect(headings).toContain(`Policy ${policyId}`);
      expect(headings).toContain(`Heatmap — ${policyId}`);
    }

    expect(container.querySelector(".narrative")!.textContent).toBe(
      report.overall.narrative,
    );

    // priority numbers appear exactly as served
    const firstRow = report.overall.top_issues[0]!;
    const cells = Array.from(
      container.querySelector(".priority-table tbody tr")!.querySelectorAll("td"),
      (td) => td.textContent,
    );
    expect(cells).toEqual([
      firstRow.policy_id,
      firstRow.article,
      String(firstRow.max_score),
      String(firstRow.pair_count),
    ]);

    const grids = container.querySelectorAll("table.heatmap-grid");
    expect(grids.length).toBe(report.policy_ids.length);
  });

  it("filters the issues table through the server endpoint", async () => {
    const requested: string[] = [];
    vi.stubGlobal(
      "fetch",
      vi.fn(async (url: string) => {
        requested.push(url);
        if (url.includes("policy=ADAA")) return jsonResponse(issuesAdaa as IssuesResponse);
        return jsonResponse(issuesAll as IssuesResponse);
      }),
    );

    const container = document.createElement("div");
    renderReport(container, report, new ApiClient(), report.run_id);
    const buttons = container.querySelectorAll<HTMLButtonElement>(".policy-filter button");
    const adaaButton = Array.from(buttons).find((b) => b.textContent === "ADAA")!;
    adaaButton.click();
    await new Promise((resolve) => setTimeout(resolve, 0));

    expect(requested).toEqual([`/runs/${report.run_id}/issues?policy=ADAA`]);
    const table = container.querySelector<HTMLElement>(".issues-table")!;
    expect(table.dataset.policyFilter).toBe("ADAA");
    const renderedIssues = table.querySelectorAll(".issues li");
    const fixtureIssues = (issuesAdaa as IssuesResponse).rows.reduce(
      (total, row) => total + row.issues.length,
      0,
    );
    expect(renderedIssues.length).toBe(fixtureIssues);
  });

  it("matches the overall summary snapshot", () => {
    const container = document.createElement("div");
    renderReport(container, report, new ApiClient(), report.run_id);
    expect(container.querySelector("section.summary")!.outerHTML).toMatchSnapshot();
  });
});
