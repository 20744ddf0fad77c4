import { describe, expect, it } from "vitest";

import { renderIssuesTable, renderPolicyFilter } from "../src/issues.js";
import type { IssuesResponse } from "../src/types.js";
import allFixture from "./fixtures/issues_all.json";
import adaaFixture from "./fixtures/issues_adaa.json";

const all = allFixture as IssuesResponse;
const adaaOnly = adaaFixture as IssuesResponse;

describe("issues table", () => {
  it("renders one row per card section with the original content", () => {
    const table = renderIssuesTable(all.rows, null);
    const rows = table.querySelectorAll("tbody tr");
    expect(rows.length).toBe(23);
    rows.forEach((tr, i) => {
      const fixtureRow = all.rows[i]!;
      expect((tr as HTMLElement).dataset.section).toBe(fixtureRow.section);
      expect(tr.querySelector(".original-content")!.textContent).toBe(
        fixtureRow.original_content,
      );
      const rendered = tr.querySelectorAll(".issues li");
      expect(rendered.length).toBe(fixtureRow.issues.length);
    });
  });

  it("matches the unfiltered snapshot", () => {
    const table = renderIssuesTable(all.rows, null);
    expect(table.outerHTML).toMatchSnapshot();
  });

  it("policy filter shows exactly the server-filtered rows", () => {
    const table = renderIssuesTable(adaaOnly.rows, adaaOnly.policy);
    expect(table.dataset.policyFilter).toBe("ADAA");
    const rows = table.querySelectorAll("tbody tr");
    expect(rows.length).toBe(23); // zero-issue rows are retained
    rows.forEach((tr, i) => {
      const fixtureRow = adaaOnly.rows[i]!;
      const items = tr.querySelectorAll(".issues li");
      expect(items.length).toBe(fixtureRow.issues.length);
      items.forEach((li) => {
        expect(li.textContent).toContain("ADAA");
        expect(li.textContent).not.toContain("ATC Art.");
      });
      // documentation column is always present, even with no issues
      expect(tr.querySelector(".original-content")!.textContent!.length).toBeGreaterThan(0);
      if (fixtureRow.issues.length === 0) {
        expect(tr.querySelector(".issues")!.textContent).toBe("—");
      }
    });
  });

  it("renders rationale text verbatim", () => {
    const table = renderIssuesTable(all.rows, null);
    const withRationale = all.rows.find((row) =>
      row.issues.some((issue) => issue.rationale),
    )!;
    const issue = withRationale.issues.find((candidate) => candidate.rationale)!;
    const item = table.querySelector(`li[data-record-id="${issue.record_id}"]`)!;
    expect(item.textContent).toContain(issue.rationale!);
  });

  it("filter bar marks the active policy and fires the callback", () => {
    const picks: Array<string | null> = [];
    const bar = renderPolicyFilter(["ADAA", "ATC"], "ADAA", (policy) => picks.push(policy));
    const buttons = bar.querySelectorAll("button");
    expect(buttons.length).toBe(3);
    expect(buttons[1]!.className).toBe("active");

    (buttons[2] as HTMLButtonElement).click();
    (buttons[0] as HTMLButtonElement).click(); // clear filter -> all rows
    expect(picks).toEqual(["ATC", null]);
  });
});
