import type { PriorityRow } from "./types.js";

/** Narrative block plus its locally-computed priority table, rendered
 * verbatim from the report payload. */
export function renderSummary(
  heading: string,
  narrative: string,
  topIssues: PriorityRow[],
): HTMLElement {
  const section = document.createElement("section");
  section.className = "summary";

  const title = document.createElement("h2");
  title.textContent = heading;
  section.appendChild(title);

  const text = document.createElement("p");
  text.className = "narrative";
  text.textContent = narrative;
  section.appendChild(text);

  if (topIssues.length > 0) {
    const table = document.createElement("table");
    table.className = "priority-table";
    const head = table.createTHead().insertRow();
    for (const label of ["Policy", "Article", "Max score", "Affected pairs"]) {
      const th = document.createElement("th");
      th.textContent = label;
      head.appendChild(th);
    }
    const body = table.createTBody();
    for (const row of topIssues) {
      const tr = body.insertRow();
      tr.insertCell().textContent = row.policy_id;
      tr.insertCell().textContent = row.article;
      tr.insertCell().textContent = String(row.max_score);
      tr.insertCell().textContent = String(row.pair_count);
    }
    section.appendChild(table);
  } else {
    const empty = document.createElement("p");
    empty.className = "no-issues";
    empty.textContent = "No issues at or above the reporting threshold.";
    section.appendChild(empty);
  }
  return section;
}
