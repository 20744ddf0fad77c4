import type { IssueFixRow } from "./types.js";

/** Section-by-section issues/fixes table. Rows always show the user's
 * original documentation; a policy filter only narrows the issue cells,
 * exactly as the server's filtered endpoint does. */
export function renderIssuesTable(rows: IssueFixRow[], policyFilter: string | null): HTMLElement {
  const table = document.createElement("table");
  table.className = "issues-table";
  if (policyFilter) table.dataset.policyFilter = policyFilter;

  const head = table.createTHead().insertRow();
  for (const label of ["Section", "Your documentation", "Detected issues", "Suggested fixes"]) {
    const th = document.createElement("th");
    th.textContent = label;
    head.appendChild(th);
  }

  const body = table.createTBody();
  for (const row of rows) {
    const tr = body.insertRow();
    tr.dataset.section = row.section;

    const sectionCell = tr.insertCell();
    sectionCell.className = "section-name";
    const title = document.createElement("strong");
    title.textContent = row.section;
    sectionCell.appendChild(title);
    const category = document.createElement("div");
    category.className = "category";
    category.textContent = row.category;
    sectionCell.appendChild(category);

    const contentCell = tr.insertCell();
    contentCell.className = "original-content";
    contentCell.textContent = row.original_content;

    const issuesCell = tr.insertCell();
    issuesCell.className = "issues";
    if (row.issues.length === 0) {
      issuesCell.textContent = "—";
    } else {
      const list = document.createElement("ul");
      for (const issue of row.issues) {
        const item = document.createElement("li");
        item.dataset.recordId = issue.record_id;
        item.dataset.score = String(issue.score);
        const where = document.createElement("strong");
        where.textContent = `${issue.policy_id} Art. ${issue.article} (score ${issue.score})`;
        item.appendChild(where);
        if (issue.rationale) {
          item.appendChild(document.createTextNode(` ${issue.rationale}`));
        }
        list.appendChild(item);
      }
      issuesCell.appendChild(list);
    }

    const fixesCell = tr.insertCell();
    fixesCell.className = "fixes";
    if (row.issues.length === 0 || row.fixes.length === 0) {
      fixesCell.textContent = "—";
    } else {
      const list = document.createElement("ul");
      for (const fix of row.fixes) {
        const item = document.createElement("li");
        item.textContent = fix;
        list.appendChild(item);
      }
      fixesCell.appendChild(list);
    }
  }
  return table;
}

/** Policy filter control: one button per policy plus a clear control. */
export function renderPolicyFilter(
  policyIds: string[],
  active: string | null,
  onSelect: (policy: string | null) => void,
): HTMLElement {
  const bar = document.createElement("div");
  bar.className = "policy-filter";

  const all = document.createElement("button");
  all.textContent = "All policies";
  all.className = active === null ? "active" : "";
  all.addEventListener("click", () => onSelect(null));
  bar.appendChild(all);

  for (const policyId of policyIds) {
    const button = document.createElement("button");
    button.textContent = policyId;
    button.dataset.policy = policyId;
    button.className = active === policyId ? "active" : "";
    button.addEventListener("click", () => onSelect(policyId));
    bar.appendChild(button);
  }
  return bar;
}
