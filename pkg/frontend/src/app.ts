import { ApiClient } from "./api.js";
import { renderHeatmap } from "./heatmap.js";
import { renderIssuesTable, renderPolicyFilter } from "./issues.js";
import { RunLauncher } from "./launcher.js";
import { renderSummary } from "./summaries.js";
import type { ComplianceReport } from "./types.js";

/** Single-page wiring: launcher view -> report view. All numbers come from
 * the service; this file only places server payloads into the DOM. */
export function mount(root: HTMLElement, api: ApiClient = new ApiClient()): RunLauncher {
  root.innerHTML = "";

  const launcherView = document.createElement("div");
  const reportView = document.createElement("div");
  reportView.style.display = "none";
  root.appendChild(launcherView);
  root.appendChild(reportView);

  const launcher = new RunLauncher(api, {
    onComplete: (runId) => {
      void showReport(runId);
    },
  });
  launcherView.appendChild(launcher.root);
  void launcher.loadPolicies();

  async function showReport(runId: string): Promise<void> {
    const report = await api.getReport(runId);
    renderReport(reportView, report, api, runId);
    launcherView.style.display = "none";
    reportView.style.display = "block";
  }

  return launcher;
}

export function renderReport(
  container: HTMLElement,
  report: ComplianceReport,
  api: ApiClient,
  runId: string,
): void {
  container.innerHTML = "";

  const heading = document.createElement("h1");
  heading.textContent = `Compliance report ${report.run_id}`;
  container.appendChild(heading);

  container.appendChild(
    renderSummary("Overall", report.overall.narrative, report.overall.top_issues),
  );
  for (const policyId of report.policy_ids) {
    const policy = report.policies[policyId];
    if (!policy) continue;
    container.appendChild(renderSummary(`Policy ${policyId}`, policy.narrative, policy.issues));
  }

  const heatmaps = document.createElement("section");
  heatmaps.className = "heatmaps";
  for (const policyId of report.policy_ids) {
    const matrix = report.heatmaps[policyId];
    if (!matrix) continue;
    const title = document.createElement("h2");
    title.textContent = `Heatmap — ${policyId}`;
    heatmaps.appendChild(title);
    heatmaps.appendChild(renderHeatmap(matrix));
  }
  container.appendChild(heatmaps);

  const issuesSection = document.createElement("section");
  issuesSection.className = "issues-section";
  const issuesTitle = document.createElement("h2");
  issuesTitle.textContent = "Issues and fixes by card section";
  issuesSection.appendChild(issuesTitle);

  const tableHolder = document.createElement("div");
  let filterBar: HTMLElement;

  const applyFilter = (policy: string | null) => {
    void api.getIssues(runId, policy ?? undefined).then((response) => {
      tableHolder.innerHTML = "";
      tableHolder.appendChild(renderIssuesTable(response.rows, response.policy));
      const fresh = renderPolicyFilter(report.policy_ids, policy, applyFilter);
      filterBar.replaceWith(fresh);
      filterBar = fresh;
    });
  };

  filterBar = renderPolicyFilter(report.policy_ids, null, applyFilter);
  issuesSection.appendChild(filterBar);
  issuesSection.appendChild(tableHolder);
  container.appendChild(issuesSection);

  tableHolder.appendChild(renderIssuesTable(report.sections, null));
}
