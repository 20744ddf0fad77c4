/** Wire types mirroring the compliance service JSON. The client renders
 * these verbatim and never recomputes scores or counts on its own. */

export interface PolicySummary {
  policy_id: string;
  full_name: string;
  jurisdiction: string;
  version: number;
  articles: number;
  has_relevancy: boolean;
}

export interface RunRecord {
  run_id: string;
  card_id: string;
  policy_ids: string[];
  status: "pending" | "running" | "complete" | "failed";
  timings: Record<string, number>;
  artifacts: Record<string, string>;
  error: string | null;
}

export interface HeatmapCell {
  state: "scored" | "skipped" | "unscored";
  score: number | null;
  rationale: string | null;
}

export interface HeatmapMatrix {
  policy_id: string;
  rows: string[];
  cols: string[];
  cells: HeatmapCell[][];
  legend: Record<string, string>;
}

export interface IssueItem {
  policy_id: string;
  article: string;
  score: number;
  rationale: string | null;
  record_id: string;
}

export interface IssueFixRow {
  section: string;
  category: string;
  original_content: string;
  issues: IssueItem[];
  fixes: string[];
}

export interface PriorityRow {
  policy_id: string;
  article: string;
  max_score: number;
  pair_count: number;
  record_ids: string[];
}

export interface ComplianceReport {
  run_id: string;
  policy_ids: string[];
  overall: { narrative: string; top_issues: PriorityRow[] };
  policies: Record<string, { narrative: string; issues: PriorityRow[] }>;
  sections: IssueFixRow[];
  heatmaps: Record<string, HeatmapMatrix>;
  issue_threshold: number;
  ledger: unknown;
}

export interface IssuesResponse {
  run_id: string;
  policy: string | null;
  rows: IssueFixRow[];
}

export interface ValidationDetail {
  ok: boolean;
  missing: string[];
  unknown: string[];
  empty: string[];
  malformed: string[];
  warnings: string[];
}
