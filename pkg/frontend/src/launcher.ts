import { ApiClient, ApiError } from "./api.js";
import type { PolicySummary, RunRecord } from "./types.js";

export const POLL_INTERVAL_MS = 2000;

export interface LauncherCallbacks {
  onComplete: (runId: string) => void;
  onStatus?: (record: RunRecord) => void;
}

/** Card upload + policy multi-select + run kickoff with status polling.
 * API failures surface in an error banner with a retry affordance; nothing
 * fails silently. */
export class RunLauncher {
  readonly root: HTMLElement;
  private cardInput!: HTMLTextAreaElement;
  private policyBox!: HTMLElement;
  private statusLine!: HTMLElement;
  private errorBanner!: HTMLElement;
  private startButton!: HTMLButtonElement;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private policies: PolicySummary[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly callbacks: LauncherCallbacks,
  ) {
    this.root = this.build();
  }

  private build(): HTMLElement {
    const root = document.createElement("section");
    root.className = "launcher";

    this.errorBanner = document.createElement("div");
    this.errorBanner.className = "error-banner";
    this.errorBanner.style.display = "none";
    root.appendChild(this.errorBanner);

    const cardLabel = document.createElement("label");
    cardLabel.textContent = "Model card (canonical text)";
    root.appendChild(cardLabel);

    this.cardInput = document.createElement("textarea");
    this.cardInput.className = "card-input";
    this.cardInput.rows = 14;
    root.appendChild(this.cardInput);

    const policiesLabel = document.createElement("label");
    policiesLabel.textContent = "Policies to evaluate against";
    root.appendChild(policiesLabel);

    this.policyBox = document.createElement("div");
    this.policyBox.className = "policy-select";
    root.appendChild(this.policyBox);

    this.startButton = document.createElement("button");
    this.startButton.className = "start-run";
    this.startButton.textContent = "Generate report";
    this.startButton.addEventListener("click", () => void this.start());
    root.appendChild(this.startButton);

    this.statusLine = document.createElement("p");
    this.statusLine.className = "run-status";
    root.appendChild(this.statusLine);
    return root;
  }

  async loadPolicies(): Promise<void> {
    try {
      this.policies = await this.api.listPolicies();
      this.policyBox.innerHTML = "";
      for (const policy of this.policies) {
        const label = document.createElement("label");
        label.className = "policy-option";
        const checkbox = document.createElement("input");
        checkbox.type = "checkbox";
        checkbox.value = policy.policy_id;
        checkbox.disabled = !policy.has_relevancy;
        label.appendChild(checkbox);
        label.appendChild(
          document.createTextNode(
            ` ${policy.policy_id} — ${policy.full_name} (${policy.articles} articles)`,
          ),
        );
        this.policyBox.appendChild(label);
      }
      this.hideError();
    } catch (error) {
      this.showError(`Could not load policies: ${describe(error)}`, () =>
        void this.loadPolicies(),
      );
    }
  }

  selectedPolicyIds(): string[] {
    return Array.from(
      this.policyBox.querySelectorAll<HTMLInputElement>("input:checked"),
      (input) => input.value,
    );
  }

  async start(): Promise<void> {
    const policyIds = this.selectedPolicyIds();
    const cardText = this.cardInput.value;
    if (!cardText.trim() || policyIds.length === 0) {
      this.showError("Provide a model card and select at least one policy.", null);
      return;
    }
    this.startButton.disabled = true;
    this.hideError();
    try {
      const card = await this.api.uploadCard(cardText);
      const run = await this.api.createRun(card.card_id, policyIds);
      this.statusLine.textContent = `run ${run.run_id}: ${run.status}`;
      this.poll(run.run_id);
    } catch (error) {
      this.startButton.disabled = false;
      if (error instanceof ApiError && error.validation) {
        this.showValidation(error.validation);
      } else {
        this.showError(`Could not start the run: ${describe(error)}`, () => void this.start());
      }
    }
  }

  /** Poll run status every POLL_INTERVAL_MS while pending/running. */
  private poll(runId: string): void {
    this.stopPolling();
    this.pollTimer = setInterval(() => {
      void this.api
        .getRun(runId)
        .then((record) => {
          this.statusLine.textContent = `run ${record.run_id}: ${record.status}`;
          this.callbacks.onStatus?.(record);
          if (record.status === "complete") {
            this.stopPolling();
            this.startButton.disabled = false;
            this.callbacks.onComplete(record.run_id);
          } else if (record.status === "failed") {
            this.stopPolling();
            this.startButton.disabled = false;
            this.showError(`Run failed: ${record.error ?? "unknown error"}`, () =>
              void this.start(),
            );
          }
        })
        .catch((error: unknown) => {
          this.stopPolling();
          this.startButton.disabled = false;
          this.showError(`Lost contact with the service: ${describe(error)}`, () =>
            this.poll(runId),
          );
        });
    }, POLL_INTERVAL_MS);
  }

  stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  private showValidation(detail: { missing: string[]; unknown: string[]; empty: string[]; malformed: string[] }): void {
    this.errorBanner.innerHTML = "";
    const title = document.createElement("strong");
    title.textContent = "The card did not validate:";
    this.errorBanner.appendChild(title);
    const list = document.createElement("ul");
    const add = (kind: string, names: string[]) => {
      for (const name of names) {
        const item = document.createElement("li");
        item.textContent = `${kind}: ${name}`;
        list.appendChild(item);
      }
    };
    add("missing section", detail.missing);
    add("unknown section", detail.unknown);
    add("empty section", detail.empty);
    add("malformed", detail.malformed);
    this.errorBanner.appendChild(list);
    this.errorBanner.style.display = "block";
  }

  private showError(message: string, retry: (() => void) | null): void {
    this.errorBanner.innerHTML = "";
    this.errorBanner.appendChild(document.createTextNode(message));
    if (retry) {
      const button = document.createElement("button");
      button.className = "retry";
      button.textContent = "Retry";
      button.addEventListener("click", retry);
      this.errorBanner.appendChild(button);
    }
    this.errorBanner.style.display = "block";
  }

  private hideError(): void {
    this.errorBanner.style.display = "none";
    this.errorBanner.innerHTML = "";
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `service returned ${error.status}`;
  return error instanceof Error ? error.message : String(error);
}
