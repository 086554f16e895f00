import type { ServiceClient } from "./api";
import { boardTallies, renderBoard, renderSteering } from "./board";
import { renderFeed } from "./feed";
import { renderFormError, renderIntakeForm, renderVerdict } from "./form";
import type { CategoryRef, LedgerEvent, PlanDocument, SitePayload, StatusReport } from "./types";

export interface DashboardElements {
  banner: HTMLElement;
  board: HTMLElement;
  steering: HTMLElement;
  intake: HTMLElement;
  feed: HTMLElement;
}

export const DEFAULT_POLL_INTERVAL_MS = 5000;

/**
 * Wires the quota board, intake form, and event feed to the service.
 *
 * All state transitions flow from server responses: the feed advances a seq
 * cursor over GET /events, and any new event triggers a fresh GET /status
 * render, so the board can never drift from the service's view.
 */
export class Dashboard {
  private cursor = 0;
  private events: LedgerEvent[] = [];
  private plan: PlanDocument | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;
  private highlighted: CategoryRef[] = [];
  private lastStatus: StatusReport | null = null;

  constructor(
    private readonly client: ServiceClient,
    private readonly el: DashboardElements,
    private readonly pollIntervalMs: number = DEFAULT_POLL_INTERVAL_MS,
  ) {}

  async init(): Promise<void> {
    try {
      this.plan = await this.client.plan();
      renderIntakeForm(this.el.intake, this.plan, {
        onCheck: (site) => void this.check(site),
        onRecord: (site) => void this.record(site),
      });
      await this.refreshStatus();
      await this.pollOnce();
      this.clearBanner();
    } catch (error) {
      this.showBanner(error);
    }
  }

  start(): void {
    if (this.timer === null) {
      this.timer = setInterval(() => void this.pollOnce(), this.pollIntervalMs);
    }
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /** One poll step: fetch events past the cursor; re-render on anything new. */
  async pollOnce(): Promise<void> {
    try {
      const fresh = await this.client.events(this.cursor);
      if (fresh.length > 0) {
        this.events = this.events.concat(fresh);
        this.cursor = fresh[fresh.length - 1]!.seq;
        await this.refreshStatus();
        this.renderFeed();
      }
      this.clearBanner();
    } catch (error) {
      this.showBanner(error);
    }
  }

  private async refreshStatus(): Promise<void> {
    this.lastStatus = await this.client.status();
    renderBoard(this.el.board, this.lastStatus, this.highlighted);
    renderSteering(this.el.steering, this.lastStatus);
  }

  private renderFeed(): void {
    renderFeed(this.el.feed, this.events, (siteId) => void this.withdraw(siteId));
  }

  async check(site: SitePayload): Promise<void> {
    try {
      const decision = await this.client.whatIf(site);
      this.highlighted = decision.binding_categories;
      renderVerdict(this.el.intake, decision, false);
      if (this.lastStatus) {
        // highlight binding rows; tallies come from the unchanged last status
        renderBoard(this.el.board, this.lastStatus, this.highlighted);
      }
    } catch (error) {
      renderFormError(this.el.intake, messageOf(error));
    }
  }

  async record(site: SitePayload): Promise<void> {
    try {
      const decision = await this.client.recordSite(site);
      this.highlighted = decision.binding_categories;
      renderVerdict(this.el.intake, decision, true);
      await this.pollOnce();
    } catch (error) {
      renderFormError(this.el.intake, messageOf(error));
    }
  }

  async withdraw(siteId: string): Promise<void> {
    try {
      await this.client.withdraw(siteId);
      await this.pollOnce();
    } catch (error) {
      this.showBanner(error);
    }
  }

  tallies(): Record<string, number> {
    return boardTallies(this.el.board);
  }

  private showBanner(error: unknown): void {
    this.el.banner.innerHTML = `
      <div class="banner-error">
        service unreachable: ${messageOf(error)}
        <button type="button" data-action="retry">retry</button>
      </div>`;
    this.el.banner
      .querySelector('[data-action="retry"]')
      ?.addEventListener("click", () => {
        if (this.plan === null) void this.init();
        else void this.pollOnce();
      });
  }

  private clearBanner(): void {
    this.el.banner.innerHTML = "";
  }
}

function messageOf(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}
