import type {
  Decision,
  ErrorBody,
  LedgerEvent,
  PlanDocument,
  SitePayload,
  StatusReport,
  WithdrawalAck,
} from "./types";

export class ServiceError extends Error {
  constructor(
    message: string,
    public readonly status: number,
    public readonly code: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/**
 * Typed client for the recruitment service. Every displayed verdict and
 * tally originates here; a quota rejection arrives as a 200 decision, so
 * only transport and validation problems throw.
 */
export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async plan(): Promise<PlanDocument> {
    return this.request<PlanDocument>("GET", "/plan");
  }

  async status(): Promise<StatusReport> {
    return this.request<StatusReport>("GET", "/status");
  }

  async events(since: number): Promise<LedgerEvent[]> {
    return this.request<LedgerEvent[]>("GET", `/events?since=${since}`);
  }

  async whatIf(site: SitePayload): Promise<Decision> {
    return this.request<Decision>("POST", "/whatif", site);
  }

  async recordSite(site: SitePayload): Promise<Decision> {
    return this.request<Decision>("POST", "/sites", site);
  }

  async withdraw(siteId: string): Promise<WithdrawalAck> {
    return this.request<WithdrawalAck>(
      "DELETE",
      `/sites/${encodeURIComponent(siteId)}`,
    );
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let code = "http_error";
      let message = `${method} ${path} failed with ${response.status}`;
      try {
        const parsed = (await response.json()) as ErrorBody;
        code = parsed.code ?? code;
        message = parsed.message ?? message;
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ServiceError(message, response.status, code);
    }
    return (await response.json()) as T;
  }
}
