import { describe, expect, it, vi } from "vitest";

import { ServiceClient, ServiceError } from "../src/api";
import { boardTallies, renderBoard } from "../src/board";
import { acceptedSites, renderFeed } from "../src/feed";
import { fillPercent, formatTarget } from "../src/format";
import { readSite, renderIntakeForm } from "../src/form";
import type { LedgerEvent, StatusReport } from "../src/types";
import { EXAMPLE_PLAN, exampleScript } from "./stub";

const STATUS: StatusReport = {
  plan_digest: "d",
  accepted: 3,
  total_target: 40,
  complete: false,
  categories: [
    {
      moderator: "looping", label: "yes", tally: 3, target: 6.4, limit: 8,
      remaining: 5, status: "open",
    },
    {
      moderator: "looping", label: "no", tally: 0, target: 33.6, limit: 35,
      remaining: 35, status: "open",
    },
  ],
  steer_toward: [{ moderator: "looping", label: "no" }],
};

describe("format", () => {
  it("keeps fractional targets unrounded", () => {
    expect(formatTarget(6.4)).toBe("6.4");
    expect(formatTarget(33.6)).toBe("33.6");
    expect(formatTarget(10)).toBe("10");
  });

  it("clamps fill percent to 100", () => {
    expect(fillPercent(3, 8)).toBe(38);
    expect(fillPercent(8, 8)).toBe(100);
    expect(fillPercent(1, 0)).toBe(100);
    expect(fillPercent(0, 0)).toBe(0);
  });
});

describe("board", () => {
  it("renders a row per category with tallies readable back", () => {
    const el = document.createElement("div");
    renderBoard(el, STATUS);
    expect(boardTallies(el)).toEqual({ "looping/yes": 3, "looping/no": 0 });
    expect(el.querySelectorAll("tr.board-row").length).toBe(2);
  });

  it("marks binding categories", () => {
    const el = document.createElement("div");
    renderBoard(el, STATUS, [{ moderator: "looping", label: "yes" }]);
    const row = el.querySelector('[data-category="looping/yes"]');
    expect(row?.classList.contains("binding")).toBe(true);
  });

  it("applies status classes for colors", () => {
    const el = document.createElement("div");
    const saturated: StatusReport = {
      ...STATUS,
      categories: [{ ...STATUS.categories[0]!, status: "saturated", remaining: 0 }],
    };
    renderBoard(el, saturated);
    expect(el.querySelector("tr.status-saturated")).not.toBeNull();
  });
});

describe("intake form", () => {
  function mount() {
    const el = document.createElement("div");
    const onCheck = vi.fn();
    const onRecord = vi.fn();
    renderIntakeForm(el, EXAMPLE_PLAN, { onCheck, onRecord });
    return { el, onCheck, onRecord };
  }

  it("builds a select for categorical and a number input for continuous", () => {
    const { el } = mount();
    expect(el.querySelector('select[name="looping"]')).not.toBeNull();
    const numeric = el.querySelector('input[name="math_minutes"]');
    expect(numeric?.getAttribute("type")).toBe("number");
  });

  it("reads a typed payload with numeric coercion", () => {
    const { el } = mount();
    (el.querySelector('input[name="site_id"]') as HTMLInputElement).value = "s1";
    (el.querySelector('input[name="math_minutes"]') as HTMLInputElement).value = "310";
    (el.querySelector('select[name="looping"]') as HTMLSelectElement).value = "yes";
    const site = readSite(el.querySelector("form") as HTMLFormElement);
    expect(site).toEqual({
      site_id: "s1",
      responses: { math_minutes: 310, looping: "yes" },
    });
  });

  it("renders inline errors and blocks submission on missing fields", () => {
    const { el, onCheck } = mount();
    (el.querySelector('[data-action="check"]') as HTMLButtonElement).click();
    expect(onCheck).not.toHaveBeenCalled();
    expect(
      el.querySelector('[data-error-for="site_id"]')?.textContent,
    ).toContain("required");
    expect(
      el.querySelector('[data-error-for="math_minutes"]')?.textContent,
    ).toContain("numeric");
  });
});

describe("feed", () => {
  it("derives the accepted set from admissions minus withdrawals", () => {
    const accepted = acceptedSites(exampleScript());
    expect(accepted.has("s1")).toBe(true);
    expect(accepted.has("s2")).toBe(false); // withdrawn
    expect(accepted.has("s4")).toBe(false); // rejected
  });

  it("offers withdrawal only for currently accepted sites", () => {
    const el = document.createElement("div");
    const onWithdraw = vi.fn();
    renderFeed(el, exampleScript(), onWithdraw);
    const buttons = Array.from(
      el.querySelectorAll<HTMLButtonElement>("button.withdraw"),
    );
    expect(buttons.map((b) => b.dataset.site)).not.toContain("s2");
    expect(buttons.map((b) => b.dataset.site)).toContain("s1");
    buttons[0]!.click();
    expect(onWithdraw).toHaveBeenCalledWith(buttons[0]!.dataset.site);
  });

  it("renders events chronologically with rejection reasons", () => {
    const el = document.createElement("div");
    renderFeed(el, exampleScript(), () => {});
    const items = Array.from(el.querySelectorAll("li.event"));
    expect(items.map((li) => Number(li.getAttribute("data-seq")))).toEqual(
      exampleScript().map((e) => e.seq),
    );
    const rejected = el.querySelector("li.event-rejected .event-text");
    expect(rejected?.textContent).toContain("looping/yes");
  });
});

describe("service client", () => {
  it("passes the cursor to /events", async () => {
    const seen: string[] = [];
    const client = new ServiceClient("http://stub", async (input) => {
      seen.push(input);
      return new Response("[]", {
        status: 200,
        headers: { "content-type": "application/json" },
      });
    });
    await client.events(17);
    expect(seen).toEqual(["http://stub/events?since=17"]);
  });

  it("surfaces structured error bodies", async () => {
    const client = new ServiceClient("http://stub", async () => {
      return new Response(
        JSON.stringify({ code: "duplicate_site", message: "site 'a' has already been accepted" }),
        { status: 409, headers: { "content-type": "application/json" } },
      );
    });
    const failure = await client
      .recordSite({ site_id: "a", responses: {} })
      .catch((e: unknown) => e);
    expect(failure).toBeInstanceOf(ServiceError);
    expect((failure as ServiceError).code).toBe("duplicate_site");
    expect((failure as ServiceError).status).toBe(409);
  });
});

describe("events payload shape", () => {
  it("script events satisfy the wire contract", () => {
    for (const event of exampleScript() as LedgerEvent[]) {
      expect(event.seq).toBeGreaterThan(0);
      expect(["admitted", "rejected", "withdrawn"]).toContain(event.type);
      expect(event.site_id).toBeTruthy();
      expect(event.time).toMatch(/^\d{4}-/);
    }
  });
});
