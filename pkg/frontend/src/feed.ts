import { formatTime } from "./format";
import type { LedgerEvent } from "./types";

// Chronological event feed. The accepted set is event membership (admitted
// minus withdrawn), used only to offer a withdraw action; verdicts are never
// derived client-side.

export function acceptedSites(events: LedgerEvent[]): Set<string> {
  const accepted = new Set<string>();
  for (const event of events) {
    if (event.type === "admitted") accepted.add(event.site_id);
    else if (event.type === "withdrawn") accepted.delete(event.site_id);
  }
  return accepted;
}

function describe(event: LedgerEvent): string {
  switch (event.type) {
    case "admitted":
      return `admitted ${event.site_id}`;
    case "rejected": {
      const binding = (event.binding_categories ?? [])
        .map((b) => `${b.moderator}/${b.label}`)
        .join(", ");
      return `rejected ${event.site_id}${binding ? ` (at limit: ${binding})` : ""}`;
    }
    case "withdrawn":
      return `withdrew ${event.site_id}`;
  }
}

export function renderFeed(
  root: HTMLElement,
  events: LedgerEvent[],
  onWithdraw: (siteId: string) => void,
): void {
  const accepted = acceptedSites(events);
  const items = events
    .map((event) => {
      const withdrawable =
        event.type === "admitted" && accepted.has(event.site_id);
      const button = withdrawable
        ? `<button type="button" class="withdraw" data-site="${event.site_id}">withdraw</button>`
        : "";
      return `
    <li class="event event-${event.type}" data-seq="${event.seq}">
      <span class="event-time">${formatTime(event.time)}</span>
      <span class="event-text">${describe(event)}</span>
      ${button}
    </li>`;
    })
    .join("");
  root.innerHTML = `<ul class="feed">${items}</ul>`;
  root.querySelectorAll<HTMLButtonElement>("button.withdraw").forEach((btn) => {
    btn.addEventListener("click", () => onWithdraw(btn.dataset.site ?? ""));
  });
}
