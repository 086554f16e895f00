import { ServiceClient } from "./api";
import { Dashboard } from "./app";

// Entry point: ?api=http://host:port selects the service (defaults to the
// page's own origin, for the case where the service also hosts the bundle).

function requireElement(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing dashboard element #${id}`);
  return el;
}

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? window.location.origin;

const dashboard = new Dashboard(new ServiceClient(baseUrl), {
  banner: requireElement("banner"),
  board: requireElement("board"),
  steering: requireElement("steering"),
  intake: requireElement("intake"),
  feed: requireElement("feed"),
});

void dashboard.init().then(() => dashboard.start());
