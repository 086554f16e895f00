import { fillPercent, formatTarget } from "./format";
import { categoryKey, type CategoryRef, type StatusReport } from "./types";

// One row per category: tally, fractional target as-is, limit, fill bar,
// status color. The board is a pure view of the latest /status response.

export function renderBoard(
  root: HTMLElement,
  status: StatusReport,
  highlighted: CategoryRef[] = [],
): void {
  const marked = new Set(highlighted.map(categoryKey));
  const header = `
    <div class="board-summary">
      accepted <strong data-role="accepted">${status.accepted}</strong>
      of ${status.total_target}${status.complete ? " — complete" : ""}
    </div>`;
  const rows = status.categories
    .map((c) => {
      const key = categoryKey(c);
      const percent = fillPercent(c.tally, c.limit);
      const classes = ["board-row", `status-${c.status}`];
      if (marked.has(key)) {
        classes.push("binding");
      }
      return `
    <tr class="${classes.join(" ")}" data-category="${c.moderator}/${c.label}">
      <td class="cat-name">${c.moderator} / ${c.label}</td>
      <td class="cat-tally" data-role="tally">${c.tally}</td>
      <td class="cat-target" data-role="target">${formatTarget(c.target)}</td>
      <td class="cat-limit">${c.limit}</td>
      <td class="cat-fill">
        <div class="bar"><div class="bar-fill" style="width:${percent}%"></div></div>
      </td>
      <td class="cat-status" data-role="status">${c.status}</td>
    </tr>`;
    })
    .join("");
  root.innerHTML = `
    ${header}
    <table class="board">
      <thead>
        <tr><th>category</th><th>tally</th><th>target</th><th>limit</th>
            <th>fill</th><th>status</th></tr>
      </thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export function renderSteering(root: HTMLElement, status: StatusReport): void {
  if (status.steer_toward.length === 0) {
    root.innerHTML = `<p class="steer-empty">no categories need steering</p>`;
    return;
  }
  const items = status.steer_toward
    .map((ref) => `<li>${ref.moderator} / ${ref.label}</li>`)
    .join("");
  root.innerHTML = `
    <h3>steer recruitment toward</h3>
    <ol class="steering">${items}</ol>`;
}

export function boardTallies(root: HTMLElement): Record<string, number> {
  const tallies: Record<string, number> = {};
  root.querySelectorAll<HTMLTableRowElement>("tr.board-row").forEach((row) => {
    const name = row.dataset.category ?? "";
    const cell = row.querySelector('[data-role="tally"]');
    tallies[name] = Number(cell?.textContent ?? "NaN");
  });
  return tallies;
}
