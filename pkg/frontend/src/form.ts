import type { Decision, PlanDocument, SitePayload } from "./types";

// Intake form: one input per moderator (a select for categorical levels, a
// numeric field for continuous), plus Check (what-if, records nothing) and
// Record buttons. Verdicts are whatever the service answered.

export interface FormHandlers {
  onCheck: (site: SitePayload) => void;
  onRecord: (site: SitePayload) => void;
}

export function renderIntakeForm(
  root: HTMLElement,
  plan: PlanDocument,
  handlers: FormHandlers,
): void {
  const fields = plan.moderators
    .map((mod) => {
      if (mod.kind === "categorical") {
        const options = (mod.levels ?? [])
          .map((level) => `<option value="${level}">${level}</option>`)
          .join("");
        return `
      <label class="field">
        <span>${mod.name}</span>
        <select name="${mod.name}" data-kind="categorical">${options}</select>
        <span class="field-error" data-error-for="${mod.name}"></span>
      </label>`;
      }
      return `
      <label class="field">
        <span>${mod.name}</span>
        <input name="${mod.name}" data-kind="continuous" type="number" step="any" />
        <span class="field-error" data-error-for="${mod.name}"></span>
      </label>`;
    })
    .join("");
  root.innerHTML = `
    <form class="intake" novalidate>
      <label class="field">
        <span>site id</span>
        <input name="site_id" type="text" />
        <span class="field-error" data-error-for="site_id"></span>
      </label>
      ${fields}
      <div class="actions">
        <button type="button" data-action="check">Check</button>
        <button type="button" data-action="record">Record</button>
      </div>
      <div class="verdict" data-role="verdict"></div>
    </form>`;

  const form = root.querySelector("form") as HTMLFormElement;
  form.querySelector('[data-action="check"]')?.addEventListener("click", () => {
    const site = readSite(form);
    if (site) handlers.onCheck(site);
  });
  form.querySelector('[data-action="record"]')?.addEventListener("click", () => {
    const site = readSite(form);
    if (site) handlers.onRecord(site);
  });
}

export function readSite(form: HTMLFormElement): SitePayload | null {
  clearFieldErrors(form);
  let valid = true;
  const idInput = form.elements.namedItem("site_id") as HTMLInputElement;
  const siteId = idInput.value.trim();
  if (!siteId) {
    setFieldError(form, "site_id", "site id is required");
    valid = false;
  }
  const responses: Record<string, string | number> = {};
  form.querySelectorAll<HTMLElement>("[data-kind]").forEach((el) => {
    const input = el as HTMLInputElement | HTMLSelectElement;
    const name = input.name;
    if (input.dataset.kind === "continuous") {
      if (input.value === "") {
        setFieldError(form, name, "a numeric response is required");
        valid = false;
        return;
      }
      const value = Number(input.value);
      if (!Number.isFinite(value)) {
        setFieldError(form, name, "not a number");
        valid = false;
        return;
      }
      responses[name] = value;
    } else {
      responses[name] = input.value;
    }
  });
  return valid ? { site_id: siteId, responses } : null;
}

export function renderVerdict(root: HTMLElement, decision: Decision, recorded: boolean): void {
  const panel = root.querySelector('[data-role="verdict"]') as HTMLElement;
  const binding = decision.binding_categories
    .map((b) => `${b.moderator} / ${b.label}`)
    .join(", ");
  const kind = recorded ? "recorded" : "check";
  panel.innerHTML = `
    <p class="verdict-${decision.verdict}" data-verdict="${decision.verdict}">
      ${kind}: <strong>${decision.verdict}</strong>
      ${binding ? `<span class="binding-list"> — at limit: ${binding}</span>` : ""}
    </p>`;
}

export function renderFormError(root: HTMLElement, message: string): void {
  const panel = root.querySelector('[data-role="verdict"]') as HTMLElement;
  panel.innerHTML = `<p class="verdict-error">${message}</p>`;
}

function setFieldError(form: HTMLFormElement, name: string, message: string): void {
  const slot = form.querySelector(`[data-error-for="${name}"]`);
  if (slot) slot.textContent = message;
}

function clearFieldErrors(form: HTMLFormElement): void {
  form.querySelectorAll(".field-error").forEach((el) => (el.textContent = ""));
}
