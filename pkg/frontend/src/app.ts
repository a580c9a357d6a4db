// DOM glue: render the ViewState, wire the inputs. No client-side math —
// every verdict on screen came from the service.

import { ServiceClient } from "./api.js";
import { Controller } from "./controller.js";
import type { ViewState } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function render(state: ViewState): void {
  const transcript = el<HTMLDivElement>("transcript");
  transcript.replaceChildren(
    ...state.transcript.map((entry) => {
      const div = document.createElement("div");
      div.className = `msg ${entry.who}`;
      div.textContent = entry.text;
      return div;
    }),
  );
  transcript.scrollTop = transcript.scrollHeight;

  const panel = el<HTMLUListElement>("model-panel");
  panel.replaceChildren(
    ...state.modelPanel.map((line) => {
      const li = document.createElement("li");
      li.textContent = line.label;
      if (line.highlighted) li.className = "conflict";
      return li;
    }),
  );

  const recs = el<HTMLUListElement>("recommendations");
  recs.replaceChildren(
    ...state.recommendations.map((row) => {
      const li = document.createElement("li");
      const badge = document.createElement("span");
      badge.className = `badge ${row.recommended ? "ok" : "warn"}`;
      badge.textContent = row.badge;
      li.textContent = `${row.param} = ${row.value} `;
      li.appendChild(badge);
      if (row.recommended) {
        const button = document.createElement("button");
        button.textContent = "relax";
        button.onclick = () => void controller.requestRepair([row.param]);
        li.appendChild(button);
      }
      return li;
    }),
  );

  const banner = el<HTMLDivElement>("banner");
  banner.hidden = state.banner === null;
  if (state.banner !== null) {
    el<HTMLSpanElement>("banner-text").textContent =
      `${state.banner.reason}: ${state.banner.consequence}`;
  }

  const diff = el<HTMLTableElement>("diff");
  const body = el<HTMLTableSectionElement>("diff-body");
  diff.hidden = state.paramDiff === null;
  body.replaceChildren(
    ...(state.paramDiff ?? []).map((row) => {
      const tr = document.createElement("tr");
      for (const cell of [row.param, row.before, "→", row.after]) {
        const td = document.createElement("td");
        td.textContent = cell;
        tr.appendChild(td);
      }
      return tr;
    }),
  );

  el<HTMLInputElement>("message").disabled = state.busy || state.sessionId === null;
  el<HTMLButtonElement>("send").disabled = state.busy || state.sessionId === null;
  el<HTMLSpanElement>("phase").textContent =
    state.sessionId === null ? "no session" : `${state.phase}${state.busy ? " (thinking)" : ""}`;
}

const client = new ServiceClient("", (url, init) => fetch(url, init));
const controller = new Controller(client, render);

el<HTMLButtonElement>("upload").onclick = () => {
  const source = el<HTMLTextAreaElement>("source").value;
  void controller.uploadAndStart(source, "text").then(() => {
    if (controller.state.sessionId) {
      location.hash = controller.state.sessionId;  // refresh resumes the session
    }
  });
};

el<HTMLButtonElement>("send").onclick = () => {
  const input = el<HTMLInputElement>("message");
  const text = input.value.trim();
  if (!text) return;
  input.value = "";
  void controller.sendMessage(text);
};

el<HTMLInputElement>("message").addEventListener("keydown", (event) => {
  if (event.key === "Enter") el<HTMLButtonElement>("send").click();
});

el<HTMLButtonElement>("confirm").onclick = () => void controller.confirmGated();
el<HTMLButtonElement>("cancel").onclick = () => controller.cancelGated();

render(controller.state);
if (location.hash.length > 1) {
  void controller.resume(location.hash.slice(1));
}
