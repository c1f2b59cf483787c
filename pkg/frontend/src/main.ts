import { DEFAULT_BASE_URL, ThreadKbClient } from "./api";
import { mountGraphView } from "./graph";
import { mountSessionView } from "./session";

const BASE_KEY = "threadkb.baseUrl";
const TOKEN_KEY = "threadkb.token";

function connect(): void {
  const baseInput = document.getElementById("base-url") as HTMLInputElement;
  const tokenInput = document.getElementById("api-token") as HTMLInputElement;
  const statusEl = document.getElementById("conn-status")!;

  const client = new ThreadKbClient({
    baseUrl: baseInput.value.trim() || DEFAULT_BASE_URL,
    token: tokenInput.value.trim(),
  });
  localStorage.setItem(BASE_KEY, client.baseUrl);
  localStorage.setItem(TOKEN_KEY, client.token);

  client
    .spec()
    .then((spec) => {
      statusEl.textContent = `connected (${spec.service} ${spec.api_version}, auth: ${spec.auth})`;
      statusEl.className = "conn-ok";
      mountSessionView(document.getElementById("session-view")!, client);
      mountGraphView(document.getElementById("graph-view")!, client);
    })
    .catch((err) => {
      statusEl.textContent = `cannot reach the API: ${err}`;
      statusEl.className = "conn-bad";
    });
}

function selectTab(name: "session" | "graph"): void {
  for (const tab of document.querySelectorAll<HTMLElement>(".tab")) {
    tab.classList.toggle("active", tab.dataset.tab === name);
  }
  document.getElementById("session-view")!.hidden = name !== "session";
  document.getElementById("graph-view")!.hidden = name !== "graph";
}

window.addEventListener("DOMContentLoaded", () => {
  const baseInput = document.getElementById("base-url") as HTMLInputElement;
  const tokenInput = document.getElementById("api-token") as HTMLInputElement;
  baseInput.value = localStorage.getItem(BASE_KEY) ?? DEFAULT_BASE_URL;
  tokenInput.value = localStorage.getItem(TOKEN_KEY) ?? "";

  document.getElementById("connect-btn")!.addEventListener("click", connect);
  for (const tab of document.querySelectorAll<HTMLElement>(".tab")) {
    tab.addEventListener("click", () => selectTab(tab.dataset.tab as "session" | "graph"));
  }
  selectTab("session");
  connect();
});
