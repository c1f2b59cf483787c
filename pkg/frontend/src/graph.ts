import { ApiError, ThreadKbClient } from "./api";
import { TOKEN_COLORS } from "./types";
import type { IncomingEdge, LuDetail, LuSummary, OutgoingEdge } from "./types";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  if (text) node.textContent = text;
  return node;
}

function tokenChip(token: keyof typeof TOKEN_COLORS): HTMLSpanElement {
  const chip = el("span", `token-chip token-${token.toLowerCase()}`, token);
  chip.style.backgroundColor = TOKEN_COLORS[token];
  return chip;
}

/**
 * Knowledge-base panel: search over unit headers, plus a detail view
 * showing one unit with its linker edges colored by token. Edge rows
 * link to their target or source unit for click-through navigation.
 */
export function mountGraphView(root: HTMLElement, client: ThreadKbClient): void {
  root.innerHTML = "";

  const searchForm = el("form", "search-form");
  const searchInput = el("input", "search-input");
  searchInput.placeholder = "Search unit headers";
  const searchButton = el("button", "search-btn", "Search");
  searchButton.type = "submit";
  searchForm.append(searchInput, searchButton);

  const errorBar = el("div", "error-bar");
  errorBar.hidden = true;
  const results = el("div", "results");
  const detail = el("div", "detail");
  detail.hidden = true;

  root.append(searchForm, errorBar, results, detail);

  function showError(message: string): void {
    errorBar.textContent = message;
    errorBar.hidden = false;
  }

  function resultRow(item: LuSummary): HTMLElement {
    const row = el("button", "result-row");
    row.type = "button";
    row.dataset.luId = item.lu_id;
    row.append(el("span", "result-header", item.header));
    row.append(el("span", "result-meta", `${item.lu_type} / ${item.doc_id}`));
    if (item.score !== undefined) {
      row.append(el("span", "result-score", item.score.toFixed(3)));
    }
    row.addEventListener("click", () => void loadLu(item.lu_id));
    return row;
  }

  function renderListing(items: LuSummary[]): void {
    results.innerHTML = "";
    if (!items.length) {
      results.append(el("p", "empty-note", "No matching units."));
      return;
    }
    for (const item of items) results.append(resultRow(item));
  }

  function gotoButton(luId: string, label: string): HTMLButtonElement {
    const button = el("button", "goto-btn", label);
    button.type = "button";
    button.dataset.luId = luId;
    button.addEventListener("click", () => void loadLu(luId));
    return button;
  }

  function outgoingRow(edge: OutgoingEdge): HTMLElement {
    const row = el("li", "edge-row outgoing");
    row.dataset.token = edge.token;
    row.style.borderLeftColor = TOKEN_COLORS[edge.token];
    row.append(tokenChip(edge.token));
    row.append(el("span", "edge-condition", edge.condition));
    row.append(el("span", "edge-intent", edge.next_intent));
    if (edge.target_lu_id) {
      row.append(gotoButton(edge.target_lu_id, "open target"));
    }
    return row;
  }

  function incomingRow(edge: IncomingEdge): HTMLElement {
    const row = el("li", "edge-row incoming");
    row.dataset.token = edge.token;
    row.style.borderLeftColor = TOKEN_COLORS[edge.token];
    row.append(tokenChip(edge.token));
    row.append(el("span", "edge-condition", edge.condition));
    row.append(gotoButton(edge.source_lu_id, "open source"));
    return row;
  }

  function renderDetail(payload: LuDetail): void {
    const { lu, outgoing, incoming } = payload;
    detail.hidden = false;
    detail.innerHTML = "";
    detail.append(el("h2", "lu-header", lu.header));
    const meta = el("p", "lu-meta");
    meta.append(el("span", "type-chip", lu.lu_type));
    meta.append(el("span", "doc-chip", lu.meta.source_doc_id));
    detail.append(meta);
    if (lu.prerequisite) {
      detail.append(el("p", "lu-prerequisite", `Prerequisite: ${lu.prerequisite}`));
    }
    const body = el("pre", "lu-body", lu.body);
    detail.append(body);
    const defaults = Object.entries(lu.default_parameters);
    if (defaults.length) {
      const list = el("ul", "default-list");
      for (const [name, value] of defaults) {
        list.append(el("li", "default-row", value ? `${name} = ${value}` : name));
      }
      detail.append(el("h3", "section-title", "Parameters"), list);
    }
    detail.append(el("h3", "section-title", "Outgoing edges"));
    const outList = el("ul", "edge-list outgoing-list");
    for (const edge of outgoing) outList.append(outgoingRow(edge));
    if (!outgoing.length) outList.append(el("li", "empty-note", "none"));
    detail.append(outList);
    detail.append(el("h3", "section-title", "Incoming edges"));
    const inList = el("ul", "edge-list incoming-list");
    for (const edge of incoming) inList.append(incomingRow(edge));
    if (!incoming.length) inList.append(el("li", "empty-note", "none"));
    detail.append(inList);
  }

  async function loadLu(luId: string): Promise<void> {
    try {
      errorBar.hidden = true;
      renderDetail(await client.getLu(luId));
    } catch (err) {
      showError(err instanceof ApiError ? err.message : String(err));
    }
  }

  searchForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const query = searchInput.value.trim();
    const listing = query ? client.searchLus(query) : client.listLus();
    void listing
      .then((page) => renderListing(page.items))
      .catch((err) => showError(err instanceof ApiError ? err.message : String(err)));
  });

  // Initial browse: first units by id.
  void client
    .listLus()
    .then((page) => renderListing(page.items))
    .catch((err) => showError(err instanceof ApiError ? err.message : String(err)));
}
