import { ApiError, ThreadKbClient } from "./api";
import { TERMINAL_STATUSES, TOKEN_COLORS } from "./types";
import type { Branch, TurnPayload } from "./types";

const CATCH_ALL_REPLY = "none of these apply";

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

function statusLabel(status: string): string {
  const words = status.replace(/_/g, " ");
  return words.charAt(0).toUpperCase() + words.slice(1);
}

/**
 * Session screen: a question form, the running conversation, branch
 * buttons for the current step's outcomes, and a free-text reply box.
 * Terminal turns get a status badge and close the reply box.
 */
export function mountSessionView(root: HTMLElement, client: ThreadKbClient): void {
  root.innerHTML = "";
  let current: TurnPayload | null = null;

  const startForm = el("form", "start-form");
  const questionInput = el("input", "question-input");
  questionInput.placeholder = "Describe the problem, including what is already accessible";
  const startButton = el("button", "start-btn", "Start session");
  startButton.type = "submit";
  startForm.append(questionInput, startButton);

  const errorBar = el("div", "error-bar");
  errorBar.hidden = true;
  const conversation = el("div", "conversation");
  const replyBox = el("div", "reply-box");
  replyBox.hidden = true;
  const branchList = el("div", "branch-list");
  const outcomeForm = el("form", "outcome-form");
  const outcomeInput = el("input", "outcome-input");
  outcomeInput.placeholder = "Report what you observed";
  const outcomeButton = el("button", "outcome-btn", "Send");
  outcomeButton.type = "submit";
  outcomeForm.append(outcomeInput, outcomeButton);
  replyBox.append(branchList, outcomeForm);

  root.append(startForm, errorBar, conversation, replyBox);

  function showError(message: string): void {
    errorBar.textContent = message;
    errorBar.hidden = false;
  }

  function addUserCard(text: string): void {
    const card = el("article", "turn-card user");
    card.append(el("p", "turn-text", text));
    conversation.append(card);
  }

  function addTurnCard(payload: TurnPayload): void {
    const card = el("article", `turn-card kind-${payload.kind}`);
    card.append(el("span", "kind-chip", payload.kind.replace(/_/g, " ")));
    const body = el("p", "turn-text", payload.text);
    card.append(body);
    if (TERMINAL_STATUSES.has(payload.status)) {
      const badge = el("span", `status-badge status-${payload.status}`, statusLabel(payload.status));
      badge.dataset.status = payload.status;
      card.append(badge);
    }
    conversation.append(card);
    card.scrollIntoView?.({ block: "end" });
  }

  function branchButton(branch: Branch): HTMLButtonElement {
    const button = el("button", "branch-btn");
    button.type = "button";
    button.dataset.token = branch.token;
    button.style.borderColor = TOKEN_COLORS[branch.token];
    button.textContent = branch.catch_all ? "None of these apply" : branch.condition;
    button.addEventListener("click", () => {
      void submitReply(branch.catch_all ? CATCH_ALL_REPLY : branch.condition);
    });
    return button;
  }

  function renderReplyBox(payload: TurnPayload): void {
    branchList.innerHTML = "";
    if (TERMINAL_STATUSES.has(payload.status)) {
      replyBox.hidden = true;
      return;
    }
    replyBox.hidden = false;
    if (payload.kind === "clarify_question") {
      for (const answer of ["Yes", "No"]) {
        const button = el("button", "clarify-btn", answer);
        button.type = "button";
        button.addEventListener("click", () => void submitReply(answer.toLowerCase()));
        branchList.append(button);
      }
      return;
    }
    for (const branch of payload.branches) {
      branchList.append(branchButton(branch));
    }
  }

  function applyPayload(payload: TurnPayload): void {
    current = payload;
    errorBar.hidden = true;
    addTurnCard(payload);
    renderReplyBox(payload);
  }

  async function submitReply(text: string): Promise<void> {
    if (!current || !text.trim()) return;
    addUserCard(text);
    try {
      applyPayload(await client.sendFeedback(current.session_id, current.turn, text));
    } catch (err) {
      showError(err instanceof ApiError ? err.message : String(err));
    }
  }

  startForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const question = questionInput.value.trim();
    if (!question) return;
    conversation.innerHTML = "";
    current = null;
    addUserCard(question);
    void client
      .startSession(question)
      .then(applyPayload)
      .catch((err) => showError(err instanceof ApiError ? err.message : String(err)));
  });

  outcomeForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = outcomeInput.value.trim();
    if (!text) return;
    outcomeInput.value = "";
    void submitReply(text);
  });
}
