import type { ChatStore } from "./state.js";
import type { Diagnostics, UiMessage } from "./types.js";
import { LOW_CONFIDENCE_FLOOR } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderDiagnostics(diag: Diagnostics): HTMLElement {
  const panel = el("div", "diagnostics");

  const headline = el("div", "diag-headline");
  headline.appendChild(el("span", "diag-qtype", diag.qtype || "unknown"));
  const lowConfidence = diag.confidence < LOW_CONFIDENCE_FLOOR;
  const badge = el(
    "span",
    lowConfidence ? "confidence low-confidence" : "confidence",
    `${(diag.confidence * 100).toFixed(1)}%`,
  );
  badge.title = lowConfidence
    ? "below the clarification threshold"
    : "classifier confidence";
  headline.appendChild(badge);
  panel.appendChild(headline);

  const chips = el("div", "entity-chips");
  for (const entity of diag.entities) {
    const chip = el("span", `chip chip-${entity.etype}`, entity.surface);
    chip.title = entity.cui
      ? `${entity.etype} · ${entity.cui}`
      : `${entity.etype} · not linked`;
    if (!entity.cui) chip.classList.add("chip-unlinked");
    chips.appendChild(chip);
  }
  if (diag.entities.length === 0) {
    chips.appendChild(el("span", "chip chip-none", "no entities"));
  }
  panel.appendChild(chips);

  if (diag.facts.length > 0) {
    const list = el("ul", "fact-list");
    for (const fact of diag.facts) {
      const line =
        fact.kind === "attribute"
          ? `${fact.name}: ${fact.value}`
          : `${fact.subject} —${fact.name}→ ${fact.object}`;
      const item = el("li", "fact", line);
      item.appendChild(el("span", "fact-source", ` [${fact.source || "?"}]`));
      list.appendChild(item);
    }
    panel.appendChild(list);
  }

  panel.appendChild(el("div", "trace-id", `trace ${diag.traceId}`));
  return panel;
}

export function renderMessage(message: UiMessage): HTMLElement {
  const bubble = el("article", `bubble bubble-${message.role}`);
  bubble.dataset.seq = String(message.seq);
  bubble.appendChild(el("p", "bubble-text", message.text));

  if (message.role === "agent" && message.diagnostics) {
    const toggle = el("button", "diag-toggle", "details");
    toggle.type = "button";
    const panel = renderDiagnostics(message.diagnostics);
    panel.hidden = true;
    toggle.addEventListener("click", () => {
      panel.hidden = !panel.hidden;
      toggle.textContent = panel.hidden ? "details" : "hide details";
    });
    bubble.appendChild(toggle);
    bubble.appendChild(panel);
  }
  return bubble;
}

export function renderApp(root: HTMLElement, store: ChatStore): void {
  root.textContent = "";
  const transcript = el("div", "transcript");
  const composer = el("form", "composer") as HTMLFormElement;
  const input = el("input", "composer-input") as HTMLInputElement;
  input.type = "text";
  input.placeholder = "Ask about a dietary supplement…";
  const sendButton = el("button", "composer-send", "Send") as HTMLButtonElement;
  sendButton.type = "submit";
  composer.appendChild(input);
  composer.appendChild(sendButton);
  root.appendChild(transcript);
  root.appendChild(composer);

  const redraw = () => {
    transcript.textContent = "";
    for (const message of store.transcript) {
      transcript.appendChild(renderMessage(message));
    }
    if (store.state === "waiting") {
      transcript.appendChild(el("div", "bubble bubble-pending", "…"));
    }
    if (store.state === "error") {
      const errorBubble = el("div", "bubble bubble-error");
      errorBubble.appendChild(
        el("p", "bubble-text", store.lastError ?? "request failed"),
      );
      const retry = el("button", "retry", "Retry") as HTMLButtonElement;
      retry.type = "button";
      retry.addEventListener("click", () => void store.retry());
      errorBubble.appendChild(retry);
      transcript.appendChild(errorBubble);
    }
    sendButton.disabled = !store.canSend || input.value.trim() === "";
    input.disabled = store.state === "waiting";
    transcript.scrollTop = transcript.scrollHeight;
  };

  input.addEventListener("input", () => {
    sendButton.disabled = !store.canSend || input.value.trim() === "";
  });
  composer.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = input.value;
    if (!text.trim()) return;
    input.value = "";
    void store.send(text);
  });

  store.subscribe(redraw);
  redraw();
}
