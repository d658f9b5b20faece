// Pure render functions: AppState in, VNode tree out. No API calls, no
// score math, no re-sorting; rankings render in exactly the order the
// gateway returned them.

import { formatScore, verdictLabel } from "./format.js";
import type { AppState, TurnVM, VerdictChip } from "./state.js";
import type { ExplanationPayload, Verdict } from "./types.js";
import { h, VNode } from "./vnode.js";

export interface ViewHandlers {
  onCommandInput: (value?: string) => void;
  onSubmit: () => void;
  onQuestionInput: (value?: string) => void;
  onAsk: () => void;
  onToggleStep: (index: number) => void;
  onSelectTechnique: (id: string) => void;
  onVerdict: (verdict: Verdict) => void;
  onRetryTurn: (index: number) => void;
  onDrainQueue: () => void;
}

const TOP_TECHNIQUES = 5;
const TOP_TACTICS = 3;

export function appView(state: AppState, handlers: ViewHandlers): VNode {
  return h("div", { class: "console" },
    h("h1", {}, "cmdlens console"),
    commandForm(state, handlers),
    state.explainError ? errorBanner(state, handlers) : null,
    state.explanation ? explanationView(state.explanation, state, handlers) : null,
    state.sessionId ? sessionPanel(state, handlers) : null,
  );
}

export function commandForm(state: AppState, handlers: ViewHandlers): VNode {
  const empty = state.commandInput.trim() === "";
  return h("form", { class: "command-form" },
    h("label", { for: "command-input" }, "Command under review"),
    h("input", {
      id: "command-input",
      class: "command-input",
      value: state.commandInput,
      placeholder: "paste the alerted shell command",
      onInput: handlers.onCommandInput,
    }),
    h("button", {
      type: "button",
      class: "submit-command",
      ...(empty || state.pendingExplain ? { disabled: "disabled" } : {}),
      onClick: () => handlers.onSubmit(),
    }, state.pendingExplain ? "Explaining…" : "Explain"),
  );
}

export function errorBanner(state: AppState, handlers: ViewHandlers): VNode {
  return h("div", { class: "error-banner", role: "alert" },
    h("span", { class: "error-text" }, state.explainError ?? ""),
    h("button", {
      type: "button",
      class: "retry-explain",
      onClick: () => handlers.onSubmit(),
    }, "Retry"),
  );
}

export function explanationView(
  explanation: ExplanationPayload,
  state: AppState,
  handlers: ViewHandlers,
): VNode {
  return h("section", { class: "explanation" },
    explanation.disposal_advice ? warningBanner(explanation.disposal_advice) : null,
    stepList(explanation, state, handlers),
    h("section", { class: "overall-panel" },
      h("h2", {}, "Overall"),
      h("p", { class: "overall-text" }, explanation.overall)),
    intentPanel(explanation, state, handlers),
    retrievedPanel(explanation),
    verdictControls(state, handlers),
  );
}

function warningBanner(advice: string): VNode {
  return h("div", { class: "warning-banner", role: "alert" },
    h("strong", {}, "Likely malicious."),
    " ",
    h("span", { class: "disposal-advice" }, advice),
  );
}

function stepList(
  explanation: ExplanationPayload,
  state: AppState,
  handlers: ViewHandlers,
): VNode {
  const expanded = new Set(state.expandedSteps);
  return h("section", { class: "steps" },
    h("h2", {}, "Step by step"),
    h("ol", { class: "step-list" },
      explanation.steps.map((step, index) =>
        h("li", { class: expanded.has(index) ? "step expanded" : "step" },
          h("button", {
            type: "button",
            class: "step-toggle",
            "aria-expanded": expanded.has(index) ? "true" : "false",
            onClick: () => handlers.onToggleStep(index),
          }, h("code", { class: "step-fragment" }, step.fragment || "(no fragment)")),
          expanded.has(index)
            ? h("p", { class: "step-explanation" }, step.explanation)
            : h("p", { class: "step-explanation step-preview" }, step.explanation),
        ),
      ),
    ),
  );
}

function intentPanel(
  explanation: ExplanationPayload,
  state: AppState,
  handlers: ViewHandlers,
): VNode {
  const techniques = explanation.intent.technique_ranking.slice(0, TOP_TECHNIQUES);
  const tactics = explanation.intent.tactic_ranking.slice(0, TOP_TACTICS);
  return h("section", { class: "intent" },
    h("h2", {}, "Likely intent"),
    h("h3", {}, "Techniques"),
    h("ol", { class: "technique-list" },
      techniques.map(([id, score]) =>
        h("li", {
          class: state.selectedTechnique === id
            ? "technique-badge selected" : "technique-badge",
        },
          h("button", {
            type: "button",
            class: "technique-select",
            onClick: () => handlers.onSelectTechnique(id),
          },
            h("span", { class: "technique-id" }, id),
            " ",
            h("span", { class: "technique-score" }, formatScore(score)),
          ),
        ),
      ),
    ),
    h("h3", {}, "Tactics"),
    h("ol", { class: "tactic-list" },
      tactics.map(([id, score]) =>
        h("li", { class: "tactic-badge" },
          h("span", { class: "tactic-id" }, id),
          " ",
          h("span", { class: "tactic-score" }, formatScore(score)),
        ),
      ),
    ),
  );
}

function retrievedPanel(explanation: ExplanationPayload): VNode {
  return h("section", { class: "retrieved" },
    h("h2", {}, "Retrieved documentation"),
    h("ul", { class: "retrieved-list" },
      explanation.retrieved.map((chunk) =>
        h("li", { class: "retrieved-chunk" },
          h("span", { class: "provenance" }, `(${chunk.utility}, ${chunk.origin})`),
          " ",
          h("span", { class: "retrieved-score" }, formatScore(chunk.score)),
          h("p", { class: "retrieved-text" }, chunk.text),
        ),
      ),
    ),
  );
}

function verdictControls(state: AppState, handlers: ViewHandlers): VNode {
  const options: Verdict[] = ["malicious", "benign", "undecided"];
  return h("section", { class: "verdicts" },
    h("h2", {}, "Your verdict"),
    h("div", { class: "verdict-buttons" },
      options.map((verdict) =>
        h("button", {
          type: "button",
          class: `verdict-button verdict-${verdict}`,
          onClick: () => handlers.onVerdict(verdict),
        }, verdictLabel(verdict)),
      ),
    ),
    h("ul", { class: "verdict-history" },
      state.verdicts.map((chip) => verdictChipView(chip)),
    ),
    state.offlineQueue.length > 0
      ? h("div", { class: "offline-queue" },
          h("span", { class: "offline-note" },
            `${state.offlineQueue.length} verdict(s) waiting for connectivity`),
          h("button", {
            type: "button",
            class: "drain-queue",
            onClick: () => handlers.onDrainQueue(),
          }, "Retry queued"),
        )
      : null,
  );
}

function verdictChipView(chip: VerdictChip): VNode {
  return h("li", { class: `verdict-chip ${chip.status}` },
    h("span", { class: "chip-command" }, chip.command),
    " ",
    h("span", { class: "chip-verdict" }, verdictLabel(chip.verdict)),
    " ",
    h("span", { class: "chip-status" }, chip.status),
  );
}

function sessionPanel(state: AppState, handlers: ViewHandlers): VNode {
  const emptyQuestion = state.questionInput.trim() === "";
  return h("section", { class: "session" },
    h("h2", {}, "Conversation"),
    h("ol", { class: "turn-list" },
      state.turns.map((turn, index) => turnView(turn, index, handlers)),
    ),
    h("form", { class: "ask-form" },
      h("label", { for: "question-input" }, "Follow-up question"),
      h("input", {
        id: "question-input",
        class: "question-input",
        value: state.questionInput,
        onInput: handlers.onQuestionInput,
      }),
      h("button", {
        type: "button",
        class: "ask-button",
        ...(emptyQuestion || state.pendingAsk ? { disabled: "disabled" } : {}),
        onClick: () => handlers.onAsk(),
      }, state.pendingAsk ? "Asking…" : "Ask"),
    ),
  );
}

function turnView(turn: TurnVM, index: number, handlers: ViewHandlers): VNode {
  return h("li", { class: `turn ${turn.role} ${turn.status}` },
    h("span", { class: "turn-role" }, turn.role === "user" ? "You" : "cmdlens"),
    h("p", { class: "turn-text" }, turn.text),
    turn.status === "failed"
      ? h("button", {
          type: "button",
          class: "retry-turn",
          onClick: () => handlers.onRetryTurn(index),
        }, "Retry")
      : null,
    turn.status === "pending" ? h("span", { class: "turn-pending" }, "sending…") : null,
  );
}
