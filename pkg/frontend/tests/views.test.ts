// Rendering contract tests against the recorded gateway responses: list
// ordering and score text byte-equal to the payload, warning/error
// surfaces, and the keyboard-reachability audit.

import { describe, expect, it } from "vitest";
import { initialState } from "../src/state.js";
import type { ExplanationPayload } from "../src/types.js";
import { appView, commandForm, ViewHandlers } from "../src/views.js";
import { byClass, findAll, isKeyboardReachable, textOf } from "../src/vnode.js";
import { loadFixture, rawFixture } from "./mock.js";

const noop = () => undefined;
const handlers: ViewHandlers = {
  onCommandInput: noop, onSubmit: noop, onQuestionInput: noop, onAsk: noop,
  onToggleStep: noop, onSelectTechnique: noop, onVerdict: noop,
  onRetryTurn: noop, onDrainQueue: noop,
};

const reverseShell = loadFixture<ExplanationPayload>("explain_reverse_shell.json");
const benign = loadFixture<ExplanationPayload>("explain_ls.json");

function stateWithExplanation(payload: ExplanationPayload) {
  const state = initialState();
  state.explanation = payload;
  state.lastCommand = "fixture command";
  state.sessionId = "fixture-session";
  return state;
}

describe("explanation rendering", () => {
  it("shows the reverse-shell fixture with four steps and intent badges", () => {
    const view = appView(stateWithExplanation(reverseShell), handlers);
    expect(byClass(view, "step")).toHaveLength(4);
    expect(byClass(view, "technique-badge")).toHaveLength(5);
    expect(byClass(view, "tactic-badge")).toHaveLength(3);
    expect(byClass(view, "warning-banner")).toHaveLength(1);
    expect(textOf(byClass(view, "overall-panel")[0]!)).toContain(reverseShell.overall);
  });

  it("renders techniques in exactly the API order", () => {
    const view = appView(stateWithExplanation(reverseShell), handlers);
    const ids = byClass(view, "technique-id").map(textOf);
    expect(ids).toEqual(
      reverseShell.intent.technique_ranking.slice(0, 5).map(([id]) => id));
    const tacticIds = byClass(view, "tactic-id").map(textOf);
    expect(tacticIds).toEqual(
      reverseShell.intent.tactic_ranking.slice(0, 3).map(([id]) => id));
  });

  it("renders every score byte-equal to the recorded payload value", () => {
    const view = appView(stateWithExplanation(reverseShell), handlers);
    const raw = rawFixture("explain_reverse_shell.json");
    const scoreTexts = byClass(view, "technique-score").map(textOf);
    reverseShell.intent.technique_ranking.slice(0, 5).forEach(([, score], i) => {
      expect(scoreTexts[i]).toBe(String(score));
      // the digits shown appear verbatim in the recorded response body
      expect(raw).toContain(scoreTexts[i]!);
    });
    const retrievedScores = byClass(view, "retrieved-score").map(textOf);
    reverseShell.retrieved.forEach((chunk, i) => {
      expect(retrievedScores[i]).toBe(String(chunk.score));
      expect(raw).toContain(retrievedScores[i]!);
    });
  });

  it("shows retrieved snippets with utility/origin provenance", () => {
    const view = appView(stateWithExplanation(reverseShell), handlers);
    const provenance = byClass(view, "provenance").map(textOf);
    expect(provenance).toEqual(
      reverseShell.retrieved.map((c) => `(${c.utility}, ${c.origin})`));
  });

  it("omits the warning banner for benign output", () => {
    expect(benign.disposal_advice).toBeNull();
    const view = appView(stateWithExplanation(benign), handlers);
    expect(byClass(view, "warning-banner")).toHaveLength(0);
  });

  it("marks the selected technique", () => {
    const state = stateWithExplanation(reverseShell);
    state.selectedTechnique = reverseShell.intent.technique_ranking[0]![0];
    const view = appView(state, handlers);
    const selected = byClass(view, "selected");
    expect(selected).toHaveLength(1);
    expect(textOf(selected[0]!)).toContain(state.selectedTechnique!);
  });

  it("expands a step on demand", () => {
    const state = stateWithExplanation(reverseShell);
    state.expandedSteps = [1];
    const view = appView(state, handlers);
    const steps = byClass(view, "step");
    expect(steps[1]!.attrs["class"]).toContain("expanded");
    expect(steps[0]!.attrs["class"]).not.toContain("expanded");
  });
});

describe("command form", () => {
  it("disables submit on empty input", () => {
    const state = initialState();
    const form = commandForm(state, handlers);
    const button = byClass(form, "submit-command")[0]!;
    expect(button.attrs["disabled"]).toBeDefined();
  });

  it("enables submit once input is present", () => {
    const state = initialState();
    state.commandInput = "ls -la";
    const button = byClass(commandForm(state, handlers), "submit-command")[0]!;
    expect(button.attrs["disabled"]).toBeUndefined();
  });

  it("disables submit while a request is pending", () => {
    const state = initialState();
    state.commandInput = "ls";
    state.pendingExplain = true;
    const button = byClass(commandForm(state, handlers), "submit-command")[0]!;
    expect(button.attrs["disabled"]).toBeDefined();
  });
});

describe("error surface", () => {
  it("shows an inline banner with a retry control and preserves the input", () => {
    const state = initialState();
    state.commandInput = "ls --color -t";
    state.explainError = "InternalError: simulated failure";
    const view = appView(state, handlers);
    expect(byClass(view, "error-banner")).toHaveLength(1);
    expect(byClass(view, "retry-explain")).toHaveLength(1);
    const input = byClass(view, "command-input")[0]!;
    expect(input.attrs["value"]).toBe("ls --color -t");
  });
});

describe("accessibility audit", () => {
  it("keeps every interactive element keyboard-reachable", () => {
    const state = stateWithExplanation(reverseShell);
    state.turns = [
      { role: "user", text: "q", status: "failed" },
      { role: "user", text: "q2", status: "pending" },
    ];
    state.verdicts = [{ command: "x", verdict: "malicious", status: "pending" }];
    state.offlineQueue = [{ command: "y", verdict: "benign", status: "queued" }];
    state.explainError = "boom";
    const view = appView(state, handlers);
    const interactive = findAll(view, (n) => Object.keys(n.events).length > 0);
    expect(interactive.length).toBeGreaterThan(5);
    for (const node of interactive) {
      expect(isKeyboardReachable(node), `${node.tag}.${node.attrs["class"]}`).toBe(true);
    }
  });
});
