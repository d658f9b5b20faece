// Browser bootstrap: wire the store to the live gateway and re-render the
// whole view on every state change. Served by the gateway's static route.

import { fetchTransport, GatewayClient } from "./api.js";
import { ConsoleStore } from "./state.js";
import type { Verdict } from "./types.js";
import { appView, ViewHandlers } from "./views.js";
import { mount } from "./vnode.js";

function start(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");

  const store = new ConsoleStore(new GatewayClient(fetchTransport("")), {
    scrollToNewest: () => {
      const list = document.querySelector(".turn-list");
      list?.lastElementChild?.scrollIntoView({ block: "end" });
    },
  });

  const handlers: ViewHandlers = {
    onCommandInput: (value) => store.setCommandInput(value ?? ""),
    onSubmit: () => void store.submitCommand(),
    onQuestionInput: (value) => store.setQuestionInput(value ?? ""),
    onAsk: () => void store.askFollowup(),
    onToggleStep: (index) => store.toggleStep(index),
    onSelectTechnique: (id) => store.selectTechnique(id),
    onVerdict: (verdict: Verdict) => void store.recordVerdict(verdict),
    onRetryTurn: (index) => void store.retryTurn(index),
    onDrainQueue: () => void store.drainOfflineQueue(),
  };

  store.subscribe((state) => mount(appView(state, handlers), root));
  mount(appView(store.state, handlers), root);
}

document.addEventListener("DOMContentLoaded", start);
