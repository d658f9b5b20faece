// Application state and the three analyst flows: submit a command, ask a
// follow-up, record a verdict. All mutations go through the store so the
// invariants hold in one place: at most one in-flight ask per session,
// turns keep server order, verdict history is append-only, and failed
// work stays visible (retryable turns, offline verdict queue).

import { ApiRequestError, GatewayClient, NetworkError } from "./api.js";
import type { ExplanationPayload, Verdict } from "./types.js";

export type TurnStatus = "pending" | "sent" | "failed";

export interface TurnVM {
  role: "user" | "assistant";
  text: string;
  status: TurnStatus;
}

export type ChipStatus = "pending" | "acked" | "queued";

export interface VerdictChip {
  command: string;
  verdict: Verdict;
  status: ChipStatus;
}

export interface AppState {
  commandInput: string;
  pendingExplain: boolean;
  explainError: string | null;
  lastCommand: string | null;
  explanation: ExplanationPayload | null;
  expandedSteps: number[];
  selectedTechnique: string | null;
  sessionId: string | null;
  turns: TurnVM[];
  questionInput: string;
  pendingAsk: boolean;
  verdicts: VerdictChip[];
  offlineQueue: VerdictChip[];
}

export function initialState(): AppState {
  return {
    commandInput: "",
    pendingExplain: false,
    explainError: null,
    lastCommand: null,
    explanation: null,
    expandedSteps: [],
    selectedTechnique: null,
    sessionId: null,
    turns: [],
    questionInput: "",
    pendingAsk: false,
    verdicts: [],
    offlineQueue: [],
  };
}

type Listener = (state: AppState) => void;

export interface StoreHooks {
  scrollToNewest?: () => void;
}

export class ConsoleStore {
  state: AppState = initialState();
  private listeners: Listener[] = [];

  constructor(
    private readonly client: GatewayClient,
    private readonly hooks: StoreHooks = {},
  ) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  setCommandInput(value: string): void {
    this.state.commandInput = value;
    this.emit();
  }

  setQuestionInput(value: string): void {
    this.state.questionInput = value;
    this.emit();
  }

  toggleStep(index: number): void {
    const expanded = new Set(this.state.expandedSteps);
    if (expanded.has(index)) expanded.delete(index);
    else expanded.add(index);
    this.state.expandedSteps = [...expanded].sort((a, b) => a - b);
    this.emit();
  }

  selectTechnique(id: string): void {
    this.state.selectedTechnique = id;
    this.emit();
  }

  /** Submit the command for explanation. Empty input is a no-op (the
   * submit control is disabled anyway); API errors surface inline and
   * keep the input so the analyst can retry. */
  async submitCommand(): Promise<void> {
    const command = this.state.commandInput.trim();
    if (!command || this.state.pendingExplain) return;
    this.state.pendingExplain = true;
    this.state.explainError = null;
    this.emit();
    try {
      if (!this.state.sessionId) {
        this.state.sessionId = await this.client.createSession();
      }
      const explanation = await this.client.explain(command, this.state.sessionId);
      this.state.explanation = explanation;
      this.state.lastCommand = command;
      this.state.expandedSteps = [];
      this.state.selectedTechnique = null;
      this.state.turns.push({ role: "user", text: command, status: "sent" });
      this.state.turns.push({ role: "assistant", text: explanation.overall, status: "sent" });
      this.hooks.scrollToNewest?.();
    } catch (err) {
      this.state.explainError = describeError(err);
    } finally {
      this.state.pendingExplain = false;
      this.emit();
    }
  }

  /** Ask a follow-up question. Optimistic user turn; the assistant turn
   * lands on response. A second ask while one is in flight is refused
   * (out-of-order guard). Failures mark the user turn retryable. */
  async askFollowup(): Promise<boolean> {
    const question = this.state.questionInput.trim();
    if (!question || !this.state.sessionId || this.state.pendingAsk) return false;
    this.state.pendingAsk = true;
    const turn: TurnVM = { role: "user", text: question, status: "pending" };
    this.state.turns.push(turn);
    this.state.questionInput = "";
    this.emit();
    try {
      const { answer } = await this.client.ask(this.state.sessionId, question);
      turn.status = "sent";
      this.state.turns.push({ role: "assistant", text: answer, status: "sent" });
      this.hooks.scrollToNewest?.();
      return true;
    } catch (err) {
      turn.status = "failed";
      this.state.explainError = describeError(err);
      return false;
    } finally {
      this.state.pendingAsk = false;
      this.emit();
    }
  }

  /** Re-send a failed follow-up turn. */
  async retryTurn(index: number): Promise<void> {
    const turn = this.state.turns[index];
    if (!turn || turn.status !== "failed" || turn.role !== "user") return;
    this.state.turns.splice(index, 1);
    this.state.questionInput = turn.text;
    this.emit();
    await this.askFollowup();
  }

  /** Record an analyst verdict for the explained command. Duplicate
   * resubmission of an already pending/acked verdict is a no-op; network
   * failures park the chip in a visible offline queue. */
  async recordVerdict(verdict: Verdict): Promise<void> {
    const command = this.state.lastCommand;
    if (!command || !this.state.sessionId) return;
    const duplicate = this.state.verdicts.find(
      (chip) => chip.command === command && chip.verdict === verdict
        && chip.status !== "queued",
    );
    if (duplicate) return;

    const queued = this.state.offlineQueue.findIndex(
      (chip) => chip.command === command && chip.verdict === verdict,
    );
    const chip: VerdictChip = queued >= 0
      ? this.state.offlineQueue.splice(queued, 1)[0]!
      : { command, verdict, status: "pending" };
    if (queued < 0) this.state.verdicts.push(chip);
    chip.status = "pending";
    this.emit();
    try {
      await this.client.verdict(this.state.sessionId, command, verdict);
      chip.status = "acked";
    } catch (err) {
      if (err instanceof NetworkError) {
        chip.status = "queued";
        this.state.offlineQueue.push(chip);
      } else {
        this.state.verdicts = this.state.verdicts.filter((c) => c !== chip);
        this.state.explainError = describeError(err);
      }
    }
    this.emit();
  }

  /** Retry every verdict parked while offline. */
  async drainOfflineQueue(): Promise<void> {
    const queue = [...this.state.offlineQueue];
    this.state.offlineQueue = [];
    for (const chip of queue) {
      chip.status = "pending";
      this.emit();
      try {
        await this.client.verdict(this.state.sessionId!, chip.command, chip.verdict);
        chip.status = "acked";
      } catch (err) {
        if (err instanceof NetworkError) {
          chip.status = "queued";
          this.state.offlineQueue.push(chip);
        } else {
          this.state.explainError = describeError(err);
        }
      }
      this.emit();
    }
  }
}

function describeError(err: unknown): string {
  if (err instanceof ApiRequestError) {
    return `${err.errorType}: ${err.message}`;
  }
  if (err instanceof NetworkError) {
    return "network unreachable; request queued where possible";
  }
  return String(err);
}
