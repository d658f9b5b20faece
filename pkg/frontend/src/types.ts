// Payload shapes of the gateway HTTP API. These mirror the server schema
// exactly; the console never recomputes or re-sorts anything in them.

export interface ExplanationStep {
  fragment: string;
  explanation: string;
}

export interface IntentPayload {
  technique_ranking: [string, number][];
  tactic_ranking: [string, number][];
  k_used: number;
}

export interface RetrievedChunk {
  chunk_id: string;
  utility: string;
  origin: string;
  text: string;
  score: number;
  rank: number;
}

export interface ExplanationPayload {
  steps: ExplanationStep[];
  overall: string;
  intent: IntentPayload;
  retrieved: RetrievedChunk[];
  raw_response: string;
  disposal_advice: string | null;
}

export interface SessionTurn {
  role: "user" | "assistant";
  text: string;
  timestamp: number;
}

export interface VerdictRecord {
  command: string;
  verdict: string;
  timestamp: number;
}

export interface SessionPayload {
  session_id: string;
  turns: SessionTurn[];
  verdicts: VerdictRecord[];
  explanations: Record<string, ExplanationPayload>;
}

export interface ApiErrorBody {
  error: { type: string; message: string; stage: string | null };
}

export type Verdict = "malicious" | "benign" | "undecided";
