// Display formatting. Scores are NEVER rounded or re-formatted: the text
// shown is the shortest round-trip representation of the exact number the
// API sent, so what the analyst reads is byte-equal to the payload value.

export function formatScore(score: number): string {
  return String(score);
}

export function verdictLabel(verdict: string): string {
  return verdict.charAt(0).toUpperCase() + verdict.slice(1);
}
