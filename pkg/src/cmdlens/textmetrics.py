"""Explanation-quality metrics: ROUGE-1/2/L, BLEU-4, METEOR-style and
CIDEr-style scores, implemented from the original metric definitions.

Notes on variants (these matter when comparing numbers across tools):

* the METEOR-style score uses exact + stem unigram matching only (no
  synonym stage, which would need a lexical database); reports carry
  ``meteor_variant: "exact+stem"``.
* BLEU uses add-epsilon smoothing (1e-9) on zero n-gram counts.
* CIDEr uses sigma=6 for the length penalty, the conventional x10
  scaling, and a smoothed IDF (log((1+N)/(1+df)) + 1) so that weights
  stay positive even on single-pair corpora.
"""

from __future__ import annotations

import enum
import math
import string
from collections import Counter, defaultdict
from dataclasses import dataclass

from .errors import EmptyCorpus, EmptyInput
from .stemmer import stem

_BLEU_EPS = 1e-9
_CIDER_SIGMA = 6.0


class Scheme(enum.Enum):
    WHITESPACE = "whitespace"
    CHARACTER = "character"


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[str, ...]
    tokenizer_id: str

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class MetricReport:
    rouge1: float
    rouge2: float
    rougeL: float
    bleu4: float
    meteor: float
    cider: float
    n_pairs: int
    scheme: str = Scheme.WHITESPACE.value
    meteor_variant: str = "exact+stem"

    def to_dict(self) -> dict:
        return {
            "rouge1": self.rouge1, "rouge2": self.rouge2, "rougeL": self.rougeL,
            "bleu4": self.bleu4, "meteor": self.meteor, "cider": self.cider,
            "n_pairs": self.n_pairs, "scheme": self.scheme,
            "meteor_variant": self.meteor_variant,
        }


def tokenize_for_metrics(text: str, scheme: Scheme = Scheme.WHITESPACE) -> TokenSeq:
    """Whitespace scheme: lowercase, split on whitespace, strip surrounding
    punctuation.  Character scheme: one token per non-whitespace scalar."""
    if scheme is Scheme.CHARACTER:
        toks = tuple(ch for ch in text if not ch.isspace())
        return TokenSeq(toks, Scheme.CHARACTER.value)
    toks = []
    for word in text.lower().split():
        word = word.strip(string.punctuation)
        if word:
            toks.append(word)
    return TokenSeq(tuple(toks), Scheme.WHITESPACE.value)


def _ngrams(tokens: tuple[str, ...], n: int) -> Counter:
    return Counter(tokens[i:i + n] for i in range(len(tokens) - n + 1))


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _require_nonempty(*seqs: TokenSeq) -> None:
    for seq in seqs:
        if not seq.tokens:
            raise EmptyInput("metric inputs must contain at least one token")


def rouge_n(cand: TokenSeq, ref: TokenSeq, n: int) -> tuple[float, float, float]:
    """Clipped n-gram overlap; returns (precision, recall, f1)."""
    _require_nonempty(cand, ref)
    cand_grams = _ngrams(cand.tokens, n)
    ref_grams = _ngrams(ref.tokens, n)
    n_cand = sum(cand_grams.values())
    n_ref = sum(ref_grams.values())
    if n_cand == 0 or n_ref == 0:
        return (0.0, 0.0, 0.0)
    overlap = sum(min(count, ref_grams[g]) for g, count in cand_grams.items())
    precision = overlap / n_cand
    recall = overlap / n_ref
    return (precision, recall, _f1(precision, recall))


def _lcs_length(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[len(b)]


def rouge_l(cand: TokenSeq, ref: TokenSeq) -> tuple[float, float, float]:
    """Longest-common-subsequence overlap; returns (precision, recall, f1)."""
    _require_nonempty(cand, ref)
    lcs = _lcs_length(cand.tokens, ref.tokens)
    precision = lcs / len(cand.tokens)
    recall = lcs / len(ref.tokens)
    return (precision, recall, _f1(precision, recall))


def bleu4(cand: TokenSeq, refs: list[TokenSeq]) -> float:
    """Geometric mean of clipped 1..4-gram precisions with add-epsilon
    smoothing, times the brevity penalty against the closest ref length."""
    if not refs:
        raise EmptyInput("bleu4 needs at least one reference")
    _require_nonempty(cand, *refs)
    log_sum = 0.0
    for n in range(1, 5):
        cand_grams = _ngrams(cand.tokens, n)
        total = sum(cand_grams.values())
        max_ref: Counter = Counter()
        for ref in refs:
            for g, count in _ngrams(ref.tokens, n).items():
                if count > max_ref[g]:
                    max_ref[g] = count
        correct = sum(min(count, max_ref[g]) for g, count in cand_grams.items())
        if total == 0:
            p_n = _BLEU_EPS
        else:
            p_n = (correct + _BLEU_EPS) / (total + _BLEU_EPS)
        log_sum += 0.25 * math.log(p_n)
    c = len(cand.tokens)
    r = min((abs(len(ref.tokens) - c), len(ref.tokens)) for ref in refs)[1]
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum)


def _align(cand: tuple[str, ...], ref: tuple[str, ...]) -> list[tuple[int, int]]:
    """Two-stage unigram alignment: exact surface matches first, then stem
    matches among the leftovers.  Each position is used at most once; within
    a stage, candidate tokens match the first unmatched ref occurrence."""
    matches: list[tuple[int, int]] = []
    used_ref: set[int] = set()
    used_cand: set[int] = set()
    for key in (lambda w: w, stem):
        ref_slots: dict[str, list[int]] = defaultdict(list)
        for j in range(len(ref) - 1, -1, -1):
            if j not in used_ref:
                ref_slots[key(ref[j])].append(j)
        for i, word in enumerate(cand):
            if i in used_cand:
                continue
            slots = ref_slots.get(key(word))
            if slots:
                j = slots.pop()
                matches.append((i, j))
                used_ref.add(j)
                used_cand.add(i)
    return sorted(matches)


def meteor(cand: TokenSeq, ref: TokenSeq) -> float:
    """Unigram F-mean (recall-weighted 9:1) with a fragmentation penalty of
    0.5 * (chunks / matches)^3."""
    _require_nonempty(cand, ref)
    matches = _align(cand.tokens, ref.tokens)
    m = len(matches)
    if m == 0:
        return 0.0
    precision = m / len(cand.tokens)
    recall = m / len(ref.tokens)
    fmean = 10 * precision * recall / (recall + 9 * precision)
    chunks = 1
    for (ci, ri), (cj, rj) in zip(matches, matches[1:]):
        if cj != ci + 1 or rj != ri + 1:
            chunks += 1
    penalty = 0.5 * (chunks / m) ** 3
    return fmean * (1.0 - penalty)


def cider(cands: list[TokenSeq], refs: list[list[TokenSeq]]) -> float:
    """Corpus-level consensus score: per-n TF-IDF cosine against each
    reference, Gaussian length penalty, averaged over n=1..4 and over
    pairs, scaled by 10."""
    if not cands or not refs or len(cands) != len(refs):
        raise EmptyCorpus("cider needs a non-empty, aligned corpus")
    for cand, ref_group in zip(cands, refs):
        if not ref_group:
            raise EmptyCorpus("every candidate needs at least one reference")
        _require_nonempty(cand, *ref_group)

    n_pairs = len(cands)
    scores = []
    # document frequency per n over reference groups
    idf_per_n: list[dict] = []
    for n in range(1, 5):
        df: Counter = Counter()
        for ref_group in refs:
            seen: set = set()
            for ref in ref_group:
                seen.update(_ngrams(ref.tokens, n).keys())
            df.update(seen)
        idf_per_n.append({g: math.log((1 + n_pairs) / (1 + d)) + 1.0 for g, d in df.items()})

    # n-grams never seen in any reference group still weigh down the
    # candidate norm, at the df=0 idf
    unseen_idf = math.log(1 + n_pairs) + 1.0

    for cand, ref_group in zip(cands, refs):
        per_n = []
        for n in range(1, 5):
            idf = idf_per_n[n - 1]
            cand_counts = _ngrams(cand.tokens, n)
            cand_vec = {g: c * idf.get(g, unseen_idf) for g, c in cand_counts.items()}
            cand_norm = math.sqrt(sum(v * v for v in cand_vec.values()))
            total = 0.0
            for ref in ref_group:
                ref_counts = _ngrams(ref.tokens, n)
                ref_vec = {g: c * idf[g] for g, c in ref_counts.items()}
                ref_norm = math.sqrt(sum(v * v for v in ref_vec.values()))
                if cand_norm == 0 or ref_norm == 0:
                    cos = 0.0
                else:
                    dot = sum(v * ref_vec[g] for g, v in cand_vec.items() if g in ref_vec)
                    cos = dot / (cand_norm * ref_norm)
                delta = len(cand.tokens) - len(ref.tokens)
                total += cos * math.exp(-(delta ** 2) / (2 * _CIDER_SIGMA ** 2))
            per_n.append(total / len(ref_group))
        scores.append(10.0 * sum(per_n) / 4.0)
    return sum(scores) / n_pairs


def evaluate_corpus(pairs: list[tuple[str, list[str]]],
                    scheme: Scheme = Scheme.WHITESPACE) -> MetricReport:
    """Average per-pair metrics over a corpus of (candidate, references).

    Multi-reference handling: BLEU and CIDEr use all references natively;
    ROUGE and METEOR take the best score over the references."""
    if not pairs:
        raise EmptyCorpus("no pairs to evaluate")
    cands = [tokenize_for_metrics(c, scheme) for c, _ in pairs]
    ref_groups = [[tokenize_for_metrics(r, scheme) for r in rs] for _, rs in pairs]

    r1 = r2 = rl = bl = mt = 0.0
    for cand, ref_group in zip(cands, ref_groups):
        r1 += max(rouge_n(cand, ref, 1)[2] for ref in ref_group)
        r2 += max(rouge_n(cand, ref, 2)[2] for ref in ref_group)
        rl += max(rouge_l(cand, ref)[2] for ref in ref_group)
        bl += bleu4(cand, ref_group)
        mt += max(meteor(cand, ref) for ref in ref_group)
    n = len(pairs)
    return MetricReport(
        rouge1=r1 / n, rouge2=r2 / n, rougeL=rl / n, bleu4=bl / n,
        meteor=mt / n, cider=cider(cands, ref_groups),
        n_pairs=n, scheme=scheme.value,
    )
