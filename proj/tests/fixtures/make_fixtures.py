#!/usr/bin/env python3
"""Regenerates the test fixtures under tests/fixtures.

The output is deterministic; re-running overwrites the checked-in files with
identical content. Needs nltk (Porter stemmer, Martin extensions) only for
the stemmer reference vectors and for checking synthetic words.
"""

import json
import pathlib
import random
import re
import sysconfig

from nltk.stem.porter import PorterStemmer

HERE = pathlib.Path(__file__).resolve().parent
STEMMER = PorterStemmer(mode=PorterStemmer.MARTIN_EXTENSIONS)
STOPWORDS = set(
    "a an and are as at be but by for if in into is it no not of on or such that the their "
    "then there these they this to was will with".split()
)


def write_lines(path, lines):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(line + "\n" for line in lines))


def jsonl(records):
    return [json.dumps(r, separators=(",", ":")) for r in records]


class WordMint:
    """Pseudo-words whose Porter stem is the word itself, all distinct."""

    def __init__(self, seed):
        self.rng = random.Random(seed)
        self.used = set()

    def __call__(self):
        while True:
            w = "".join(
                self.rng.choice("bdfgklmnprtvz") + self.rng.choice("aiou") for _ in range(3)
            ) + self.rng.choice("kmnprt")
            if w in self.used or w in STOPWORDS or STEMMER.stem(w) != w:
                continue
            self.used.add(w)
            return w


def sentence(words):
    return " ".join(words) + "."


def synthetic():
    """100 documents, 20 topics. For topic i:

    d(5i)   grade 2: both query terms plus the topic's PRF term (x3)
    d(5i+1) grade 0: first query term only
    d(5i+2) grade 1: PRF term only, so only an RM3-expanded query reaches it
    d(5i+3) grade 1: the generated-only terms, so only GRF reaches it
    d(5i+4) unjudged: filler and shared common words

    Generated documents mention the first query term and the two generated-
    only terms, never the PRF term. Fillers are unique to each document;
    a small pool of common words is shared by non-relevant documents.
    """
    mint = WordMint(20260115)
    rng = random.Random(77)
    common = [mint() for _ in range(8)]
    out = HERE / "synthetic"
    docs, topics, qrels, gens = [], [], [], []
    for i in range(20):
        qid = f"q{i + 1:02d}"
        qa, qb, prf, g1, g2 = (mint() for _ in range(5))

        def filler(lo, hi):
            return [mint() for _ in range(rng.randint(lo, hi))]

        def shared(lo, hi):
            return rng.sample(common, rng.randint(lo, hi))

        ids = [f"d{5 * i + j:03d}" for j in range(5)]
        docs.append(
            {
                "doc_id": ids[0],
                "title": qa,
                "contents": sentence([qb] * rng.randint(1, 2) + [prf] * rng.randint(2, 3) + filler(1, 3))
                + " "
                + sentence([prf] + filler(1, 2)),
            }
        )
        docs.append({"doc_id": ids[1], "title": "", "contents": sentence([qa] + shared(1, 3) + filler(2, 5))})
        docs.append({"doc_id": ids[2], "title": "", "contents": sentence([prf] * rng.randint(1, 3) + filler(2, 4))})
        docs.append({"doc_id": ids[3], "title": "", "contents": sentence([g1, g2] + filler(2, 4))})
        docs.append({"doc_id": ids[4], "title": "", "contents": sentence(shared(1, 3) + filler(3, 6))})
        topics.append(f"{qid}\tthe {qa} and {qb}")
        qrels += [f"{qid} 0 {ids[0]} 2", f"{qid} 0 {ids[1]} 0", f"{qid} 0 {ids[2]} 1", f"{qid} 0 {ids[3]} 1"]
        for k, gen_type in enumerate(["answer", "essay", "news"]):
            text = sentence([qa, g1, g2] + [mint() for _ in range(2)] + shared(0, 1))
            if k == 1:
                text += " " + sentence([g1] + [mint()])
            gens.append({"query_id": qid, "gen_type": gen_type, "text": text})

    write_lines(out / "corpus.jsonl", jsonl(docs))
    write_lines(out / "topics.tsv", topics)
    write_lines(out / "qrels.txt", qrels)
    write_lines(out / "generated.jsonl", jsonl(gens))
    folds = {
        "fold1": [f"q{i:02d}" for i in range(1, 21, 2)],
        "fold2": [f"q{i:02d}" for i in range(2, 21, 2)],
    }
    (out / "folds.json").write_text(json.dumps(folds, indent=2) + "\n")
    config = {
        "paradigm": "sparse",
        "corpus": "corpus.jsonl",
        "topics": "topics.tsv",
        "qrels": "qrels.txt",
        "gen_docs": "generated.jsonl",
        "folds": "folds.json",
        "metrics": "map,ndcg@10,recall@1000",
        "output_dir": "experiment_out",
    }
    (out / "experiment.json").write_text(json.dumps(config, indent=2) + "\n")


def small_dense():
    """Six documents, twelve passages, three queries, dimension 4."""
    rng = random.Random(404)
    out = HERE / "dense"

    def vec():
        return [round(rng.uniform(-1, 1), 3) for _ in range(4)]

    passages = [
        {"id": f"doc{d}#p{p}", "vector": vec()} for d in range(1, 7) for p in range(2)
    ]
    queries = [{"id": f"q{q}", "vector": vec()} for q in range(1, 4)]
    gens = [
        {"id": f"q{q}#{t}", "vector": vec()} for q in range(1, 4) for t in ("answer", "essay")
    ]
    write_lines(out / "passages.jsonl", jsonl(passages))
    write_lines(out / "queries.jsonl", jsonl(queries))
    write_lines(out / "generated.jsonl", jsonl(gens))
    write_lines(out / "topics.tsv", [f"q{q}\tdense topic {q}" for q in range(1, 4)])


def small_learned_sparse():
    """Two single-passage documents and one query, small enough to trace by hand."""
    out = HERE / "learned_sparse"
    passages = [
        {"id": "a#p0", "weights": {"apple": 2.0, "pie": 1.0}},
        {"id": "b#p0", "weights": {"pie": 1.0, "crust": 3.0}},
    ]
    queries = [{"id": "q1", "weights": {"apple": 1.0, "pie": 1.0}}]
    gens = [
        {"id": "q1#answer", "weights": {"crust": 1.0, "pie": 1.0}},
        {"id": "q1#essay", "weights": {"crust": 3.0, "apple": 1.0}},
    ]
    write_lines(out / "passages.jsonl", jsonl(passages))
    write_lines(out / "queries.jsonl", jsonl(queries))
    write_lines(out / "generated.jsonl", jsonl(gens))
    write_lines(out / "topics.tsv", ["q1\tapple pie"])


def porter_vectors():
    """Reference stems for a large, varied English vocabulary."""
    words = set()
    stdlib = pathlib.Path(sysconfig.get_paths()["stdlib"])
    for path in sorted(stdlib.glob("*.py")):
        for w in re.findall(r"[a-z]+", path.read_text(errors="ignore").lower()):
            if 3 <= len(w) <= 18:
                words.add(w)
    classic = (
        "caresses ponies ties caress cats feed agreed plastered bled motoring sing conflated "
        "troubled sized hopping tanned falling hissing fizzed failing filing happy sky "
        "relational conditional rational valenci hesitanci digitizer conformabli radicalli "
        "differentli vileli analogousli vietnamization predication operator feudalism "
        "decisiveness hopefulness callousness formaliti sensitiviti sensibiliti triplicate "
        "formative formalize electriciti electrical hopeful goodness revival allowance "
        "inference airliner gyroscopic adjustable defensible irritant replacement adjustment "
        "dependent adoption homologou communism activate angulariti homologous effective "
        "bowdlerize probate rate cease controll roll generalizations oscillators analogi "
        "archaeology running runner runs"
    ).split()
    words.update(classic)
    rows = [f"{w}\t{STEMMER.stem(w)}" for w in sorted(words)]
    write_lines(HERE.parent / "data" / "porter_vectors.tsv", rows)


if __name__ == "__main__":
    synthetic()
    small_dense()
    small_learned_sparse()
    porter_vectors()
