#!/usr/bin/env python3
"""Regenerate the bundled 50-sentence fixture.

Writes, next to this script:

    train.conll   CoNLL-2003 style columns (word POS chunk NER), IOB1 tags
    train.conllu  CoNLL-U dependency trees for the same tokens
    glove.txt     synthetic 300-d word vectors in GloVe text format
    train.ctxe    synthetic contextual vectors (random but fixed) + first-subword masks
    manifest.json counts computed here, independently of the Rust code

The CTXE writer below is a second, independent implementation of the
binary layout and is what the Rust reader is checked against.

Usage: python3 generate.py
"""

import json
import struct
from collections import Counter
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
SEED = 20201014
GLOVE_DIM = 300
CTX_DIM = 64
N_SENTENCES = 50

ENTITIES = {
    "PER": [["John", "Smith"], ["Angela", "Merkel"], ["Jobs"], ["Clinton"],
            ["Boris", "Yeltsin"], ["Wasim", "Akram"], ["Steffi", "Graf"]],
    "LOC": [["U.S."], ["Germany"], ["Australia"], ["MACEDONIA"], ["Washington"],
            ["New", "York"], ["Bonn"], ["Moscow"]],
    "ORG": [["Reuters"], ["European", "Union"], ["Bayern", "Munich"], ["NATO"],
            ["Apple"], ["United", "Nations"]],
    "MISC": [["German"], ["British"], ["Olympic"], ["World", "Cup"], ["Russian"]],
}

TEMPLATES = [
    "{PER} said on Monday that {LOC} would join {ORG} .",
    "{ORG} shares rose 3 percent in {LOC} trading .",
    "The {MISC} team beat {LOC} in the final .",
    "{PER} arrived in {LOC} for talks with {PER} .",
    "Officials in {LOC} denied the report by {ORG} .",
    "{PER} won the {MISC} title again .",
    "{ORG} and {ORG} signed a trade deal .",
    "Police said the {MISC} driver was injured .",
    "Markets were quiet on Friday .",
    "{LOC} , {LOC} and {LOC} sent observers .",
    "{PER} told {ORG} that prices would fall .",
    "The talks in {LOC} ended without agreement .",
    "{MISC} {MISC} fans celebrated in {LOC} .",
    "{ORG} reported a loss of 12 million dollars .",
]

POS = {
    "said": "VBD", "would": "MD", "join": "VB", "on": "IN", "that": "IN",
    "Monday": "NNP", "Friday": "NNP", "shares": "NNS", "rose": "VBD", "3": "CD",
    "12": "CD", "percent": "NN", "in": "IN", "trading": "NN", "The": "DT",
    "the": "DT", "team": "NN", "beat": "VBD", "final": "NN", "arrived": "VBD",
    "for": "IN", "talks": "NNS", "with": "IN", "Officials": "NNS", "denied": "VBD",
    "report": "NN", "by": "IN", "won": "VBD", "title": "NN", "again": "RB",
    "and": "CC", "signed": "VBD", "a": "DT", "trade": "NN", "deal": "NN",
    "Police": "NNS", "driver": "NN", "was": "VBD", "injured": "VBN",
    "Markets": "NNS", "were": "VBD", "quiet": "JJ", ",": ",", "sent": "VBD",
    "observers": "NNS", "told": "VBD", "prices": "NNS", "fall": "VB",
    "ended": "VBD", "without": "IN", "agreement": "NN", "fans": "NNS",
    "celebrated": "VBD", "reported": "VBD", "loss": "NN", "of": "IN",
    "million": "CD", "dollars": "NNS", ".": ".",
}

DEPRELS = ["nsubj", "obj", "obl", "amod", "compound", "det", "case", "punct",
           "conj", "cc", "nmod", "advmod", "aux"]

# Surfaces left out of glove.txt so the zero-vector policy is exercised.
OOV = {"Akram", "observers"}
# Surfaces stored with their original casing; everything else is lowercased.
CASED = {"U.S.", "MACEDONIA", "NATO"}


def build_sentences(rng):
    sentences = []
    for i in range(N_SENTENCES):
        template = TEMPLATES[i % len(TEMPLATES)] if i < len(TEMPLATES) else \
            TEMPLATES[int(rng.integers(len(TEMPLATES)))]
        words, spans = [], []
        for piece in template.split():
            if piece.startswith("{"):
                etype = piece[1:-1]
                choices = ENTITIES[etype]
                ent = choices[int(rng.integers(len(choices)))]
                spans.append((len(words), len(words) + len(ent) - 1, etype))
                words.extend(ent)
            else:
                words.append(piece)
        sentences.append((words, spans))
    return sentences


def iob1_tags(n, spans):
    tags = ["O"] * n
    prev_end, prev_type = None, None
    for start, end, etype in spans:
        for k in range(start, end + 1):
            tags[k] = "I-" + etype
        if prev_end is not None and prev_end + 1 == start and prev_type == etype:
            tags[start] = "B-" + etype
        prev_end, prev_type = end, etype
    return tags


def write_conll(sentences, doc_starts):
    lines = []
    for i, (words, spans) in enumerate(sentences):
        if i in doc_starts:
            lines.append("-DOCSTART- -X- -X- O")
            lines.append("")
        tags = iob1_tags(len(words), spans)
        in_ent = {k for s, e, _ in spans for k in range(s, e + 1)}
        for k, (w, t) in enumerate(zip(words, tags)):
            pos = "NNP" if k in in_ent else POS.get(w, "NN")
            chunk = "O" if pos in {".", ","} else "I-NP"
            lines.append(f"{w} {pos} {chunk} {t}")
        lines.append("")
    (HERE / "train.conll").write_text("\n".join(lines) + "\n")


def write_conllu(sentences, rng):
    out = []
    for i, (words, _) in enumerate(sentences):
        n = len(words)
        order = rng.permutation(n)
        head = [0] * n
        for pos_in_order in range(1, n):
            node = int(order[pos_in_order])
            parent = int(order[int(rng.integers(pos_in_order))])
            head[node] = parent + 1
        out.append(f"# sent_id = {i}")
        if i == 3 and n >= 3:
            # multiword range line; must be ignored by readers
            out.append(f"1-2\t{words[0]}{words[1]}\t_\t_\t_\t_\t_\t_\t_\t_")
        for k, w in enumerate(words):
            rel = "root" if head[k] == 0 else DEPRELS[int(rng.integers(len(DEPRELS)))]
            upos = "PUNCT" if w in {".", ","} else "X"
            out.append(f"{k + 1}\t{w}\t{w.lower()}\t{upos}\t_\t_\t{head[k]}\t{rel}\t_\t_")
        out.append("")
    (HERE / "train.conllu").write_text("\n".join(out) + "\n")


def write_glove(sentences, rng):
    vocab = []
    seen = set()
    for words, _ in sentences:
        for w in words:
            if w in OOV:
                continue
            key = w if w in CASED else w.lower()
            if key not in seen:
                seen.add(key)
                vocab.append(key)
    lines = []
    for key in vocab:
        vec = rng.normal(0.0, 0.4, GLOVE_DIM)
        lines.append(key + " " + " ".join(f"{x:.4f}" for x in vec))
    (HERE / "glove.txt").write_text("\n".join(lines) + "\n")
    return len(vocab)


def subword_count(word):
    if len(word) <= 6:
        return 1
    return min(3, (len(word) + 4) // 5)


def write_ctxe(sentences, rng):
    buf = bytearray()
    buf += b"CTXE"
    buf += struct.pack("<III", 1, CTX_DIM, len(sentences))
    for i, (words, _) in enumerate(sentences):
        mask = []
        for w in words:
            mask.extend([1] + [0] * (subword_count(w) - 1))
        # pad to a multiple of 8 with zero-mask positions
        while len(mask) % 8:
            mask.append(0)
        vecs = rng.normal(0.0, 1.0, (len(mask), CTX_DIM)).astype("<f4")
        buf += struct.pack("<III", i, len(mask), len(words))
        buf += bytes(mask)
        buf += vecs.tobytes(order="C")
    (HERE / "train.ctxe").write_bytes(bytes(buf))


def manifest(sentences, doc_starts, glove_vocab):
    per_type = Counter()
    surface = Counter()
    tokens = 0
    for words, spans in sentences:
        tokens += len(words)
        for s, e, etype in spans:
            per_type[etype] += 1
            for k in range(s, e + 1):
                surface[words[k]] += 1
    return {
        "fixture": {
            "sentences": len(sentences),
            "documents": len(doc_starts),
            "tokens": tokens,
            "entities": sum(per_type.values()),
            "entities_per_type": dict(sorted(per_type.items())),
            "entity_mentions_per_surface": dict(sorted(surface.items())),
            "glove_dim": GLOVE_DIM,
            "glove_vocab": glove_vocab,
            "ctx_dim": CTX_DIM,
        },
    }


def main():
    rng = np.random.default_rng(SEED)
    sentences = build_sentences(rng)
    doc_starts = {0, 20, 35}
    write_conll(sentences, doc_starts)
    write_conllu(sentences, rng)
    vocab = write_glove(sentences, rng)
    write_ctxe(sentences, rng)
    path = HERE / "manifest.json"
    data = json.loads(path.read_text()) if path.exists() else {}
    data.update(manifest(sentences, doc_starts, vocab))
    path.write_text(json.dumps(data, indent=2) + "\n")


if __name__ == "__main__":
    main()
