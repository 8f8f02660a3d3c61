"""Smoke test for the nerfuse extension module.

Build and install first, for example with
    maturin develop --release -m crates/python/Cargo.toml
then run
    python crates/python/python/smoke_test.py
"""

import math
import os
import sys
import tempfile

import nerfuse

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "..", "core", "fixtures")


def fixture(name):
    return os.path.join(FIXTURES, name)


def check_graph():
    a = nerfuse.normalized_adjacency(3, [(0, 1), (1, 2)])
    assert abs(a[0][1] - 1 / math.sqrt(6)) < 1e-12
    assert abs(a[1][1] - 1 / 3) < 1e-12
    assert a[0][2] == 0.0
    assert nerfuse.normalized_adjacency(2, [(0, 1)]) == [[0.5, 0.5], [0.5, 0.5]]


def check_metrics():
    gold = [[(3, 4, "LOC")]]
    pred = [[(4, 4, "LOC")]]
    assert nerfuse.relaxed_prf(gold, pred)["overall"]["f1"] == 100.0
    assert nerfuse.strict_prf(gold, pred)["overall"]["f1"] == 0.0


def check_fixture():
    corpus = nerfuse.Corpus.read(fixture("train.conll"), "iob1", fixture("train.conllu"))
    wv = nerfuse.WordVectors.load(fixture("glove.txt"))
    ctx = nerfuse.ContextualFile.read(fixture("train.ctxe"))
    assert len(corpus) == 50 and corpus.has_deps()
    assert ctx.validate(corpus) == []
    assert all(sum(m) == len(s) for m, s in zip(ctx.masks(), corpus.surfaces()))
    assert corpus.stats()["entity_mentions_per_surface"]["U.S."] == 8

    model, losses = nerfuse.JointModel.train(
        corpus, wv, ctx, optimizer="adam", learning_rate=0.003, epochs=5, gcn_hidden_dim=16, global_dim=16
    )
    assert len(losses) == 5 and losses[-1] < losses[0]
    tags = model.predict(corpus, wv, ctx)
    assert [len(t) for t in tags] == [len(s) for s in corpus.surfaces()]

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.fuse")
        model.save(path)
        again = nerfuse.JointModel.load(path)
        assert again.mode == "joint" and again.ctx_dim == ctx.ctx_dim
        report = again.evaluate(corpus, wv, ctx)
        assert set(report["per_type"]) == {"LOC", "MISC", "ORG", "PER"}


def check_synthetic():
    train, test, wv, ctx_train, ctx_test = nerfuse.synth_corpus(seed=1, train_sentences=40, test_sentences=20)
    model, _ = nerfuse.JointModel.train(train, wv, ctx_train, mode="contextual_only", epochs=2)
    assert model.mode == "contextual_only" and model.global_dim == 0
    assert 0.0 <= model.evaluate(test, None, ctx_test)["overall"]["f1"] <= 100.0
    try:
        nerfuse.JointModel.train(train, wv, ctx_train, epoch=2)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown setting accepted")


def main():
    for check in (check_graph, check_metrics, check_fixture, check_synthetic):
        check()
        print(f"ok {check.__name__}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
