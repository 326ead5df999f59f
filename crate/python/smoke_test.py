"""Smoke test for the artaug_py extension module.

Build and install the module first:

    cd crates/py && maturin build --release -o dist && pip install dist/*.whl

then run ``python3 python/smoke_test.py`` (or ``pytest python/``).
"""

import json
import math
import tempfile
from pathlib import Path

import artaug_py as aa


def test_metrics():
    assert aa.tokenize("The Cat, sat.") == ["the", "cat", "sat"]
    assert abs(aa.bleu("the cat the cat", ["the cat sat"])[1] - math.sqrt(1 / 6)) < 1e-9
    assert abs(aa.rouge_l("the cat sat", ["the cat sat on the mat"]) - 2 / 3) < 1e-9
    assert abs(aa.meteor_lite("b a", ["a b"]) - 0.5) < 1e-9
    per_item, corpus = aa.evaluate_captions(
        [("1", "a woman holds a fan", ["a woman holds a fan"]), ("2", "two boats", ["boats on a river"])],
        ["bleu", "rouge"],
    )
    assert dict(per_item)["1"]["ROUGE-L"] == 1.0
    assert "BLEU-4" in corpus
    p, r, f = aa.bertscore([[1.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]])
    assert (p, r) == (1.0, 0.5) and abs(f - 2 / 3) < 1e-12
    try:
        aa.rouge_l("!!", ["x"])
    except aa.ArtaugError:
        pass
    else:
        raise AssertionError("empty candidate accepted")


def test_retrieval():
    ident = [[1.0 if i == j else 0.0 for j in range(5)] for i in range(5)]
    assert aa.recall_at_k(ident, [1], "t2im") == {1: 1.0}
    assert aa.pooled_recall(ident, 3, 4, 7, [1]) == {1: 1.0}


def test_generation_and_tables():
    png = aa.mock_generate("a red fan", 41, 8, 8)
    assert png[:8] == b"\x89PNG\r\n\x1a\n"
    assert png == aa.mock_generate("a red fan", 41, 8, 8)
    assert aa.derive_seed("a1", 0, 17) == aa.derive_seed("a1", 0, 17)
    assert aa.derive_seed("a1", 0, 17) != aa.derive_seed("a1", 1, 17)

    with tempfile.TemporaryDirectory() as tmp:
        t = aa.EmbeddingTable(3)
        t.insert("x", [1.0, 0.0, 0.0])
        path = str(Path(tmp) / "t.emb")
        t.save(path)
        loaded = aa.EmbeddingTable.load(path)
        assert len(loaded) == 1 and "x" in loaded and loaded.dim == 3
        assert aa.cosine(loaded.get("x"), [2.0, 0.0, 0.0]) == 1.0


def test_dataset_and_cli():
    with tempfile.TemporaryDirectory() as tmp:
        manifest = Path(tmp) / "m.jsonl"
        rows = [
            {"id": f"a{i}", "image": f"img/a{i}.jpg", "split": "train" if i < 4 else "test",
             "visual_sentences": [f"Figure {i}. ", " A blue sky."], "contextual_sentences": ["Oil."]}
            for i in range(5)
        ]
        manifest.write_text("".join(json.dumps(r) + "\n" for r in rows))
        d = aa.Dataset.load(str(manifest))
        assert len(d) == 5
        assert d.split_counts() == {"train": 4, "val": 0, "test": 1}
        assert d.prompt("a0") == "Figure 0. A blue sky."

        out = Path(tmp) / "aug"
        code = aa.run_cli(["augment", "--manifest", str(manifest), "--out-dir", str(out),
                           "-m", "2", "--width", "8", "--height", "8"])
        assert code == 0
        assert len(list(out.glob("*.png"))) == 10
        batches = d.sample_epoch(str(out / "synthetic.jsonl"), alpha=0.0, batch_size=3, epoch_seed=1)
        items = [i for b in batches for i in b]
        assert len(items) == 4 and all(i["origin"] == "synthetic" for i in items)
        assert aa.run_cli(["validate", "--frobnicate"]) == 64


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"ok  {name}")
    print("smoke test passed")
