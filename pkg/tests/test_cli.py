"""End-to-end tests for the command line interface."""

import json

import pytest

from hetlink.cli import main


SMALL_GEN = {
    "node_counts": {"Drug": 15, "AdverseEffect": 20, "Symptom": 15, "Finding": 30},
    "vocab_size": 150,
    "snippets": 24,
    "seed": 5,
}

TRAIN_CONFIG = {"encoder": "graphsage", "layers": 1, "dim": 32,
                "epochs": 2, "patience": 2, "seed": 0}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Generated corpus plus a trained model, shared across CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    gen_cfg = root / "gen.json"
    gen_cfg.write_text(json.dumps(SMALL_GEN))
    assert main(["gen-synth", "--config", str(gen_cfg),
                 "--out", str(root / "corpus")]) == 0
    train_cfg = root / "train.json"
    train_cfg.write_text(json.dumps(TRAIN_CONFIG))
    assert main(["train", "--bundle", str(root / "corpus"),
                 "--snippets", str(root / "corpus" / "snippets.json"),
                 "--config", str(train_cfg),
                 "--out", str(root / "model")]) == 0
    return root


def test_gen_synth_writes_bundle_and_snippets(workdir):
    corpus = workdir / "corpus"
    for name in ("nodes.tsv", "edges.tsv", "wordvecs.txt", "freqs.tsv",
                 "manifest.json", "snippets.json"):
        assert (corpus / name).exists(), name
    manifest = json.loads((corpus / "manifest.json").read_text())
    assert manifest["bundle_version"] == "1"
    assert manifest["nodes"] == sum(SMALL_GEN["node_counts"].values())


def test_train_writes_model_and_history(workdir):
    model = workdir / "model"
    assert (model / "params.npz").exists()
    assert (model / "history.csv").exists()
    header, *rows = (model / "history.csv").read_text().splitlines()
    assert header == "epoch,loss,val_f1"
    assert 1 <= len(rows) <= TRAIN_CONFIG["epochs"]
    manifest = json.loads((model / "manifest.json").read_text())
    assert manifest["encoder"]["kind"] == "graphsage"


def test_eval_reports_metrics_json(workdir, capsys):
    assert main(["eval", "--bundle", str(workdir / "corpus"),
                 "--model", str(workdir / "model"),
                 "--snippets", str(workdir / "corpus" / "snippets.json")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) >= {"precision", "recall", "f1", "n_gold"}
    assert 0.0 <= report["f1"] <= 1.0
    # acronym-corrupted mentions resolve through the index's acronym rule
    # and are skipped as unambiguous, so n_gold can be below the snippet count
    assert 1 <= report["n_gold"] <= SMALL_GEN["snippets"]


def test_disambiguate_ranks_candidates(workdir, capsys):
    snippets = json.loads((workdir / "corpus" / "snippets.json").read_text())
    one = workdir / "one.json"
    one.write_text(json.dumps([snippets[0]]))
    assert main(["disambiguate", "--bundle", str(workdir / "corpus"),
                 "--model", str(workdir / "model"),
                 "--snippets", str(one), "--top-k", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out) == 1
    cands = out[0]["candidates"]
    assert len(cands) == 3
    scores = [c["score"] for c in cands]
    assert scores == sorted(scores, reverse=True)
    assert all(set(c) == {"id", "name", "score"} for c in cands)


def test_ingest_roundtrips_tsv_bundle(workdir, tmp_path):
    corpus = workdir / "corpus"
    assert main(["ingest", "--nodes", str(corpus / "nodes.tsv"),
                 "--edges", str(corpus / "edges.tsv"),
                 "--wordvecs", str(corpus / "wordvecs.txt"),
                 "--out", str(tmp_path / "bundle")]) == 0
    manifest = json.loads((tmp_path / "bundle" / "manifest.json").read_text())
    assert manifest["nodes"] == sum(SMALL_GEN["node_counts"].values())


def test_unknown_config_key_is_rejected(workdir, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"encoder": "graphsage", "banana": 1}))
    code = main(["train", "--bundle", str(workdir / "corpus"),
                 "--snippets", str(workdir / "corpus" / "snippets.json"),
                 "--config", str(bad), "--out", str(tmp_path / "m")])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "banana" in err


def test_missing_bundle_fails_cleanly(tmp_path, capsys):
    code = main(["eval", "--bundle", str(tmp_path / "nope"),
                 "--model", str(tmp_path / "nope"),
                 "--snippets", str(tmp_path / "nope.json")])
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")


def test_bad_bundle_version_rejected(workdir, tmp_path, capsys):
    import shutil

    bundle = tmp_path / "bundle"
    shutil.copytree(workdir / "corpus", bundle)
    manifest = json.loads((bundle / "manifest.json").read_text())
    manifest["bundle_version"] = "99"
    (bundle / "manifest.json").write_text(json.dumps(manifest))
    code = main(["eval", "--bundle", str(bundle),
                 "--model", str(workdir / "model"),
                 "--snippets", str(bundle / "snippets.json")])
    assert code == 1
    assert "bundle version" in capsys.readouterr().err
