import subprocess
import sys

import numpy as np
import pytest

from spamnet.cli import (EXIT_DIVERGENCE, EXIT_STAGE_ORDER, EXIT_USAGE, EXIT_VALIDATION, hbar_histogram, main,
                         read_histogram)
from spamnet.config import PRESETS, build_config, config_lines, parse_lines
from spamnet.errors import ConfigError
from spamnet.metrics import read_report_kv
from spamnet.reviews import load_reviews
from spamnet.synth import CampaignSpec, write_spec
from spamnet.trainer import init_embeddings, load_embeddings

TINY = CampaignSpec(n_normal_users=14, n_colluders=6, n_campaigns=2, n_products=40, n_categories=4,
                    targets_per_campaign=5)


@pytest.fixture
def synth_dir(tmp_path):
    write_spec(TINY, tmp_path / "spec.txt")
    assert main(["synth", "--spec", str(tmp_path / "spec.txt"), "--out", str(tmp_path / "data")]) == 0
    return tmp_path


def stage(tmp_path, name, *extra, labels=True):
    args = [name, "--dataset", str(tmp_path / "data" / "reviews.csv"), "--workdir", str(tmp_path / "work"),
            "--workers", "1"]
    if labels:
        args += ["--labels", str(tmp_path / "data" / "labels.csv")]
    return main(args + list(extra))


def test_synth_writes_files_and_refuses_overwrite(synth_dir, capsys):
    assert (synth_dir / "data" / "reviews.csv").exists() and (synth_dir / "data" / "labels.csv").exists()
    assert load_reviews(synth_dir / "data" / "reviews.csv").users
    args = ["synth", "--spec", str(synth_dir / "spec.txt"), "--out", str(synth_dir / "data")]
    assert main(args) == EXIT_USAGE
    assert main(args + ["--force"]) == 0


def test_synth_missing_spec(tmp_path):
    assert main(["synth", "--spec", str(tmp_path / "none.txt"), "--out", str(tmp_path)]) == EXIT_USAGE


def test_full_pipeline(synth_dir, capsys):
    work = synth_dir / "work"
    assert stage(synth_dir, "network") == 0
    hist = read_histogram(work / "hbar_hist.tsv")
    assert set(hist) <= {"C-C", "NC-C", "NC-NC"}
    n_pairs = sum(c for bins in hist.values() for _, _, c in bins)
    manifest = (work / "manifest.txt").read_text()
    assert "network.zeta_applied" in manifest and n_pairs > 0

    assert stage(synth_dir, "train", "--set", "train.epochs=50", "--set", "train.dim=8",
                 "--set", "train.binary=true") == 0
    assert len((work / "loss.log").read_text().splitlines()) == 51
    users, U = load_embeddings(work / "U.txt")
    _, U_bin = load_embeddings(work / "U.bin", binary=True, users=users)
    assert np.array_equal(U_bin, U.astype(np.float32))

    assert stage(synth_dir, "score", "--set", "score.n=5") == 0
    kv = read_report_kv(work / "report.kv")
    assert {"ap", "auc", "precision@10", "precision@50", "precision@100", "ndcg@10"} <= set(kv)
    assert stage(synth_dir, "eval", "--set", "eval.ks=3") == 0
    assert "precision@3" in read_report_kv(work / "report.kv")
    assert stage(synth_dir, "report") == 0
    out = capsys.readouterr().out
    assert "h_bar distribution" in out and "evaluation" in out


def test_unlabeled_run(synth_dir, capsys):
    assert stage(synth_dir, "network", labels=False) == 0
    assert list(read_histogram(synth_dir / "work" / "hbar_hist.tsv")) == ["all"]
    assert stage(synth_dir, "train", "--set", "train.epochs=2", "--set", "train.dim=4", labels=False) == 0
    assert stage(synth_dir, "score", "--set", "score.n=5", labels=False) == 0
    assert "evaluation skipped" in capsys.readouterr().out
    assert not (synth_dir / "work" / "report.kv").exists()


def test_beta_one_persists_initial_phi_and_reruns_are_identical(synth_dir):
    assert stage(synth_dir, "network") == 0
    opts = ["--set", "train.epochs=3", "--set", "train.dim=4", "--set", "train.beta=1", "--seed", "11"]
    assert stage(synth_dir, "train", *opts) == 0
    first = (synth_dir / "work" / "U.txt").read_bytes()
    _, Phi = load_embeddings(synth_dir / "work" / "Phi.txt")
    assert np.array_equal(Phi, init_embeddings(Phi.shape[0], 4, 11).Phi)
    assert stage(synth_dir, "train", *opts) == 0
    assert (synth_dir / "work" / "U.txt").read_bytes() == first


def test_stage_order_and_error_codes(synth_dir):
    assert stage(synth_dir, "train") == EXIT_STAGE_ORDER
    assert stage(synth_dir, "score") == EXIT_STAGE_ORDER
    assert stage(synth_dir, "network", "--set", "features.alpha=1,1,1,1") == EXIT_VALIDATION
    assert stage(synth_dir, "network", "--set", "nonsense=1") == EXIT_VALIDATION
    assert stage(synth_dir, "network", "--config", str(synth_dir / "missing.cfg")) == EXIT_USAGE
    assert stage(synth_dir, "network") == 0
    assert stage(synth_dir, "train", "--set", "train.learning_rate=1e9", "--set", "train.lr_schedule=constant",
                 "--set", "train.epochs=20", "--set", "train.dim=2", "--set", "train.beta=1") == EXIT_DIVERGENCE


def test_bad_review_file_is_validation_error(tmp_path):
    (tmp_path / "r.csv").write_text("h\na,p,c,9,1\n")
    assert main(["network", "--dataset", str(tmp_path / "r.csv"), "--workdir", str(tmp_path / "w")]) == \
        EXIT_VALIDATION


def test_histogram_classes_sum_to_pairs():
    from spamnet.features import PairFeatures

    rows = [("a", "b", PairFeatures(1, 1, 1, 1, 0.9, 1, 0.5)), ("a", "c", PairFeatures(1, 1, 1, 1, 0.1, 1, -0.2)),
            ("c", "d", PairFeatures(1, 1, 1, 1, 0.5, 1, 0.1))]
    edges, counts = hbar_histogram(rows, {"a": 1, "b": 1, "c": 0, "d": 0})
    assert {k: int(v.sum()) for k, v in counts.items()} == {"C-C": 1, "NC-C": 1, "NC-NC": 1}
    assert len(edges) == 51
    _, only = hbar_histogram(rows)
    assert list(only) == ["all"] and int(only["all"].sum()) == 3


def test_config_parsing(tmp_path):
    values = parse_lines(["# comment", "train.beta = 0.4", "", "eval.ks = 5, 7", "data.delimiter = tab"])
    cfg = build_config(values)
    assert cfg.train.beta == 0.4 and cfg.eval_ks == (5, 7) and cfg.schema.delimiter == "\t"
    again = build_config(parse_lines(config_lines(cfg)))
    assert again == cfg
    with pytest.raises(ConfigError):
        parse_lines(["no equals sign"])
    with pytest.raises(ConfigError):
        build_config({"train.beta": "abc"})
    with pytest.raises(ConfigError):
        build_config({"score.n": "0"})
    preset = build_config(PRESETS["yelphotel"])
    assert (preset.train.dim, preset.train.beta, preset.score_n) == (128, 0.4, 40)
    default = build_config({})
    assert (default.train.dim, default.walk.walks_per_node, default.walk.walk_length, default.walk.window,
            default.train.kappa, default.score_n) == (64, 30, 8, 5, 8, 25)


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "spamnet.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "spamnet" in out.stdout
    bad = subprocess.run([sys.executable, "-m", "spamnet.cli", "train", "--bogus"], capture_output=True, text=True)
    assert bad.returncode == EXIT_USAGE
