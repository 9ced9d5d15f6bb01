import json

import numpy as np
import pytest
from PIL import Image

from imaging.tests.factory import PhantomFactory

from ..output import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE
from .factory import (document, load_schema, required_keys, run, write_config,
                      write_png)


def assert_documented(doc):
    """Assert ``doc`` has the envelope and data keys the schema requires."""
    schema = load_schema()
    if doc["status"] == "error":
        assert set(doc) == set(schema["$defs"]["error"]["required"])
        return
    assert set(doc) == {"status", "command", "data"}
    assert required_keys(schema, doc["command"].replace("-", "_")) <= set(doc["data"])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small dataset, a config and a trained checkpoint shared by the flow tests."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert run("gen-data", "--n", 4, "--size", 64, "--seed", 3, "--out", data).exit_code == EXIT_OK
    config = write_config(root / "train.json")
    ckpt = root / "model.ckpt"
    result = run("train", "--config", config, "--data", data, "--out", ckpt)
    assert result.exit_code == EXIT_OK, result.stdout
    return {"root": root, "data": data, "config": config, "ckpt": ckpt, "train": document(result)}


class TestGroup:
    """Group-level behaviour: help and usage errors."""

    def test_help(self):
        """Test that help lists the commands and exits 0."""
        result = run("--help")
        assert result.exit_code == EXIT_OK
        assert "gradcheck" in result.stdout

    def test_unknown_flag_is_usage_error(self):
        """Test that an unknown flag exits 1."""
        assert run("eval", "--bogus").exit_code == EXIT_USAGE

    def test_unknown_command_is_usage_error(self):
        """Test that an unknown command exits 1."""
        assert run("frobnicate").exit_code == EXIT_USAGE

    def test_missing_required_option(self):
        """Test that a missing required option exits 1."""
        assert run("gen-data").exit_code == EXIT_USAGE

    def test_bad_format_choice(self, tmp_path):
        """Test that an unsupported ``--format`` exits 1."""
        assert run("gen-data", "--out", tmp_path, "--format", "yaml").exit_code == EXIT_USAGE


class TestGenData:
    """Synthetic dataset generation."""

    def test_writes_dataset(self, tmp_path):
        """Test that gen-data writes the requested images and reports them."""
        result = run("gen-data", "--n", 3, "--size", 64, "--seed", 1, "--out", tmp_path / "d")
        assert result.exit_code == EXIT_OK
        doc = document(result)
        assert_documented(doc)
        assert doc["data"]["images"] == 3
        assert len(list((tmp_path / "d" / "images").glob("*.png"))) == 3

    def test_idempotent(self, tmp_path):
        """Test that a second run with the same seed prints the same document."""
        first = run("gen-data", "--n", 2, "--seed", 9, "--out", tmp_path / "a")
        again = run("gen-data", "--n", 2, "--seed", 9, "--out", tmp_path / "a")
        assert first.exit_code == again.exit_code == EXIT_OK
        assert first.stdout == again.stdout

    def test_invalid_spec_is_data_error(self, tmp_path):
        """Test that an invalid generator spec exits 2 with an error document."""
        result = run("gen-data", "--n", 0, "--out", tmp_path / "d")
        assert result.exit_code == EXIT_DATA
        doc = document(result)
        assert_documented(doc)
        assert doc["exit_code"] == EXIT_DATA

    def test_text_format(self, tmp_path):
        """Test the plain-text rendering of the result."""
        result = run("gen-data", "--n", 1, "--out", tmp_path / "d", "--format", "text")
        assert result.exit_code == EXIT_OK
        assert "images: 1" in result.stdout.splitlines()


class TestSegment:
    """Lung segmentation from the command line."""

    def test_phantom(self, tmp_path):
        """Test that a phantom slice yields a non-empty {0, 255} mask PNG."""
        phantom = PhantomFactory(seed=2)
        src = write_png(tmp_path / "slice.png", phantom.image.pixels)
        result = run("segment", "--in", src, "--out", tmp_path / "masks")
        assert result.exit_code == EXIT_OK
        doc = document(result)
        assert_documented(doc)
        (row,) = doc["data"]["masks"]
        assert row["area"] > 0
        mask = np.array(Image.open(row["mask"]))
        assert set(np.unique(mask)) <= {0, 255}
        assert int((mask == 255).sum()) == row["area"]

    def test_all_bright_slice_gives_empty_mask(self, tmp_path):
        """Test that a slice without dark tissue yields an empty mask."""
        pixels = np.full((32, 32), 250, dtype=np.uint8)
        pixels[0, 0] = 249
        src = write_png(tmp_path / "bright.png", pixels)
        result = run("segment", "--in", src, "--out", tmp_path / "masks", "--min-area", 4)
        assert result.exit_code == EXIT_OK
        assert document(result)["data"]["masks"][0]["area"] == 0

    def test_directory_and_kmeans(self, tmp_path):
        """Test a directory of slices through the K-means route."""
        src = tmp_path / "slices"
        src.mkdir()
        for seed in (0, 1):
            write_png(src / f"p{seed}.png", PhantomFactory(seed=seed).image.pixels)
        result = run("segment", "--in", src, "--out", tmp_path / "masks", "--kmeans", 2)
        assert result.exit_code == EXIT_OK
        data = document(result)["data"]
        assert data["method"] == "kmeans"
        assert [row["image"] for row in data["masks"]] == ["p0.png", "p1.png"]

    def test_constant_slice_is_data_error(self, tmp_path):
        """Test that a constant slice exits 2 with the histogram error."""
        src = write_png(tmp_path / "flat.png", np.full((32, 32), 7, dtype=np.uint8))
        result = run("segment", "--in", src, "--out", tmp_path / "masks")
        assert result.exit_code == EXIT_DATA
        assert document(result)["error_type"] == "DegenerateHistogramError"

    def test_missing_file_is_data_error(self, tmp_path):
        """Test that a missing input file exits 2."""
        result = run("segment", "--in", tmp_path / "nope.png", "--out", tmp_path / "masks")
        assert result.exit_code == EXIT_DATA


class TestTrainEvalFlow:
    """Train, evaluate, fuse and detect on one small dataset."""

    def test_train_document(self, workspace):
        """Test the train document and the checkpoint it wrote."""
        doc = workspace["train"]
        assert_documented(doc)
        assert doc["data"]["epochs"] == 1
        assert len(doc["data"]["history"]) == 1
        assert workspace["ckpt"].exists()

    def test_eval(self, workspace):
        """Test that eval reports metrics for every image."""
        result = run("eval", "--ckpt", workspace["ckpt"], "--data", workspace["data"])
        assert result.exit_code == EXIT_OK
        doc = document(result)
        assert_documented(doc)
        assert doc["data"]["images"] == 4
        assert 0.0 <= doc["data"]["map50_95"] <= doc["data"]["map50"] + 1e-12

    def test_eval_is_idempotent(self, workspace):
        """Test that evaluating twice prints the same document."""
        args = ("eval", "--ckpt", workspace["ckpt"], "--data", workspace["data"])
        assert run(*args).stdout == run(*args).stdout

    def test_fuse_then_eval_agrees(self, workspace):
        """Test that a fused checkpoint evaluates like the original."""
        fused = workspace["root"] / "fused.ckpt"
        result = run("fuse", "--ckpt", workspace["ckpt"], "--out", fused, "--samples", 3)
        assert result.exit_code == EXIT_OK
        report = document(result)["data"]
        assert report["max_abs_diff"] < 1e-6
        assert report["params_after"] < report["params_before"]

        before = document(run("eval", "--ckpt", workspace["ckpt"], "--data", workspace["data"]))["data"]
        after = document(run("eval", "--ckpt", fused, "--data", workspace["data"]))["data"]
        for key in ("precision", "recall", "map50", "map50_95"):
            assert after[key] == pytest.approx(before[key], abs=1e-6)

    def test_detect_with_overlay(self, workspace, tmp_path):
        """Test detection on one image with an annotated overlay."""
        image = workspace["data"] / "images" / "00000.png"
        overlay = tmp_path / "annotated.png"
        result = run("detect", "--ckpt", workspace["ckpt"], "--image", image, "--out", overlay)
        assert result.exit_code == EXIT_OK
        doc = document(result)
        assert_documented(doc)
        assert doc["data"]["image"] == "00000"
        assert doc["data"]["overlay"] == str(overlay)
        with Image.open(overlay) as img:
            assert img.mode == "RGB" and img.size == (64, 64)

    def test_train_with_unknown_config_key(self, workspace, tmp_path):
        """Test that an unknown config key exits 2 with a config error."""
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"epochs": 1, "learning_rate": 0.1}), encoding="utf-8")
        result = run("train", "--config", bad, "--data", workspace["data"], "--out", tmp_path / "m.ckpt")
        assert result.exit_code == EXIT_DATA
        assert document(result)["error_type"] == "ConfigError"

    def test_missing_checkpoint(self, workspace, tmp_path):
        """Test that a missing checkpoint exits 2."""
        result = run("eval", "--ckpt", tmp_path / "missing.ckpt", "--data", workspace["data"])
        assert result.exit_code == EXIT_DATA

    def test_corrupt_checkpoint(self, workspace, tmp_path):
        """Test that a corrupt checkpoint exits 2."""
        broken = tmp_path / "broken.ckpt"
        broken.write_bytes(b"\x01\x02")
        result = run("eval", "--ckpt", broken, "--data", workspace["data"])
        assert result.exit_code == EXIT_DATA

    def test_cost(self, workspace):
        """Test the cost report of a config."""
        result = run("cost", "--config", workspace["config"])
        assert result.exit_code == EXIT_OK
        doc = document(result)
        assert_documented(doc)
        assert doc["data"]["params"] < doc["data"]["unfused_params"]
        assert doc["data"]["mults_adds"] > 0

    def test_cost_of_checkpoint(self, workspace):
        """Test the cost report of a checkpoint."""
        result = run("cost", "--ckpt", workspace["ckpt"])
        assert result.exit_code == EXIT_OK
        assert document(result)["data"]["input"] == [1, 1, 64, 64]

    @pytest.mark.slow
    def test_ablate(self, workspace, tmp_path):
        """Test the eight-way ablation sweep and its CSV."""
        csv = tmp_path / "runs.csv"
        result = run("ablate", "--config", workspace["config"], "--data", workspace["data"], "--csv", csv)
        assert result.exit_code == EXIT_OK
        doc = document(result)
        assert_documented(doc)
        assert len(doc["data"]["runs"]) == 8
        assert csv.exists()


class TestGradcheck:
    """Gradient checks from the command line."""

    def test_single_block(self):
        """Test that one block passes on a fresh init."""
        result = run("gradcheck", "--module", "conv", "--seeds", 1)
        assert result.exit_code == EXIT_OK
        doc = document(result)
        assert_documented(doc)
        (row,) = doc["data"]["blocks"]
        assert row["block"] == "conv"
        assert row["max_rel_error"] < 1e-4

    def test_tolerance_breach_is_numeric_failure(self):
        """Test that a zero tolerance exits 3 with a gradient error."""
        result = run("gradcheck", "--module", "conv", "--seeds", 1, "--tolerance", 0)
        assert result.exit_code == EXIT_NUMERIC
        doc = document(result)
        assert doc["error_type"] == "GradientToleranceError"
        assert doc["exit_code"] == EXIT_NUMERIC

    def test_unknown_block(self):
        """Test that an unknown block name exits 1."""
        assert run("gradcheck", "--module", "transformer").exit_code == EXIT_USAGE
