"""
Tests for evaluate_model and the report files.
"""

import csv
import json

import pytest

from timbre_forge.exceptions import ConfigError
from timbre_forge.inference.transfer import InferenceConfig
from timbre_forge.metrics.embedders import save_embeddings
from timbre_forge.metrics.evaluate import (
    EvaluationConfig,
    EvaluationReport,
    PairMetrics,
    default_pairs,
    evaluate_model,
    fad_from_files,
    write_report,
)
from timbre_forge.tests.factories import IdentityBundle

QUICK = InferenceConfig(iterations=2, inversion="pinv")


class TestEvaluateModel:
    """Tests for evaluate_model with the identity model."""

    def test_identity_model_reconstructs_perfectly(self, make_manifest):
        """Both SSIM variants are exactly 1 when translation returns its input."""
        manifest = make_manifest()
        report = evaluate_model(IdentityBundle(), manifest, EvaluationConfig(fad=False))
        assert len(report.pairs) == 1
        metrics = report.pairs[0]
        assert metrics.pair == "flute+cello"
        assert metrics.ssim_recon == 1.0
        assert metrics.ssim_cyclic == 1.0
        assert metrics.n_excerpts == 1
        assert metrics.fad is None

    def test_fad_on_training_split(self, make_manifest):
        """Transferring two recordings gives a finite, non-negative FAD."""
        manifest = make_manifest()
        cfg = EvaluationConfig(split="train", reference_split="train", inference=QUICK)
        metrics = evaluate_model(IdentityBundle(), manifest, cfg).pairs[0]
        assert metrics.n_clips == 2
        assert metrics.fad >= 0.0

    def test_fad_skipped_with_one_clip(self, make_manifest):
        """A single test recording is not enough for a Gaussian fit."""
        metrics = evaluate_model(IdentityBundle(), make_manifest(), EvaluationConfig(inference=QUICK)).pairs[0]
        assert metrics.fad is None
        assert metrics.n_clips == 1

    def test_unknown_pair(self, make_manifest):
        """Pairs must name model domains."""
        with pytest.raises(ConfigError):
            evaluate_model(IdentityBundle(), make_manifest(), EvaluationConfig(pairs=["flute+tuba"]))


class TestDefaultPairs:
    """Tests for default_pairs."""

    @pytest.mark.parametrize("domains, expected", [
        (["a", "b"], ["a+b"]),
        (["a", "b", "c"], ["a+b"]),
        (["a", "b", "c", "d"], ["a+b", "c+d"]),
    ])
    def test_pairs(self, domains, expected):
        """The first two domains, plus the last two from four domains on."""
        assert default_pairs(domains) == expected


class TestReport:
    """Tests for write_report and fad_from_files."""

    def test_files(self, tmp_path):
        """The JSON holds one object per pair; the CSV has three rows per pair."""
        report = EvaluationReport([
            PairMetrics("a+b", 0.9, 0.8, 1.5, 10, 4),
            PairMetrics("c+d", 0.7, 0.6, None, 8, 1),
        ])
        json_path, csv_path = write_report(report, tmp_path / "eval")
        payload = json.loads(json_path.read_text(encoding="utf8"))
        assert payload["pairs"]["a+b"] == {"ssim_recon": 0.9, "ssim_cyclic": 0.8, "fad": 1.5, "n_excerpts": 10,
                                           "n_clips": 4}
        assert payload["pairs"]["c+d"]["fad"] is None
        with open(csv_path, newline="", encoding="utf8") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["pair", "metric", "value"]
        assert len(rows) - 1 == 2 * 2 + 2

    def test_fad_from_files(self, tmp_path):
        """Identity covariance fits a (3, 4) mean shift apart give 25."""
        real = save_embeddings([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], tmp_path / "real.csv")
        fake = save_embeddings([[4.0, 4.0], [2.0, 4.0], [3.0, 5.0], [3.0, 3.0]], tmp_path / "fake.csv")
        assert fad_from_files(real, fake) == pytest.approx(25.0, abs=1e-9)
