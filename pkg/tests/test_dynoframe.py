"""
Tests for Main Dynoframe Class
"""

import io
import os
import tempfile
import unittest
from unittest.mock import MagicMock

from dynoframe import __version__
from dynoframe.config import data_path
from dynoframe.dynoframe import Dynoframe
from dynoframe.error import DynoframeError

TINY_PIPELINE = {
    "world": data_path("demo_world.json"),
    "n_train": 8,
    "n_eval": 4,
    "epochs": 1,
    "hidden_size": 8,
    "batch_size": 4,
    "top_k": 2,
    "max_len": 8,
}


class TestDynoframe(unittest.TestCase):
    """Test cases for main Dynoframe class."""

    def setUp(self):
        """Set up test Dynoframe instance."""
        self.stdout = io.StringIO()
        self.dynoframe = Dynoframe(stdout=self.stdout)

    def test_initialization(self):
        """Test that all services share one workspace."""
        workspace = self.dynoframe.workspace
        self.assertEqual(workspace.jobs, 1)
        self.assertIs(workspace.stdout, self.stdout)

        for service in (
            self.dynoframe.parser,
            self.dynoframe.situations,
            self.dynoframe.hoi,
            self.dynoframe.hhi,
            self.dynoframe.probes,
            self.dynoframe.decoders,
            self.dynoframe.augment,
            self.dynoframe.worlds,
        ):
            self.assertIs(service.workspace, workspace)

    def test_invalid_jobs(self):
        with self.assertRaises(ValueError):
            Dynoframe(jobs=0)

    def test_repr(self):
        self.assertEqual(repr(Dynoframe(jobs=3)), "Dynoframe(jobs=3)")

    def test_context_manager(self):
        with Dynoframe() as dynoframe:
            self.assertIsInstance(dynoframe, Dynoframe)

    def test_context_manager_shuts_down_worker_pool(self):
        with Dynoframe(jobs=2, stdout=io.StringIO()) as dynoframe:
            dynoframe.workspace.map_items(abs, [-1, -2, -3])
            self.assertIsNotNone(dynoframe.workspace._pool)
        self.assertIsNone(dynoframe.workspace._pool)

    def test_manifest(self):
        """Test that the manifest records versions and tracked inputs."""
        lexicon = data_path("demo_lexicon.json")
        self.dynoframe.parser.load_lexicon(lexicon)

        manifest = self.dynoframe.manifest("parse", {"lexicon": lexicon}, seed=7)

        self.assertEqual(manifest["schema"], "dynoframe.manifest/1")
        self.assertEqual(manifest["version"], __version__)
        self.assertEqual(manifest["subcommand"], "parse")
        self.assertEqual(manifest["seed"], 7)
        self.assertEqual(set(manifest["versions"]), {"python", "numpy", "scipy"})
        hashes = list(manifest["inputs"].values())
        self.assertEqual(len(hashes), 1)
        self.assertEqual(len(hashes[0]), 64)
        self.assertIn("created", manifest)

    def test_run_pipeline_missing_world(self):
        with self.assertRaises(ValueError) as context:
            self.dynoframe.run_pipeline({})
        self.assertIn("world is required", str(context.exception))

    def test_run_pipeline_rejects_empty_eval(self):
        with self.assertRaises(ValueError):
            self.dynoframe.run_pipeline(dict(TINY_PIPELINE, n_eval=0))

    def test_run_pipeline_wraps_unexpected_errors(self):
        """Test that failures inside a step surface as PIPELINE_ERROR."""
        self.dynoframe.decoders.fit = MagicMock(side_effect=RuntimeError("out of memory"))

        with self.assertRaises(DynoframeError) as context:
            self.dynoframe.run_pipeline(TINY_PIPELINE)

        self.assertEqual(context.exception.code, "PIPELINE_ERROR")
        self.assertEqual(context.exception.status, 2)
        self.assertIn("out of memory", context.exception.message)
        self.dynoframe.decoders.fit.assert_called_once()

    def test_run_pipeline_passes_dynoframe_errors_through(self):
        self.dynoframe.decoders.fit = MagicMock(
            side_effect=DynoframeError("loss diverged", code="NAN_LOSS")
        )

        with self.assertRaises(DynoframeError) as context:
            self.dynoframe.run_pipeline(TINY_PIPELINE)

        self.assertEqual(context.exception.code, "NAN_LOSS")

    def test_run_pipeline(self):
        """Test the full workflow on a tiny budget."""
        with tempfile.TemporaryDirectory() as workdir:
            report = self.dynoframe.run_pipeline(dict(TINY_PIPELINE, workdir=workdir))

            for name in ("model.bin", "generations.jsonl", "sir_gt.jsonl", "lexicon.json"):
                self.assertTrue(os.path.exists(os.path.join(workdir, name)), name)

        self.assertEqual(report.task, "pipeline")
        self.assertEqual(report.scenario, "per_role")
        self.assertEqual(report.details["train_items"], 8)
        self.assertEqual(report.details["eval_items"], 4)
        for scenario in ("top1", "top5", "gtverb"):
            for metric in ("verb", "value", "value_all"):
                value = report.metrics[f"{scenario}_{metric}"]
                self.assertGreaterEqual(value, 0.0)
                self.assertLessEqual(value, 1.0)
        self.assertLessEqual(report.metrics["strict_parse_rate"], 1.0)
        self.assertLessEqual(
            report.metrics["strict_parse_rate"], report.metrics["tolerant_parse_rate"]
        )


if __name__ == "__main__":
    unittest.main()
