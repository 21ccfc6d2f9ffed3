"""
Integration Tests for Dynoframe

These tests train the demo decoder on the seeded demo world and take minutes.
Set DYNOFRAME_RUN_SLOW=1 to run them.
"""

import io
import os
import tempfile
import unittest

import pytest

from dynoframe import Dynoframe
from dynoframe.config import data_path
from dynoframe.workspace import canonical_json


@pytest.mark.integration
@pytest.mark.slow
class TestPipelineIntegration(unittest.TestCase):
    """End-to-end runs of the world, decoder, parser and scorer chain."""

    def setUp(self):
        """Set up integration test."""
        if os.getenv("DYNOFRAME_RUN_SLOW") != "1":
            self.skipTest("DYNOFRAME_RUN_SLOW environment variable not set")

        self.world = data_path("demo_world.json")

    def test_demo_pipeline_baseline(self):
        """Test the recorded baseline: parseable generations and accurate forced verbs."""
        dynoframe = Dynoframe(stdout=io.StringIO())

        report = dynoframe.run_pipeline({"world": self.world, "seed": 0})

        self.assertEqual(report.details["train_items"], 1000)
        self.assertEqual(report.details["eval_items"], 200)
        self.assertLess(report.details["final_loss"], report.details["first_loss"])
        self.assertGreaterEqual(report.metrics["strict_parse_rate"], 0.95)
        self.assertGreaterEqual(report.metrics["gtverb_value_all"], 0.80)
        self.assertGreaterEqual(report.metrics["top5_verb"], report.metrics["top1_verb"])

    def test_pipeline_is_deterministic(self):
        """Test that a seeded run reproduces its report byte for byte."""
        config = {"world": self.world, "seed": 3, "n_train": 200, "n_eval": 40, "epochs": 5}

        first = Dynoframe(stdout=io.StringIO()).run_pipeline(config)
        second = Dynoframe(stdout=io.StringIO()).run_pipeline(config)

        self.assertEqual(first.to_canonical_json(), second.to_canonical_json())

    def test_worker_pool_matches_inline_run(self):
        """Test that jobs > 1 writes the same world files as a single process."""
        with tempfile.TemporaryDirectory() as tmp:
            outputs = []
            for jobs in (1, 3):
                prefix = os.path.join(tmp, f"jobs{jobs}")
                result = Dynoframe(jobs=jobs, stdout=io.StringIO()).worlds.generate(
                    {"spec": self.world, "output_prefix": prefix, "n": 300}
                )
                contents = {}
                for kind, path in sorted(result["files"].items()):
                    with open(path, "rb") as fh:
                        contents[kind] = fh.read()
                outputs.append(contents)

            self.assertEqual(outputs[0], outputs[1])

    def test_generated_world_scores_like_its_closed_form(self):
        """Test GSR and HOI scoring over a large generated world."""
        with tempfile.TemporaryDirectory() as tmp:
            prefix = os.path.join(tmp, "demo")
            dynoframe = Dynoframe(jobs=2, stdout=io.StringIO())
            files = dynoframe.worlds.generate(
                {"spec": self.world, "output_prefix": prefix, "n": 2000}
            )["files"]

            gsr = dynoframe.situations.evaluate_gsr(
                {
                    "predictions": files["gsr_pred"],
                    "ground_truth": files["gsr_gt"],
                    "lexicon": files["lexicon"],
                }
            )
            hoi = dynoframe.hoi.evaluate(
                {
                    "predictions": files["hoi_det"],
                    "ground_truth": files["hoi_gt"],
                    "catalog": files["catalog"],
                }
            )
            manifest = dynoframe.manifest("integration", {}, seed=0)

        self.assertEqual(gsr.metrics["verb"], 1.0)
        self.assertLessEqual(gsr.metrics["grnd_value_all"], gsr.metrics["value_all"])
        self.assertGreater(hoi.metrics["map_full"], 0.5)
        self.assertEqual(len(manifest["inputs"]), 7)
        self.assertTrue(canonical_json(manifest).endswith("\n"))


if __name__ == "__main__":
    unittest.main()
