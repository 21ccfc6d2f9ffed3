"""
Tests for Dynoframe Services
"""

import csv
import io
import json
import os
import tempfile
import unittest
from unittest.mock import MagicMock

from dynoframe import Dynoframe
from dynoframe.config import data_path
from dynoframe.error import DynoframeError
from dynoframe.services import (
    AugmentService,
    DecoderService,
    HhiService,
    HoiService,
    ParserService,
    ProbeService,
    SituationService,
    WorldService,
)
from dynoframe.workspace import captured_workspace

LEXICON = [{"verb": "slice", "roles": ["AGENT", "ITEM"]}]


class ServiceTestCase(unittest.TestCase):
    """Temporary directory plus a workspace writing to a buffer."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.workspace = captured_workspace()

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def write_json(self, name, data):
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh)
        return path

    def write_jsonl(self, name, records):
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record) + "\n")
        return path

    def write_text(self, name, text):
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        return path


class TestRequiredFields(unittest.TestCase):
    """Every service rejects requests without their required fields."""

    def setUp(self):
        self.mock_workspace = MagicMock()

    def assert_required(self, call, request, field):
        with self.assertRaises(ValueError) as context:
            call(request)
        self.assertIn(f"{field} is required", str(context.exception))
        self.mock_workspace.read_json.assert_not_called()
        self.mock_workspace.read_jsonl.assert_not_called()

    def test_parser(self):
        service = ParserService(self.mock_workspace)
        self.assert_required(service.parse, {}, "input")
        self.assert_required(service.parse, {"input": "a.txt"}, "lexicon")
        self.assert_required(service.serialize, {"input": "a.jsonl"}, "lexicon")

    def test_situations(self):
        service = SituationService(self.mock_workspace)
        request = {"predictions": "p.jsonl", "ground_truth": "g.jsonl"}
        self.assert_required(service.evaluate_sir, request, "lexicon")
        self.assert_required(service.evaluate_gsr, {"predictions": "p.jsonl"}, "ground_truth")

    def test_hoi(self):
        service = HoiService(self.mock_workspace)
        request = {"predictions": "p.jsonl", "ground_truth": "g.jsonl"}
        self.assert_required(service.evaluate, request, "catalog")

    def test_hhi(self):
        service = HhiService(self.mock_workspace)
        request = {"predictions": "p.jsonl", "ground_truth": "g.jsonl"}
        self.assert_required(service.evaluate, request, "scorer")

    def test_probes(self):
        service = ProbeService(self.mock_workspace)
        self.assert_required(service.fit, {"split": "70/10/20"}, "input")
        self.assert_required(service.correlate, {"x": "probe_acc"}, "csv")

    def test_decoders(self):
        service = DecoderService(self.mock_workspace)
        self.assert_required(service.train, {"world": "w.json"}, "output")
        self.assert_required(service.generate, {"model": "m.bin"}, "embeddings")

    def test_worlds(self):
        service = WorldService(self.mock_workspace)
        self.assert_required(service.generate, {"spec": "w.json"}, "output_prefix")

    def test_empty_value_counts_as_missing(self):
        service = HoiService(self.mock_workspace)
        request = {"predictions": "p.jsonl", "ground_truth": "", "catalog": "c.json"}
        self.assert_required(service.evaluate, request, "ground_truth")


class TestParserService(ServiceTestCase):
    """Test cases for ParserService."""

    def setUp(self):
        super().setUp()
        self.service = ParserService(self.workspace)
        self.lexicon = self.write_json("lexicon.json", LEXICON)

    def test_parse_records_errors_per_item(self):
        source = self.write_text(
            "gen.txt",
            "VERB slicing AGENT man ITEM bread\n"
            "\n"
            "VERB flying\n"
            + json.dumps({"id": "a", "hypotheses": ["VERB slicing AGENT man", "bogus"]})
            + "\n",
        )

        result = self.service.parse({"input": source, "lexicon": self.lexicon})

        records = result["records"]
        self.assertEqual([r["id"] for r in records], ["1", "3", "a"])
        self.assertEqual(records[0]["hypotheses"][0]["verb"], "slice")
        self.assertEqual(records[0]["hypotheses"][0]["roles"]["ITEM"], "bread")
        self.assertEqual(records[1]["hypotheses"], [])
        self.assertEqual(records[1]["errors"][0]["code"], "UNKNOWN_GERUND")
        self.assertEqual(len(records[2]["hypotheses"]), 1)
        self.assertEqual(records[2]["errors"][0]["code"], "NO_VERB_MARKER")
        summary = result["summary"]
        self.assertEqual(summary["items"], 3)
        self.assertEqual(summary["texts"], 4)
        self.assertEqual(summary["parsed"], 2)
        self.assertEqual(summary["failed"], 2)
        self.assertEqual(summary["mode"], "strict")

    def test_parse_emits_jsonl_without_output(self):
        source = self.write_text("gen.txt", "VERB slicing AGENT man\n")

        self.service.parse({"input": source, "lexicon": self.lexicon})

        lines = self.workspace.stdout.getvalue().splitlines()
        self.assertEqual(len(lines), 1)
        self.assertEqual(json.loads(lines[0])["schema"], "dynoframe.sir-pred/1")

    def test_parse_writes_output_file(self):
        source = self.write_text("gen.txt", "VERB slicing AGENT man\n")
        output = self.path("parsed.jsonl")

        self.service.parse({"input": source, "lexicon": self.lexicon, "output": output})

        self.assertEqual(self.workspace.stdout.getvalue(), "")
        with open(output, encoding="utf-8") as fh:
            self.assertEqual(len(fh.readlines()), 1)

    def test_parse_hhi(self):
        source = self.write_text("hhi.txt", "[P1] hugs [P2]\npeople dancing\n")

        result = self.service.parse({"input": source, "kind": "hhi"})

        self.assertEqual(result["summary"], {"items": 2, "slotted": 1})

    def test_parse_rejects_unknown_mode(self):
        source = self.write_text("gen.txt", "VERB slicing\n")
        with self.assertRaises(ValueError):
            self.service.parse({"input": source, "lexicon": self.lexicon, "mode": "lenient"})

    def test_serialize(self):
        source = self.write_jsonl(
            "frames.jsonl", [{"verb": "slice", "roles": {"ITEM": "bread", "AGENT": "man"}}]
        )

        texts = self.service.serialize({"input": source, "lexicon": self.lexicon})

        self.assertEqual(texts, ["VERB slicing AGENT man ITEM bread"])
        self.assertEqual(self.workspace.stdout.getvalue(), "VERB slicing AGENT man ITEM bread\n")

    def test_load_lexicon_tracks_input(self):
        self.service.load_lexicon(self.lexicon)

        self.assertIn(os.path.abspath(self.lexicon), self.workspace.inputs)


class TestWorldAndSituationServices(ServiceTestCase):
    """Generated world files feed the situation scorers."""

    def setUp(self):
        super().setUp()
        self.worlds = WorldService(self.workspace)
        self.situations = SituationService(self.workspace)
        self.prefix = self.path("demo")
        self.result = self.worlds.generate(
            {"spec": data_path("demo_world.json"), "output_prefix": self.prefix, "n": 20}
        )

    def test_generate_writes_every_kind(self):
        files = self.result["files"]
        self.assertEqual(self.result["items"], 20)
        self.assertEqual(self.result["seed"], 0)
        for kind in ("frames", "embeddings", "sir_gt", "gsr_gt", "gsr_pred", "hoi_gt", "hoi_det"):
            self.assertEqual(files[kind], f"{self.prefix}_{kind}.jsonl")
            with open(files[kind], encoding="utf-8") as fh:
                self.assertEqual(len(fh.readlines()), 20)
        for kind in ("world", "lexicon", "catalog"):
            self.assertTrue(os.path.exists(files[kind]))

    def test_generate_is_deterministic(self):
        other = self.path("again")
        self.worlds.generate(
            {"spec": data_path("demo_world.json"), "output_prefix": other, "n": 20}
        )
        for kind in ("frames", "embeddings", "hoi_det"):
            with open(f"{self.prefix}_{kind}.jsonl", "rb") as first:
                with open(f"{other}_{kind}.jsonl", "rb") as second:
                    self.assertEqual(first.read(), second.read())

    def test_generate_with_start_continues_the_stream(self):
        tail = self.path("tail")
        self.worlds.generate(
            {"spec": data_path("demo_world.json"), "output_prefix": tail, "n": 5, "start": 15}
        )
        with open(f"{self.prefix}_frames.jsonl", encoding="utf-8") as fh:
            full = fh.readlines()
        with open(f"{tail}_frames.jsonl", encoding="utf-8") as fh:
            self.assertEqual(fh.readlines(), full[15:])

    def test_generate_rejects_bad_counts(self):
        with self.assertRaises(ValueError):
            self.worlds.generate(
                {"spec": data_path("demo_world.json"), "output_prefix": self.prefix, "n": 0}
            )

    def test_gsr_round_trip(self):
        files = self.result["files"]

        report = self.situations.evaluate_gsr(
            {
                "predictions": files["gsr_pred"],
                "ground_truth": files["gsr_gt"],
                "lexicon": files["lexicon"],
            }
        )

        self.assertEqual(report.task, "gsr")
        self.assertEqual(report.scenario, "top1")
        for name in ("verb", "value", "value_all", "grnd_value", "grnd_value_all"):
            self.assertGreaterEqual(report.metrics[name], 0.0)
            self.assertLessEqual(report.metrics[name], 1.0)
        self.assertLessEqual(report.metrics["grnd_value"], report.metrics["value"])

    def test_sir_perfect_predictions(self):
        files = self.result["files"]
        with open(files["frames"], encoding="utf-8") as fh:
            frames = [json.loads(line) for line in fh]
        predictions = self.write_jsonl(
            "pred.jsonl",
            [
                {"id": f["id"], "hypotheses": [{"verb": f["verb"], "roles": f["roles"]}]}
                for f in frames
            ],
        )

        report = self.situations.evaluate_sir(
            {
                "predictions": predictions,
                "ground_truth": files["sir_gt"],
                "lexicon": files["lexicon"],
            }
        )

        self.assertEqual(report.metrics, {"verb": 1.0, "value": 1.0, "value_all": 1.0})

    def test_sir_missing_prediction(self):
        files = self.result["files"]
        empty = self.write_text("empty.jsonl", "")
        request = {
            "predictions": empty,
            "ground_truth": files["sir_gt"],
            "lexicon": files["lexicon"],
        }

        with self.assertRaises(DynoframeError) as context:
            self.situations.evaluate_sir(request)
        self.assertEqual(context.exception.code, "ID_MISMATCH")

        request["allow_missing"] = True
        report = self.situations.evaluate_sir(request)
        self.assertEqual(report.metrics["verb"], 0.0)

    def test_inputs_are_tracked(self):
        files = self.result["files"]
        self.situations.evaluate_gsr(
            {
                "predictions": files["gsr_pred"],
                "ground_truth": files["gsr_gt"],
                "lexicon": files["lexicon"],
            }
        )

        tracked = set(self.workspace.inputs.values())
        self.assertIn(files["gsr_pred"], tracked)
        self.assertIn(files["gsr_gt"], tracked)
        self.assertIn(data_path("demo_world.json"), tracked)


class TestHoiService(ServiceTestCase):
    """Test cases for HoiService."""

    def setUp(self):
        super().setUp()
        self.service = HoiService(self.workspace)
        self.catalog = self.write_json(
            "catalog.json",
            [
                {"object": "bread", "action": "slice", "train_count": 20},
                {"object": "horse", "action": "ride", "train_count": 3},
            ],
        )
        pair = {
            "human": [0, 0, 10, 10],
            "object": [20, 20, 40, 40],
            "object_class": "bread",
            "action": "slice",
        }
        self.gt = self.write_jsonl("gt.jsonl", [{"id": "a", "pairs": [pair]}])
        self.pair = pair

    def test_perfect_detection(self):
        dets = self.write_jsonl(
            "det.jsonl",
            [
                {"id": "a", "detections": [dict(self.pair, score=0.9)]},
                {"id": "b", "detections": [dict(self.pair, score=0.5)]},
            ],
        )

        report = self.service.evaluate(
            {"predictions": dets, "ground_truth": self.gt, "catalog": self.catalog}
        )

        self.assertEqual(report.task, "hoi")
        self.assertAlmostEqual(report.metrics["map_full"], 1.0)
        self.assertAlmostEqual(report.metrics["map_nonrare"], 1.0)
        self.assertIsNone(report.metrics["map_rare"])

    def test_zero_gt_as_zero(self):
        dets = self.write_jsonl(
            "det.jsonl", [{"id": "a", "detections": [dict(self.pair, score=1)]}]
        )

        report = self.service.evaluate(
            {
                "predictions": dets,
                "ground_truth": self.gt,
                "catalog": self.catalog,
                "zero_gt_as_zero": True,
            }
        )

        self.assertAlmostEqual(report.metrics["map_full"], 0.5)
        self.assertAlmostEqual(report.metrics["map_rare"], 0.0)

    def test_detection_without_score(self):
        dets = self.write_jsonl("det.jsonl", [{"id": "a", "detections": [self.pair]}])

        with self.assertRaises(DynoframeError) as context:
            self.service.evaluate(
                {"predictions": dets, "ground_truth": self.gt, "catalog": self.catalog}
            )
        self.assertEqual(context.exception.code, "SCHEMA_ERROR")


class TestHhiService(ServiceTestCase):
    """Test cases for HhiService."""

    def setUp(self):
        super().setUp()
        self.service = HhiService(self.workspace)
        self.gt = self.write_jsonl(
            "gt.jsonl",
            [{"id": "1", "text": "[P1] hugs [P2]"}, {"id": "2", "text": "[P1] waves at [P2]"}],
        )

    def test_exact_scorer(self):
        preds = self.write_jsonl(
            "pred.jsonl",
            [{"id": "1", "text": "[P1] hugs [P2]"}, {"id": "2", "text": "[P1] waves"}],
        )

        report = self.service.evaluate(
            {"predictions": preds, "ground_truth": self.gt, "scorer": "exact"}
        )

        self.assertEqual(report.scenario, "exact")
        self.assertAlmostEqual(report.metrics["exact"], 0.5)
        self.assertEqual(report.details["scored"], 2)

    def test_duplicate_id(self):
        preds = self.write_jsonl(
            "pred.jsonl", [{"id": "1", "text": "[P1] hugs"}, {"id": "1", "text": "[P1] runs"}]
        )

        with self.assertRaises(DynoframeError) as context:
            self.service.evaluate({"predictions": preds, "ground_truth": self.gt, "scorer": "f1"})
        self.assertEqual(context.exception.code, "DUPLICATE_ID")

    def test_allow_missing_scores_empty_text(self):
        preds = self.write_jsonl("pred.jsonl", [{"id": "1", "text": "[P1] hugs [P2]"}])

        report = self.service.evaluate(
            {
                "predictions": preds,
                "ground_truth": self.gt,
                "scorer": "exact",
                "allow_missing": True,
            }
        )

        self.assertAlmostEqual(report.metrics["exact"], 0.5)


class TestWorkerCountIndependence(ServiceTestCase):
    """Reports do not depend on the number of worker processes."""

    def setUp(self):
        super().setUp()
        prefix = self.path("demo")
        self.files = WorldService(self.workspace).generate(
            {"spec": data_path("demo_world.json"), "output_prefix": prefix, "n": 60}
        )["files"]

        with open(self.files["gsr_pred"], encoding="utf-8") as fh:
            grounded = [json.loads(line) for line in fh]
        self.sir_pred = self.write_jsonl(
            "sir_pred.jsonl",
            [
                {
                    "id": record["id"],
                    "hypotheses": [
                        {"verb": h["verb"], "roles": h["roles"]} for h in record["hypotheses"]
                    ],
                }
                for record in grounded
            ],
        )
        texts = ["[P1] hugs [P2]", "[P1] waves at [P2]", "[P1] shakes hands with [P2]"]
        self.hhi_gt = self.write_jsonl(
            "hhi_gt.jsonl", [{"id": str(i), "text": texts[i % 3]} for i in range(30)]
        )
        self.hhi_pred = self.write_jsonl(
            "hhi_pred.jsonl", [{"id": str(i), "text": texts[i % 2]} for i in range(30)]
        )

    def evaluate_all(self, jobs):
        files = self.files
        with Dynoframe(jobs=jobs, stdout=io.StringIO()) as dyno:
            reports = {
                "sir": dyno.situations.evaluate_sir(
                    {
                        "predictions": self.sir_pred,
                        "ground_truth": files["sir_gt"],
                        "lexicon": files["lexicon"],
                        "scenario": "top5",
                    }
                ),
                "gsr": dyno.situations.evaluate_gsr(
                    {
                        "predictions": files["gsr_pred"],
                        "ground_truth": files["gsr_gt"],
                        "lexicon": files["lexicon"],
                    }
                ),
                "hoi": dyno.hoi.evaluate(
                    {
                        "predictions": files["hoi_det"],
                        "ground_truth": files["hoi_gt"],
                        "catalog": files["catalog"],
                    }
                ),
                "hhi": dyno.hhi.evaluate(
                    {"predictions": self.hhi_pred, "ground_truth": self.hhi_gt, "scorer": "f1"}
                ),
            }
        return {task: report.to_canonical_json() for task, report in reports.items()}

    def test_reports_match_across_worker_counts(self):
        inline = self.evaluate_all(1)
        pooled = self.evaluate_all(4)

        self.assertEqual(sorted(inline), ["gsr", "hhi", "hoi", "sir"])
        for task in inline:
            with self.subTest(task=task):
                self.assertEqual(pooled[task], inline[task])


class TestProbeService(ServiceTestCase):
    """Test cases for ProbeService."""

    def setUp(self):
        super().setUp()
        self.service = ProbeService(self.workspace)
        records = []
        for i in range(40):
            label = "run" if i % 2 else "sit"
            sign = 1.0 if i % 2 else -1.0
            records.append(
                {"id": f"item{i}", "label": label, "vector": [5.0 * sign, 0.1 * (i % 7), 1.0]}
            )
        self.embeddings = self.write_jsonl("clip.jsonl", records)

    def test_fit_separable(self):
        report = self.service.fit(
            {"input": self.embeddings, "epochs": 200, "learning_rate": 0.5, "seed": 3}
        )

        self.assertEqual(report.task, "probe")
        self.assertEqual(report.scenario, "clip")
        self.assertEqual(report.metrics["train_accuracy"], 1.0)
        self.assertEqual(report.metrics["test_accuracy"], 1.0)
        self.assertEqual(report.details["classes"], ["run", "sit"])
        self.assertEqual(report.details["split_sizes"], {"train": 28, "val": 4, "test": 8})

    def test_fit_without_val_split(self):
        report = self.service.fit({"input": self.embeddings, "split": "80/0/20", "epochs": 5})

        self.assertIsNone(report.metrics["val_accuracy"])

    def test_fit_appends_scatter_row(self):
        scatter = self.path("scatter.csv")
        request = {
            "input": self.embeddings,
            "epochs": 50,
            "learning_rate": 0.5,
            "scatter": scatter,
            "task_metric": 0.42,
        }

        self.service.fit(request)
        self.service.fit(dict(request, representation="other", task_metric=None))

        with open(scatter, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        self.assertEqual(rows[0], ["representation", "probe_acc", "task_metric"])
        self.assertEqual(rows[1][0], "clip")
        self.assertEqual(float(rows[1][2]), 0.42)
        self.assertEqual(rows[2][0], "other")
        self.assertEqual(rows[2][2], "")

    def test_correlate(self):
        scatter = self.write_text(
            "scatter.csv",
            "representation,probe_acc,task_metric\n"
            "a,0.1,0.2\n"
            "b,0.2,0.4\n"
            "c,0.3,0.6\n"
            "d,0.4,\n",
        )

        report = self.service.correlate({"csv": scatter})

        self.assertAlmostEqual(report.metrics["pearson"], 1.0)
        self.assertAlmostEqual(report.metrics["spearman"], 1.0)
        self.assertEqual(report.details["points"], 3)

    def test_correlate_too_few_points(self):
        scatter = self.write_text("scatter.csv", "representation,probe_acc,task_metric\na,1,2\n")

        with self.assertRaises(DynoframeError) as context:
            self.service.correlate({"csv": scatter})
        self.assertEqual(context.exception.code, "TOO_FEW_POINTS")


class TestDecoderService(ServiceTestCase):
    """Test cases for DecoderService on a tiny training budget."""

    def setUp(self):
        super().setUp()
        self.service = DecoderService(self.workspace)
        self.world = data_path("demo_world.json")
        self.model = self.path("model.bin")

    def train(self, **extra):
        request = {
            "world": self.world,
            "output": self.model,
            "n": 8,
            "epochs": 1,
            "hidden_size": 8,
            "batch_size": 4,
        }
        request.update(extra)
        return self.service.train(request)

    def test_train_writes_model(self):
        report = self.train()

        self.assertEqual(report.task, "demo-train")
        self.assertTrue(os.path.exists(self.model))
        self.assertEqual(report.details["train_items"], 8)
        self.assertEqual(report.details["phases"], ["train"])
        self.assertEqual(report.details["trainable_parameters"], report.details["parameters"])
        self.assertGreater(report.metrics["first_loss"], 0.0)

    def test_train_is_deterministic(self):
        first = self.train().to_canonical_json()
        second = self.train().to_canonical_json()

        self.assertEqual(first, second)

    def test_adapter_finetune_from_base(self):
        self.train()
        tuned = self.path("tuned.bin")

        report = self.service.train(
            {
                "world": self.world,
                "output": tuned,
                "base": self.model,
                "n": 8,
                "epochs": 1,
                "lora_rank": 2,
                "batch_size": 4,
            }
        )

        self.assertEqual(report.details["phases"], ["finetune"])
        self.assertEqual(report.details["lora_rank"], 2)
        self.assertLess(report.details["trainable_parameters"], report.details["parameters"])

    def test_generate(self):
        self.train()
        prefix = self.path("eval")
        WorldService(self.workspace).generate(
            {"spec": self.world, "output_prefix": prefix, "n": 3, "start": 100}
        )
        output = self.path("gen.jsonl")

        records = self.service.generate(
            {
                "model": self.model,
                "embeddings": f"{prefix}_embeddings.jsonl",
                "top_k": 2,
                "max_len": 8,
                "output": output,
            }
        )

        self.assertEqual([r["id"] for r in records], ["item000100", "item000101", "item000102"])
        for record in records:
            self.assertIsInstance(record["text"], str)
            self.assertLessEqual(len(record["text"].split()), 8)
            self.assertEqual(len(record["hypotheses"]), 2)
            self.assertIn("forced", record)
        with open(output, encoding="utf-8") as fh:
            self.assertEqual(len(fh.readlines()), 3)

    def test_generate_shape_mismatch(self):
        self.train()
        embeddings = self.write_jsonl("emb.jsonl", [{"id": "x", "vector": [0.0, 1.0]}])

        with self.assertRaises(DynoframeError) as context:
            self.service.generate({"model": self.model, "embeddings": embeddings})
        self.assertEqual(context.exception.code, "SHAPE_MISMATCH")


class TestAugmentService(unittest.TestCase):
    """Test cases for AugmentService."""

    def setUp(self):
        self.service = AugmentService(captured_workspace())
        self.settings = {"kb": 3, "kv": 2, "n": 8, "heads": 2, "trials": 2, "large_k": 20}

    def test_single_mode(self):
        report = self.service.check(dict(self.settings, mode="replace"))

        self.assertEqual(report.scenario, "replace")
        self.assertTrue(report.details["passed"])
        self.assertIn("permutation_equivariance", report.metrics)

    def test_both_modes_prefix_metrics(self):
        report = self.service.check(self.settings)

        self.assertEqual(report.scenario, "both")
        self.assertIn("augment.concat_shape", report.metrics)
        self.assertIn("replace.concat_shape", report.metrics)
        self.assertEqual(len(report.details["suites"]), 2)

    def test_unknown_mode(self):
        with self.assertRaises(ValueError):
            self.service.check({"mode": "sum"})


if __name__ == "__main__":
    unittest.main()
