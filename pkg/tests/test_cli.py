import json
import os

import pytest

from aiou.cli import main


@pytest.fixture
def fixture_paths(tmp_path):
    paths = {
        "maps": str(tmp_path / "attn.aiou"),
        "masks": str(tmp_path / "masks.aiou"),
        "labels": str(tmp_path / "labels.csv"),
        "predictions": str(tmp_path / "predictions.csv"),
    }
    code = main([
        "synth",
        "--maps", paths["maps"],
        "--masks", paths["masks"],
        "--labels", paths["labels"],
        "--predictions", paths["predictions"],
        "--images", "40",
        "--size", "8",
        "--leakage", "0.25",
        "--seed", "11",
    ])
    assert code == 0
    return paths


def run_score_mask(paths, out, extra=()):
    return main([
        "score-mask",
        "--maps", paths["maps"],
        "--masks", paths["masks"],
        "--target", "target",
        "--reference", "bird",
        "--labels", paths["labels"],
        "--protected", "protected",
        "--out", out,
        *extra,
    ])


class TestSynthCommand:
    def test_seed_reproducibility(self, tmp_path):
        outputs = []
        for run in range(2):
            maps = str(tmp_path / f"a{run}.aiou")
            masks = str(tmp_path / f"m{run}.aiou")
            labels = str(tmp_path / f"l{run}.csv")
            assert main([
                "synth", "--maps", maps, "--masks", masks, "--labels", labels,
                "--images", "12", "--seed", "3",
            ]) == 0
            with open(maps, "rb") as fh:
                outputs.append(fh.read())
        assert outputs[0] == outputs[1]

    def test_different_seed_differs(self, tmp_path):
        outputs = []
        for seed in ("1", "2"):
            maps = str(tmp_path / f"a{seed}.aiou")
            assert main([
                "synth", "--maps", maps, "--masks", str(tmp_path / f"m{seed}.aiou"),
                "--labels", str(tmp_path / f"l{seed}.csv"),
                "--images", "5", "--seed", seed,
            ]) == 0
            with open(maps, "rb") as fh:
                outputs.append(fh.read())
        assert outputs[0] != outputs[1]


class TestScoreMask:
    def test_low_leakage_high_score(self, fixture_paths, tmp_path):
        out = str(tmp_path / "report.json")
        assert run_score_mask(fixture_paths, out) == 0
        with open(out) as fh:
            doc = json.load(fh)
        assert doc["report"]["overall_mean"] >= 0.5
        assert doc["report"]["per_group"] is not None
        assert doc["config"]["target"] == "target"

    def test_missing_labels_file(self, fixture_paths, tmp_path, capsys):
        code = main([
            "score-mask", "--maps", fixture_paths["maps"], "--masks", fixture_paths["masks"],
            "--target", "target", "--reference", "bird",
            "--labels", str(tmp_path / "nope.csv"),
        ])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_byte_identical_reports(self, fixture_paths, tmp_path):
        outs = [str(tmp_path / f"r{k}.json") for k in range(2)]
        for out in outs:
            assert run_score_mask(fixture_paths, out) == 0
        assert open(outs[0], "rb").read() == open(outs[1], "rb").read()

    def test_worker_count_invisible(self, fixture_paths, tmp_path):
        outs = []
        for workers in ("1", "4"):
            out = str(tmp_path / f"w{workers}.json")
            os.environ["AIOU_THREADS"] = workers
            try:
                assert run_score_mask(fixture_paths, out) == 0
            finally:
                del os.environ["AIOU_THREADS"]
            outs.append(open(out, "rb").read())
        assert outs[0] == outs[1]

    def test_csv_format(self, fixture_paths, tmp_path):
        out = str(tmp_path / "report.csv")
        assert run_score_mask(fixture_paths, out, ("--format", "csv")) == 0
        lines = open(out).read().strip().splitlines()
        assert lines[0].startswith("score_kind,target,reference,group")
        assert len(lines) == 6  # overall + 4 groups


class TestScoreHeatmap:
    def test_self_comparison_row(self, fixture_paths, tmp_path):
        out = str(tmp_path / "heat.json")
        code = main([
            "score-heatmap", "--maps", fixture_paths["maps"],
            "--target", "protected,target", "--protected", "protected",
            "--labels", fixture_paths["labels"],
            "--predictions", fixture_paths["predictions"],
            "--out", out,
        ])
        assert code == 0
        doc = json.load(open(out))
        rows = {row["target"]: row for row in doc["rows"]}
        assert rows["protected"]["overall_mean"] == 1.0
        assert rows["protected"]["abs_mcc_gt"] == 1.0
        assert 0.0 <= rows["target"]["overall_mean"] <= 1.0
        assert rows["target"]["abs_mcc_pred"] is not None

    def test_unknown_attribute(self, fixture_paths, capsys):
        code = main([
            "score-heatmap", "--maps", fixture_paths["maps"],
            "--target", "nonexistent", "--protected", "protected",
        ])
        assert code == 2


class TestPlan:
    def test_sweep_equal_totals(self, fixture_paths, tmp_path):
        out = str(tmp_path / "plans.json")
        code = main([
            "plan", "--labels", fixture_paths["labels"],
            "--target", "target", "--protected", "protected",
            "--targets", "0.1,0.2,0.3", "--out", out,
        ])
        assert code == 0
        doc = json.load(open(out))
        totals = {plan["total"] for plan in doc["plans"]}
        assert len(totals) == 1

    def test_unattainable_target(self, fixture_paths, capsys):
        code = main([
            "plan", "--labels", fixture_paths["labels"],
            "--target", "target", "--protected", "protected",
            "--targets", "1.5",
        ])
        assert code == 2
        assert "Unattainable" in capsys.readouterr().err


class TestValidate:
    def test_valid_fixture(self, fixture_paths, tmp_path):
        out = str(tmp_path / "diag.json")
        code = main([
            "validate", "--maps", fixture_paths["maps"],
            "--labels", fixture_paths["labels"], "--out", out,
        ])
        assert code == 0
        doc = json.load(open(out))
        assert doc["maps"]["records"] == 80
        assert doc["maps"]["degenerate"] == 0
        assert doc["labels"]["container_only_ids"] == []

    def test_corrupted_magic(self, fixture_paths, tmp_path, capsys):
        bad = str(tmp_path / "bad.aiou")
        raw = bytearray(open(fixture_paths["maps"], "rb").read())
        raw[:4] = b"XXXX"
        open(bad, "wb").write(bytes(raw))
        assert main(["validate", "--maps", bad]) == 2
        assert "BadMagic" in capsys.readouterr().err

    def test_orphan_ids_listed(self, fixture_paths, tmp_path):
        labels = str(tmp_path / "short.csv")
        lines = open(fixture_paths["labels"]).read().splitlines()
        open(labels, "w").write("\n".join(lines[:-1]) + "\n")
        out = str(tmp_path / "diag.json")
        assert main(["validate", "--maps", fixture_paths["maps"],
                     "--labels", labels, "--out", out]) == 0
        doc = json.load(open(out))
        assert len(doc["labels"]["container_only_ids"]) == 1


class TestMerge:
    def test_mean_std_across_models(self, fixture_paths, tmp_path):
        reports = []
        for seed in ("21", "22", "23"):
            maps = str(tmp_path / f"a{seed}.aiou")
            masks = str(tmp_path / f"m{seed}.aiou")
            labels = str(tmp_path / f"l{seed}.csv")
            assert main(["synth", "--maps", maps, "--masks", masks, "--labels", labels,
                         "--images", "20", "--leakage", "0.3", "--seed", seed]) == 0
            out = str(tmp_path / f"r{seed}.json")
            assert main(["score-mask", "--maps", maps, "--masks", masks,
                         "--target", "target", "--reference", "bird",
                         "--out", out]) == 0
            reports.append(out)
        merged = str(tmp_path / "merged.json")
        assert main(["merge", *reports, "--out", merged]) == 0
        doc = json.load(open(merged))
        assert doc["overall"]["n_models"] == 3
        means = [json.load(open(r))["report"]["overall_mean"] for r in reports]
        assert doc["overall"]["mean"] == pytest.approx(sum(means) / 3)
