import json
import math

import numpy as np
import pytest

import kplane as K
from kplane.cli import main


def run(args):
    return main(args)


class TestTransformCommand:
    def test_extremizer_preset(self, tmp_path):
        out = tmp_path / "tf.csv"
        code = run(["transform", "--k", "2", "--d", "3", "--preset", "extremizer",
                    "--grid-n", "1024", "--rmax", "10", "--out", str(out)])
        assert code == 0
        r, v, meta = K.read_profile_csv(out)
        assert np.abs(v - (1 + r ** 2) ** (-0.5)).max() < 1e-6
        assert meta["version"]

    def test_invalid_kd_exits_2(self, capsys):
        assert run(["transform", "--k", "3", "--d", "3", "--preset", "extremizer"]) == 2

    def test_empty_csv_exits_2(self, tmp_path):
        src = tmp_path / "empty.csv"
        src.write_text("r,value\n")
        assert run(["transform", "--k", "1", "--d", "3", "--input", str(src)]) == 2

    def test_missing_required_flag_exits_2(self):
        assert run(["constant", "--k", "1", "--d", "2"]) == 2


class TestConstantCommand:
    def test_b24(self, capsys):
        assert run(["constant", "--k", "2", "--d", "4", "--which", "B",
                    "--grid-n", "2048"]) == 0
        payload = json.loads(capsys.readouterr().out)
        target = (1 / 3) ** 0.2 / (2 / 3) ** 0.6
        assert abs(payload["value"] - target) / target < 1e-6
        assert payload["est_error"] < 1e-6

    def test_a12(self, capsys):
        assert run(["constant", "--k", "1", "--d", "2", "--which", "A"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert abs(payload["value"] - (math.pi / 2) ** (1 / 3)) < 1e-12


class TestSearchCommand:
    def test_indicator_converges(self, tmp_path, capsys):
        prefix = str(tmp_path / "s")
        code = run(["search", "--k", "1", "--d", "3", "--init", "indicator",
                    "--max-iter", "200", "--tol", "1e-8",
                    "--grid-n", "512", "--out-prefix", prefix])
        assert code == 0
        trace = json.loads((tmp_path / "s_trace.json").read_text())
        assert trace["converged"]
        b = K.constant_B(K.make_params(1, 3), resolution=1024)
        assert trace["phi"][-1] >= (1 - 2e-3) * b

    def test_deterministic_random_init(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            prefix = str(tmp_path / tag)
            run(["search", "--k", "1", "--d", "3", "--init", "random:42",
                 "--max-iter", "40", "--grid-n", "512", "--out-prefix", prefix])
            outs.append(((tmp_path / f"{tag}_trace.json").read_bytes(),
                         (tmp_path / f"{tag}_profile.csv").read_bytes()))
        assert outs[0] == outs[1]

    def test_max_iter_one_exits_3(self, tmp_path):
        code = run(["search", "--k", "1", "--d", "3", "--init", "indicator",
                    "--max-iter", "1", "--grid-n", "512",
                    "--out-prefix", str(tmp_path / "m")])
        assert code == 3


class TestDiagnoseCommand:
    @pytest.mark.parametrize("family,expected", [
        ("tight", "Tight"), ("vanishing", "Vanishing"), ("dichotomy:0.4", "Dichotomy")])
    def test_synthetic(self, tmp_path, family, expected):
        out = tmp_path / "diag.json"
        code = run(["diagnose", "--k", "1", "--d", "3", "--synthetic", family,
                    "--grid-n", "1024", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["verdict"] == expected
        if family.startswith("dichotomy"):
            assert abs(payload["alpha_estimate"] - 0.4) < 0.05

    def test_unnormalized_input_rejected(self, tmp_path):
        grid = K.make_halfline_grid(1024)
        params = K.make_params(1, 3)
        f = K.extremizer_profile(params, 1.0, grid)
        src = tmp_path / "prof.csv"
        with open(src, "w") as fh:
            K.write_profile_csv(fh, grid.nodes, f.values)
        out = tmp_path / "d.json"
        assert run(["diagnose", "--k", "1", "--d", "3", "--inputs", str(src),
                    "--grid-n", "1024", "--out", str(out)]) == 2
        assert run(["diagnose", "--k", "1", "--d", "3", "--inputs", str(src),
                    "--grid-n", "1024", "--auto-normalize", "--out", str(out)]) == 0


class TestVerifyCommand:
    def test_superadd_passes(self, tmp_path):
        out = tmp_path / "r.jsonl"
        code = run(["verify", "--suite", "superadd", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines and all(json.loads(ln)["passed"] for ln in lines)

    def test_unknown_suite_exits_2(self):
        assert run(["verify", "--suite", "bogus"]) == 2

    def test_reproducible_jsonl(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run(["verify", "--suite", "slide", "--seed", "5", "--trials", "20",
             "--out", str(a)])
        run(["verify", "--suite", "slide", "--seed", "5", "--trials", "20",
             "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_all_suite_within_budget(self, tmp_path):
        import time
        t0 = time.time()
        code = run(["verify", "--suite", "all", "--seed", "7", "--trials", "100",
                    "--out", str(tmp_path / "all.jsonl"),
                    "--summary", str(tmp_path / "all.csv")])
        elapsed = time.time() - t0
        assert code == 0
        assert elapsed < 600.0
        assert (tmp_path / "all.csv").read_text().startswith("name,passed")
