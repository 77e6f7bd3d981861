import os

import numpy as np
import pytest

from patchbatch import checkpoint, cli
from patchbatch.artifacts import read_config, read_csv, svg_line_plot, write_csv
from patchbatch.errors import DomainError
from patchbatch.flow import DescriptorField, FlowField, read_pbfl1, read_pgm, write_pbfl1, write_pgm
from patchbatch.matcher import match_costs
from patchbatch.pipeline import encode_field, normalize_image
from patchbatch.sampling import textured_image
from patchbatch.training import DivergenceError


def make_dataset(root, n_pairs=2, size=40, seed=0):
    """PGM frame pairs related by a known integer roll, plus their PBFL1 flows and a list file."""
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(n_pairs):
        img1 = textured_image(rng, size, size)
        dx, dy = (int(s) for s in rng.integers(-3, 4, size=2))
        img2 = np.roll(img1, (dy, dx), axis=(0, 1))
        write_pgm(root / f"a{i}.pgm", img1)
        write_pgm(root / f"b{i}.pgm", img2)
        write_pbfl1(root / f"f{i}.pbfl", FlowField(np.full((size, size), dx), np.full((size, size), dy)))
        lines.append(f"a{i}.pgm b{i}.pgm f{i}.pbfl")
    (root / "data.txt").write_text("\n".join(lines) + "\n")
    return root / "data.txt"


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    return make_dataset(tmp_path_factory.mktemp("data"))


@pytest.fixture(scope="module")
def trained(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("model") / "m.pbnet"
    code = cli.main(["train", "--data", str(dataset), "--epochs", "10", "--samples", "512", "--batch", "128",
                     "--variant", "centrifuge_sd", "--margin", "3", "--seed", "1", "--out", str(out)])
    assert code == 0
    return out


class TestFiles:
    def test_pbfl1_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        flow = FlowField(rng.normal(size=(3, 5)).astype(np.float32), rng.normal(size=(3, 5)).astype(np.float32), rng.random((3, 5)) < 0.5)
        write_pbfl1(tmp_path / "f.pbfl", flow)
        data = (tmp_path / "f.pbfl").read_bytes()
        assert data.startswith(b"PBFL1 5 3\n") and len(data) == 10 + 15 * 9
        back = read_pbfl1(tmp_path / "f.pbfl")
        np.testing.assert_array_equal(back.u, flow.u)
        np.testing.assert_array_equal(back.valid, flow.valid)

    def test_pbfl1_truncated(self, tmp_path):
        (tmp_path / "bad.pbfl").write_bytes(b"PBFL1 4 4\n" + b"\0" * 20)
        with pytest.raises(DomainError):
            read_pbfl1(tmp_path / "bad.pbfl")

    def test_pgm_round_trip(self, tmp_path):
        img = np.random.default_rng(1).integers(0, 256, (6, 9)).astype(float)
        write_pgm(tmp_path / "i.pgm", img)
        np.testing.assert_array_equal(read_pgm(tmp_path / "i.pgm"), img)

    def test_pgm_with_comment(self, tmp_path):
        (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 1\n255\n\x07\xff")
        np.testing.assert_array_equal(read_pgm(tmp_path / "c.pgm"), [[7, 255]])

    def test_pgm_rejects_ascii(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
        with pytest.raises(DomainError):
            read_pgm(tmp_path / "a.pgm")

    def test_csv_crlf_and_repr_floats(self, tmp_path):
        write_csv(tmp_path / "t.csv", ["a", "b", "c"], [{"a": 0.1, "b": True, "c": "x,y"}])
        raw = (tmp_path / "t.csv").read_bytes()
        assert raw == b'a,b,c\r\n0.1,true,"x,y"\r\n'
        assert read_csv(tmp_path / "t.csv") == [{"a": "0.1", "b": "true", "c": "x,y"}]

    def test_svg_is_deterministic_and_well_formed(self):
        import xml.etree.ElementTree as ET

        series = {"spring": [(4, 0.6, 0.02), (10, 0.62, 0.03)], "baseline": [(4, 0.59, 0.0), (10, 0.6, 0.01)]}
        svg = svg_line_plot(series, "n_c", "AUC")
        assert svg == svg_line_plot(series, "n_c", "AUC")
        assert ET.fromstring(svg).tag.endswith("svg")

    def test_config_reader(self, tmp_path):
        (tmp_path / "c.txt").write_text("# note\nseed=3\n\nreps = 2  # inline\nseed=4\n")
        assert read_config(tmp_path / "c.txt") == {"seed": "4", "reps": "2"}


class TestSynth:
    def test_baseline_anchor_and_determinism(self, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            d = tmp_path / name
            argv = ["synth", "--nc-list", "10", "--tau-list", "3", "--variants", "baseline", "--reps", "2", "--seed", "7", "--out-dir", str(d)]
            assert cli.main(argv) == 0
            outs.append(d)
        rows = read_csv(outs[0] / "synth_cells.csv")
        assert len(rows) == 2
        assert all(abs(float(r["auc"]) - 0.6) <= 0.1 for r in rows)
        for name in ("synth_cells.csv", "synth_summary.csv", "synth_plot.svg"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_cartesian_rows(self, tmp_path):
        argv = ["synth", "--nc-list", "4,10,20", "--tau-list", "3", "--variants", "baseline", "--reps", "2",
                "--n-train", "200", "--n-test", "200", "--out-dir", str(tmp_path)]
        assert cli.main(argv) == 0
        rows = read_csv(tmp_path / "synth_cells.csv")
        assert len(rows) == 6 and [r["n_c"] for r in rows] == ["4", "4", "10", "10", "20", "20"]
        assert len(read_csv(tmp_path / "synth_summary.csv")) == 3

    def test_manifest_reproduces_run(self, tmp_path):
        first = tmp_path / "first"
        argv = ["synth", "--variants", "baseline,spring", "--margins", "spring=3", "--reps", "1", "--epochs", "1",
                "--n-train", "256", "--n-test", "256", "--seed", "5", "--out-dir", str(first)]
        assert cli.main(argv) == 0
        second = tmp_path / "second"
        assert cli.main(["synth", "--config", str(first / "manifest.txt"), "--out-dir", str(second)]) == 0
        assert (first / "synth_cells.csv").read_bytes() == (second / "synth_cells.csv").read_bytes()

    @pytest.mark.parametrize(
        "argv",
        [
            ["synth", "--nc-list", "1"],
            ["synth", "--reps", "0"],
            ["synth", "--variants", "hinge"],
            ["synth", "--tau-list", "x"],
            ["synth", "--bogus"],
            ["frobnicate"],
        ],
    )
    def test_usage_errors_exit_2(self, argv, tmp_path):
        assert cli.main(argv + ["--out-dir", str(tmp_path)] if argv[0] == "synth" else argv) == 2

    def test_unknown_config_key(self, tmp_path):
        (tmp_path / "c.txt").write_text("colour=blue\n")
        assert cli.main(["synth", "--config", str(tmp_path / "c.txt")]) == 2


class TestTrain:
    def test_loss_decreases_and_outputs(self, trained):
        losses = [float(r["loss"]) for r in read_csv(str(trained).replace(".pbnet", "_losses.csv"))]
        assert len(losses) == 10 and losses[9] < losses[0]
        model = checkpoint.load(trained)
        assert model.input_shape == (1, 9, 9)
        manifest = read_config(str(trained).replace(".pbnet", "_manifest.txt"))
        assert manifest["command"] == "train" and manifest["variant"] == "centrifuge_sd"

    def test_lambda_one_spring_sd_equals_spring(self, dataset, tmp_path):
        common = ["train", "--data", str(dataset), "--epochs", "2", "--samples", "256", "--batch", "64", "--margin", "3", "--lambda", "1.0"]
        assert cli.main(common + ["--variant", "spring_sd", "--out", str(tmp_path / "sd.pbnet")]) == 0
        assert cli.main(common + ["--variant", "spring", "--out", str(tmp_path / "plain.pbnet")]) == 0
        assert (tmp_path / "sd_losses.csv").read_bytes() == (tmp_path / "plain_losses.csv").read_bytes()
        assert (tmp_path / "sd.pbnet").read_bytes() == (tmp_path / "plain.pbnet").read_bytes()

    def test_deterministic(self, dataset, tmp_path):
        argv = ["train", "--data", str(dataset), "--epochs", "1", "--samples", "128", "--batch", "64", "--seed", "3"]
        assert cli.main(argv + ["--out", str(tmp_path / "x.pbnet")]) == 0
        assert cli.main(argv + ["--out", str(tmp_path / "y.pbnet")]) == 0
        assert (tmp_path / "x.pbnet").read_bytes() == (tmp_path / "y.pbnet").read_bytes()
        assert (tmp_path / "x_losses.csv").read_bytes() == (tmp_path / "y_losses.csv").read_bytes()

    def test_missing_data_exit_2(self, tmp_path):
        assert cli.main(["train", "--data", str(tmp_path / "nope.txt")]) == 2
        assert cli.main(["train"]) == 2
        (tmp_path / "list.txt").write_text("a.pgm b.pgm\n")
        assert cli.main(["train", "--data", str(tmp_path / "list.txt")]) == 2

    def test_divergence_exit_1_keeps_last_checkpoint(self, dataset, tmp_path, monkeypatch):
        real = cli.train
        calls = []

        def flaky(*args, **kwargs):
            calls.append(1)
            if len(calls) == 2:
                raise DivergenceError(1, [])
            return real(*args, **kwargs)

        monkeypatch.setattr(cli, "train", flaky)
        out = tmp_path / "d.pbnet"
        argv = ["train", "--data", str(dataset), "--epochs", "3", "--samples", "128", "--batch", "64", "--out", str(out)]
        assert cli.main(argv) == 1
        assert out.exists() and len(read_csv(tmp_path / "d_losses.csv")) == 1


class TestFlow:
    def test_outputs_self_pair(self, trained, dataset, tmp_path):
        root = dataset.parent
        prefix = tmp_path / "self"
        argv = ["flow", "--model", str(trained), "--img1", str(root / "a0.pgm"), "--img2", str(root / "a0.pgm"),
                "--cc-area", "20", "--radius", "16", "--k", "9", "--out-prefix", str(prefix)]
        gt = tmp_path / "zero.pbfl"
        write_pbfl1(gt, FlowField(np.zeros((40, 40)), np.zeros((40, 40))))
        assert cli.main(argv + ["--gt", str(gt)]) == 0
        for suffix in ("raw.pbfl", "sparse.pbfl", "dense.pbfl", "metrics.csv", "manifest.txt"):
            assert os.path.exists(f"{prefix}_{suffix}")
        row = read_csv(f"{prefix}_metrics.csv")[0]
        assert float(row["dense_epe"]) < 0.5
        dense = read_pbfl1(f"{prefix}_dense.pbfl")
        assert dense.valid.all()

    def test_byte_determinism(self, trained, dataset, tmp_path):
        root = dataset.parent
        base = ["flow", "--model", str(trained), "--img1", str(root / "a0.pgm"), "--img2", str(root / "b0.pgm"),
                "--gt", str(root / "f0.pbfl"), "--cc-area", "20", "--radius", "16", "--k", "9", "--seed", "4"]
        assert cli.main(base + ["--out-prefix", str(tmp_path / "x")]) == 0
        assert cli.main(base + ["--out-prefix", str(tmp_path / "y")]) == 0
        for suffix in ("raw.pbfl", "sparse.pbfl", "dense.pbfl", "metrics.csv"):
            assert (tmp_path / f"x_{suffix}").read_bytes() == (tmp_path / f"y_{suffix}").read_bytes()
        assert cli.main(["flow", "--config", str(tmp_path / "x_manifest.txt"), "--out-prefix", str(tmp_path / "z")]) == 0
        assert (tmp_path / "x_dense.pbfl").read_bytes() == (tmp_path / "z_dense.pbfl").read_bytes()

    def test_second_iteration_never_worse(self, trained, dataset, tmp_path):
        root = dataset.parent
        base = ["flow", "--model", str(trained), "--img1", str(root / "a1.pgm"), "--img2", str(root / "b1.pgm"),
                "--cc-area", "0", "--radius", "4", "--k", "4", "--seed", "2"]
        assert cli.main(base + ["--iters", "1", "--out-prefix", str(tmp_path / "one")]) == 0
        assert cli.main(base + ["--iters", "2", "--out-prefix", str(tmp_path / "two")]) == 0
        model = checkpoint.load(trained)
        fa = encode_field(model, normalize_image(read_pgm(root / "a1.pgm")))
        fb = encode_field(model, normalize_image(read_pgm(root / "b1.pgm")))

        def costs(path):
            raw = read_pbfl1(path)
            inner = np.s_[4:-4, 4:-4]
            flow = FlowField(raw.u[inner].astype(int), raw.v[inner].astype(int))
            return match_costs(DescriptorField(fa.data[inner]), DescriptorField(fb.data[inner]), flow)

        assert np.all(costs(tmp_path / "two_raw.pbfl") <= costs(tmp_path / "one_raw.pbfl"))

    def test_missing_inputs_exit_2(self, tmp_path):
        assert cli.main(["flow", "--model", str(tmp_path / "m"), "--img1", "x", "--img2", "y"]) == 2
        assert cli.main(["flow"]) == 2

    def test_stage_failure_exit_1(self, trained, dataset, tmp_path, capsys):
        root = dataset.parent
        argv = ["flow", "--model", str(trained), "--img1", str(root / "a0.pgm"), "--img2", str(root / "b0.pgm"),
                "--cc-area", "100000", "--out-prefix", str(tmp_path / "f")]
        assert cli.main(argv) == 1
        assert "stage filter" in capsys.readouterr().err

    def test_bad_downsample_exit_2(self, trained, dataset, tmp_path):
        root = dataset.parent
        argv = ["flow", "--model", str(trained), "--img1", str(root / "a0.pgm"), "--img2", str(root / "b0.pgm"),
                "--downsample", "3", "--out-prefix", str(tmp_path / "f")]
        assert cli.main(argv) == 2


def test_console_script_help():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "patchbatch.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "synth" in proc.stdout
