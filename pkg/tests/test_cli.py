import json
import os
import shutil
import xml.etree.ElementTree as ET

import pytest

from infoplane.cli import main
from infoplane.harness import parse_csv
from infoplane.mnist import FILE_STEMS

from conftest import needs_mnist


def run_cli(*argv):
    return main(list(argv))


class TestRun:
    def test_run_writes_csv(self, synthetic_mnist_dir, tmp_path):
        out = str(tmp_path / "run.csv")
        code = run_cli(
            "run", "--arch", "shortcut", "--width", "3", "--depth", "3",
            "--epochs", "2", "--seed", "1", "--mi-subsample", "40",
            "--data-dir", synthetic_mnist_dir, "--out", out,
        )
        assert code == 0
        records = parse_csv(out)
        assert len(records) == 3

    def test_config_file_with_flag_override(self, synthetic_mnist_dir, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({
            "arch": "mlp", "width": 3, "depth": 3, "epochs": 5,
            "mi_subsample": 40, "data_dir": synthetic_mnist_dir,
        }))
        out = str(tmp_path / "run.csv")
        code = run_cli("run", "--config", str(config_path), "--epochs", "1", "--out", out)
        assert code == 0
        assert len(parse_csv(out)) == 2  # flag overrode the file's 5 epochs

    def test_bad_arch_exits_2(self, synthetic_mnist_dir):
        assert run_cli("run", "--arch", "transformer", "--data-dir", synthetic_mnist_dir) == 2

    def test_bad_config_file_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run_cli("run", "--config", str(bad)) == 2

    def test_missing_data_exits_3(self, tmp_path):
        assert run_cli("run", "--epochs", "1", "--data-dir", str(tmp_path / "none")) == 3

    def test_divergence_exits_4_but_writes_csv(self, synthetic_mnist_dir, tmp_path):
        out = str(tmp_path / "div.csv")
        code = run_cli(
            "run", "--width", "3", "--depth", "3", "--epochs", "9", "--lr", "1e308",
            "--mi-subsample", "40", "--data-dir", synthetic_mnist_dir, "--out", out,
        )
        assert code == 4
        assert os.path.exists(out)


class TestSweepAndPlot:
    def test_sweep_then_plot(self, synthetic_mnist_dir, tmp_path):
        sweep_dir = str(tmp_path / "sweep")
        code = run_cli(
            "sweep", "--arch", "mlp,shortcut", "--width", "3", "--depth", "3",
            "--seed", "0,1", "--epochs", "1", "--mi-subsample", "40",
            "--data-dir", synthetic_mnist_dir, "--out-dir", sweep_dir,
        )
        assert code == 0
        manifest = json.load(open(os.path.join(sweep_dir, "manifest.json")))
        assert len(manifest) == 4

        svg = str(tmp_path / "plane.svg")
        assert run_cli("plot", "--sweep-dir", sweep_dir, "--out", svg) == 0
        root = ET.parse(svg).getroot()
        circles = root.findall(".//{http://www.w3.org/2000/svg}circle")
        assert len(circles) == 8  # 4 runs x (epoch 0 + epoch 1)

    def test_plot_explicit_csvs(self, synthetic_mnist_dir, tmp_path):
        out = str(tmp_path / "one.csv")
        run_cli("run", "--width", "3", "--depth", "3", "--epochs", "1",
                "--mi-subsample", "40", "--data-dir", synthetic_mnist_dir, "--out", out)
        svg = str(tmp_path / "one.svg")
        assert run_cli("plot", out, "--out", svg) == 0
        assert ET.parse(svg).getroot().tag.endswith("svg")

    def test_plot_nothing_exits_2(self):
        assert run_cli("plot", "--out", "/tmp/unused.svg") == 2


class TestFetch:
    def test_fetch_rejects_corrupt_mirror(self, tmp_path, monkeypatch):
        # a local mirror with wrong bytes must fail checksum verification;
        # disable the real mirrors so nothing can rescue the fetch
        import infoplane.mnist as mnist_mod

        monkeypatch.setattr(mnist_mod, "MIRRORS", ())
        mirror = tmp_path / "mirror"
        mirror.mkdir()
        for stem in FILE_STEMS:
            (mirror / (stem + ".gz")).write_bytes(b"not mnist")
        code = run_cli(
            "fetch", "--data-dir", str(tmp_path / "data"),
            "--base-url", mirror.as_uri() + "/",
        )
        assert code == 3

    @needs_mnist
    def test_fetch_from_local_mirror(self, mnist_dir, tmp_path):
        mirror = tmp_path / "mirror"
        mirror.mkdir()
        for stem in FILE_STEMS:
            shutil.copy(os.path.join(mnist_dir, stem + ".gz"), mirror / (stem + ".gz"))
        dest = str(tmp_path / "data")
        code = run_cli("fetch", "--data-dir", dest, "--base-url", mirror.as_uri() + "/")
        assert code == 0
        for stem in FILE_STEMS:
            assert os.path.exists(os.path.join(dest, stem + ".gz"))

    @needs_mnist
    def test_fetch_idempotent_on_verified_files(self, mnist_dir):
        assert run_cli("fetch", "--data-dir", mnist_dir) == 0
