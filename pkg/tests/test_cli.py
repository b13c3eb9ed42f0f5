import hashlib
import json
import xml.etree.ElementTree as ET
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from bayesdd.cli import main
from bayesdd.cli.config import ConfigError, RunConfig, config_from_dict, load_config
from bayesdd.cli.output import format_cell, line_plot_svg, read_csv, read_dataset, render_csv

GOLDEN = Path(__file__).parent / "golden"
SVG_NS = "{http://www.w3.org/2000/svg}"


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run(tmp_path, command, config=None, *flags, out="out"):
    argv = [command, "--out", str(tmp_path / out)]
    if config is not None:
        argv += ["--config", write_config(tmp_path, config)]
    return main(list(argv) + list(flags))


def digest(directory):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(Path(directory).iterdir())}


SMALL_SWEEP = {"sweep": {"complexities": [2, 10, 20, 30], "replicates": 3, "test_points": 64}}


class TestCommands:
    def test_gen(self, tmp_path):
        assert run(tmp_path, "gen") == 0
        data = read_dataset(tmp_path / "out" / "dataset.csv")
        assert len(data) == 20 and len(data.spec.true_coefficients) == 11
        meta = json.loads((tmp_path / "out" / "dataset.json").read_text())
        assert meta["seed"] == 0

    def test_sweep_default_complexities(self, tmp_path):
        cfg = {"sweep": {"replicates": 2, "test_points": 32}}
        assert run(tmp_path, "sweep", cfg, "--svg") == 0
        header, rows = read_csv(tmp_path / "out" / "risk_curve.csv")
        assert header[:3] == ["complexity", "train_mse", "test_risk_mle"]
        assert [r[0] for r in rows] == list(range(2, 41, 2))
        by_c = {r[0]: r for r in rows}
        assert by_c[20][1] < 1e-12
        svg = ET.parse(tmp_path / "out" / "risk_curve.svg").getroot()
        assert len(svg.findall(f"{SVG_NS}polyline")) == 3

    def test_sweep_ridge_columns(self, tmp_path):
        cfg = {"sweep": dict(SMALL_SWEEP["sweep"], ridge_lambda=0.1)}
        assert run(tmp_path, "sweep", cfg) == 0
        header, rows = read_csv(tmp_path / "out" / "risk_curve.csv")
        assert header[-2:] == ["test_risk_ridge", "test_risk_ridge_se"] and len(rows[0]) == len(header)

    def test_evidence(self, tmp_path):
        cfg = {"evidence": {"degrees": list(range(8)), "seeds": [0, 1, 2]}}
        assert run(tmp_path, "evidence", cfg, "--svg") == 0
        header, rows = read_csv(tmp_path / "out" / "evidence_curve.csv")
        assert header == ["degree", "log_evidence", "bic", "laplace_log_evidence", "argmax"]
        assert sum(r[-1] for r in rows) == 1
        best = max(rows, key=lambda r: r[1])
        assert best[-1] == 1
        text = (tmp_path / "out" / "evidence_argmax.csv").read_text()
        assert "# median_argmax=" in text
        assert (tmp_path / "out" / "evidence_curve.svg").exists()

    def test_evidence_from_saved_dataset(self, tmp_path):
        assert run(tmp_path, "gen", out="data") == 0
        cfg = {"evidence": {"degrees": [0, 1, 2], "dataset": str(tmp_path / "data" / "dataset.csv")}}
        assert run(tmp_path, "evidence", cfg, out="a") == 0
        assert run(tmp_path, "evidence", {"evidence": {"degrees": [0, 1, 2]}}, out="b") == 0
        assert digest(tmp_path / "a") == digest(tmp_path / "b")

    def test_deaton(self, tmp_path):
        assert run(tmp_path, "deaton", None, "--verify") == 0
        text = (tmp_path / "out" / "deaton_fit.csv").read_text()
        header, rows = read_csv(tmp_path / "out" / "deaton_fit.csv")
        assert len(rows) == 12 and rows[-1][1] is None
        z = [r[4] for r in rows[:-1]]
        assert all(0 < a <= 1 for a in z) and all(b >= a for a, b in zip(z, z[1:]))
        footer = dict(ln[2:].split("=", 1) for ln in text.splitlines() if ln.startswith("#"))
        assert float(footer["verify_max_abs_diff"]) <= 1e-10
        assert footer["d"] == "9" and footer["N"] == "20"

    def test_deaton_needs_degrees_of_freedom(self, tmp_path, capsys):
        code = run(tmp_path, "deaton", {"generator": {"n": 11}, "deaton": {"degree": 10}})
        assert code == 3
        assert "N > p+1" in capsys.readouterr().err

    def test_occam(self, tmp_path):
        assert run(tmp_path, "occam") == 0
        text = (tmp_path / "out" / "occam.csv").read_text()
        header, rows = read_csv(tmp_path / "out" / "occam.csv")
        arith, cubic = rows
        assert header[0] == "name" and arith[0] == "arithmetic"
        assert arith[1:3] == [1, 10201] and arith[3] == float(Fraction(1, 10201))
        assert cubic[1:3] == [1, 269**4]
        assert arith[4] > 0.99 and cubic[5] < 1e-5
        assert "# arithmetic_evidence=1/10201" in text


class TestDeterminism:
    @pytest.mark.parametrize("command,config,flags", [
        ("gen", None, ()),
        ("sweep", SMALL_SWEEP, ("--svg",)),
        ("evidence", {"evidence": {"degrees": list(range(6)), "seeds": [0, 1]}}, ("--svg",)),
        ("deaton", None, ("--verify",)),
        ("occam", {"occam": {"cubic_max_numerator": 5, "cubic_max_denominator": 2}}, ()),
    ])
    def test_byte_identical(self, tmp_path, command, config, flags):
        assert run(tmp_path, command, config, *flags, out="a") == 0
        assert run(tmp_path, command, config, *flags, out="b") == 0
        assert digest(tmp_path / "a") == digest(tmp_path / "b")


class TestConfigErrors:
    def test_n_zero(self, tmp_path, capsys):
        assert run(tmp_path, "gen", {"generator": {"n": 0}}) == 2
        assert "generator.n" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, capsys):
        assert run(tmp_path, "gen", {"sweep": {"replicate": 3}}) == 2
        assert "sweep.replicate" in capsys.readouterr().err

    def test_wrong_type(self):
        with pytest.raises(ConfigError, match="generator.noise_sd"):
            config_from_dict({"generator": {"noise_sd": "big"}})

    def test_bad_version(self):
        with pytest.raises(ConfigError, match="version"):
            config_from_dict({"version": 2})

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"seed": 1,\n  oops}')
        with pytest.raises(ConfigError, match=":2:"):
            load_config(p)

    def test_missing_file(self, tmp_path):
        assert main(["gen", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2

    def test_missing_dataset(self, tmp_path):
        assert run(tmp_path, "evidence", {"evidence": {"dataset": "nope.csv"}}) == 2


class TestRoundTrips:
    def test_config_json(self):
        cfg = config_from_dict({"seed": 4, "sweep": {"ridge_lambda": 0.5}, "evidence": {"seeds": [1, 2]}})
        again = config_from_dict(json.loads(cfg.to_json()))
        assert again == cfg
        assert config_from_dict(json.loads(RunConfig().to_json())) == RunConfig()

    def test_csv_cells(self):
        vals = [0.1, 1 / 3, -2.5e-300, 1e300, 7, 0.0]
        text = render_csv(["v"], [[v] for v in vals], ["note=1"])
        assert text.endswith("# note=1\n") and "\r" not in text
        parsed = [r[0] for r in read_csv_text(text)]
        assert parsed == vals
        assert format_cell(None) == "" and format_cell(float("nan")) == "nan"

    def test_row_width(self):
        with pytest.raises(ValueError):
            render_csv(["a", "b"], [[1]])

    def test_dataset(self, tmp_path):
        assert run(tmp_path, "gen") == 0
        from bayesdd.risklab import GeneratorSpec, generate

        data = read_dataset(tmp_path / "out" / "dataset.csv")
        ref = generate(GeneratorSpec(), 0)
        np.testing.assert_array_equal(data.y, ref.y)
        np.testing.assert_array_equal(data.x, ref.x)
        assert data.spec == ref.spec


def read_csv_text(text):
    return [[float(c) if "." in c or "e" in c else int(c) for c in ln.split(",")]
            for ln in text.splitlines()[1:] if not ln.startswith("#")]


class TestSvg:
    SERIES = {"a": ([1, 2, 3, 4], [1.0, 4.0, 9.0, 16.0]), "b & c": ([1, 2, 3, 4], [2.0, 2.5, 3.0, 3.5])}

    def test_golden(self):
        svg = line_plot_svg(self.SERIES, "Golden <plot>", "x", "y")
        assert svg == (GOLDEN / "line_plot.svg").read_text()

    def test_structure(self):
        root = ET.fromstring(line_plot_svg(self.SERIES, "t", "x", "y"))
        assert root.tag == f"{SVG_NS}svg"
        assert len(root.findall(f"{SVG_NS}polyline")) == 2

    def test_log_scale_drops_nonpositive(self):
        root = ET.fromstring(line_plot_svg({"s": ([1, 2, 3], [0.0, 1.0, 10.0])}, log_y=True))
        (poly,) = root.findall(f"{SVG_NS}polyline")
        assert len(poly.get("points").split()) == 2
