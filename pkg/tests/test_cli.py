"""End-to-end command-line tests driven through main(argv)."""

import json

import jsonschema
import numpy as np
import pytest

from lumiparam.cli import REPORT_SCHEMA, main
from lumiparam.geometry import vogel_anchors
from lumiparam.hdr_io import read_map, write_map
from lumiparam.params import (
    LightParams,
    SgParams,
    read_params,
    write_params,
)


@pytest.fixture
def pano_file(tmp_path, make_inmodel_pano):
    rng = np.random.default_rng(41)
    img, _ = make_inmodel_pano(rng, height=64, width=128)
    path = tmp_path / "pano.hdr"
    write_map(path, img)
    return path


def write_uniform_params(path, n=16):
    anchors = vogel_anchors(n, k_nn=3)
    params = LightParams(
        sh_coeffs=np.zeros((3, 9)),
        sg=SgParams(
            p=np.full(n, 1.0 / n),
            e=2.0,
            r=np.array([1.0, 0.0, 0.0]),
            s=0.0025,
        ),
        anchors=anchors,
        meta={"height": 16, "width": 32},
    )
    write_params(path, params)
    return params


class TestDecompose:
    def test_single_file(self, pano_file, tmp_path):
        out = tmp_path / "pano.params.json"
        assert main(["decompose", str(pano_file), "-o", str(out)]) == 0
        params = read_params(out)
        assert params.sh_coeffs.size == 27
        assert params.sg.n == 128
        assert params.meta["source"] == str(pano_file)

    def test_default_output_name(self, pano_file):
        assert main(["decompose", str(pano_file)]) == 0
        assert (pano_file.parent / "pano.params.json").exists()

    def test_empty_inputs_warns(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["decompose", str(empty)]) == 0
        assert "warning" in capsys.readouterr().err

    def test_batch_with_corrupt_file(self, tmp_path, make_inmodel_pano, capsys):
        src = tmp_path / "maps"
        src.mkdir()
        rng = np.random.default_rng(43)
        for i in range(3):
            img, _ = make_inmodel_pano(rng, height=32, width=64)
            write_map(src / f"ok{i}.hdr", img)
        good = (src / "ok0.hdr").read_bytes()
        (src / "bad.hdr").write_bytes(good[: len(good) // 2])
        out = tmp_path / "out"
        assert main(["decompose", str(src), "-o", str(out)]) == 1
        assert "error" in capsys.readouterr().err
        written = sorted(p.name for p in out.iterdir())
        assert written == [
            "ok0.params.json",
            "ok1.params.json",
            "ok2.params.json",
        ]

    def test_sparsify_flag_records_projection(self, pano_file, tmp_path):
        out = tmp_path / "s.params.json"
        code = main(
            ["decompose", str(pano_file), "-o", str(out), "--sparsify"]
        )
        assert code == 0
        params = read_params(out)
        assert "sparsify_kappa" in params.meta
        assert params.sg.p.sum() == pytest.approx(1.0, abs=1e-9)

    def test_preview_written(self, pano_file, tmp_path):
        out = tmp_path / "p.params.json"
        assert main(
            ["decompose", str(pano_file), "-o", str(out), "--preview"]
        ) == 0
        assert (tmp_path / "p.params.png").exists()

    def test_parallel_batch_matches_serial(self, tmp_path, make_inmodel_pano):
        src = tmp_path / "maps"
        src.mkdir()
        rng = np.random.default_rng(47)
        for i in range(3):
            img, _ = make_inmodel_pano(rng, height=32, width=64)
            write_map(src / f"m{i}.hdr", img)
        serial = tmp_path / "serial"
        parallel = tmp_path / "parallel"
        assert main(["decompose", str(src), "-o", str(serial), "--jobs", "1"]) == 0
        assert main(["decompose", str(src), "-o", str(parallel), "--jobs", "3"]) == 0
        for i in range(3):
            a = (serial / f"m{i}.params.json").read_text()
            b = (parallel / f"m{i}.params.json").read_text()
            # meta.source is identical too: same input path
            assert a == b

    def test_jobs_env_fallback(self, pano_file, tmp_path, monkeypatch):
        monkeypatch.setenv("LUMIPARAM_JOBS", "2")
        out = tmp_path / "env.params.json"
        assert main(["decompose", str(pano_file), "-o", str(out)]) == 0
        assert out.exists()

    def test_config_file_and_flag_precedence(self, pano_file, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"order": 3, "n_anchors": 32, "k_nn": 4}))
        out_cfg = tmp_path / "cfg.params.json"
        assert main(
            ["decompose", str(pano_file), "--config", str(cfg), "-o", str(out_cfg)]
        ) == 0
        params = read_params(out_cfg)
        assert params.order == 3
        assert params.sg.n == 32

        out_flag = tmp_path / "flag.params.json"
        assert main(
            [
                "decompose", str(pano_file),
                "--config", str(cfg),
                "--order", "1",
                "-o", str(out_flag),
            ]
        ) == 0
        assert read_params(out_flag).order == 1

    def test_toml_config(self, pano_file, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("order = 0\nsparsify = true\n")
        out = tmp_path / "t.params.json"
        assert main(
            ["decompose", str(pano_file), "--config", str(cfg), "-o", str(out)]
        ) == 0
        params = read_params(out)
        assert params.order == 0
        assert "sparsify_kappa" in params.meta

    def test_unknown_config_key(self, pano_file, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"bands": 3}))
        assert main(
            ["decompose", str(pano_file), "--config", str(cfg)]
        ) == 1
        assert "bands" in capsys.readouterr().err


class TestReconstruct:
    def test_roundtrip_dimensions_from_meta(self, pano_file, tmp_path):
        params = tmp_path / "p.params.json"
        assert main(["decompose", str(pano_file), "-o", str(params)]) == 0
        out = tmp_path / "recon.hdr"
        assert main(["reconstruct", str(params), "-o", str(out)]) == 0
        img = read_map(out)
        assert img.shape == (64, 128, 3)
        assert img.min() >= 0.0

    def test_explicit_dimensions(self, pano_file, tmp_path):
        params = tmp_path / "p.params.json"
        main(["decompose", str(pano_file), "-o", str(params)])
        out = tmp_path / "r.pfm"
        assert main(
            [
                "reconstruct", str(params),
                "-o", str(out),
                "--height", "16",
                "--width", "48",
            ]
        ) == 0
        assert read_map(out).shape == (16, 48, 3)

    def test_zero_params_black_map(self, tmp_path, anchors128):
        pfile = tmp_path / "zero.params.json"
        params = LightParams(
            sh_coeffs=np.zeros((3, 9)),
            sg=SgParams(p=np.zeros(128), e=0.0, r=np.zeros(3), s=0.0025),
            anchors=anchors128,
            meta={"height": 8, "width": 16},
        )
        write_params(pfile, params)
        out = tmp_path / "black.hdr"
        assert main(["reconstruct", str(pfile), "-o", str(out)]) == 0
        assert not read_map(out).any()

    def test_preview(self, pano_file, tmp_path):
        params = tmp_path / "p.params.json"
        main(["decompose", str(pano_file), "-o", str(params)])
        out = tmp_path / "r.hdr"
        assert main(
            ["reconstruct", str(params), "-o", str(out), "--preview"]
        ) == 0
        assert (tmp_path / "r.png").exists()

    def test_invalid_file_names_json_path(self, tmp_path, capsys):
        pfile = tmp_path / "broken.params.json"
        write_uniform_params(pfile)
        doc = json.loads(pfile.read_text())
        doc["sg"]["e"] = "bright"
        pfile.write_text(json.dumps(doc))
        assert main(["reconstruct", str(pfile)]) == 1
        assert "$.sg.e" in capsys.readouterr().err


class TestSparsify:
    def test_uniform_distribution_unchanged(self, tmp_path):
        pfile = tmp_path / "u.params.json"
        original = write_uniform_params(pfile, n=16)
        out = tmp_path / "s.params.json"
        assert main(["sparsify", str(pfile), "-o", str(out)]) == 0
        result = read_params(out)
        np.testing.assert_allclose(result.sg.p, original.sg.p, atol=1e-12)
        assert result.meta["sparsify_kappa"] == 16

    def test_default_output_name(self, tmp_path):
        pfile = tmp_path / "u.params.json"
        write_uniform_params(pfile)
        assert main(["sparsify", str(pfile)]) == 0
        assert (tmp_path / "u.sparse.params.json").exists()

    def test_idempotent_on_decomposition(self, pano_file, tmp_path):
        params = tmp_path / "p.params.json"
        main(["decompose", str(pano_file), "-o", str(params)])
        once = tmp_path / "once.params.json"
        twice = tmp_path / "twice.params.json"
        assert main(["sparsify", str(params), "-o", str(once)]) == 0
        assert main(["sparsify", str(once), "-o", str(twice)]) == 0
        np.testing.assert_allclose(
            read_params(twice).sg.p, read_params(once).sg.p, atol=1e-12
        )


class TestEval:
    def test_identical_maps_zero_metrics(self, pano_file, capsys):
        assert main(["eval", str(pano_file), str(pano_file)]) == 0
        out = capsys.readouterr().out
        assert "rmse_full = 0.0" in out
        assert "si_rmse_full" in out

    def test_report_json_validates(self, pano_file, tmp_path):
        params = tmp_path / "p.params.json"
        main(["decompose", str(pano_file), "-o", str(params)])
        report = tmp_path / "report.json"
        assert main(
            ["eval", str(params), str(pano_file), "-o", str(report)]
        ) == 0
        doc = json.loads(report.read_text())
        jsonschema.validate(doc, REPORT_SCHEMA)
        assert doc["rmse_full"] >= 0.0
        assert "sh_coeff" in doc["losses"]

    def test_large_error_still_exits_zero(self, pano_file, tmp_path):
        other = tmp_path / "other.hdr"
        write_map(other, np.full((64, 128, 3), 100.0))
        assert main(["eval", str(other), str(pano_file)]) == 0

    def test_dimension_mismatch_fails(self, pano_file, tmp_path, capsys):
        small = tmp_path / "small.hdr"
        write_map(small, np.ones((8, 16, 3)))
        assert main(["eval", str(small), str(pano_file)]) == 1
        assert "error" in capsys.readouterr().err

    def test_renders_written_per_side(self, pano_file, tmp_path):
        report = tmp_path / "report.json"
        code = main(
            [
                "eval", str(pano_file), str(pano_file),
                "-o", str(report),
                "--render", "diffuse,mirror",
                "--render-size", "16",
            ]
        )
        assert code == 0
        for side in ("pred", "gt"):
            for kind in ("diffuse", "mirror"):
                assert (tmp_path / f"report.{side}-{kind}.png").exists()

    def test_unknown_render_kind(self, pano_file, capsys):
        assert main(
            ["eval", str(pano_file), str(pano_file), "--render", "matte"]
        ) == 1
        assert "matte" in capsys.readouterr().err


class TestInfo:
    def test_param_file_summary(self, tmp_path, capsys):
        pfile = tmp_path / "u.params.json"
        write_uniform_params(pfile, n=16)
        assert main(["info", str(pfile)]) == 0
        out = capsys.readouterr().out
        assert "parameter file" in out
        assert "sh order 2 (27 values)" in out
        assert "sg n 16" in out

    def test_map_summary(self, pano_file, capsys):
        assert main(["info", str(pano_file)]) == 0
        assert "radiance map 128x64" in capsys.readouterr().out

    def test_missing_file(self, tmp_path, capsys):
        assert main(["info", str(tmp_path / "nope.hdr")]) == 1
        assert "error" in capsys.readouterr().err

    def test_mixed_inputs_partial_failure(self, pano_file, tmp_path, capsys):
        missing = tmp_path / "gone.pfm"
        assert main(["info", str(pano_file), str(missing)]) == 1
        captured = capsys.readouterr()
        assert "radiance map" in captured.out
        assert "error" in captured.err
