import json

import numpy as np
import pytest

from molcomm import cli, diffusion, ldpc
from molcomm.errors import ConfigurationError
from molcomm.harness import BerCurve, BerPoint, SimConfig

FAST = ["--analytic-channel", "--set", "target_frame_errors=3", "--set", "max_frames=40",
        "--set", "mm_sweep=100,1000"]


def curve(scheme, points):
    return BerCurve(scheme, "x", [BerPoint(mm, f, b, e, 100, s) for mm, f, b, e, s in points])


class TestParseConfig:
    def test_empty_object_is_default(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{}")
        assert cli.parse_config(path) == SimConfig()
        assert cli.parse_config() == SimConfig()

    def test_override(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"target_frame_errors": 50, "scheme": "diversity"}')
        cfg = cli.parse_config(path, ["target_frame_errors=5"])
        assert cfg == SimConfig(target_frame_errors=5, scheme="diversity")

    def test_list_override(self):
        assert cli.parse_config(None, ["mm_sweep=10,20"]).mm_sweep == (10.0, 20.0)
        assert cli.parse_config(None, ["mm_sweep=[10, 30]"]).mm_sweep == (10.0, 30.0)
        assert cli.parse_config(None, ["scheme=diversity"]).scheme == "diversity"

    def test_descending_sweep(self):
        with pytest.raises(ConfigurationError, match="mm_sweep"):
            cli.parse_config(None, ["mm_sweep=[1000, 100]"])

    def test_malformed_json_reports_position(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{\n  "n": 200,\n  "k": ,\n}')
        with pytest.raises(ConfigurationError, match="line 3"):
            cli.parse_config(path)

    def test_unknown_field(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"nn": 3}')
        with pytest.raises(ConfigurationError, match="nn"):
            cli.parse_config(path)

    def test_bad_override_syntax(self):
        with pytest.raises(ConfigurationError):
            cli.parse_config(None, ["target_frame_errors"])

    def test_schema_lists_every_field(self):
        schema = cli.config_schema()
        assert set(schema["properties"]) == set(SimConfig().to_dict())
        assert schema["properties"]["scheme"]["enum"][0] == "single"
        assert schema["properties"]["target_frame_errors"]["default"] == 1020


class TestEmit:
    def test_one_point(self, tmp_path):
        path = cli.emit_csv([curve("single", [(100.0, 10, 7, 2, "frame_errors")])], tmp_path / "a.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(cli.CSV_HEADER) == \
            "scheme,mm,frames,bit_errors,frame_errors,ber,fer,stopped_by"
        assert len(lines) == 2
        row = lines[1].split(",")
        assert row[:5] == ["single", "100", "10", "7", "2"]
        assert row[5] == "0.007000000000"
        assert row[6] == "0.2000000000"

    def test_significant_digits(self, tmp_path):
        path = cli.emit_csv([curve("single", [(100.0, 3, 1, 1, "frame_errors")])], tmp_path / "a.csv")
        ber = cli.read_csv(path)[0]["ber"]
        assert ber.startswith("0.003333333")

    def test_round_trip_and_grouping(self, tmp_path):
        curves = [curve("single", [(1000.0, 50, 3, 1, "max_frames"), (100.0, 9, 44, 5, "frame_errors")]),
                  curve("diversity", [(100.0, 20, 6, 5, "frame_errors")])]
        rows = cli.read_csv(cli.emit_csv(curves, tmp_path / "a.csv"))
        assert [(r["scheme"], float(r["mm"])) for r in rows] == \
            [("diversity", 100.0), ("single", 100.0), ("single", 1000.0)]
        by_key = {(r["scheme"], float(r["mm"])): r for r in rows}
        for c in curves:
            for p in c.points:
                r = by_key[(c.scheme, p.mm)]
                assert (int(r["frames"]), int(r["bit_errors"]), int(r["frame_errors"])) == \
                    (p.frames, p.bit_errors, p.frame_errors)
                assert r["stopped_by"] == p.stopped_by
                assert float(r["ber"]) == pytest.approx(p.ber, rel=1e-9)

    def test_plotdata_blocks(self, tmp_path):
        curves = [curve("single", [(100.0, 9, 44, 5, "frame_errors"), (1000.0, 50, 3, 1, "max_frames")]),
                  curve("diversity", [(100.0, 20, 6, 5, "frame_errors")])]
        text = cli.emit_plotdata(curves, tmp_path / "a.dat").read_text()
        lines = text.splitlines()
        assert lines[0].startswith("#") and "log" in lines[0]
        blocks = text.split("\n\n")
        assert len(blocks) == 2
        csv_rows = cli.read_csv(cli.emit_csv(curves, tmp_path / "a.csv"))
        data = [ln.split() for ln in lines if ln and not ln.startswith("#")]
        assert [d[1] for d in data] == [r["ber"] for r in csv_rows]

    def test_single_point_plotdata(self, tmp_path):
        text = cli.emit_plotdata([curve("single", [(100.0, 1, 1, 1, "frame_errors")])],
                                 tmp_path / "a.dat").read_text()
        assert "\n\n" not in text
        assert [ln for ln in text.splitlines() if not ln.startswith("#")] == ["100 0.01000000000"]

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            cli.emit_csv([curve("single", [(1.0, 1, 0, 0, "max_frames")])], tmp_path / "no" / "a.csv")


class TestMain:
    def test_run_writes_outputs(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert cli.main(["run", *FAST, "--out", str(out)]) == 0
        rows = cli.read_csv(out / "ber_single.csv")
        assert [float(r["mm"]) for r in rows] == [100.0, 1000.0]
        assert (out / "ber_single.dat").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config_digest"] == SimConfig.from_dict(manifest["config"]).digest
        assert manifest["outputs"]["csv"].endswith("ber_single.csv")
        assert "[single]" in capsys.readouterr().out

    def test_rerun_is_byte_identical_and_reuses_cache(self, tmp_path):
        out = tmp_path / "out"
        cli.main(["run", *FAST, "--out", str(out)])
        first = (out / "ber_single.csv").read_bytes()
        cached = sorted(p.name for p in out.iterdir())
        cli.main(["run", *FAST, "--out", str(out), "--workers", "2"])
        assert (out / "ber_single.csv").read_bytes() == first
        assert sorted(p.name for p in out.iterdir()) == cached

    def test_channel_and_code_subcommands(self, tmp_path, capsys):
        ch = tmp_path / "p.txt"
        code = tmp_path / "h.alist"
        assert cli.main(["channel", "--analytic-channel", "--channel-file", str(ch),
                         "--out", str(tmp_path)]) == 0
        assert "P1 = 0.152807" in capsys.readouterr().out
        np.testing.assert_allclose(diffusion.read_channel_file(ch).p,
                                   diffusion.analytic_channel_response(diffusion.ChannelParams()).p)
        assert cli.main(["code", "--code-file", str(code), "--out", str(tmp_path)]) == 0
        assert ldpc.load_code(code).k == 100

    def test_particle_channel_subcommand(self, tmp_path, capsys):
        assert cli.main(["channel", "--set", "n_particles=500", "--set", "total_time=0.3",
                         "--out", str(tmp_path)]) == 0
        assert list(tmp_path.glob("channel-*.txt"))

    def test_run_with_channel_file(self, tmp_path):
        ch = tmp_path / "p.txt"
        cli.main(["channel", "--analytic-channel", "--channel-file", str(ch), "--out", str(tmp_path)])
        out = tmp_path / "out"
        assert cli.main(["run", "--channel-file", str(ch), "--set", "target_frame_errors=2",
                         "--set", "mm_sweep=[100]", "--out", str(out)]) == 0
        assert not list(out.glob("channel-*.txt"))

    def test_compare(self, tmp_path):
        out = tmp_path / "cmp"
        assert cli.main(["compare", *FAST, "--out", str(out)]) == 0
        assert {r["scheme"] for r in cli.read_csv(out / "single_vs_diversity.csv")} == {"single", "diversity"}
        assert {r["scheme"] for r in cli.read_csv(out / "diversity_vs_preequalized.csv")} == {"diversity", "preequalized"}
        manifest = json.loads((out / "manifest.json").read_text())
        assert "simplified" in manifest["curves"]["preequalized"]["metadata"]["note"]

    def test_schema(self, capsys):
        assert cli.main(["schema"]) == 0
        assert json.loads(capsys.readouterr().out)["type"] == "object"

    def test_validation_exit_code(self, tmp_path, capsys):
        assert cli.main(["run", "--set", "mm_sweep=[5, 1]", "--out", str(tmp_path)]) == 2
        assert "mm_sweep" in capsys.readouterr().err
        assert cli.main(["run", "--workers", "0", "--out", str(tmp_path)]) == 2

    def test_io_exit_code(self, tmp_path):
        assert cli.main(["run", "--config", str(tmp_path / "missing.json"),
                         "--out", str(tmp_path)]) == 3

    def test_construction_exit_code(self, tmp_path, monkeypatch):
        monkeypatch.setattr(ldpc, "gf2_rank", lambda H: -1)
        monkeypatch.setattr(ldpc, "CONSTRUCTION_RETRIES", 2)
        assert cli.main(["code", "--set", "n=24", "--set", "k=12", "--out", str(tmp_path)]) == 4
