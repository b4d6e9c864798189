import json
import math

import pytest

from zenosim.experiment import SpecError, SweepResult, parse_spec


class TestParseSpec:
    def test_empty_is_paper_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        spec = parse_spec(path)
        assert spec.device.chi1 == -4.25
        assert spec.device.kappa == 0.15
        assert spec.device.t1_eg == 52.0
        assert spec.sim["fock_dim"] == 20
        assert spec.drives["rabi_mhz"] == 1.0

    def test_none_path_is_defaults(self):
        spec = parse_spec(None)
        assert spec.device.chif == -10.0
        assert len(spec.spec_hash) == 16

    def test_negative_kappa_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("device:\n  kappa_mhz: -1\n")
        with pytest.raises(SpecError, match="kappa"):
            parse_spec(path)

    def test_unknown_key_suggestion(self, tmp_path):
        path = tmp_path / "typo.yaml"
        path.write_text("device:\n  kapa_mhz: 0.2\n")
        with pytest.raises(SpecError, match="kappa_mhz"):
            parse_spec(path)

    def test_type_mismatch(self, tmp_path):
        path = tmp_path / "bad2.yaml"
        path.write_text("sim:\n  fock_dim: twenty\n")
        with pytest.raises(SpecError, match="integer"):
            parse_spec(path)

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "bad3.yaml"
        path.write_text("devices:\n  kappa_mhz: 0.2\n")
        with pytest.raises(SpecError, match="device"):
            parse_spec(path)

    def test_infinite_coherence_times(self, tmp_path):
        path = tmp_path / "inf.yaml"
        path.write_text("device:\n  t1_eg_us: .inf\n")
        spec = parse_spec(path)
        assert math.isinf(spec.device.t1_eg)

    def test_hash_tracks_content(self, tmp_path):
        a = tmp_path / "a.yaml"
        a.write_text("drives:\n  rabi_mhz: 1.0\n")
        b = tmp_path / "b.yaml"
        b.write_text("drives:\n  rabi_mhz: 0.5\n")
        assert parse_spec(a).spec_hash != parse_spec(b).spec_hash
        assert parse_spec(a).spec_hash == parse_spec(None).spec_hash

    def test_with_sim_rehashes(self):
        spec = parse_spec(None)
        sim = dict(spec.sim)
        sim["fock_dim"] = 12
        assert spec.with_sim(sim).spec_hash != spec.spec_hash


class TestSweepResult:
    def test_csv_schema_and_hash_column(self, tmp_path):
        res = SweepResult("block-sweep", ("rabi_mhz", "eps_mhz", "model", "p_gg"),
                          [(1.0, 0.5, "full-cavity", 0.123456789)], "abc123", 7)
        path = tmp_path / "out.csv"
        res.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "rabi_mhz,eps_mhz,model,p_gg,spec_hash"
        assert lines[1].endswith(",abc123")

    def test_deterministic_bytes(self, tmp_path):
        rows = [(0.1, 2.0, "ideal-markovian", 1 / 3)]
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        SweepResult("block-sweep", ("rabi_mhz", "eps_mhz", "model", "p_gg"),
                    rows, "h", 1).write_csv(p1)
        SweepResult("block-sweep", ("rabi_mhz", "eps_mhz", "model", "p_gg"),
                    rows, "h", 1).write_csv(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_meta_json(self, tmp_path):
        res = SweepResult("bound-table", ("ratio",), [(0.05,)], "h", 3,
                          extra_metadata={"note": "x"})
        path = tmp_path / "m.json"
        res.write_meta(path)
        meta = json.loads(path.read_text())
        assert meta["subcommand"] == "bound-table"
        assert meta["spec_hash"] == "h" and meta["note"] == "x"

    def test_row_width_checked(self, tmp_path):
        res = SweepResult("bound-table", ("a", "b"), [(1.0,)], "h", 0)
        with pytest.raises(ValueError):
            res.write_csv(tmp_path / "x.csv")
