"""HTTP service and command-line client: payloads, errors, exit codes."""

import json

import pytest
from fastapi.testclient import TestClient

from prekahler.cli import main
from prekahler.service import app

client = TestClient(app)

RANK2_TEXT = "(abs2(z1)+re(z1^2*conj(z2)))/(1-abs2(z2)) + 0.1*abs2(z1)^2"


class TestServiceEndpoints:
    def test_health(self):
        res = client.get("/health")
        assert res.status_code == 200
        assert "version" in res.json()

    def test_analyze_builtin(self):
        res = client.post("/analyze", json={"builtin": "flat", "samples": 8})
        assert res.status_code == 200
        doc = res.json()
        assert doc["aggregate"]["verdict"] == "flat2Nondeg"
        assert len(doc["records"]) == 8

    def test_analyze_at_a_point(self):
        res = client.post("/analyze", json={
            "builtin": "homog", "params": {"a": 3.0},
            "at": {"z1": [0.0, 0.0], "z2": [0.0, 0.0]},
        })
        assert res.status_code == 200
        at = res.json()["aggregate"]["at_point"]
        assert at["bT1"] == pytest.approx((1 / 27) ** 2, rel=1e-9)
        assert at["rank"] == 1

    def test_analyze_requires_exactly_one_source(self):
        for body in ({}, {"builtin": "flat", "text": "abs2(z1)"}):
            res = client.post("/analyze", json=body)
            assert res.status_code == 400
            assert res.json()["error_class"] == "parse"

    def test_unknown_builtin_is_a_parse_error(self):
        res = client.post("/analyze", json={"builtin": "mystery"})
        assert res.status_code == 400
        assert res.json()["error_class"] == "parse"

    def test_complex_valued_text_is_a_domain_error(self):
        res = client.post("/analyze", json={"text": "z1*z2"})
        assert res.status_code == 400
        assert res.json()["error_class"] == "domain"

    def test_freeman_reports_orders(self):
        res = client.post("/freeman", json={"builtin": "product", "samples": 4})
        assert res.status_code == 200
        agg = res.json()["aggregate"]
        assert agg["order"] == "inf"
        assert agg["degenerate"] is True

    def test_connection_from_potential(self):
        res = client.post("/connection", json={
            "potential": {"builtin": "homog", "params": {"a": 0.5}},
            "samples": 3,
        })
        assert res.status_code == 200
        agg = res.json()["aggregate"]
        assert agg["special"] is True
        assert agg["critical"] is True

    def test_connection_rejects_degenerate_potentials(self):
        res = client.post("/connection", json={
            "potential": {"builtin": "product"}, "samples": 2})
        assert res.status_code == 400
        assert res.json()["error_class"] == "singular"

    def test_connection_rank_gate(self):
        res = client.post("/connection", json={
            "potential": {"text": RANK2_TEXT}, "samples": 2})
        assert res.status_code == 400
        assert res.json()["error_class"] == "rank"

    def test_connection_needs_one_source(self):
        res = client.post("/connection", json={"samples": 2})
        assert res.status_code == 400

    def test_sasaki_endpoint(self):
        res = client.post("/sasaki", json={"builtin": "kahler", "samples": 4})
        assert res.status_code == 200
        agg = res.json()["aggregate"]
        assert agg["contact_residual"] < 1e-10
        assert agg["dtheta_rank"] == 4
        assert agg["presympl_rank"] == 6

    def test_verify_subset(self):
        res = client.post("/verify", json={"only": ["jet-criteria"]})
        assert res.status_code == 200
        doc = res.json()
        assert doc["aggregate"]["total"] == 1
        assert doc["records"][0]["passed"] is True

    def test_verify_unknown_name(self):
        res = client.post("/verify", json={"only": ["nonexistent"]})
        assert res.status_code == 400


class TestCliExitCodes:
    def test_analyze_ok(self, capsys):
        assert main(["analyze", "--builtin", "flat", "--samples", "6"]) == 0
        out = capsys.readouterr().out
        assert "flat2Nondeg" in out

    def test_unreadable_potential_file(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("this is not (an expression")
        assert main(["analyze", "--potential", str(bad)]) == 2

    def test_missing_potential_file(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["analyze", "--potential", str(tmp_path / "nope.txt")])
        assert exc.value.code == 2

    def test_complex_potential_exits_domain(self, tmp_path):
        f = tmp_path / "c.txt"
        f.write_text("z1*z2")
        assert main(["analyze", "--potential", str(f)]) == 3

    def test_degenerate_connection_exits_singular(self):
        assert main(["connection", "--from-potential", "kahler",
                     "--samples", "2"]) == 4

    def test_rank_gate_exits_rank(self, tmp_path):
        f = tmp_path / "r2.txt"
        f.write_text(RANK2_TEXT)
        assert main(["connection", "--from-potential", str(f),
                     "--samples", "2"]) == 5

    def test_unknown_verify_name_exits_parse(self):
        assert main(["verify", "--only", "nonexistent"]) == 2

    def test_verify_subset_passes(self, capsys):
        assert main(["verify", "--only", "jet-criteria"]) == 0
        out = capsys.readouterr().out
        assert "PASS jet-criteria" in out
        assert "1/1 criteria passed" in out

    def test_thread_cap_misconfiguration(self, monkeypatch):
        # The parallel mapper only engages past its minimum batch size, and
        # a malformed cap is reported as a configuration (parse) error.
        monkeypatch.setenv("PREKAHLER_THREADS", "many")
        assert main(["freeman", "--builtin", "flat", "--samples", "9"]) == 2


class TestCliArtifacts:
    def test_json_output_is_byte_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for path in (a, b):
            assert main(["analyze", "--builtin", "homog", "--param", "a=3",
                         "--samples", "5", "--json", str(path)]) == 0
        assert a.read_bytes() == b.read_bytes()
        doc = json.loads(a.read_text())
        assert doc["aggregate"]["verdict"] == "twistorT2zero"

    def test_csv_has_flattened_columns(self, tmp_path):
        path = tmp_path / "r.csv"
        assert main(["analyze", "--builtin", "flat", "--samples", "4",
                     "--csv", str(path)]) == 0
        header = path.read_text().splitlines()[0]
        assert "T1_re" in header
        assert "rank" in header

    def test_at_option_evaluates_a_single_point(self, capsys):
        code = main(["analyze", "--builtin", "homog", "--param", "a=3",
                     "--at", "z1=0+0i,z2=0+0i"])
        assert code == 0
        out = capsys.readouterr().out
        assert "bT1" in out

    def test_freeman_summary_lists_order(self, capsys):
        assert main(["freeman", "--builtin", "product"]) == 0
        assert "order" in capsys.readouterr().out

    def test_param_validation(self):
        with pytest.raises(SystemExit):
            main(["analyze", "--builtin", "homog", "--param", "a"])
