"""End-to-end acceptance checks.

Each test drives exactly one named criterion of the built-in verification
suite (the same ones `prekahler verify` runs), so `pytest -v` prints one
pass/fail line per criterion.  The assertion message carries the measured
numbers on failure.
"""

from prekahler import verify


def _run(name):
    results = verify.run(only=[name])
    assert len(results) == 1
    res = results[0]
    assert res.passed, f"{res.name}: {res.detail}"


def test_01_flat_model():
    _run("flat-model")


def test_02_homog_family():
    _run("homog-family")


def test_03_flat_parameters():
    _run("flat-parameters")


def test_04_special_critical():
    _run("special-critical")


def test_05_quartic_relation():
    _run("quartic-relation")


def test_06_structure_closure():
    _run("structure-closure")


def test_07_gauge_invariance():
    _run("gauge-invariance")


def test_08_freeman_orders():
    _run("freeman-orders")


def test_09_jet_criteria():
    _run("jet-criteria")


def test_10_calculus_oracle():
    _run("calculus-oracle")


def test_11_sasaki_bridge():
    _run("sasaki-bridge")


def test_12_connection_roundtrip():
    _run("connection-roundtrip")
