import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from procfuzz import coverage as cov
from procfuzz.dut.controller import CONTROLLER_MANIFEST
from procfuzz.dut.core import DUT_MANIFEST

MAN = DUT_MANIFEST
maps = st.integers(0, (1 << MAN.size) - 1).map(lambda b: cov.CoverageMap(MAN, b))


def small_manifest(name="m"):
    return cov.Manifest(name, [
        cov.statement("s", count=3),
        cov.branch("b"),
        cov.expression("e", ["a", "b", "c"]),
        cov.toggle("t", 4, tristate=True),
        cov.fsm("f", ["IDLE", "BUSY"], [("IDLE", "BUSY"), ("BUSY", "IDLE")]),
        cov.mux("m", selects=2),
        cov.ctrlreg("c", ["x", "y"]),
    ])


@settings(max_examples=1000)
@given(maps, maps)
def test_merge_commutative(a, b):
    assert cov.merge(a, b) == cov.merge(b, a)


@settings(max_examples=1000)
@given(maps, maps, maps)
def test_merge_associative(a, b, c):
    assert cov.merge(cov.merge(a, b), c) == cov.merge(a, cov.merge(b, c))


@settings(max_examples=1000)
@given(maps)
def test_merge_idempotent(a):
    assert cov.merge(a, a) == a
    assert cov.merge(a, MAN.empty()) == a


@settings(max_examples=1000)
@given(maps, maps)
def test_delta_absorption(g, r):
    merged = cov.merge(g, r)
    assert cov.delta(merged, r) == set()
    assert cov.delta_bits(g, r) | g.bits == merged.bits
    assert cov.delta_bits(g, r) & g.bits == 0


def test_universe_sizes():
    m = small_manifest()
    assert m.size == 3 + 2 + 8 + 24 + 4 + 4 + 4
    assert m.universe("toggle") == 24
    assert m.points_where("expression") == 8


def test_record_and_points():
    m = small_manifest()
    c = cov.record(m.empty(), "fsm", "f", ("IDLE", "BUSY"))
    c = cov.record(c, "toggle", "t", (3, "Z->1"))
    c = cov.record(c, "expression", "e", (1, 0, 1))
    assert c.points() == {cov.CoveragePoint("fsm", "f", 2), cov.CoveragePoint("toggle", "t", 23),
                          cov.CoveragePoint("expression", "e", 5)}


def test_bad_observations_rejected():
    m = small_manifest()
    with pytest.raises(cov.CoverageError):
        cov.record(m.empty(), "fsm", "f", ("BUSY", "BUSY"))
    with pytest.raises(cov.CoverageError):
        cov.record(m.empty(), "toggle", "t", (4, "0->1"))
    with pytest.raises(cov.CoverageError):
        cov.record(m.empty(), "branch", "nope", True)


def test_manifest_mismatch_refuses_merge():
    a, b = small_manifest("a"), small_manifest("b")
    with pytest.raises(cov.ManifestMismatch):
        cov.merge(a.empty(), b.empty())


def test_json_roundtrip_checks_manifest():
    m = small_manifest()
    c = cov.CoverageMap(m, 0b1011)
    assert cov.map_from_json(m, cov.map_to_json(c)) == c
    with pytest.raises(cov.ManifestMismatch):
        cov.map_from_json(small_manifest("other"), cov.map_to_json(c))


def test_recorder_tristate_toggles():
    m = small_manifest()
    r = cov.Recorder(m)
    r.toggle_tristate("t", old=0b0001, old_z=0, new=0b0000, new_z=0b0001)
    assert cov.CoveragePoint("toggle", "t", 3 * 4 + 0) in r.to_map().points()   # bit 0: 1->Z


def test_dut_manifest_covers_all_metrics():
    for metric in cov.METRICS:
        assert MAN.universe(metric) > 0, metric
    assert MAN.universe("toggle") > 0 and any(p.meta.get("tristate") for p in MAN.probes)


def test_controller_manifest_blind_spots():
    assert CONTROLLER_MANIFEST.universe("ctrlreg") == 32
    for block in (4, 6):
        assert CONTROLLER_MANIFEST.points_where("mux", block=block) == 0
        assert CONTROLLER_MANIFEST.points_where("ctrlreg", block=block) == 0
        assert CONTROLLER_MANIFEST.points_where("expression", block=block) > 0
