from procfuzz.casestudy import MODES, format_report, run_casestudy


def test_casestudy_checks_pass():
    rep = run_casestudy()
    assert all(rep.checks.values()), rep.checks
    assert [r.mode for r in rep.results] == list(MODES)
    assert rep.ctrlreg_universe == 32
    full = rep.results[0]
    assert full.cycles <= 10_000 and full.b1_found and full.b2_found


def test_blind_metrics_see_no_focus_points():
    rep = run_casestudy()
    by_mode = {r.mode: r for r in rep.results}
    assert by_mode["mux"].feedback_points_blocks_4_6 == 0
    assert by_mode["ctrlreg"].feedback_points_blocks_4_6 == 0
    assert by_mode["full"].feedback_points_blocks_4_6 > 0


def test_report_is_deterministic():
    assert format_report(run_casestudy(3)) == format_report(run_casestudy(3))
