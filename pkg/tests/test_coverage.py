from regmap.corpus import RegulationControl
from regmap.coverage import coverage_report, per_family_csv


def control(cid, family):
    return RegulationControl(
        regulation_id="R", control_id=cid, family=family, title=cid, text=f"{cid} control text"
    )


CONTROLS = [
    control("AC-6", "AC"),
    control("SC-13", "SC"),
    control("SC-28", "SC"),
    control("IA-5(1)", "IA"),
]


def test_partial_coverage():
    report = coverage_report("R", CONTROLS, [("c1", "SC-13"), ("c2", "SC-28")])
    assert report.covered == frozenset({"SC-13", "SC-28"})
    assert report.gaps == frozenset({"AC-6", "IA-5(1)"})
    assert report.coverage_ratio == 0.5
    assert report.per_family == {"AC": (0, 1), "SC": (2, 2), "IA": (0, 1)}


def test_no_mappings():
    report = coverage_report("R", CONTROLS, [])
    assert report.coverage_ratio == 0.0
    assert report.gaps == frozenset(c.control_id for c in CONTROLS)


def test_full_coverage():
    mappings = [(f"c{i}", c.control_id) for i, c in enumerate(CONTROLS)]
    report = coverage_report("R", CONTROLS, mappings)
    assert report.coverage_ratio == 1.0
    assert report.gaps == frozenset()


def test_partition_invariant():
    report = coverage_report("R", CONTROLS, [("c1", "AC-6"), ("c1", "AC-6")])
    all_ids = frozenset(c.control_id for c in CONTROLS)
    assert report.covered | report.gaps == all_ids
    assert report.covered & report.gaps == frozenset()


def test_monotone_under_additional_mapping():
    base = coverage_report("R", CONTROLS, [("c1", "SC-13")])
    more = coverage_report("R", CONTROLS, [("c1", "SC-13"), ("c2", "AC-6")])
    assert base.covered <= more.covered
    assert len(more.gaps) <= len(base.gaps)


def test_unknown_control_ignored():
    report = coverage_report("R", CONTROLS, [("c1", "ZZ-99")])
    assert report.covered == frozenset()


def test_family_csv():
    report = coverage_report("R", CONTROLS, [("c1", "SC-13")])
    lines = per_family_csv(report).strip().splitlines()
    assert lines[0] == "family,covered,total,ratio"
    assert "SC,1,2,0.5000" in lines


def test_json_shape():
    report = coverage_report("R", CONTROLS, [("c1", "SC-28")])
    data = report.to_json_dict()
    assert data["per_family"]["SC"] == {"covered": 1, "total": 2}
    assert "SC-28" in data["covered"]
