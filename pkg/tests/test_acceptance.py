"""Acceptance gate: every scenario at its reference configuration.

One test per criterion; each prints a PASS/FAIL line with the measured
values so the suite output doubles as the verification record.  The
reference configurations are the documented defaults of the CLI scenarios
(box d=3, n=16, eta=0.125 unless a criterion pins something else).
"""

import json
import time

from dumbbell.experiments import ScenarioConfig, run_scenario

_REPORT_CACHE = {}
RESULT_LINES = []


def _record(line):
    RESULT_LINES.append(line)
    print(line)


def scenario_report(name, **overrides):
    key = (name, tuple(sorted(overrides.items())))
    if key not in _REPORT_CACHE:
        cfg = ScenarioConfig.from_mapping({"scenario": name, **overrides})
        _REPORT_CACHE[key] = run_scenario(cfg)
    return _REPORT_CACHE[key]


def verdict(report, name):
    for v in report.verdicts:
        if v.name == name:
            return v
    raise AssertionError(f"verdict '{name}' missing from {report.scenario} report")


def check(criterion, report, names):
    assert not report.failures, f"ACCEPTANCE {criterion}: scenario failed: {report.failures}"
    picked = [verdict(report, n).to_dict() for n in names]
    ok = all(v["pass"] for v in picked)
    detail = "; ".join(
        f"{v['name']}={v['measured']} {v['comparator']} {v['threshold']}" for v in picked
    )
    _record(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"ACCEPTANCE {criterion} failed: {detail}"


def test_c01_eigenvalue_scaling():
    start = time.perf_counter()
    report = scenario_report("scaling")
    check("01 eigenvalue-scaling", report,
          ["eigenvalue-scaling-slope", "oracle-scaling-slope"])
    assert time.perf_counter() - start < 300  # runtime budget


def test_c02_minmax_sandwich():
    report = scenario_report("scaling")
    check("02 minmax-sandwich", report, ["minmax-sandwich"])


def test_c03_spectral_gap():
    report = scenario_report("gap")
    check("03 spectral-gap", report, ["gap-neumann-match", "simplicity-ratio"])


def test_c04_plateaus():
    report = scenario_report("plateau")
    check("04 plateaus", report, ["plateau-final", "plateau-monotone"])


def test_c05_collar_convergence():
    report = scenario_report("collar")
    check("05 collar-convergence", report, ["collar-final", "collar-monotone"])


def test_c06_harmonic_model():
    report = scenario_report("harmonic-approx")
    check("06 harmonic-model", report,
          ["flat-harmonic-exact", "deviation-halving", "fourier-vs-closed-form"])


def test_c07_volume_preservation():
    report = scenario_report("scaling")
    check("07 volume-preservation", report, ["volume-preservation"])


def test_c08_nodal_verdicts():
    report = scenario_report("nodal")
    check("08 nodal-verdicts", report,
          ["nodal-components", "nodal-contained", "single-crossing",
           "nodal-domains", "regular-gradient"])


def test_c09_oracle_equivalence():
    report = scenario_report("oracle-compare")
    check("09 oracle-equivalence", report, ["oracle-equivalence"])


def test_c10_mollification():
    report = scenario_report("mollify")
    check("10 mollification", report,
          ["mollify-monotone", "mollify-final-difference", "mollify-vector"])


def test_c11_morse_benchmark():
    report = scenario_report("morse")
    check("11 morse-benchmark", report, ["cosine-benchmark-counts", "betti-bound"])
    # the eigenfunction census is report-only and must have completed
    assert "eigenfunction" in report.tables
    assert report.tables["eigenfunction"]["rows"]


def test_c12_determinism():
    first = scenario_report("scaling").to_dict()
    second = run_scenario(ScenarioConfig.from_mapping({"scenario": "scaling"})).to_dict()
    for d in (first, second):
        d.pop("timings")
    same = json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)
    _record(f"ACCEPTANCE 12: {'PASS' if same else 'FAIL'} (byte-identical modulo timings)")
    assert same
