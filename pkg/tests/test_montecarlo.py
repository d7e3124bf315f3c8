import json

import numpy as np
import pytest

from netmatch.distance import KernelSpec
from netmatch.errors import ConfigError
from netmatch.estimators import EstimatorConfig
from netmatch.model import LinkFunction, TrueParameters, no_influence
from netmatch.montecarlo import (
    DESIGN_KEYS,
    StudyDesign,
    emit_report,
    format_design,
    parse_design,
    parse_report_csv,
    run_replication,
    run_study,
)


@pytest.fixture(scope="module")
def small_report():
    return run_study(StudyDesign(sample_sizes=(50, 100), replications=3, master_seed=9))


def test_replication_is_deterministic():
    d = StudyDesign(replications=1)
    a, b = run_replication(d, 60, 4), run_replication(d, 60, 4)
    assert a == b
    assert set(a.bias) == {"matched", "naive", "infeasible", "with_controls"}
    assert run_replication(d, 60, 5).bias != a.bias


def test_degenerate_replication_recorded():
    d = StudyDesign(config=EstimatorConfig(kernel=KernelSpec(bandwidth=1e-12)), estimators=("matched", "naive"))
    rec = run_replication(d, 50, 0)
    assert rec.bias["matched"] is None
    assert rec.reasons["matched"].startswith("degenerate matching")
    assert rec.bias["naive"] is not None


def test_no_influence_estimators_differ():
    d = StudyDesign(params=TrueParameters([1.0], no_influence), estimators=("matched", "naive"))
    rec = run_replication(d, 200, 0)
    assert rec.bias["matched"] != rec.bias["naive"]


def test_single_replication_report():
    d = StudyDesign(sample_sizes=(80,), replications=1)
    rep = run_study(d)
    rec = run_replication(d, 80, 0)
    for name in d.estimators:
        c = rep.cell(80, name)
        assert c.mean_bias == rec.bias[name]
        assert c.std_dev is None
        assert c.used_replications + c.failed_replications == 1


def test_default_layout():
    rep = run_study(StudyDesign(replications=1))
    assert rep.sample_sizes == [50, 100, 150, 200, 250, 500]
    assert len(rep.cells) == 6 * 4


def test_cell_independence(small_report):
    other = run_study(StudyDesign(sample_sizes=(100,), replications=3, master_seed=9))
    for name in other.estimators:
        assert other.cell(100, name) == small_report.cell(100, name)


def test_parallel_matches_serial(small_report):
    par = run_study(StudyDesign(sample_sizes=(50, 100), replications=3, master_seed=9), jobs=2)
    for fmt in ("csv", "json", "markdown"):
        assert emit_report(par, fmt) == emit_report(small_report, fmt)


def test_report_formats(small_report):
    parsed = parse_report_csv(emit_report(small_report, "csv"))
    assert parsed == small_report.cells
    md = emit_report(small_report, "markdown").splitlines()
    assert md[0] == "| n | Matched | Naive Logit | Infeasible Logit | Logit with controls |"
    assert len(md) == 2 + 2
    doc = json.loads(emit_report(small_report, "json"))
    assert all("failed_replications" in c for c in doc["cells"])
    assert doc["design"]["master_seed"] == 9
    with pytest.raises(ConfigError):
        emit_report(small_report, "xml")


def test_design_validation():
    with pytest.raises(ConfigError):
        StudyDesign(replications=0)
    with pytest.raises(ConfigError):
        StudyDesign(sample_sizes=(5,))
    with pytest.raises(ConfigError):
        StudyDesign(estimators=("matched", "probit"))


def test_design_file_round_trip():
    text = """
    # blockmodel, short run
    sample_sizes = 50, 100
    replications = 4
    link = homophily
    seed = 3
    estimators = matched naive
    bandwidth = 0.2
    """
    d = parse_design("\n".join(line.strip() for line in text.splitlines()))
    assert d.sample_sizes == (50, 100) and d.replications == 4
    assert d.link.variant == "homophily" and d.master_seed == 3
    assert d.estimators == ("matched", "naive")
    assert d.config.kernel.bandwidth == 0.2
    again = parse_design(format_design(d))
    assert format_design(again) == format_design(d)


def test_design_file_errors():
    with pytest.raises(ConfigError) as err:
        parse_design("samples = 50\n", source="d.txt")
    for key in DESIGN_KEYS:
        assert key in str(err.value)
    with pytest.raises(ConfigError, match="grid"):
        parse_design("link = grid\n")
    with pytest.raises(ConfigError, match="unknown link"):
        parse_design("link = bogus\n")
    with pytest.raises(ConfigError):
        parse_design("replications = many\n")


def test_design_grid_link():
    d = parse_design("link = grid\ngrid = g.csv\n", grid_loader=lambda p: np.full((3, 3), 0.4))
    assert d.link.variant == "grid"


@pytest.mark.slow
@pytest.mark.xfail(strict=False, reason="blockmodel leaves within-block lambda variation unmatched; "
                   "the matched bias plateaus near -0.2 instead of shrinking (see README)")
def test_matched_bias_shrinks_from_150_to_500():
    rep = run_study(StudyDesign(sample_sizes=(150, 200, 250, 500), estimators=("matched",)))
    b = [abs(rep.cell(n, "matched").mean_bias) for n in (150, 200, 250, 500)]
    assert all(x >= y for x, y in zip(b, b[1:])), b
