import pytest

from oitsolver import validation
from oitsolver.config import ValidationConfig
from oitsolver.errors import BlowUpError
from oitsolver.validation import Check, checks_frame, run_checks


def test_selected_groups_pass():
    rows = run_checks(ValidationConfig(checks=("approximations", "constant_boundary", "volterra")))
    assert [row.check for row in rows] == [
        "approx_zero_order_band",
        "approx_first_order_worst",
        "approx_first_order_improves",
        "constant_boundary_identities",
        "volterra_simpson_order",
        "volterra_exponential",
    ]
    assert all(row.passed for row in rows)


def test_cross_checks_pass():
    rows = run_checks(ValidationConfig(checks=("mixed_poles", "mixed_delta", "fd")))
    assert [row.check for row in rows] == ["three_layer_poles", "mixed_delta_sift", "fd_gaussian"]
    assert all(row.passed for row in rows)


def test_unknown_group_is_rejected():
    with pytest.raises(ValueError):
        run_checks(ValidationConfig(checks=("fig2",)))


def test_slow_groups_are_skipped_on_request():
    assert run_checks(ValidationConfig(checks=("stefan_long",), slow=False)) == []


def test_numeric_failures_become_failed_rows(monkeypatch):
    def explode(config):
        raise BlowUpError("diverged")

    monkeypatch.setitem(validation.CHECKS, "explode", (explode, False))
    rows = run_checks(ValidationConfig(checks=("explode",)))

    assert len(rows) == 1
    assert rows[0].check == "explode" and not rows[0].passed


def test_tolerance_comparison():
    assert validation._check("a", 1e-9, 1e-8).passed
    assert not validation._check("b", 1e-7, 1e-8).passed
    assert not validation._check("c", float("nan"), 1.0).passed


def test_checks_frame():
    frame = checks_frame([Check("a", True, 0.1, 1.0), Check("b", False, 2.0, 1.0)])
    assert list(frame.columns) == ["check", "passed", "value", "tolerance"]
    assert frame["passed"].tolist() == [True, False]


@pytest.mark.slow
def test_flat_reductions_and_orthogonality():
    rows = run_checks(ValidationConfig(checks=("orthogonality", "flat", "kernels")))
    assert all(row.passed for row in rows)


def test_laplace_route_group_runs_by_default():
    rows = run_checks(ValidationConfig(checks=("laplace",)))
    assert [row.check for row in rows] == ["laplace_route"]
    assert rows[0].passed, rows[0]


def test_stefan_group_runs_the_term_agreement_by_default():
    rows = run_checks(ValidationConfig(checks=("stefan",), stefan_tau_s=2.0))
    assert [row.check for row in rows][-1] == "stefan_terms_agree"
    assert all(row.passed for row in rows), [row for row in rows if not row.passed]


@pytest.mark.slow
def test_constant_threshold_against_the_oracle():
    rows = run_checks(ValidationConfig(checks=("obm_fd",)))
    assert all(row.passed for row in rows)


@pytest.mark.slow
def test_long_freezing_run():
    rows = run_checks(ValidationConfig(checks=("stefan_long",), slow=True))
    assert [row.check for row in rows] == ["stefan_long_terms_agree", "stefan_similarity_front"]
    assert all(row.passed for row in rows), rows
