"""Merits, potentials, contraction checks, numeric oracles, trace export."""

import csv
import json
import math

import numpy as np
import pytest

import viaccel as va
import viaccel.certify as C
from viaccel.harness import (CSV_HEADER, IterateTrace, TraceRecord,
                             restricted_recursion_terms,
                             unrestricted_recursion_terms)


def _quad_objective():
    return va.SmoothObjective(dimension=1, value=lambda x: 0.5 * float(x @ x),
                              gradient=lambda x: x.copy(), mu=1.0, lip=1.0,
                              minimizer=[0.0], optimal_value=0.0)


def _manual_cert(rate):
    return C.RateCertificate(regime=C.REGIME_OPT, feasible=True, a=1.0 - rate,
                             b=0.0, theta_lo=0.0, theta_hi=1.0 - rate,
                             theta_default=0.0, rate=rate)


def _synthetic_trace(potentials, method="vanilla", meta=None):
    tr = IterateTrace(kind="custom", method=method,
                      params=va.ViParams(alpha=0.1), meta=meta or {})
    for k, p in enumerate(potentials):
        tr.records.append(TraceRecord(k=k, merit_primary=1.0, merit_aux=None,
                                      dist_sq=None, potential=p, elapsed_ns=0))
    return tr


# --- merit -------------------------------------------------------------------

def test_merit_objective_reports_gradient_norm_and_gap():
    assert va.merit(_quad_objective(), np.array([3.0])) == (3.0, 4.5)
    blind = va.gen_logistic(6, 2, 0.01, 0)  # no recorded optimum
    gn, gap = va.merit(blind, np.zeros(6))
    assert gn >= 0.0 and gap is None


def test_merit_whole_space_equals_operator_norm():
    prob = va.MonotoneProblem(dimension=2, operator=lambda z: z.copy(),
                              feasible_set=va.WholeSpace(2), mu=1.0, lip=1.0,
                              solution=np.zeros(2))
    assert va.merit(prob, np.array([3.0, 4.0])) == (5.0, 5.0)


def test_merit_constrained_reports_complementarity_and_residual():
    prob = va.MonotoneProblem(dimension=2,
                              operator=lambda z: z - np.array([1.0, -1.0]),
                              feasible_set=va.NonnegativeOrthant(2),
                              mu=1.0, lip=1.0, solution=[1.0, 0.0])
    primary, res = va.merit(prob, np.array([2.0, 0.0]))
    assert primary == 2.0  # |z . F(z)| = |2*1 + 0*1|
    assert res == 1.0
    at_solution = va.merit(prob, np.array([1.0, 0.0]))
    assert at_solution[0] <= 1e-15 and at_solution[1] <= 1e-15


# --- potentials ----------------------------------------------------------------

def test_vi_distance_potential_value_and_guard():
    prob = va.MonotoneProblem(dimension=1, operator=lambda z: z.copy(),
                              feasible_set=va.WholeSpace(1), mu=1.0, lip=1.0,
                              solution=np.zeros(1))
    phi = va.vi_distance_potential(prob, 0.5)
    st = va.ViState(z_curr=np.array([2.0]), z_prev=np.array([1.0]),
                    f_curr=np.array([2.0]), f_prev=np.array([1.0]))
    assert phi(st) == 4.5  # 2^2 + 0.5 * 1^2
    unsolved = va.MonotoneProblem(dimension=1, operator=lambda z: z.copy(),
                                  feasible_set=va.WholeSpace(1), mu=1.0, lip=1.0)
    with pytest.raises(ValueError):
        va.vi_distance_potential(unsolved, 0.5)


def test_opt_potential_value_and_guard():
    phi = va.opt_potential(_quad_objective(), 0.5)
    st = va.OptState(x_curr=np.array([1.0]), v_curr=np.array([2.0]))
    assert phi(st) == 2.5  # (0.5 - 0) + 0.5 * 4
    with pytest.raises(ValueError):
        va.opt_potential(va.gen_logistic(5, 2, 0.01, 0), 0.5)


def test_ogda_potential_controls_distance_and_decays():
    prob, _ = va.gen_linear_vi(20, 3, 1e-2)
    alpha = 1.0 / (2.0 * prob.lip)
    tau = alpha / (1.0 + prob.sigma)
    tr = va.run(prob, "ogda", va.ViParams(alpha=alpha, tau=tau), np.ones(20),
                va.StopRule(max_iter=1500),
                potential=va.ogda_potential(prob))
    pot = tr.column("potential")
    dsq = tr.column("dist_sq")
    sg = prob.sigma
    assert all(p >= 0.5 * d - 1e-12 * max(1.0, d) for p, d in zip(pot, dsq))
    assert all((1.0 + sg) * pot[i + 1] <= pot[i] + 1e-9 * pot[0]
               for i in range(len(pot) - 1))
    with pytest.raises(ValueError):
        va.ogda_potential(va.MonotoneProblem(dimension=1,
                                             operator=lambda z: z.copy(),
                                             feasible_set=va.WholeSpace(1),
                                             mu=1.0, lip=1.0))


# --- contraction checking ---------------------------------------------------------

def test_check_contraction_passes_on_a_certified_run():
    prob, _ = va.gen_linear_vi(20, 3, 1e-2)
    params = C.default_params(C.REGIME_VI_UNRESTRICTED, prob.mu, prob.lip)
    cert = va.certify_vi_unrestricted(prob.mu, prob.lip, params)
    assert cert.feasible
    tr = va.run(prob, "extra-point", params, np.ones(20),
                va.StopRule(max_iter=500),
                potential=va.vi_distance_potential(prob, cert.theta_default))
    report = va.check_contraction(tr, cert)
    assert report.ok
    assert report.rate == cert.rate
    assert report.checked_steps == 500
    assert report.violating_iters == ()
    assert report.max_violation <= 1e-9
    assert report.endpoint_excess is None


def test_check_contraction_requires_potential_data():
    prob, _ = va.gen_linear_vi(5, 0, 0.05)
    tr = va.run(prob, "vanilla", va.ViParams(alpha=0.02), np.ones(5),
                va.StopRule(max_iter=5))
    with pytest.raises(ValueError):
        va.check_contraction(tr, _manual_cert(0.9))


def test_check_contraction_flags_growth():
    tr = _synthetic_trace([1.0, 2.0, 4.0])
    report = va.check_contraction(tr, _manual_cert(0.9))
    assert not report.ok
    assert report.violating_iters == (0, 1)
    assert report.max_violation == pytest.approx(2.0 - 0.9, rel=1e-15)


def test_check_contraction_zero_potential_counts_as_settled():
    tr = _synthetic_trace([0.0, 0.0, 0.0])
    report = va.check_contraction(tr, _manual_cert(0.9))
    assert report.ok
    assert report.checked_steps == 2
    assert report.max_violation == -0.9
    grown = _synthetic_trace([0.0, 1.0])
    bad = va.check_contraction(grown, _manual_cert(0.9))
    assert not bad.ok and bad.max_violation == math.inf


def test_check_contraction_skips_thinned_pairs():
    tr = IterateTrace(kind="custom", method="vanilla",
                      params=va.ViParams(alpha=0.1))
    for k, p in ((0, 1.0), (2, 0.5)):
        tr.records.append(TraceRecord(k=k, merit_primary=1.0, merit_aux=None,
                                      dist_sq=None, potential=p, elapsed_ns=0))
    report = va.check_contraction(tr, _manual_cert(0.9))
    assert report.checked_steps == 0
    assert report.ok


def test_check_contraction_endpoint_bounds_for_past_gradient():
    prob, _ = va.gen_linear_vi(20, 3, 1e-2)
    alpha = 1.0 / (2.0 * prob.lip)
    tau = alpha / (1.0 + prob.sigma)
    tr = va.run(prob, "ogda", va.ViParams(alpha=alpha, tau=tau), np.ones(20),
                va.StopRule(max_iter=1500),
                potential=va.ogda_potential(prob))
    # The potential contracts up to float noise that is absolute in the starting
    # value, so anchor the tolerance there; ratios jitter once V hits ~1e-29.
    atol = 1e-9 * tr.records[0].potential
    report = va.check_contraction(tr, _manual_cert(1.0 / (1.0 + prob.sigma)),
                                  atol=atol)
    assert report.endpoint_excess is not None
    assert report.endpoint_excess <= 0.0
    assert report.ok


def test_check_contraction_endpoint_bounds_for_opt_scheme():
    obj = va.gen_quadratic(8, 2, 0.05)
    params = C.default_params(C.REGIME_OPT, obj.mu, obj.lip)
    cert = va.certify_opt(obj.mu, obj.lip, params)
    assert cert.feasible
    tr = va.run(obj, "opt-extra-point", params, np.ones(8),
                va.StopRule(max_iter=200),
                potential=va.opt_potential(obj, 0.5 * obj.mu))
    atol = 1e-12 * (1.0 + abs(obj.optimal_value))
    report = va.check_contraction(tr, cert, atol=atol)
    assert report.ok
    assert report.endpoint_excess is not None and report.endpoint_excess <= 0.0


# --- one-step recursion audits ------------------------------------------------

def test_unrestricted_recursion_bound_holds_on_stepper_output():
    prob, _ = va.gen_linear_vi(5, 4, 0.05)
    params = C.default_params(C.REGIME_VI_UNRESTRICTED, prob.mu, prob.lip)
    rng = np.random.default_rng(0)
    for _ in range(50):
        zc = rng.standard_normal(5)
        zp = rng.standard_normal(5)
        st = va.ViState(z_curr=zc, z_prev=zp, f_curr=prob.operator(zc),
                        f_prev=prob.operator(zp))
        out = va.step_extra_point(prob, st, params)
        terms = unrestricted_recursion_terms(
            params, prob.mu, prob.lip, prob.operator,
            zp, zc, out.z_half, out.z_curr, prob.solution)
        scale = 1.0 + abs(terms["lhs"]) + abs(terms["rhs"])
        assert terms["slack"] >= -1e-8 * scale


def test_restricted_recursion_bound_holds_on_stepper_output():
    prob, _ = va.gen_linear_vi(5, 4, 0.05, constrained=True)
    params = C.default_params(C.REGIME_VI_RESTRICTED, prob.mu, prob.lip)
    rng = np.random.default_rng(1)
    for _ in range(50):
        zc = prob.feasible_set.project(rng.standard_normal(5))
        zp = prob.feasible_set.project(rng.standard_normal(5))
        st = va.ViState(z_curr=zc, z_prev=zp, f_curr=prob.operator(zc),
                        f_prev=prob.operator(zp))
        out = va.step_extra_point(prob, st, params, restricted=True)
        terms = restricted_recursion_terms(
            params, prob.mu, prob.lip, prob.operator,
            zp, zc, out.z_half, out.z_curr, prob.solution)
        scale = 1.0 + abs(terms["lhs"]) + abs(terms["rhs"])
        assert terms["slack"] >= -1e-8 * scale


# --- numeric oracles -------------------------------------------------------------

def test_finite_diff_grad_on_callable_and_objective():
    fd = va.finite_diff_grad(lambda x: 0.5 * float(x @ x), np.array([1.0, 2.0]))
    assert np.allclose(fd, [1.0, 2.0], rtol=0, atol=1e-9)
    assert np.array_equal(va.finite_diff_grad(lambda x: 7.0, np.ones(3)),
                          np.zeros(3))
    obj = va.gen_quadratic(6, 0, 0.1)
    x = np.linspace(-1, 1, 6)
    assert np.allclose(va.finite_diff_grad(obj, x), obj.gradient(x),
                       rtol=1e-7, atol=1e-7)


def test_finite_diff_jacobian_recovers_a_linear_map():
    rng = np.random.default_rng(2)
    M = rng.standard_normal((4, 4))
    J = va.finite_diff_jacobian(lambda z: M @ z, np.zeros(4))
    assert np.allclose(J, M, rtol=0, atol=1e-9)


def test_power_iteration_norm_reference_values():
    assert va.power_iteration_norm(3.0 * np.eye(5)) == pytest.approx(3.0, abs=1e-10)
    n = 40
    est = va.power_iteration_norm(np.diag(np.arange(1.0, n + 1.0)))
    assert est == pytest.approx(float(n), rel=1e-3)
    assert est <= n * (1.0 + 1e-12)  # one-sided estimate
    assert va.power_iteration_norm(np.zeros((3, 3))) == 0.0


def test_power_iteration_norm_rectangular_and_callable():
    M = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    assert va.power_iteration_norm(M) == pytest.approx(2.0, rel=1e-12)
    sq = np.array([[2.0, 1.0], [-1.0, 1.0]])
    direct = va.power_iteration_norm(sq)
    via_callable = va.power_iteration_norm(lambda v: sq @ v, dimension=2,
                                           adjoint=lambda v: sq.T @ v)
    assert direct == pytest.approx(via_callable, rel=1e-12)
    with pytest.raises(ValueError):
        va.power_iteration_norm(lambda v: v, dimension=2)
    with pytest.raises(ValueError):
        va.power_iteration_norm(np.ones(3))


def test_norm_of_diagonal_plus_skew_dominates_the_diagonal():
    # ||Q + A|| >= max_i Q_ii always; coupling makes it strictly larger here
    sq = np.array([[2.0, 1.0], [-1.0, 1.0]])
    got = va.power_iteration_norm(sq)
    expected = math.sqrt((7.0 + math.sqrt(13.0)) / 2.0)  # exact eigensolve
    assert got == pytest.approx(expected, rel=1e-12)
    assert got > 2.0
    rng = np.random.default_rng(3)
    for _ in range(20):
        q = np.abs(rng.standard_normal(4)) + 0.1
        t = rng.standard_normal((4, 4))
        a = np.triu(t, 1) - np.triu(t, 1).T
        assert va.power_iteration_norm(np.diag(q) + a) >= q.max() * (1.0 - 1e-9)


def test_reference_minimum_on_the_logit_objective():
    obj = va.gen_logistic(15, 2, 0.005, 0)
    x, fval, iters = va.reference_minimum(obj)
    assert fval == 0.2891770749877034
    assert iters == 24
    assert float(np.linalg.norm(obj.gradient(x))) <= 1e-12
    # the solution is tight enough to pass the container's acceptance check
    va.SmoothObjective(dimension=15, value=obj.value, gradient=obj.gradient,
                       mu=obj.mu, lip=obj.lip, minimizer=x, optimal_value=fval)


# --- trace export -----------------------------------------------------------------

def _small_trace():
    prob, _ = va.gen_linear_vi(4, 0, 0.05)
    return va.run(prob, "vanilla", va.ViParams(alpha=0.05), np.ones(4),
                  va.StopRule(max_iter=24),
                  potential=va.vi_distance_potential(prob, 0.1))


def test_csv_round_trip_is_bit_exact(tmp_path):
    tr = _small_trace()
    path = tmp_path / "trace.csv"
    va.write_trace_csv(tr, path)
    rows = list(csv.DictReader(path.open()))
    header = path.open().readline().strip()
    assert header == CSV_HEADER
    assert len(rows) == len(tr.records)
    for row, rec in zip(rows, tr.records):
        assert int(row["k"]) == rec.k
        assert float(row["merit_primary"]) == rec.merit_primary
        assert float(row["potential"]) == rec.potential
        assert float(row["dist_sq"]) == rec.dist_sq


def test_csv_thinning_keeps_first_stride_and_last(tmp_path):
    tr = _small_trace()
    path = tmp_path / "thin.csv"
    va.write_trace_csv(tr, path, thinning=10)
    rows = list(csv.DictReader(path.open()))
    assert [int(r["k"]) for r in rows] == [0, 10, 20, 24]


def test_csv_blank_cells_for_absent_columns(tmp_path):
    prob, _ = va.gen_linear_vi(4, 0, 0.05)
    tr = va.run(prob, "vanilla", va.ViParams(alpha=0.05), np.ones(4),
                va.StopRule(max_iter=3))  # no potential callable
    path = tmp_path / "bare.csv"
    va.write_trace_csv(tr, path)
    rows = list(csv.DictReader(path.open()))
    assert all(r["potential"] == "" for r in rows)


def test_jsonl_round_trip_with_nulls(tmp_path):
    prob, _ = va.gen_linear_vi(4, 0, 0.05)
    tr = va.run(prob, "vanilla", va.ViParams(alpha=0.05), np.ones(4),
                va.StopRule(max_iter=5))
    path = tmp_path / "trace.jsonl"
    va.write_trace_jsonl(tr, path)
    lines = [json.loads(ln) for ln in path.read_text().splitlines()]
    assert len(lines) == len(tr.records)
    for obj, rec in zip(lines, tr.records):
        assert obj["k"] == rec.k
        assert obj["merit_primary"] == rec.merit_primary
        assert obj["potential"] is None
        assert obj["dist_sq"] == rec.dist_sq
