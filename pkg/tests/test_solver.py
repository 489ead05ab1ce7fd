import json

import numpy as np
import pytest

from bregprox.bregman import make_bregman, make_det_bregman, make_org
from bregprox.equilibrium import (Bifunction, example1_defect, make_example1, make_spd_logdet,
                                  regularize)
from bregprox.errors import ContractError, ConvergenceError, DomainError, ParameterError
from bregprox.manifolds import PositiveOrthant
from bregprox.solver import (CSV_HEADER, SolverConfig, SolverTrace, fd_gradient,
                             read_iterates_csv, read_trace_csv, solve_inner_extragradient,
                             solve_inner_logchart, solve_outer, subproblem_residual, verify_run)

X0 = np.array([20.0, 5.0, 3.0])
EX1 = make_example1()


@pytest.fixture(scope="module")
def org_run():
    return solve_outer(EX1, make_org(EX1.manifold), X0, SolverConfig(lam=0.3))


def _zero_bifunction(dim=3):
    m = PositiveOrthant(dim)
    return Bifunction(m, lambda x, y: 0.0, EX1.feasible, "zero",
                      y_gradient=lambda x: np.zeros_like(x))


# ---------------------------------------------------------------------------
# configuration

@pytest.mark.parametrize("kw", [
    dict(lam=0.0), dict(lam=[0.3, -1.0]), dict(lam=[]), dict(lam=np.inf),
    dict(inner_tol=0.0), dict(outer_tol=-1.0), dict(armijo_mu=1.0), dict(armijo_beta=0.0),
    dict(inner_method="newton"), dict(max_outer=0), dict(max_inner=0),
])
def test_config_rejects_bad_values(kw):
    with pytest.raises(ParameterError):
        SolverConfig(**kw)


def test_lambda_schedule_repeats_last_value():
    cfg = SolverConfig(lam=[0.9, 0.6, 0.3])
    assert [cfg.lambda_at(n) for n in range(5)] == [0.9, 0.6, 0.3, 0.3, 0.3]
    assert cfg.to_dict()["lam"] == [0.9, 0.6, 0.3]
    assert SolverConfig(lam=0.6).to_dict()["lam"] == 0.6


# ---------------------------------------------------------------------------
# finite-difference surrogate

def test_fd_gradient_matches_log_chart_gradient():
    phi = make_org(EX1.manifold)
    g = regularize(EX1, phi, X0, 0.3)
    y = np.array([10.0, 4.0, 6.0])
    grad = fd_gradient(g, y)
    # in log coordinates the partial of g(y, .) at y is exact and affine
    gy = g.partial(y)
    h = 1e-6
    du = np.array([(gy(y * np.exp(h * e)) - gy(y * np.exp(-h * e))) / (2 * h)
                   for e in np.eye(3)])
    # G(x) = diag(x^-2): the Riemannian gradient is x^2 * Euclidean = x * du
    assert np.allclose(grad, y * du, rtol=1e-6, atol=1e-8)


# ---------------------------------------------------------------------------
# inner solvers

@pytest.mark.parametrize("solver", [solve_inner_extragradient, solve_inner_logchart])
def test_inner_returns_start_when_start_solves(solver):
    # F = 0 and the anchor equal to the start: g(x_n, .) vanishes identically
    x_n = np.array([4.0, 3.0, 2.0])
    g = regularize(_zero_bifunction(), make_org(PositiveOrthant(3)), x_n, 0.3)
    y, k = solver(g, x_n, SolverConfig())
    assert k == 1
    # the log chart round trip exp(ln x) may move the last bit
    assert np.allclose(y, x_n, rtol=1e-15, atol=0)


def test_inner_residual_on_grid_at_first_subproblem():
    cfg = SolverConfig(lam=0.3)
    g = regularize(EX1, make_org(EX1.manifold), X0, 0.3)
    y, _ = solve_inner_extragradient(g, X0, cfg)
    res = subproblem_residual(g, y, cfg=cfg)
    # 360 of the 10^3 grid points fall inside the ball
    assert res.samples == 360
    assert res.threshold == pytest.approx(-1e-2)
    assert res.holds, res.to_dict()


def test_inner_residual_detects_unsolved_point():
    cfg = SolverConfig(lam=0.3)
    g = regularize(EX1, make_org(EX1.manifold), X0, 0.3)
    assert not subproblem_residual(g, X0, cfg=cfg).holds


def test_inner_spd_logdet_det_steps_decrease():
    # with the det Bregman the subproblem operator at y is (1 + lam (det y - 1)) y,
    # which has a zero only when lam > 1, so lam = 2 is used here
    f = make_spd_logdet(2)
    g = regularize(f, make_det_bregman(2), np.eye(2), 2.0)
    history = []
    y, k = solve_inner_extragradient(g, np.eye(2), SolverConfig(lam=2.0), history=history)
    assert k == len(history) > 10
    assert np.all(np.diff(history) < 0)
    assert history[-1] < 1e-3
    assert np.linalg.det(y) == pytest.approx(0.5, abs=0.05)


def test_inner_exceeding_max_inner_raises():
    g = regularize(EX1, make_org(EX1.manifold), X0, 0.3)
    with pytest.raises(ConvergenceError):
        solve_inner_extragradient(g, X0, SolverConfig(max_inner=3))


def test_inner_rejects_infeasible_start():
    g = regularize(EX1, make_org(EX1.manifold), X0, 0.3)
    with pytest.raises(DomainError):
        solve_inner_extragradient(g, np.array([0.5, 2.0, 2.0]), SolverConfig())


def test_logchart_rejects_spd():
    g = regularize(make_spd_logdet(2), make_det_bregman(2), np.eye(2), 2.0)
    with pytest.raises(ContractError):
        solve_inner_logchart(g, np.eye(2), SolverConfig())


@pytest.mark.parametrize("key", ["org", "breg1", "breg2"])
@pytest.mark.parametrize("x_n", [X0, np.array([6.0, 2.0, 30.0]), np.array([3.0, 3.0, 4.0])])
def test_inner_methods_agree(key, x_n):
    cfg = SolverConfig(lam=0.3)
    g = regularize(EX1, make_bregman(key), x_n, 0.3)
    y_eg, _ = solve_inner_extragradient(g, x_n, cfg)
    y_lc, _ = solve_inner_logchart(g, x_n, cfg)
    assert EX1.manifold.dist(y_eg, y_lc) <= 1e-2


def test_logchart_defect_invariant_under_shift_orthogonal_to_defect():
    # u -> u + c (1, 0, 1) leaves u1 + u2 - u3 unchanged, and both F and the
    # Org distance only see differences in u, so the solved defect is unchanged
    cfg = SolverConfig(lam=0.3)
    phi = make_org(EX1.manifold)
    defects = []
    for c in (0.0, 0.5, 1.5):
        x_n = X0 * np.exp(c * np.array([1.0, 0.0, 1.0]))
        y, _ = solve_inner_logchart(regularize(EX1, phi, x_n, 0.3), x_n, cfg)
        defects.append(example1_defect(y))
    assert np.allclose(defects, defects[0], atol=1e-9)


# ---------------------------------------------------------------------------
# outer loop

def test_outer_stops_immediately_at_solution():
    x0 = np.array([2.0, 2.0, 4.0])
    trace = solve_outer(EX1, make_org(EX1.manifold), x0, SolverConfig(lam=0.3))
    assert trace.termination_reason == "converged"
    assert trace.outer_iters <= 2
    assert trace.records[0].er <= 1e-3


def test_outer_org_converges_to_solution_set(org_run):
    assert org_run.termination_reason == "converged"
    assert org_run.final_er <= 1e-6
    assert abs(example1_defect(org_run.final_point)) <= 1e-3
    assert 35 <= org_run.outer_iters <= 140
    assert all(EX1.feasible.contains(x) for x in org_run.iterates)


def test_outer_logchart_method_converges():
    trace = solve_outer(EX1, make_org(EX1.manifold), X0,
                        SolverConfig(lam=0.6, inner_method="logchart-exact"))
    assert trace.termination_reason == "converged"
    assert abs(example1_defect(trace.final_point)) <= 1e-3


def test_outer_max_outer_reason():
    trace = solve_outer(EX1, make_org(EX1.manifold), X0, SolverConfig(max_outer=3))
    assert trace.termination_reason == "max_outer"
    assert trace.outer_iters == 3


def test_outer_inner_failure_carries_partial_trace():
    with pytest.raises(ConvergenceError) as info:
        solve_outer(EX1, make_org(EX1.manifold), X0, SolverConfig(max_inner=2))
    partial = info.value.partial
    assert isinstance(partial, SolverTrace)
    assert partial.termination_reason == "inner_failure"
    assert np.array_equal(partial.x0, X0)


@pytest.mark.parametrize("x0", [[1.0, 5.0, 3.0], [0.5, 5.0, 3.0]])
def test_outer_rejects_x0_outside_c(x0):
    with pytest.raises(DomainError):
        solve_outer(EX1, make_bregman("breg2"), np.array(x0), SolverConfig())


def test_outer_rejects_c1_violation():
    m = PositiveOrthant(3)
    f = Bifunction(m, lambda x, y: float(np.sum(np.log(y))), EX1.feasible, "bad", check_c1=False)
    with pytest.raises(ContractError):
        solve_outer(f, make_org(m), X0, SolverConfig())


def test_outer_is_deterministic(tmp_path, org_run):
    again = solve_outer(EX1, make_org(EX1.manifold), X0, SolverConfig(lam=0.3))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    org_run.write_csv(a)
    again.write_csv(b)
    assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------------------
# serialization

def test_trace_csv_round_trip(tmp_path, org_run):
    phi = make_org(EX1.manifold)
    org_run.attach_reference(EX1.solution_projector(org_run.final_point), phi)
    path = tmp_path / "t.csv"
    org_run.write_csv(path, timing=True)
    assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    rows = read_trace_csv(path)
    assert len(rows) == org_run.outer_iters
    for row, rec in zip(rows, org_run.records):
        assert row["Er"] == rec.er and row["D_step"] == rec.d_step
        assert row["D_to_ref"] == rec.d_to_ref
        assert row["elapsed_ms"] is not None
    org_run.write_iterates(tmp_path / "x.csv")
    xs = read_iterates_csv(tmp_path / "x.csv")
    assert all(np.array_equal(a, b) for a, b in zip(xs, org_run.iterates))


def test_trace_csv_blank_timing_by_default(tmp_path, org_run):
    path = tmp_path / "t.csv"
    org_run.write_csv(path)
    assert all(r["elapsed_ms"] is None for r in read_trace_csv(path))


def test_trace_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ContractError):
        read_trace_csv(path)


def test_trace_summary_json(tmp_path, org_run):
    path = tmp_path / "s.json"
    org_run.write_summary(path)
    data = json.loads(path.read_text())
    assert set(data) >= {"config", "termination_reason", "outer_iters", "total_inner_iters",
                         "final_point", "wall_time_s"}
    assert data["outer_iters"] == org_run.outer_iters
    assert data["total_inner_iters"] == sum(r.inner_iters for r in org_run.records)


# ---------------------------------------------------------------------------
# run invariants

def test_verify_run_passes_on_converged_run(org_run):
    rep = verify_run(org_run, EX1, make_org(EX1.manifold))
    assert rep.fejer_holds and rep.final_step_holds and rep.partial_sums_hold
    assert rep.optimality_holds, rep.optimality_min
    assert rep.passed


def test_verify_run_fejer_fails_on_shuffled_iterates(org_run):
    rng = np.random.default_rng(0)
    records = list(org_run.records)
    xs = [r.x for r in records]
    order = rng.permutation(len(xs))
    shuffled = SolverTrace(x0=org_run.x0, config=org_run.config)
    for r, i in zip(records, order):
        shuffled.records.append(type(r)(n=r.n, x=xs[i], er=r.er, inner_iters=r.inner_iters,
                                        lam=r.lam, d_step=r.d_step))
    rep = verify_run(shuffled, EX1, make_org(EX1.manifold),
                     x_ref=EX1.solution_projector(org_run.final_point))
    assert not rep.fejer_holds
    assert not rep.passed


def test_verify_run_single_point_trace_is_vacuous():
    trace = SolverTrace(x0=X0.copy())
    rep = verify_run(trace, EX1, make_org(EX1.manifold))
    assert rep.passed


def test_verify_run_needs_reference_without_projector():
    f = make_spd_logdet(2)
    with pytest.raises(ContractError):
        verify_run(SolverTrace(x0=np.eye(2)), f, make_det_bregman(2))
