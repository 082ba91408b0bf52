import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shanks_accel.drivers import (
    METHODS,
    AtmState,
    MethodConfig,
    QuasiNewtonMatrixView,
    Status,
    apply_H_beta,
    atm_step,
    explicit_H,
    h_recursive_projected,
    h_recursive_secant,
    mmpe_matrix,
    run_continuous_alpha,
    run_method,
    run_restarted,
    stabilize,
    stabilized_step,
)
from shanks_accel.errors import BudgetExhausted, ConfigError, Diverged
from shanks_accel.problems import (
    SparseStochasticMatrix,
    make_linear_problem,
    make_pagerank_problem,
    random_linear_problem,
)
from shanks_accel.regularization import RegularizationPolicy
from shanks_accel.shanks import solve_alpha_minres

FIXED0 = RegularizationPolicy.fixed(0.0)


def scalar_problem(a=0.5, b=1.0, s0=0.0):
    return make_linear_problem(np.array([[a]]), np.array([b]), np.array([s0]))


def check_record(rec, tol=1e-7):
    assert rec.g_eval_count == len(rec.residuals)
    if rec.status is Status.CONVERGED:
        assert rec.residuals[-1] < tol
    for i, _ in rec.lambdas:
        assert 0 <= i <= rec.g_eval_count


# --- configuration ---------------------------------------------------------


def test_config_validation_paths():
    with pytest.raises(ConfigError, match="method"):
        MethodConfig("Nope")
    with pytest.raises(ConfigError, match="mixing_beta"):
        MethodConfig("AA", mixing_beta=0.0)
    with pytest.raises(ConfigError, match="tau"):
        MethodConfig("StabilizedAA", tau=1.0)
    with pytest.raises(ConfigError, match="window"):
        MethodConfig("RNLA", window=2)
    with pytest.raises(ConfigError, match="reg"):
        MethodConfig("RNLA", reg=RegularizationPolicy.gcv())
    with pytest.raises(ConfigError, match="reg"):
        MethodConfig("ATM-MPE", reg=RegularizationPolicy.gcv())


def test_default_policies():
    assert MethodConfig("RNLA").reg.kind == "grid"
    assert MethodConfig("RRRE").reg.kind == "gcv"
    assert MethodConfig("RAA").reg.kind == "gcv"
    assert MethodConfig("AA").reg == FIXED0
    assert MethodConfig("SVDA").coefficient_strategy().svda_sum_normalize


# --- restarted -------------------------------------------------------------


@pytest.mark.parametrize("method", ["RNLA", "RRRE", "SVDA"])
def test_restarted_one_cycle_on_linear(method):
    p = 5
    problem = random_linear_problem(p, 0.9, np.random.default_rng(5))
    cfg = MethodConfig(method, window=p + 2, reg=None if method == "SVDA" else FIXED0, tol=1e-8)
    rec = run_restarted(problem, cfg)
    check_record(rec, 1e-8)
    assert rec.converged and rec.g_eval_count <= p + 2
    assert np.allclose(rec.solution, problem.known_solution, rtol=1e-8)


def test_restarted_topological_one_cycle():
    p = 3
    problem = random_linear_problem(p, 0.6, np.random.default_rng(6))
    rec = run_method(problem, MethodConfig("RTSA", window=2 * p + 1, reg=FIXED0, tol=1e-8))
    assert rec.converged and rec.g_eval_count <= 2 * p + 1


@pytest.mark.parametrize("method", [m for m in METHODS if m != "ATM-MMPE"])
def test_already_at_fixed_point(method):
    problem = scalar_problem(s0=2.0)
    rec = run_method(problem, MethodConfig(method, window=3))
    assert rec.converged and rec.g_eval_count == 1


@pytest.mark.parametrize("method", METHODS)
def test_symmetric_pagerank_any_method(method):
    S = SparseStochasticMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    problem = make_pagerank_problem(S, 0.85, np.array([1.0, 0.0]))
    rec = run_method(problem, MethodConfig(method, window=3 if method != "ATM-MMPE" else 2))
    check_record(rec)
    assert rec.converged
    assert np.allclose(rec.solution, [0.5, 0.5], atol=1e-7)


def test_grid_search_probes_counted_and_lambdas_logged():
    problem = random_linear_problem(12, 0.95, np.random.default_rng(8))
    rec = run_method(problem, MethodConfig("RNLA", window=5))
    check_record(rec)
    assert rec.converged and rec.lambdas
    cycles = len(rec.lambdas)
    # four Picard evaluations and seven probes in the first cycle; later cycles
    # reuse the winning probe's image for their first iterate
    assert rec.g_eval_count == (4 + 7) + (cycles - 1) * (3 + 7)
    assert rec.lambdas[-1][0] == rec.g_eval_count
    for i, lam in rec.lambdas:
        assert lam in RegularizationPolicy.grid_search().grid


def test_gcv_policy_logs_lambdas():
    problem = random_linear_problem(12, 0.95, np.random.default_rng(9))
    rec = run_method(problem, MethodConfig("RRRE", window=5))
    check_record(rec)
    assert rec.converged and rec.lambdas


def test_statuses_and_raise_for_status():
    diverging = random_linear_problem(4, 1.5, np.random.default_rng(1))
    rec = run_method(diverging, MethodConfig("PlainFixedPoint"))
    assert rec.status is Status.DIVERGED
    with pytest.raises(Diverged):
        rec.raise_for_status()
    slow = random_linear_problem(4, 0.99, np.random.default_rng(1))
    rec = run_method(slow, MethodConfig("PlainFixedPoint", max_g_evals=5))
    assert rec.status is Status.BUDGET_EXHAUSTED and rec.g_eval_count == 5
    with pytest.raises(BudgetExhausted):
        rec.raise_for_status()


def test_restarted_recovers_antilimit():
    problem = random_linear_problem(4, 1.5, np.random.default_rng(2))
    rec = run_method(problem, MethodConfig("RRRE", window=6, reg=FIXED0, tol=1e-8))
    assert rec.converged
    assert np.allclose(rec.solution, problem.known_solution, rtol=1e-7)


# --- continuous updating ---------------------------------------------------


@pytest.mark.parametrize("combine", ["t", "t_tilde"])
def test_continuous_alpha_aitken(combine):
    rec = run_continuous_alpha(scalar_problem(), MethodConfig("CU-Alpha", window=1, reg=FIXED0, combine=combine))
    assert rec.converged and rec.g_eval_count <= 5
    assert rec.solution == pytest.approx([2.0])


def test_large_lambda_gives_uniform_weights(rng):
    dS = rng.standard_normal((6, 4)) * 1e-3
    assert np.allclose(solve_alpha_minres(dS, lam=1e6), 0.25, atol=1e-9)


@pytest.mark.parametrize("combine", ["t", "t_tilde"])
@pytest.mark.parametrize("method", ["CU-Alpha", "CU-Beta"])
def test_continuous_on_linear(method, combine):
    # the continuous sequence leaves the Shanks kernel after its first
    # extrapolation, so only convergence is asserted, not speed
    problem = random_linear_problem(5, 0.7, np.random.default_rng(3))
    cfg = MethodConfig(method, window=3, reg=FIXED0, combine=combine, max_g_evals=3000)
    rec = run_method(problem, cfg)
    check_record(rec)
    assert rec.converged
    assert np.allclose(rec.solution, problem.known_solution, atol=1e-5)


def test_continuous_default_combiner():
    assert MethodConfig("CU-Alpha").combine == "t_tilde"
    assert MethodConfig("CU-Beta").combine == "t_tilde"
    assert MethodConfig("RNLA").combine == "t"


def test_continuous_rejects_topological():
    from shanks_accel.shanks import CoefficientStrategy, Strategy

    cfg = MethodConfig("CU-Alpha", strategy=CoefficientStrategy(Strategy.TOPO_ALPHA), reg=FIXED0)
    with pytest.raises(ConfigError):
        run_method(scalar_problem(), cfg)


# --- Anderson-type mixing --------------------------------------------------


def test_atm_step_scalar_example():
    cfg = MethodConfig("AA", window=1)
    state = AtmState.start([0.0], 1)
    G = lambda s: 0.5 * s + 1.0  # noqa: E731
    state, s1 = atm_step(state, G(state.current), cfg)
    assert s1 == pytest.approx([1.0])
    state, s2 = atm_step(state, G(s1), cfg)
    assert s2[0] == 2.0


@given(st.floats(-0.9, 0.9).filter(lambda a: abs(a) > 1e-3), st.floats(-5, 5), st.integers(1, 4))
def test_linear_one_step_scalar(a, b, m):
    problem = scalar_problem(a, b)
    rec = run_method(problem, MethodConfig("AA", window=m, tol=1e-300, max_g_evals=3))
    assert rec.solution == pytest.approx(problem.known_solution, rel=1e-12, abs=1e-12)


def test_theta_zero_gives_damped_picard():
    cfg = MethodConfig("AA", window=2, mixing_beta=0.3)
    state = AtmState.start(np.zeros(3), 2)
    state.f.push(np.array([1.0, 0.0, 2.0]))
    state.s.push(np.array([0.0, 1.0, 0.0]))
    state.j = 1
    # next residual orthogonal to the residual difference
    g = state.current + np.array([0.0, 0.0, 2.0])
    s_j = state.current.copy()
    _, nxt = atm_step(state, g, cfg)
    assert np.allclose(nxt, s_j + 0.3 * np.array([0.0, 0.0, 2.0]))


def test_beta_one_equals_undamped_iterate(rng):
    M = rng.standard_normal((6, 6)) * 0.2
    G = lambda s: M @ s + 1.0  # noqa: E731
    cfg = MethodConfig("AA", window=3, mixing_beta=1.0)
    state = AtmState.start(rng.standard_normal(6), 3)
    images = []
    for _ in range(5):
        s_j = state.current.copy()
        g = G(s_j)
        images.append(g)
        state, nxt = atm_step(state, g, cfg)
    j = state.j - 1
    m = min(3, j)
    dF = np.column_stack([state.f[i + 1] - state.f[i] for i in range(j - m, j)])
    dG = np.column_stack([images[i + 1] - images[i] for i in range(j - m, j)])
    theta = np.linalg.lstsq(dF, state.f[j], rcond=None)[0]
    assert np.allclose(nxt, images[j] - dG @ theta, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("method", ["AA", "RAA", "ATM-RRE", "ATM-MPE", "ATM-MMPE", "StabilizedAA"])
def test_anderson_family_beats_plain_on_linear(method):
    problem = random_linear_problem(10, 0.95, np.random.default_rng(10))
    plain = run_method(problem, MethodConfig("PlainFixedPoint"))
    rec = run_method(problem, MethodConfig(method, window=5))
    check_record(rec)
    assert rec.converged and rec.g_eval_count < plain.g_eval_count


def test_raa_zero_lambda_matches_aa():
    problem = random_linear_problem(20, 0.9, np.random.default_rng(11))
    aa = run_method(problem, MethodConfig("AA", window=5))
    raa = run_method(problem, MethodConfig("RAA", window=5, reg=FIXED0))
    assert aa.g_eval_count == raa.g_eval_count
    assert np.allclose(aa.residuals, raa.residuals, rtol=1e-12)
    assert np.allclose(aa.solution, raa.solution, rtol=1e-12)


def test_raa_type1_runs():
    problem = random_linear_problem(8, 0.9, np.random.default_rng(12))
    rec = run_method(problem, MethodConfig("RAA", window=4, raa_variant="type1", reg=RegularizationPolicy.fixed(1e-8)))
    assert rec.converged


def test_mmpe_matrix():
    Y = mmpe_matrix(6, 3, 0)
    assert np.allclose(Y.T @ Y, np.eye(3))
    assert np.array_equal(Y, mmpe_matrix(6, 3, 0))
    with pytest.raises(ConfigError):
        mmpe_matrix(2, 3, 0)


# --- the multisecant matrix ------------------------------------------------


def test_apply_H_examples(rng):
    dS = rng.standard_normal((6, 2))
    dF = rng.standard_normal((6, 2))
    view = QuasiNewtonMatrixView(dS, dF, 0.4)
    Q, _ = np.linalg.qr(dF, mode="complete")
    v = Q[:, 2:] @ rng.standard_normal(4)
    assert np.allclose(apply_H_beta(view, v), -0.4 * v)
    assert np.allclose(apply_H_beta(view, dF[:, 1]), dS[:, 1])
    empty = QuasiNewtonMatrixView(np.zeros((6, 0)), np.zeros((6, 0)), 0.4)
    assert np.array_equal(apply_H_beta(empty, v), -0.4 * v)


@given(st.integers(0, 10_000), st.integers(1, 5), st.floats(0.01, 1.0), st.sampled_from([0.0, 1e-4, 1.0]))
def test_view_matches_explicit(seed, m, beta, lam):
    rng = np.random.default_rng(seed)
    p = m + int(rng.integers(0, 10))
    dS, dF = rng.standard_normal((p, m)), rng.standard_normal((p, m))
    v = rng.standard_normal(p)
    for variant in ("type1", "type2"):
        view = QuasiNewtonMatrixView(dS, dF, beta, lam, variant)
        H = explicit_H(dS, dF, beta, lam, variant)
        assert np.allclose(view.apply(v), H @ v, rtol=1e-9, atol=1e-9)


@given(st.integers(0, 10_000), st.integers(1, 5))
def test_multisecant_and_recursions(seed, m):
    rng = np.random.default_rng(seed)
    p = m + int(rng.integers(0, 25))
    dS, dF = rng.standard_normal((p, m)), rng.standard_normal((p, m))
    H = explicit_H(dS, dF, 0.5)
    scale = np.linalg.norm(H)
    assert np.linalg.norm(H @ dF - dS) <= 1e-10 * np.linalg.norm(dS)
    basis = stabilize(dF, np.inf)
    assert np.linalg.norm(h_recursive_secant(dS, dF, 0.5, basis.fhat) - H) <= 1e-10 * scale
    assert np.linalg.norm(h_recursive_projected(dS, dF, 0.5, basis.fhat) - H) <= 1e-10 * scale


def test_raa_type1_secant_condition(rng):
    from shanks_accel.linalg import svd_shift

    dS, dF = rng.standard_normal((7, 3)), rng.standard_normal((7, 3))
    H = explicit_H(dS, dF, 0.3, 0.5, "type1")
    assert np.allclose(H @ svd_shift(dF, 0.5), dS)


# --- stabilization ---------------------------------------------------------


def test_stabilize_discards_exact_duplicate(rng):
    dF = rng.standard_normal((8, 4))
    dF[:, 2] = dF[:, 0]
    basis = stabilize(dF, 10.0)
    assert basis.kept == [0, 1, 3] and basis.discarded == [2]
    nxt, _ = stabilized_step(rng.standard_normal((8, 4)), dF, rng.standard_normal(8), np.zeros(8), 1.0, 10.0)
    assert np.all(np.isfinite(nxt))


def test_stabilize_threshold():
    dF = np.array([[1.0, 1.0], [0.0, 0.01]])
    assert stabilize(dF, 10.0).kept == [0]
    assert stabilize(dF, 1000.0).kept == [0, 1]


@given(st.integers(0, 10_000), st.integers(1, 5), st.floats(1.5, 1e3))
def test_projector_algebra(seed, m, tau):
    rng = np.random.default_rng(seed)
    dF = rng.standard_normal((10, m))
    basis = stabilize(dF, tau)
    F = basis.fhat
    for d in range(1, len(basis.kept) + 1):
        Q = basis.projector(d)
        assert np.allclose(Q @ Q, Q, atol=1e-12)
        assert np.allclose(Q @ F[:, :d], F[:, :d], atol=1e-12)
    G = F.T @ F
    off = G - np.diag(np.diag(G))
    assert np.all(np.abs(off) <= 1e-10 * np.sqrt(np.outer(np.diag(G), np.diag(G))))


def test_stabilized_matches_aa_for_huge_tau():
    problem = random_linear_problem(15, 0.9, np.random.default_rng(13))
    for budget in (3, 6, 10):
        a = run_method(problem, MethodConfig("AA", window=4, tol=1e-300, max_g_evals=budget))
        b = run_method(problem, MethodConfig("StabilizedAA", window=4, tau=1e12, tol=1e-300, max_g_evals=budget))
        assert np.allclose(a.solution, b.solution, rtol=1e-10)


# --- determinism -----------------------------------------------------------


@pytest.mark.parametrize("method", METHODS)
def test_runs_are_deterministic(method):
    problem = random_linear_problem(8, 0.9, np.random.default_rng(14))
    cfg = MethodConfig(method, window=4, seed=3)
    a, b = run_method(problem, cfg), run_method(problem, cfg)
    assert a.residuals == b.residuals and a.lambdas == b.lambdas and a.status == b.status
