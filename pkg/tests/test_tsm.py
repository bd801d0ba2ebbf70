import numpy as np
import pytest
from scipy.special import expit, logit

from conftest import make_state, make_tsm_data
from tmle2.core import ScoreFunction1D, solve_score_1d
from tmle2.tsm import (
    TsmData,
    TsmState,
    binary_d2_with_unit_factors,
    clever_covariates,
    d1_eval,
    d2_continuous,
    d2_eval_rows,
    eps1_continuous_rows,
    eps1_solve,
    eps1_solve_rows,
    extract_rows,
    first_order_tmle,
    first_order_update,
    grad_ctx_rows,
    iterative_2tmle,
    offset_logistic_mle,
    outcome_model,
    pn_d1,
    pn_d2,
    pt_d1,
    pt_d2,
    r1_exact_tsm,
    second_order_update,
    target_hal,
    treatment_model,
)
from tmle2.tsm.models import FluctuatedModel, G_BOUNDS, Q_BOUNDS, grid_fn_wa


class TestD1:
    def test_zero_when_y_equals_qbar(self):
        data = make_tsm_data(50, seed=1)
        state = make_state(data, lambda w: np.full_like(w, 0.5), lambda w, a: np.full_like(w, 0.4))
        data_matched = TsmData(w=data.w, a=data.a, y=state.qbar.predict(data.w, data.a))
        assert d1_eval(state, data_matched) == pytest.approx(np.zeros(50), abs=1e-15)

    def test_untreated_rows_vanish(self):
        data = make_tsm_data(80, seed=2)
        state = make_state(data, lambda w: np.full_like(w, 0.5), lambda w, a: np.full_like(w, 0.4))
        vals = d1_eval(state, data)
        assert np.all(vals[data.a == 0] == 0.0)

    def test_hand_case(self):
        data = TsmData(w=np.zeros(3), a=np.ones(3), y=np.ones(3))
        state = make_state(data, lambda w: np.full_like(w, 0.5), lambda w, a: np.full_like(w, 0.4))
        assert d1_eval(state, data) == pytest.approx(np.full(3, 1.2))


class TestEps1:
    def test_zero_at_hal_state(self, tsm_toy):
        data, _, hal = tsm_toy
        assert eps1_solve(hal, hal, "regularized", data) == pytest.approx(0.0, abs=1e-12)

    def test_empirical_saturated_toy_matches_grid(self):
        # single W value: the update shifts the logit so the weighted
        # residual mean vanishes; compare against a 1e6-point grid
        r = np.random.default_rng(5)
        n = 200
        data = TsmData(w=np.zeros(n), a=(r.random(n) < 0.5) * 1.0, y=(r.random(n) < 0.7) * 1.0)
        state = make_state(data, lambda w: np.full_like(w, 0.5), lambda w, a: np.full_like(w, 0.4))
        rows = extract_rows(state, state, data)
        eps = eps1_solve_rows(rows, "empirical")
        grid = np.linspace(-3, 3, 1_000_001)
        treated = data.a == 1
        resid = np.abs(
            np.sum(
                (data.y[treated][None, :] - expit(logit(0.4) + grid[:, None] / 0.5)) / 0.5,
                axis=1,
            )
        )
        assert eps == pytest.approx(grid[np.argmin(resid)], abs=1e-5)

    def test_regularized_score_zero_at_solution(self, tsm_toy):
        data, state, hal = tsm_toy
        rows = extract_rows(state, hal, data)
        eps = eps1_solve_rows(rows, "regularized")
        q1e = np.clip(expit(rows.lq1 + eps / rows.g), *rows.q_bounds)
        score = float(np.mean(rows.gt / rows.g * (rows.qt1 - q1e)))
        assert abs(score) <= 1e-10


class TestFirstOrderUpdate:
    def test_regularized_tilde_score_zero_after_update(self, tsm_toy):
        data, state, hal = tsm_toy
        updated = first_order_update(state, hal, "regularized", data)
        rows = extract_rows(updated, hal, data)
        assert abs(pt_d1(rows)) <= 1e-8

    def test_empirical_score_zero_after_update(self, tsm_toy):
        data, state, hal = tsm_toy
        updated = first_order_update(state, hal, "empirical", data)
        rows = extract_rows(updated, hal, data)
        assert abs(pn_d1(rows)) <= 1e-8

    def test_gbar_untouched_and_qw_identical(self, tsm_toy):
        data, state, hal = tsm_toy
        updated = first_order_update(state, hal, "empirical", data)
        assert updated.gbar is state.gbar
        assert updated.qw is state.qw


class TestCleverCovariates:
    def test_zero_at_hal_state(self, tsm_toy):
        data, _, hal = tsm_toy
        rows = extract_rows(hal, hal, data)
        ctx = grad_ctx_rows(rows)
        cy, ca = clever_covariates(hal, hal, ctx, data)
        assert np.max(np.abs(cy)) < 1e-10
        assert np.max(np.abs(ca)) < 1e-10
        assert ctx.eps1 == pytest.approx(0.0, abs=1e-12)

    def test_ca_vanishes_when_eps_zero_and_qtilde_matches(self, tsm_toy):
        data, state, _ = tsm_toy
        rows = extract_rows(state, state, data)
        ctx = grad_ctx_rows(rows, eps1=0.0)
        # hal qtilde == qbar(1) == qbar1 update at eps 0 -> second term zero too
        assert np.max(np.abs(ctx.ca)) < 1e-12

    def test_matches_numeric_gradient_discrete_w(self, tsm_toy):
        data, state, hal = tsm_toy
        base = extract_rows(state, hal, data)
        ctx = grad_ctx_rows(base, eps1_solve_rows(base, "regularized", tol=1e-14))
        wvals = np.unique(data.w)

        def psi_n1(rows):
            eps = eps1_solve_rows(rows, "regularized", tol=1e-14)
            return float(np.mean(np.clip(expit(rows.lq1 + eps / rows.g), *rows.q_bounds)))

        r = np.random.default_rng(0)
        for _ in range(3):
            c1map = dict(zip(wvals, r.normal(size=wvals.size)))
            c2map = dict(zip(wvals, r.normal(size=wvals.size)))
            C1 = np.array([c1map[x] for x in data.w])
            C2 = np.array([c2map[x] for x in data.w])
            delta = 1e-5
            plus, minus = base.copy(), base.copy()
            plus.lq1 = base.lq1 + delta * C1
            plus.lg = base.lg + delta * C2
            minus.lq1 = base.lq1 - delta * C1
            minus.lg = base.lg - delta * C2
            numeric = (psi_n1(plus) - psi_n1(minus)) / (2 * delta)
            g, q1 = base.g, base.q1
            analytic = float(
                np.mean(g * ctx.cy1 * C1 * q1 * (1 - q1)) + np.mean(ctx.ca * C2 * g * (1 - g))
            )
            assert analytic == pytest.approx(numeric, rel=1e-3)


class TestSecondOrderUpdate:
    def test_noop_at_hal_state(self, tsm_toy):
        data, _, hal = tsm_toy
        out = second_order_update(hal, hal, "regularized", "universal", data, tol=1e-3)
        rows = extract_rows(out, hal, data)
        base = extract_rows(hal, hal, data)
        assert rows.q1 == pytest.approx(base.q1, abs=1e-12)

    def test_onestep_regularized_scores_zero(self, tsm_toy):
        data, state, hal = tsm_toy
        out = second_order_update(state, hal, "regularized", "onestep", data, tol=1e-3)
        # scores of both fluctuations at the frozen covariates
        rows0 = extract_rows(state, hal, data)
        ctx = grad_ctx_rows(rows0)
        rows = extract_rows(out, hal, data)
        s1 = float(np.mean(rows.gt * ctx.cy1 * (rows.qt1 - rows.q1)))
        s2 = float(np.mean(ctx.ca * (rows.gt - rows.g)))
        assert abs(s1) <= 1e-8
        assert abs(s2) <= 1e-8

    def test_onestep_empirical_scores_zero(self, tsm_toy):
        data, state, hal = tsm_toy
        out = second_order_update(state, hal, "empirical", "onestep", data, tol=1e-3)
        rows0 = extract_rows(state, hal, data)
        ctx = grad_ctx_rows(rows0)
        rows = extract_rows(out, hal, data)
        s1 = float(np.mean(data.a * ctx.cy1 * (data.y - rows.q1)))
        s2 = float(np.mean(ctx.ca * (data.a - rows.g)))
        assert abs(s1) <= 1e-8
        assert abs(s2) <= 1e-8

    def test_universal_reaches_tol(self, tsm_toy):
        data, state, hal = tsm_toy
        tol = 1.0 / data.n
        out = second_order_update(state, hal, "empirical", "universal", data, tol=tol)
        rows = extract_rows(out, hal, data)
        ctx = grad_ctx_rows(rows)
        assert abs(pn_d2(rows, ctx)) < tol


class TestTargetHal:
    def test_five_equations_hold(self, tsm_toy):
        data, state, hal = tsm_toy
        ctx = grad_ctx_rows(extract_rows(state, hal, data))
        hal2 = target_hal(hal, state, data)
        rows = extract_rows(state, hal2, data)
        g, q1 = rows.g, rows.q1
        qt1, gt = rows.qt1, rows.gt
        q_at = np.where(data.a == 1, qt1, rows.qt0)
        eqs = [
            np.mean(data.a * ctx.cy1 * (data.y - q_at)),
            np.mean(data.a / g * (data.y - q_at)),
            np.mean((qt1 - q1) * ctx.cy1 * (data.a - gt)),
            np.mean(ctx.ca * (data.a - gt)),
            np.mean((qt1 - q1) / g * (data.a - gt)),
        ]
        assert np.max(np.abs(eqs)) <= 1e-8

    def test_d1_agreement_identity(self, tsm_toy):
        # (P_tilde* - P_n) D1 at the initial state vanishes, by exact
        # enumeration of the HAL expectation over (A, Y)
        data, state, hal = tsm_toy
        hal2 = target_hal(hal, state, data)
        rows = extract_rows(state, hal2, data)
        assert pt_d1(rows) - pn_d1(rows) == pytest.approx(0.0, abs=1e-8)


class TestIterative2Tmle:
    def test_saturated_toy_matches_plugin(self):
        r = np.random.default_rng(8)
        n = 400
        data = TsmData(
            w=np.zeros(n), a=(r.random(n) < 0.6) * 1.0, y=(r.random(n) < 0.55) * 1.0
        )
        phat_a = data.a.mean()
        qhat1 = data.y[data.a == 1].mean()
        qhat0 = data.y[data.a == 0].mean()
        hal = make_state(
            data,
            lambda w: np.full_like(w, phat_a),
            lambda w, a: np.where(np.asarray(a) == 1, qhat1, qhat0),
        )
        initial = make_state(
            data,
            lambda w: np.full_like(w, 0.5),
            lambda w, a: np.full_like(np.asarray(w, dtype=float), 0.3),
        )
        res = iterative_2tmle(data, initial, hal)
        assert res.psi == pytest.approx(qhat1, abs=1e-8)

    def test_converges_with_all_scores_below_tol(self, tsm_toy):
        data, state, hal = tsm_toy
        res = iterative_2tmle(data, state, hal)
        tol = 1.0 / data.n
        last = res.records[-1]
        assert res.converged
        assert abs(last.pn_d1) < tol
        assert abs(last.pt_d1) < tol
        assert abs(last.pn_d2) < tol
        assert abs(last.pt_d2) < tol
        assert res.ci_second.lower <= res.psi <= res.ci_second.upper

    def test_deterministic(self, tsm_toy):
        data, state, hal = tsm_toy
        a = iterative_2tmle(data, state, hal)
        b = iterative_2tmle(data, state, hal)
        assert a.psi == b.psi
        assert a.psi_first == b.psi_first


class TestContinuousOutcome:
    def test_zero_at_hal_state(self, tsm_toy):
        data, _, hal = tsm_toy
        vals = d2_continuous(hal, hal, data)
        assert np.max(np.abs(vals)) < 1e-12

    def test_binary_formula_with_unit_factors_matches(self, tsm_toy):
        data, state, hal = tsm_toy
        rows = extract_rows(state, hal, data)
        eps1 = eps1_continuous_rows(rows)
        cont = d2_continuous(state, hal, data, eps1=eps1)
        binary_unit = binary_d2_with_unit_factors(state, hal, data, eps1=eps1)
        assert cont == pytest.approx(binary_unit, abs=1e-12)

    def test_mean_zero_by_enumeration(self, tsm_toy):
        data, state, hal = tsm_toy
        rows = extract_rows(state, hal, data)
        eps1 = eps1_continuous_rows(rows)
        g, gt = rows.g, rows.gt
        q1u = rows.q1 + eps1 / g
        # E_P[D2] by exact enumeration over (A, Y) given each W_i:
        # the (Y - qbar) term has conditional mean zero; the (A - gbar)
        # terms integrate to zero over A | W
        t1 = np.zeros(data.n)
        t2 = eps1 * (gt - g) / g**3 * (g - g)
        assert float(np.mean(t1 + t2)) == pytest.approx(0.0, abs=1e-14)
        # and empirically across a large fake redraw of (A, Y):
        r = np.random.default_rng(0)
        reps = 4000
        acc = 0.0
        for _ in range(reps):
            a_sim = (r.random(data.n) < g) * 1.0
            y_sim = (r.random(data.n) < np.where(a_sim == 1, rows.q1, rows.q0)) * 1.0
            sim = TsmData(w=data.w, a=a_sim, y=y_sim)
            acc += float(np.mean(d2_continuous(state, hal, sim, eps1=eps1)))
        assert acc / reps == pytest.approx(0.0, abs=5e-3)


class TestExactRemainder:
    def test_zero_when_g_matches(self, tsm_toy):
        data, state, _ = tsm_toy
        g_fn = lambda w: state.gbar.predict(w)
        q0_fn = lambda w, a: expit(w + np.asarray(a, float) / 2)
        val = r1_exact_tsm(state, q0_fn, g_fn, ("uniform", -1.0, 1.0))
        assert val == pytest.approx(0.0, abs=1e-10)

    def test_zero_when_q_matches(self, tsm_toy):
        data, state, _ = tsm_toy
        q_fn = lambda w, a: state.qbar.predict(np.atleast_1d(w), np.asarray(a))
        val = r1_exact_tsm(state, q_fn, lambda w: expit(2 * w - w**2), ("uniform", -1.0, 1.0))
        assert val == pytest.approx(0.0, abs=1e-10)

    def test_identity_on_discrete_grid(self, tsm_toy):
        data, state, _ = tsm_toy
        points = np.unique(data.w)
        weights = np.full(points.size, 1.0 / points.size)
        q0 = lambda w, a: expit(w + np.asarray(a, float) / 2)
        g0 = lambda w: expit(2 * w - w**2)
        r1 = r1_exact_tsm(state, q0, g0, ("grid", points, weights))
        # identity: Psi(qbar) - Psi(qbar0) + P0 D1 = R1, enumerated exactly
        ones = np.ones(points.size)
        q1 = state.qbar.predict(points, ones)
        q10 = q0(points, ones)
        g = state.gbar.predict(points)
        psi_diff = float(weights @ (q1 - q10))
        p0_d1 = float(weights @ (g0(points) / g * (q10 - q1)))
        assert psi_diff + p0_d1 == pytest.approx(r1, abs=1e-12)


class TestModels:
    def test_zero_fluctuation_is_exact_base(self, tsm_toy):
        data, state, _ = tsm_toy
        cov = grid_fn_wa(data.w, np.zeros(data.n), np.ones(data.n))
        model = state.qbar.with_fluctuation(cov, 0.0)
        base = state.qbar.predict(data.w, data.a)
        assert np.array_equal(model.predict(data.w, data.a), base)

    def test_clipping_bounds(self):
        g = treatment_model(lambda w: np.full_like(w, 1e-9))
        assert np.all(g.predict(np.linspace(-1, 1, 5)) == G_BOUNDS[0])
        q = outcome_model(lambda w, a: np.full_like(w, 2.0))
        assert np.all(q.predict(np.linspace(-1, 1, 5), np.ones(5)) == Q_BOUNDS[1])

    def test_offset_logistic_mle_matches_scalar_solver(self, tsm_toy):
        data, state, hal = tsm_toy
        rows = extract_rows(state, hal, data)
        x = data.a / rows.g
        offset = np.where(data.a == 1, rows.lq1, rows.lq0)
        eps_vec = offset_logistic_mle(x.reshape(-1, 1), data.y, offset)

        def score(e):
            return float(np.mean(x * (data.y - expit(offset + e * x))))

        eps_scalar = solve_score_1d(ScoreFunction1D(score, -10, 10), tol=1e-12)
        assert eps_vec[0] == pytest.approx(eps_scalar, abs=1e-8)

    def test_data_validation(self):
        with pytest.raises(ValueError):
            TsmData(w=np.zeros(3), a=np.array([0.0, 2.0, 1.0]), y=np.zeros(3))
        with pytest.raises(ValueError):
            TsmData(w=np.zeros(3), a=np.zeros(3), y=np.zeros(3))
