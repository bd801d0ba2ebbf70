import json

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import expit

from tmle2.core.rng import derive_rng
from tmle2.sim import (
    DensityDgp,
    DensityStudyConfig,
    SimReport,
    TrackConfig,
    TsmDgp,
    aggregate_errors,
    bias_initial_density,
    gbar0,
    make_density_p0,
    run_density_study,
    track_total_remainder,
    tsm_psi0,
)
from tmle2.sim.report import ReportRow


class TestDensityDgp:
    def test_single_component_symmetry_structure(self):
        # bins are (x_{i-1}, x_i] with both tails absorbed at the ends, so a
        # symmetric density gives a palindromic interior and matched tails,
        # not a componentwise-symmetric pmf
        p0 = make_density_p0(K=1)
        interior = p0.probs[2:-1]
        assert interior == pytest.approx(interior[::-1], abs=1e-12)
        assert p0.probs[0] + p0.probs[1] == pytest.approx(p0.probs[-1], abs=1e-12)

    def test_unit_mass(self):
        for K in (1, 2, 4):
            assert make_density_p0(K=K).probs.sum() == pytest.approx(1.0, abs=1e-15)

    def test_matches_quadrature_oracle(self):
        # independent construction: numerically integrate the mixture
        # density over each bin instead of differencing normal cdfs
        K = 4
        p0 = make_density_p0(K=K)
        means = np.linspace(-4, 4, K)
        sigma = 10 / K / 6

        def f(x):
            return np.mean([
                np.exp(-0.5 * ((x - m) / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))
                for m in means
            ])

        supports = p0.supports
        edges = np.concatenate([[-30.0], supports[:-1], [30.0]])
        probs = np.array([
            quad(f, edges[i], edges[i + 1], limit=400)[0] for i in range(supports.size)
        ])
        assert p0.probs == pytest.approx(probs, abs=1e-10)

    def test_four_modes(self):
        p0 = make_density_p0(K=4)
        interior = p0.probs[1:-1]
        peaks = np.nonzero((interior > p0.probs[:-2]) & (interior > p0.probs[2:]))[0]
        assert peaks.size == 4

    def test_sampler_matches_law(self):
        dgp = DensityDgp(K=4)
        draws = dgp.sample_indices(1_000_000, derive_rng(1, 0))
        freq = np.bincount(draws, minlength=21) / 1e6
        assert np.max(np.abs(freq - dgp.p0.probs)) < 4 / np.sqrt(1e6)


class TestBiasInitial:
    def test_zero_mass_identity(self, rng):
        emp = DensityDgp(K=2).p0
        assert bias_initial_density(emp, 0.0, "all").probs == pytest.approx(emp.probs)

    def test_all_mode_algebra(self):
        emp = make_density_p0(K=1)
        m = 0.06
        out = bias_initial_density(emp, m, "all")
        assert out.probs == pytest.approx((emp.probs + m) / (1 + 21 * m), abs=1e-15)

    def test_random_mode_deterministic(self):
        emp = make_density_p0(K=2)
        a = bias_initial_density(emp, 0.05, "random", derive_rng(3, 1))
        b = bias_initial_density(emp, 0.05, "random", derive_rng(3, 1))
        assert np.array_equal(a.probs, b.probs)
        assert np.sum(a.probs > emp.probs / (1 + 5 * 0.05) + 1e-12) == 5

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError):
            bias_initial_density(make_density_p0(K=1), -0.1, "all")


class TestTsmDgp:
    def test_psi0_quadrature_vs_gauss_legendre(self):
        nodes, weights = np.polynomial.legendre.leggauss(80)
        oracle = float(weights @ expit(nodes + 0.5)) / 2.0
        assert tsm_psi0() == pytest.approx(oracle, abs=1e-12)

    def test_sampler_matches_gbar0(self):
        dgp = TsmDgp(variant=1)
        data = dgp.sample(1_000_000, derive_rng(2, 0))
        bins = np.linspace(-1, 1, 11)
        for lo, hi in zip(bins[:-1], bins[1:]):
            sel = (data.w >= lo) & (data.w < hi)
            target = quad(gbar0, lo, hi)[0] / (hi - lo)
            assert data.a[sel].mean() == pytest.approx(target, abs=5 / np.sqrt(sel.sum()))

    def test_initials_match_formulas(self):
        dgp = TsmDgp(variant=2)
        proto = dgp.analytic_initial(n=625)  # n^{1/4} = 5
        w = np.array([-0.5, 0.0, 0.5])
        expected_g = expit(2 * w - w**2) + (0.1 + 2 * np.abs(w)) / 10.0
        assert proto.gbar.predict(w) == pytest.approx(expected_g, abs=1e-12)
        expected_q1 = expit(w + 0.5) + np.abs(0.1 + 2 * np.abs(w) + 0.5) / 15.0
        assert proto.qbar.predict(w, np.ones(3)) == pytest.approx(expected_q1, abs=1e-12)

    def test_variant_offsets(self):
        assert [TsmDgp(variant=v).hal_offset for v in (1, 2, 3, 4)] == [10, 10, 0, 5]


class TestReport:
    def test_mse_identity(self):
        errs = np.array([0.1, -0.2, 0.05, 0.3])
        bias, sd, mse = aggregate_errors(errs)
        assert mse == pytest.approx(bias**2 + sd**2, abs=1e-12)

    def test_scaling(self):
        errs = np.array([0.1, -0.2])
        bias, sd, mse = aggregate_errors(errs, scale_n=400)
        b0, s0, m0 = aggregate_errors(errs)
        assert bias == pytest.approx(20 * b0)
        assert mse == pytest.approx(400 * m0)

    def test_csv_roundtrip_and_lookup(self):
        rows = (ReportRow("est", 100, 0.1, 0.2, 0.05, 10, 0),)
        rep = SimReport(example="x", scaling="none", rows=rows, seed=1, config={})
        assert "est,100,0.1,0.2,0.05,10,0" in rep.to_csv()
        assert rep.row("est").bias == 0.1
        payload = json.loads(rep.to_json())
        assert payload["rows"][0]["estimator"] == "est"
        with pytest.raises(KeyError):
            rep.row("missing")


@pytest.mark.slow
class TestStudyRunners:
    def test_density_study_serial_equals_parallel(self):
        cfg = dict(n=200, reps=6, K=2, bias_mass=0.04, seed=17,
                   estimators=("reg_1st", "emp_2nd"))
        serial = run_density_study(DensityStudyConfig(**cfg, threads=1))
        parallel = run_density_study(DensityStudyConfig(**cfg, threads=2))
        assert serial.to_csv() == parallel.to_csv()
        for row in serial.rows:
            assert row.failures == 0

    def test_track_total_remainder_deterministic_and_decreasing(self):
        cfg = TrackConfig(n=300, K=4, bias_mass=0.06, seed=4)
        rec_a = track_total_remainder(cfg)
        rec_b = track_total_remainder(cfg)
        assert [r.rbar1 for r in rec_a] == [r.rbar1 for r in rec_b]
        assert abs(rec_a[-1].rbar1) <= abs(rec_a[0].rbar1)
        assert rec_a[-1].abs_d2_score < 1 / 300 or len(rec_a) == 1
