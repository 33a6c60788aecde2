"""Direction law, moment quadrature, and the diffusion mapping."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamopt.config import default_mobility, mobility_from_config, parse_config, DEFAULTS
from lamopt.errors import DegenerateDiffusionError, DomainError
from lamopt.mobility import (
    DiffusionParams,
    MobilityParams,
    compute_diffusion,
    direction_moments,
    direction_pdf,
    global_drift,
    sample_direction,
)

TABLE_MEAN_LEN = 0.02          # km
TABLE_MEAN_TIME = 8.0 / 3600.0  # hr
TABLE_VAR_TIME = 1.0 / 3600.0**2


class TestDirectionPdf:
    def test_uniform_limit(self):
        # k -> 0 collapses to the uniform density on the circle
        assert direction_pdf(0.0, 1.3) == pytest.approx(1.0 / (2 * math.pi))
        assert direction_pdf(1e-12, -2.0) == pytest.approx(1.0 / (2 * math.pi))

    def test_symmetry(self):
        assert direction_pdf(1.0, 0.7) == direction_pdf(1.0, -0.7)

    def test_peak_value(self):
        # direct evaluation: 1 / (2 (1 - e^-pi))
        assert direction_pdf(1.0, 0.0) == pytest.approx(0.5225828526818421, rel=1e-12)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            direction_pdf(-0.1, 0.0)
        with pytest.raises(DomainError):
            direction_pdf(1.0, 4.0)

    @given(st.floats(min_value=0.0, max_value=50.0),
           st.floats(min_value=-math.pi, max_value=math.pi))
    def test_nonnegative(self, k, theta):
        assert direction_pdf(k, theta) >= 0.0

    @settings(max_examples=25, deadline=None)
    @given(st.floats(min_value=1e-3, max_value=30.0))
    def test_normalized(self, k):
        from scipy.integrate import quad
        total, _ = quad(lambda th: direction_pdf(k, th), -math.pi, math.pi,
                        points=[0.0], limit=200)
        assert total == pytest.approx(1.0, abs=1e-9)


class TestDirectionMoments:
    def test_uniform(self):
        m = direction_moments(0.0)
        assert m.e_cos == 0.0
        assert m.var_theta == pytest.approx(math.pi**2 / 3.0)
        assert m.e_cos2 + m.e_sin2 == pytest.approx(1.0, abs=1e-12)

    def test_point_mass_limit(self):
        m = direction_moments(1e6)
        assert m.e_cos == pytest.approx(1.0, abs=1e-6)
        assert m.var_theta == pytest.approx(0.0, abs=1e-6)

    def test_closed_forms(self):
        # E[cos] = k^2 (1 + e^-k pi) / ((1 + k^2)(1 - e^-k pi));
        # E[cos 2t] = k^2 / (k^2 + 4)
        for k in (0.1, 0.5, 2.0, 20.0):
            m = direction_moments(k)
            e_cos = k**2 * (1 + math.exp(-k * math.pi)) / (
                (1 + k**2) * (1 - math.exp(-k * math.pi)))
            assert m.e_cos == pytest.approx(e_cos, abs=1e-10)
            assert m.e_cos2 == pytest.approx((1 + k**2 / (k**2 + 4)) / 2, abs=1e-10)
            assert m.e_sin == pytest.approx(0.0, abs=1e-10)
            assert m.e_cos_sin == pytest.approx(0.0, abs=1e-10)

    def test_moments_match_sampling(self):
        # Monte-Carlo oracle for E[cos] at k = 2 (4 sigma band)
        rng = np.random.default_rng(123)
        theta = sample_direction(2.0, rng, 1_000_000)
        m = direction_moments(2.0)
        band = 4.0 * np.std(np.cos(theta)) / 1000.0
        assert abs(np.cos(theta).mean() - m.e_cos) < band


class TestMobilityParams:
    def test_second_moment_identity(self):
        p = default_mobility(0.5)
        assert p.second_moment_len == p.var_len + p.mean_len**2

    def test_validation(self):
        with pytest.raises(DomainError):
            MobilityParams(k=-1.0, mean_len=0.02, var_len=4e-4,
                           mean_time=1e-3, var_time=0.0)
        with pytest.raises(DomainError):
            MobilityParams(k=0.5, mean_len=0.0, var_len=0.0,
                           mean_time=1e-3, var_time=0.0)
        with pytest.raises(DomainError):
            MobilityParams(k=0.5, mean_len=0.02, var_len=4e-4,
                           mean_time=0.0, var_time=0.0)


class TestComputeDiffusion:
    def test_uniform_direction_limits(self):
        # no preferred direction: zero drift, isotropic spreading of
        # E[len^2] / (2 E[dwell])
        d = compute_diffusion(default_mobility(0.0))
        expected = default_mobility(0.0).second_moment_len / (2 * TABLE_MEAN_TIME)
        assert d.mu1 == 0.0
        assert d.sigma11 == pytest.approx(expected, rel=1e-12)
        assert d.sigma22 == pytest.approx(expected, rel=1e-12)

    def test_full_concentration_limits(self):
        # straight-line motion: drift = speed, spread from length and dwell
        # fluctuations only
        p = default_mobility(1e6)
        d = compute_diffusion(p)
        assert d.mu1 == pytest.approx(p.speed, rel=1e-6)
        s11 = (p.var_len * p.mean_time**2 + p.var_time * p.mean_len**2) / p.mean_time**3
        assert d.sigma11 == pytest.approx(s11, rel=1e-6)
        assert d.sigma22 == pytest.approx(0.0, abs=1e-9)

    def test_limit_agreement_tight(self):
        # the generic quadrature path agrees with the closed-form limits to
        # 1e-4 relative at the proxy concentrations
        p_lo = default_mobility(1e-4)
        d_lo = compute_diffusion(p_lo)
        iso = p_lo.second_moment_len / (2 * p_lo.mean_time)
        assert d_lo.sigma11 == pytest.approx(iso, rel=1e-4)
        assert d_lo.sigma22 == pytest.approx(iso, rel=1e-4)
        p_hi = default_mobility(1e6)
        d_hi = compute_diffusion(p_hi)
        assert d_hi.mu1 == pytest.approx(p_hi.speed, rel=1e-4)

    def test_default_scenario_strong_drift(self):
        # 20 m sections at 8 s: full-concentration drift is 9 km/hr and the
        # along-axis diffusion about 0.1828 km^2/hr
        d = compute_diffusion(default_mobility(1e6))
        assert d.mu1 == pytest.approx(9.0, rel=1e-6)
        assert d.sigma11 == pytest.approx(0.1828125, rel=1e-6)
        assert global_drift(d, 1.0) == pytest.approx(98.46, rel=1e-3)

    @pytest.mark.parametrize("k", np.logspace(-3, 3, 9).tolist())
    def test_psd_and_axis_symmetry(self, k):
        d = compute_diffusion(default_mobility(k))
        assert np.linalg.eigvalsh(d.sigma).min() >= -1e-12
        assert abs(d.mu2) < 1e-9
        assert abs(d.sigma12) < 1e-9

    def test_drift_monotone_in_concentration(self):
        mus = [compute_diffusion(default_mobility(k)).mu1
               for k in np.logspace(-3, 3, 13)]
        assert all(b >= a - 1e-12 for a, b in zip(mus, mus[1:]))


class TestGlobalDrift:
    def test_zero_drift(self):
        assert global_drift(DiffusionParams(0.0, 0.0, 1.0, 1.0), 2.0) == 0.0

    def test_limits_across_concentration(self):
        lo = global_drift(compute_diffusion(default_mobility(1e-4)), 1.0)
        hi = global_drift(compute_diffusion(default_mobility(1e6)), 1.0)
        assert lo < 0.01
        assert hi > 90.0

    def test_degenerate(self):
        with pytest.raises(DegenerateDiffusionError):
            global_drift(DiffusionParams(1.0, 0.0, 0.0, 1.0), 1.0)
        with pytest.raises(DomainError):
            global_drift(DiffusionParams(1.0, 0.0, 1.0, 1.0), 0.0)


class TestConfig:
    def test_defaults_roundtrip(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("k = 2.5\nmean_len_m = 40  # comment\n\n# full line\n")
        cfg = parse_config(path)
        assert cfg["k"] == 2.5
        assert cfg["mean_len_m"] == 40.0
        assert cfg["U"] == DEFAULTS["U"]
        mob = mobility_from_config(cfg)
        assert mob.mean_len == pytest.approx(0.04)
        assert mob.mean_time == pytest.approx(TABLE_MEAN_TIME)
        assert mob.var_time == pytest.approx(TABLE_VAR_TIME)

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("bogus = 1\n")
        with pytest.raises(DomainError):
            parse_config(path)

    def test_bad_value(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("k = sideways\n")
        with pytest.raises(DomainError):
            parse_config(path)
