import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irs_antijam.disco import (ReflectionVector, aca_variance, clt_diagnostics, draw_dirs_phases,
                               draw_dirs_state, jammed_channel, write_clt_csv)
from irs_antijam.scenario import ScenarioConfig, build_geometry, desk_profile, rng_stream

from oracles import jammed_channel_loop

Q_D = (np.pi / 9, 6 * np.pi / 5)


class TestReflectionVector:
    def test_wraps_phases(self):
        rv = ReflectionVector([2 * np.pi + 0.5, -0.5])
        np.testing.assert_allclose(rv.phases, [0.5, 2 * np.pi - 0.5])
        np.testing.assert_allclose(np.abs(rv.values), 1.0)

    def test_alphabet_membership(self):
        ReflectionVector([np.pi / 9, 6 * np.pi / 5], Q_D)
        with pytest.raises(ValueError):
            ReflectionVector([0.3], Q_D)

    def test_identity(self):
        np.testing.assert_array_equal(ReflectionVector.identity(3).values, np.ones(3))
        assert len(ReflectionVector.identity(3)) == 3


class TestDirsDraws:
    def test_uniform_frequencies(self):
        ph = draw_dirs_phases(Q_D, 1000, 1000, np.random.default_rng(1))
        frac = np.mean(np.isclose(ph, Q_D[0]))
        assert frac == pytest.approx(0.5, abs=0.002)

    def test_single_phase_alphabet(self):
        ph = draw_dirs_phases((0.7,), 5, 3, np.random.default_rng(1))
        np.testing.assert_array_equal(ph, 0.7)

    def test_weights(self):
        ph = draw_dirs_phases(Q_D, 1000, 100, np.random.default_rng(1), weights=[0.9, 0.1])
        assert np.mean(np.isclose(ph, Q_D[0])) == pytest.approx(0.9, abs=0.01)

    def test_state_reproducible(self):
        c = desk_profile()
        a = draw_dirs_state(c, rng_stream(1, 0, "dirs"))
        b = draw_dirs_state(c, rng_stream(1, 0, "dirs"))
        np.testing.assert_array_equal(a.phases, b.phases)
        assert a.alphabet == c.dirs_alphabet and len(a) == 256

    def test_empty_alphabet(self):
        with pytest.raises(ValueError):
            draw_dirs_phases((), 3, 1, np.random.default_rng(0))


class TestJammedChannel:
    def test_null_ad(self, rng):
        out = jammed_channel(np.zeros((5, 3)), rng.standard_normal((5, 2)), np.zeros(5))
        np.testing.assert_array_equal(out, 0)

    def test_single_element(self, rng):
        H_AD = rng.standard_normal((1, 3)) + 1j * rng.standard_normal((1, 3))
        H_DU = rng.standard_normal((1, 2)) + 1j * rng.standard_normal((1, 2))
        phi = 0.8
        out = jammed_channel(H_AD, H_DU, ReflectionVector([phi]))
        np.testing.assert_allclose(out, np.conj(H_DU[0])[:, None] * np.exp(1j * phi) * H_AD[0])

    def test_matches_loop_oracle(self, rng):
        H_AD = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        H_DU = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        phases = rng.random(4) * 2 * np.pi
        np.testing.assert_allclose(jammed_channel(H_AD, H_DU, np.exp(1j * phases)),
                                   jammed_channel_loop(H_AD, H_DU, phases), atol=1e-12)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            jammed_channel(np.ones((4, 3)), np.ones((5, 2)), np.ones(4))


class TestAcaVariance:
    def test_default_value(self):
        c = ScenarioConfig(n_users=1, user_region_radius_m=1e-9)
        g = build_geometry(c, rng_stream(1, 0, "geometry"))
        # both pathloss formulas evaluated by a standalone calculator
        assert aca_variance(c, g).beta[0] == pytest.approx(2.2415960e-14, rel=1e-6)

    def test_linear_in_dirs_size(self):
        c = desk_profile()
        g = build_geometry(c, rng_stream(1, 0, "geometry"))
        a = aca_variance(c, g).beta
        b = aca_variance(c.replace(n_dirs=512), g).beta
        np.testing.assert_allclose(b, 2 * a)


@pytest.fixture(scope="module")
def reports():
    out = {}
    for nd in (4, 256):
        c = desk_profile(n_dirs=nd, n_users=2, n_antennas=2)
        g = build_geometry(c, rng_stream(1, 0, "geometry"))
        out[nd] = clt_diagnostics(c, g, 4000, rng_stream(1, 0, "clt"))
    return out


class TestClt:
    def test_variance_and_mean(self, reports):
        rep = reports[256]
        assert 0.95 <= rep.var_ratio <= 1.05
        assert np.max(np.abs(rep.mean) / np.sqrt(rep.beta[:, None])) < 0.05

    def test_kurtosis_trend(self, reports):
        assert reports[256].kurtosis_gap < reports[4].kurtosis_gap

    def test_needs_enough_draws(self):
        c = desk_profile()
        g = build_geometry(c, rng_stream(1, 0, "geometry"))
        with pytest.raises(ValueError):
            clt_diagnostics(c, g, 10, rng_stream(1, 0, "clt"))

    def test_csv(self, reports, tmp_path):
        path = tmp_path / "clt.csv"
        write_clt_csv([reports[4]], path)
        lines = path.read_text().splitlines()
        assert lines[0] == "n_dirs,k,n,emp_mean_re,emp_mean_im,emp_var,beta,kurtosis"
        assert len(lines) == 1 + 2 * 2


@settings(max_examples=30)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(1, 3), st.integers(0, 1000))
def test_jammed_channel_property(nd, na, k, seed):
    rng = np.random.default_rng(seed)
    H_AD = rng.standard_normal((nd, na)) + 1j * rng.standard_normal((nd, na))
    H_DU = rng.standard_normal((nd, k)) + 1j * rng.standard_normal((nd, k))
    phases = draw_dirs_phases(Q_D, nd, 1, rng)[0]
    np.testing.assert_allclose(jammed_channel(H_AD, H_DU, np.exp(1j * phases)),
                               jammed_channel_loop(H_AD, H_DU, phases), atol=1e-10)
