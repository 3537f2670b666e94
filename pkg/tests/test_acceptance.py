"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest -m acceptance -s`` to see the lines as they
happen; a summary section is printed at the end of any run.
"""
import numpy as np
import pytest

from irs_antijam.channels import draw_channel_set
from irs_antijam.disco import clt_diagnostics
from irs_antijam.harness import TrialState, emit_report, sweep
from irs_antijam.manifold import (effective_power, euclidean_gradient, project_discrete,
                                  rcg_optimize, retract_step, riemannian_gradient)
from irs_antijam.precoding import (EffectiveChannels, anti_jamming_precoder, build_A,
                                   effective_channels, max_eigvec, sjnr_closed_form,
                                   sjnr_monte_carlo, sjnr_pencil)
from irs_antijam.scenario import ScenarioConfig, build_geometry, desk_profile, rng_stream

from oracles import (dominant_generalized, exhaustive_best, finite_difference_gradient,
                     random_channels)

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

DESK = desk_profile()


@pytest.fixture(scope="module")
def power_report():
    return sweep("power", [-10.0, 0.0, 10.0], DESK, trials=200)


def test_clt_convergence(criterion):
    reports = {}
    for nd in (64, 2048):
        cfg = ScenarioConfig(n_dirs=nd)
        geo = build_geometry(cfg, rng_stream(cfg.seed, 0, "geometry"))
        reports[nd] = clt_diagnostics(cfg, geo, 10_000, rng_stream(cfg.seed, 0, "clt"))
    big = reports[2048]
    ok_var = 0.97 <= big.var_ratio <= 1.03
    ok_mean = big.max_mean_ratio <= 0.01
    ok_kurt = big.kurtosis_gap < reports[64].kurtosis_gap
    criterion(1, ok_var and ok_mean and ok_kurt,
              f"var/beta={big.var_ratio:.4f} max|mean|^2/beta={big.max_mean_ratio:.2e} "
              f"kurtosis gap N_D=2048 {big.kurtosis_gap:.4f} < N_D=64 "
              f"{reports[64].kurtosis_gap:.4f}")
    assert ok_var and ok_mean and ok_kurt


def test_closed_form_matches_monte_carlo(criterion):
    cfg = desk_profile(n_dirs=2048)
    worst = 0.0
    for i in range(20):
        seed = 100 + i
        state = TrialState(cfg.replace(seed=seed), 0)
        irs = state.optimized_irs(cfg)
        eff = effective_channels(state.channels, irs)
        W = anti_jamming_precoder(eff, state.beta, cfg.noise_watts, cfg.power_budget_watts)
        closed = sjnr_closed_form(eff, W, state.beta, cfg.noise_watts).eta
        mc = sjnr_monte_carlo(state.channels, irs, W, cfg.noise_watts, 2000,
                              rng_stream(seed, 0, "dirs"), cfg.dirs_alphabet).eta
        worst = max(worst, float(np.max(np.abs(closed / mc - 1))))
    ok = worst <= 0.05
    criterion(2, ok, f"worst per-user relative gap {worst:.4f} over 20 instances (limit 0.05)")
    assert ok


def test_eigen_precoder(criterion):
    rng = np.random.default_rng(2024)
    worst_res = worst_lam = 0.0
    for _ in range(1000):
        na = int(rng.choice([4, 8, 16]))
        K = int(rng.choice([2, 4]))
        h = (rng.standard_normal((na, 2 * K)) + 1j * rng.standard_normal((na, 2 * K))) / np.sqrt(2)
        eff = EffectiveChannels(h_I=h[:, :K], h_d=h[:, K:])
        beta = rng.random(K) * 10.0 ** rng.uniform(-3, 1)
        sigma2, P0 = 10.0 ** rng.uniform(-2, 1), 10.0 ** rng.uniform(-1, 1)
        k = int(rng.integers(K))
        num, den = sjnr_pencil(k, eff, beta, sigma2, P0)
        lam, w = max_eigvec(num, den)
        A = build_A(k, eff, beta, sigma2, P0)
        worst_res = max(worst_res, np.linalg.norm(A @ w - lam * w) / np.linalg.norm(A, 2))
        lam_ref, _ = dominant_generalized(num, den)
        worst_lam = max(worst_lam, abs(lam - lam_ref) / lam_ref)
    ok = worst_res <= 1e-8 and worst_lam <= 1e-8
    criterion(3, ok, f"max residual/||A|| {worst_res:.2e}, max eigenvalue rel err {worst_lam:.2e}")
    assert ok


def test_manifold_machinery(criterion):
    rng = np.random.default_rng(7)
    fd_err = tangency = modulus = 0.0
    monotone = True
    for i in range(100):
        ni = int(rng.integers(2, 17))
        ch = random_channels(rng, n_antennas=int(rng.integers(1, 9)),
                             n_users=int(rng.integers(1, 5)), n_irs=ni)
        v = np.exp(2j * np.pi * rng.random(ni))
        fd = finite_difference_gradient(lambda x: effective_power(x, ch, strict=False), v)
        g = euclidean_gradient(v, ch)
        fd_err = max(fd_err, np.linalg.norm(g - fd) / np.linalg.norm(fd))
        rg = riemannian_gradient(g, v)
        tangency = max(tangency, float(np.max(np.abs(np.real(rg * v.conj())))))
        out = retract_step(v, rng.standard_normal(ni) + 1j * rng.standard_normal(ni),
                           10.0 ** rng.uniform(-3, 2))
        modulus = max(modulus, float(np.max(np.abs(np.abs(out) - 1))))
        _, trace = rcg_optimize(ch, restarts=2, rng=rng)
        monotone &= bool(np.all(np.diff(trace.p_e) >= 0))
    ok = fd_err <= 1e-5 and tangency <= 1e-12 and monotone and modulus <= 1e-15
    criterion(4, ok, f"fd rel err {fd_err:.2e}, tangency {tangency:.2e}, "
                     f"traces monotone {monotone}, |modulus-1| {modulus:.2e}")
    assert ok


def test_discrete_projection_vs_exhaustive(criterion):
    ratios, bounded = [], True
    for ni in (4, 6, 8):
        for seed in range(20):
            cfg = desk_profile(n_irs=ni, seed=seed)
            geo = build_geometry(cfg, rng_stream(seed, 0, "geometry"))
            ch = draw_channel_set(cfg, geo, rng_stream(seed, 0, "channels"))
            v, trace = rcg_optimize(ch)
            best = exhaustive_best(ch, cfg.irs_alphabet)
            ratios.append(effective_power(project_discrete(v, cfg.irs_alphabet), ch) / best)
            bounded &= trace.p_e[-1] >= best * (1 - 1e-12)
    median = float(np.median(ratios))
    ok = median >= 0.85 and bounded
    criterion(5, ok, f"median projected/exhaustive {median:.4f}, min {min(ratios):.4f}, "
                     f"relaxation >= exhaustive in all 60 draws: {bounded}")
    assert ok


def test_power_sweep_ordering(criterion, power_report):
    rep = power_report
    details, ok = [], True
    for p in (0.0, 10.0):
        for a, b in (("proposed", "ajp"), ("ajp", "fpj-no-defense")):
            gap, se = rep.paired(a, b, p)
            good = gap > 0 and gap >= 3 * se
            ok &= good
            details.append(f"{a}-{b}@{p:g}dBm={gap:.3g} ({gap / se:.1f} SE)")
    top = rep.mean[rep.grid.index(10.0)]
    no_jam_max = rep.value("no-jamming", 10.0) == top.max()
    ok &= no_jam_max
    details.append(f"no-jamming max at 10 dBm: {no_jam_max}")
    criterion(6, ok, "; ".join(details))
    assert ok


def test_irs_size_trend(criterion):
    rep = sweep("n-irs", [32, 64, 128], DESK, benchmarks=["proposed"], trials=200)
    m = rep.mean[:, 0]
    inc1, inc2 = m[1] - m[0], m[2] - m[1]
    nondecreasing = inc1 >= 0 and inc2 >= 0
    diminishing = inc2 < inc1
    ok = nondecreasing and diminishing
    criterion(7, ok, f"rates {m[0]:.4f} {m[1]:.4f} {m[2]:.4f}; increments 32->64 {inc1:.4f}, "
                     f"64->128 {inc2:.4f}; nondecreasing {nondecreasing}, "
                     f"diminishing {diminishing}")
    assert ok


def test_quantization_bits_trend(criterion):
    rep = sweep("bits", [1, 2, 3], DESK, benchmarks=["proposed"], trials=200)
    m = rep.mean[:, 0]
    limit = 0.05 * m[1]
    small_step = m[2] - m[1] < limit
    big_step = m[1] - m[0] > limit
    ok = small_step and big_step
    criterion(8, ok, f"rates {m[0]:.4f} {m[1]:.4f} {m[2]:.4f}; 3-2 bit {m[2] - m[1]:.4f}, "
                     f"2-1 bit {m[1] - m[0]:.4f}, 5% of 2-bit {limit:.4f}")
    assert ok


def test_determinism(criterion, tmp_path):
    cfg = desk_profile(trials=12, dirs_draws=200)
    blobs = []
    for run in range(2):
        for workers in (1, 2, 3):
            path = tmp_path / f"run{run}_w{workers}.csv"
            emit_report(sweep("power", [-10.0, 10.0], cfg, workers=workers), path)
            blobs.append(path.read_bytes())
    ok = all(b == blobs[0] for b in blobs)
    criterion(9, ok, f"{len(blobs)} CSVs (workers 1, 2, 3; two rounds) byte-identical: {ok}")
    assert ok
