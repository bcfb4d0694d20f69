import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as spi
from scipy import stats
from scipy.special import jn_zeros

from catp.channel import (
    A2AParams,
    A2GParams,
    Breakpoint,
    BuildingLayout,
    CompositeChannel,
    FadingProcess,
    Floor,
    Grid2D,
    OutsideFieldError,
    PathLossParams,
    RadioMap,
    RadioMapChannel,
    RangeError,
    Wall,
    a2a_channel,
    a2g_gain_db,
    a2g_los_probability,
    a2g_mean_gain_db,
    channel_gain,
    jakes_correlation,
    path_loss_amplitude,
    path_loss_db,
    rician_pdf,
    sample_fading_field,
    sample_rician_amplitude,
    sample_shadowing_field,
    wall_floor_attenuation_db,
)
from catp.channel.radiomap import RadioMapFormatError
from catp.validation import empirical_autocorrelation

# --- path loss -------------------------------------------------------------


def test_path_loss_examples():
    assert path_loss_amplitude(1.0, PathLossParams()) == 1.0
    p = PathLossParams(K0=1.0, d0=1.0, alpha=2.0)
    assert path_loss_amplitude(10.0, p) == pytest.approx(10.0)
    assert -path_loss_db(10.0, p) == pytest.approx(-20.0)
    assert path_loss_db(20.0, p) - path_loss_db(10.0, p) == pytest.approx(6.0206, abs=1e-4)
    with pytest.raises(RangeError):
        path_loss_amplitude(0.5, p)


def test_breakpoint_is_discontinuous_unless_requested():
    bp = Breakpoint(2.0, 4.0, 10.0)
    printed = PathLossParams(d0=1.0, breakpoint=bp)
    below, above = path_loss_db(np.array([10 - 1e-9, 10.0]), printed)
    assert above - below == pytest.approx(20.0, abs=1e-6)  # (4 - 2)/2 * 20 log10(10)
    smooth = PathLossParams(d0=1.0, breakpoint=bp, continuous=True)
    below, above = path_loss_db(np.array([10 - 1e-9, 10.0]), smooth)
    assert above - below == pytest.approx(0.0, abs=1e-6)
    assert path_loss_db(100.0, smooth) - path_loss_db(10.0, smooth) == pytest.approx(40.0)
    with pytest.raises(ValueError):
        PathLossParams(breakpoint=Breakpoint(4.0, 2.0, 10.0))


@given(st.floats(1.0, 1e4), st.floats(0.5, 6.0))
def test_path_loss_monotone(d, alpha):
    p = PathLossParams(alpha=alpha)
    assert path_loss_amplitude(d * 1.5, p) > path_loss_amplitude(d, p)


# --- walls and floors ------------------------------------------------------


def test_wall_floor_examples():
    assert wall_floor_attenuation_db([0, 0], [5, 0], BuildingLayout()) == 0.0
    layout = BuildingLayout(walls=(Wall((2, -1), (2, 1), 5.0),), floors=(Floor(3.0, 10.0),))
    assert wall_floor_attenuation_db([0, 0, 1], [5, 0, 5], layout) == 15.0
    assert wall_floor_attenuation_db([0, 0, 1], [1, 0, 2], layout) == 0.0
    # the link ends exactly on the wall: counted once
    assert wall_floor_attenuation_db([0, 0, 1], [2, 0, 1], layout) == 5.0


def _crosses(p, q, a, b):
    """Independent oracle: solve p + t (q - p) = a + s (b - a) for t, s in [0, 1]."""
    M = np.array([[q[0] - p[0], a[0] - b[0]], [q[1] - p[1], a[1] - b[1]]])
    if abs(np.linalg.det(M)) < 1e-14:
        return False
    t, s = np.linalg.solve(M, np.array([a[0] - p[0], a[1] - p[1]]))
    return -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= s <= 1 + 1e-12


def test_grazing_path_through_parallel_walls():
    walls = tuple(Wall((x, 0.0), (x + 0.2, 10.0), 4.0) for x in (1.0, 2.0, 3.0))
    p, q = (0.0, 0.05), (5.0, 0.4)
    expected = sum(4.0 for w in walls if _crosses(p, q, w.start, w.end))
    assert expected == 12.0
    assert wall_floor_attenuation_db(p, q, BuildingLayout(walls=walls)) == expected


@settings(max_examples=200)
@given(st.lists(st.floats(-5, 5), min_size=8, max_size=8))
def test_wall_count_matches_oracle(c):
    p, q, a, b = (c[0], c[1]), (c[2], c[3]), (c[4], c[5]), (c[6], c[7])
    M = np.array([[q[0] - p[0], a[0] - b[0]], [q[1] - p[1], a[1] - b[1]]])
    if abs(np.linalg.det(M)) < 1e-6:
        return  # near-parallel configurations are left to the touching tests above
    t, s = np.linalg.solve(M, np.array([a[0] - p[0], a[1] - p[1]]))
    if min(abs(t), abs(t - 1), abs(s), abs(s - 1)) < 1e-6:
        return  # too close to an endpoint for a clean oracle
    got = wall_floor_attenuation_db(p, q, BuildingLayout(walls=(Wall(a, b, 3.0),)))
    assert got == (3.0 if _crosses(p, q, a, b) else 0.0)


# --- shadowing -------------------------------------------------------------


def _mean_standard_error(shape, spacing, beta, sigma):
    """Standard error of the spatial mean of an exp(-d/beta)-correlated field."""
    ny, nx = shape
    dy = np.arange(-(ny - 1), ny)
    dx = np.arange(-(nx - 1), nx)
    counts = (ny - np.abs(dy))[:, None] * (nx - np.abs(dx))[None, :]
    rho = np.exp(-spacing * np.hypot(dy[:, None], dx[None, :]) / beta)
    return sigma * math.sqrt(np.sum(counts * rho)) / (nx * ny)


def test_shadowing_zero_sigma_is_constant():
    f = sample_shadowing_field(Grid2D((0, 0), 0.5, (20, 30)), -4.0, 0.0, 2.0, 1)
    assert np.all(f.values_db == -4.0)


def test_shadowing_rejects_coarse_grid():
    with pytest.raises(ValueError, match="too coarse"):
        sample_shadowing_field(Grid2D((0, 0), 1.0, (10, 10)), 0.0, 4.0, 2.0, 1)


def test_shadowing_is_deterministic():
    g = Grid2D((0, 0), 0.5, (40, 40))
    a = sample_shadowing_field(g, 0.0, 4.0, 2.0, 99)
    b = sample_shadowing_field(g, 0.0, 4.0, 2.0, 99)
    np.testing.assert_array_equal(a.values_db, b.values_db)
    assert not np.array_equal(a.values_db, sample_shadowing_field(g, 0.0, 4.0, 2.0, 100).values_db)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_shadowing_statistics(seed):
    beta, sigma, mu = 4.0, 6.0, -3.0
    g = Grid2D((0, 0), beta / 4, (400, 400))  # 1.6e5 cells
    f = sample_shadowing_field(g, mu, sigma, beta, seed)
    assert abs(f.values_db.mean() - mu) < 3 * _mean_standard_error(g.shape, g.spacing, beta, sigma)
    for lag in (0, 1, 2, 4, 8, 12):
        r = 0.5 * (empirical_autocorrelation(f.values_db, lag, 0) + empirical_autocorrelation(f.values_db, lag, 1))
        assert r == pytest.approx(math.exp(-lag * g.spacing / beta), abs=0.05)


def test_shadowing_interpolation_is_bilinear_in_db():
    g = Grid2D((0, 0), 1.0, (2, 2))
    from catp.channel import ShadowingField

    f = ShadowingField(g, np.array([[0.0, 2.0], [4.0, 6.0]]), 0.0, 1.0, 4.0)
    assert f.db_at([0.5, 0.5]) == pytest.approx(3.0)
    assert f.amplitude_at([1.0, 1.0]) == pytest.approx(10 ** (6 / 20))
    with pytest.raises(OutsideFieldError):
        f.db_at([2.0, 0.0])


# --- fading ----------------------------------------------------------------


def _lattice_samples(n, K=0.0, seed=0, wavelength=0.125):
    field = sample_fading_field(None, wavelength, seed, rician_k=K, method="sos")
    side = int(math.ceil(math.sqrt(n)))
    coords = 20.37 * wavelength * np.arange(side)
    return field, field.on_lattice(coords, coords).ravel()[:n]


def test_fading_rayleigh_distribution_and_power():
    _, h = _lattice_samples(100_000, seed=3)
    assert stats.kstest(np.abs(h), stats.rayleigh(scale=1 / math.sqrt(2)).cdf).pvalue > 0.01
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, rel=0.01)


def test_rician_zero_matches_rayleigh():
    _, a = _lattice_samples(20_000, K=0.0, seed=4)
    _, b = _lattice_samples(20_000, K=0.0, seed=5)
    assert stats.ks_2samp(np.abs(a), np.abs(b)).pvalue > 0.01


@pytest.mark.parametrize("K", [1.0, 5.0, 10.0])
def test_rician_k_estimate(K):
    _, h = _lattice_samples(100_000, K=K, seed=int(K))
    p = np.abs(h) ** 2
    s = math.sqrt(1 - p.var() / p.mean() ** 2)
    assert s / (1 - s) == pytest.approx(K, rel=0.10)
    assert p.mean() == pytest.approx(1 + K, rel=0.02)


def test_rician_large_k_has_constant_envelope():
    _, h = _lattice_samples(2000, K=1e8, seed=1)
    np.testing.assert_allclose(np.abs(h) / 1e4, 1.0, atol=1e-3)


def test_fading_spatial_correlation_at_half_wavelength():
    lam = 0.125
    field, _ = _lattice_samples(1, seed=6, wavelength=lam)
    coords = 20.37 * lam * np.arange(200)
    a = field.on_lattice(coords, coords)
    b = field.on_lattice(coords + lam / 2, coords)
    corr = np.real(np.mean(a * np.conj(b))) / np.mean(np.abs(a) ** 2)
    assert corr == pytest.approx(-0.3042, abs=0.05)


def test_fading_cholesky_grid_correlation():
    lam = 0.2
    g = Grid2D((0, 0), lam / 8, (8, 8))
    ests = []
    for seed in range(300):
        f = sample_fading_field(g, lam, seed, method="cholesky")
        v = f.values
        ests.append(np.real(np.mean(v[:, :-4] * np.conj(v[:, 4:]))))
    assert np.mean(ests) == pytest.approx(float(jakes_correlation(lam / 2, lam)), abs=0.05)


def test_fading_rejects_coarse_grid():
    with pytest.raises(ValueError, match="too coarse"):
        sample_fading_field(Grid2D((0, 0), 0.1, (4, 4)), 0.2, 0)


def test_fading_process_blocks():
    static = FadingProcess(0.125, seed=3)
    p = np.array([[0.3, 0.7]])
    assert static.at(p, 0.0) == static.at(p, 1e6)
    blocky = FadingProcess(0.125, seed=3, coherence_time=1.0)
    assert blocky.at(p, 0.2) == blocky.at(p, 0.9)
    assert blocky.at(p, 0.2) != blocky.at(p, 1.2)
    rebuilt = FadingProcess(0.125, seed=3, coherence_time=1.0)
    assert rebuilt.at(p, 5.5) == blocky.at(p, 5.5)


# --- Jakes correlation -----------------------------------------------------


def test_jakes_examples():
    lam = 0.3
    assert jakes_correlation(0.0, lam) == 1.0
    first_zero = jn_zeros(0, 1)[0] * lam / (2 * math.pi)
    assert first_zero / lam == pytest.approx(0.38274, abs=1e-5)
    assert abs(jakes_correlation(first_zero, lam)) < 1e-12
    assert jakes_correlation(lam / 2, lam) == pytest.approx(-0.30421, abs=5e-5)
    assert jakes_correlation(lam / 2, lam) == pytest.approx(-0.3042421776, abs=1e-10)
    with pytest.raises(ValueError):
        jakes_correlation(-1.0, lam)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 20.0))
def test_jakes_matches_integral_representation(d):
    x = 2 * math.pi * d
    ref, _ = spi.quad(lambda th: math.cos(x * math.sin(th)), 0, math.pi, limit=200, epsabs=1e-13)
    assert float(jakes_correlation(d, 1.0)) == pytest.approx(ref / math.pi, abs=1e-8)


# --- composite gain --------------------------------------------------------


def test_channel_gain_deterministic_only():
    pl = PathLossParams(alpha=3.0)
    layout = BuildingLayout(walls=(Wall((2, -5), (2, 5), 6.0),))
    ch = CompositeChannel(path_loss=pl, layout=layout)
    p, q = np.array([4.0, 1.0]), np.array([0.0, 0.0])
    d = np.linalg.norm(p - q)
    expected_db = -path_loss_db(d, pl) - 6.0
    assert abs(channel_gain(ch, p, q)) == pytest.approx(10 ** (expected_db / 20), rel=1e-14)
    assert ch.realization_db(p, q) == ch.mean_gain_db(p, q) == -ch.deterministic_loss_db(p, q)
    bare = CompositeChannel(path_loss=pl)
    assert abs(channel_gain(bare, p, q)) == pytest.approx(1 / path_loss_amplitude(d, pl))


def test_channel_gain_time_invariant_fading():
    ch = CompositeChannel(path_loss=PathLossParams(), fading=FadingProcess(0.125, seed=2))
    p, q = np.array([3.1, 0.4]), np.zeros(2)
    assert channel_gain(ch, p, q, 0.0) == channel_gain(ch, p, q, 123.0)


def test_channel_gain_mean_power_over_fading():
    g = Grid2D((0, 0), 0.5, (20, 20))
    shadow = sample_shadowing_field(g, 0.0, 4.0, 2.0, 7)
    pl = PathLossParams(alpha=2.0)
    p, q = np.array([3.3, 4.1]), np.array([-2.0, 0.0])
    powers = []
    for seed in range(4000):
        ch = CompositeChannel(path_loss=pl, shadowing=shadow, fading=FadingProcess(0.125, seed=seed, n_scatterers=64))
        powers.append(abs(channel_gain(ch, p, q)) ** 2)
    powers = np.array(powers)
    expected = shadow.amplitude_at(p) ** 2 / path_loss_amplitude(np.linalg.norm(p - q), pl) ** 2
    se = powers.std(ddof=1) / math.sqrt(len(powers))
    assert abs(powers.mean() - expected) < 3 * se
    ch = CompositeChannel(path_loss=pl, shadowing=shadow, fading=FadingProcess(0.125, seed=0))
    assert ch.mean_power_gain(p, q) == pytest.approx(expected)


@pytest.mark.parametrize("K", [0.0, 3.0])
def test_mean_gain_db_matches_log_average(K):
    _, h = _lattice_samples(100_000, K=K, seed=9)
    ch = CompositeChannel(fading=FadingProcess(0.125, seed=0, rician_k=K))
    mc = np.mean(20 * np.log10(np.abs(h)))
    assert ch.fading_log_mean_db() == pytest.approx(mc, abs=0.05)


def test_near_field_policy():
    ch = CompositeChannel(path_loss=PathLossParams(d0=1.0))
    with pytest.raises(RangeError):
        ch.gain([0.2, 0.0], [0.0, 0.0])
    clamp = CompositeChannel(path_loss=PathLossParams(d0=1.0), near_field="clamp")
    assert abs(clamp.gain([0.2, 0.0], [0.0, 0.0])) == 1.0


def test_radio_map_round_trip(tmp_path):
    g = Grid2D((-1.0, 2.0), 0.25, (3, 4))
    values = np.random.default_rng(0).normal(-60, 5, size=(3, 4))
    rm = RadioMap(g, {"mean_gain_db": values})
    rm.write(tmp_path / "map.txt")
    back = RadioMap.read(tmp_path / "map.txt")
    assert back.grid == g
    np.testing.assert_array_equal(back.layers["mean_gain_db"], values)
    ch = RadioMapChannel(back, "mean_gain_db")
    assert ch.large_scale_db(np.array([-1.0, 2.0]), None) == values[0, 0]
    (tmp_path / "bad.txt").write_text("not a map\n")
    with pytest.raises(RadioMapFormatError):
        RadioMap.read(tmp_path / "bad.txt")


# --- UAV channels ----------------------------------------------------------

A2G = A2GParams(wavelength=0.125, mu_los=1.0, sigma_los=2.0, mu_nlos=20.0, sigma_nlos=8.0, a=9.61, b=0.16)


def test_a2g_los_probability_examples():
    a = 9.61
    elev = math.radians(a)
    p_uav = np.array([100.0, 0.0, 100.0 * math.tan(elev)])
    assert a2g_los_probability(p_uav, np.zeros(3), A2G) == pytest.approx(1 / (1 + a))
    steep = A2GParams(0.125, 0, 0, 0, 0, a=9.61, b=5.0)
    assert a2g_los_probability([1e-9, 0, 100.0], np.zeros(3), steep) == pytest.approx(1.0)
    assert a2g_los_probability([0.0, 0.0, 100.0], np.zeros(3), A2G) > 0.99
    # 45 degrees, evaluated directly
    direct = 1.0 / (1.0 + 9.61 * math.exp(-0.16 * (45.0 - 9.61)))
    assert a2g_los_probability([50.0, 0.0, 50.0], np.zeros(3), A2G) == pytest.approx(direct, rel=1e-12)
    with pytest.raises(ValueError):
        a2g_los_probability([1.0, 0.0, -1.0], np.zeros(3), A2G)


@given(st.floats(1.0, 89.0), st.floats(0.01, 3.0))
def test_a2g_los_probability_increases_with_elevation(elev, b):
    params = A2GParams(0.125, 0, 0, 0, 0, a=9.61, b=b)

    def at(e):
        return a2g_los_probability([math.cos(math.radians(e)), 0, math.sin(math.radians(e))], np.zeros(3), params)

    assert at(min(elev + 0.5, 89.9)) >= at(elev)


def test_a2g_gain_cases():
    plain = A2GParams(0.125, 0.0, 0.0, 0.0, 0.0)
    p, q = np.array([30.0, 40.0, 50.0]), np.zeros(3)
    d = np.linalg.norm(p - q)
    assert a2g_gain_db(p, q, plain, 1) == pytest.approx(-20 * math.log10(4 * math.pi * 0.125 * d))
    assert a2g_gain_db(p, q, A2G, 42) == a2g_gain_db(p, q, A2G, 42)
    with pytest.raises(ValueError):
        a2g_gain_db(np.zeros(3) + [0, 0, 1], np.array([0, 0, 1.0]), A2G, 0)


def test_a2g_mixture_mean():
    p, q = np.array([30.0, 40.0, 50.0]), np.zeros(3)
    rng = np.random.default_rng(5)
    samples = np.array([a2g_gain_db(p, q, A2G, rng) for _ in range(20_000)])
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    assert abs(samples.mean() - a2g_mean_gain_db(p, q, A2G)) < 3 * se


def test_a2a_sigma0_decreases_with_altitude():
    params = A2AParams(a=2.0, b=-0.5, c=0.1)
    s = params.sigma0(np.array([10.0, 50.0, 100.0, 400.0]))
    assert np.all(np.diff(s) < 0)
    with pytest.raises(ValueError):
        A2AParams(a=1.0, b=-0.5, c=-1.0).sigma0(100.0)
    with pytest.raises(ValueError):
        A2AParams(a=1.0, b=0.5, c=0.1)


@pytest.mark.parametrize("form", ["printed", "textbook"])
def test_rician_pdf_normalised(form):
    x = np.linspace(0, 20, 20001)
    assert np.trapezoid(rician_pdf(x, 2.0, 0.8, form=form), x) == pytest.approx(1.0, abs=1e-6)


def test_rician_rho_zero_is_rayleigh():
    x = np.linspace(0, 5, 50)
    np.testing.assert_allclose(rician_pdf(x, 0.0, 0.7, form="textbook"), stats.rayleigh(scale=0.7).pdf(x), atol=1e-12)


@pytest.mark.parametrize("form", ["printed", "textbook"])
def test_rician_samples_match_pdf(form):
    rho, sigma0 = 1.5, 0.6
    x = sample_rician_amplitude(rho, sigma0, 50_000, np.random.default_rng(11), form=form)
    edges = np.linspace(0, rho + 5 * sigma0, 31)
    counts, _ = np.histogram(x, edges)
    grid = np.linspace(0, edges[-1], 30001)
    cdf = spi.cumulative_trapezoid(rician_pdf(grid, rho, sigma0, form=form), grid, initial=0.0)
    expected = np.diff(np.interp(edges, grid, cdf)) * len(x)
    keep = expected > 5
    chi2 = np.sum((counts[keep] - expected[keep]) ** 2 / expected[keep])
    assert stats.chi2.sf(chi2, keep.sum() - 1) > 0.001


def test_a2a_channel_path_loss_and_phase():
    params = A2AParams(a=0.5, b=-0.5, c=0.01, rho=1.0)
    p1, p2 = np.array([0.0, 0.0, 100.0]), np.array([30.0, 40.0, 100.0])
    h = a2a_channel(p1, p2, params, np.random.default_rng(0), size=40_000)
    assert h.shape == (40_000,)
    amp = np.abs(h) * 50.0  # undo free-space loss at d = 50
    ref = sample_rician_amplitude(1.0, float(params.sigma0(100.0)), 40_000, np.random.default_rng(1))
    assert stats.ks_2samp(amp, ref).pvalue > 0.01
    assert stats.kstest(np.angle(h) % (2 * np.pi), stats.uniform(0, 2 * np.pi).cdf).pvalue > 0.01
    with pytest.raises(ValueError):
        a2a_channel(p1, p2 + [0, 0, 5], params, 0)
