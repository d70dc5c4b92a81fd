import math

import numpy as np
import pytest

from conftest import point_law, sim00_law
from rdesteady.densities import SampleMatrix, lhs_sample
from rdesteady.errors import ContractError, DegeneratePosteriorError
from rdesteady.model_rm import eigenvalues_from_trace_det, trace_det
from rdesteady.randeq import DensityGrid2D, GridSpec2D, NoiseSpec, posterior_unnormalized
from rdesteady.model_rm import eig_system
from rdesteady.stability import (DEFAULT_SIGMA_GRID, KappaGrid, ProbePoint, eig_posterior,
                                 kappa_direct, kappa_from_grid, kappa_map, sigma2_asymmetry)

NOISE = NoiseSpec((0.005, 0.005))
FINE = GridSpec2D(-1.5, 1.5, -1.5, 1.5, 601, 601)
WIDE = GridSpec2D(-3, 3, -3, 3, 1201, 1201)


@pytest.fixture(scope="module")
def tight():
    return lhs_sample(point_law(), 24000, 1)


@pytest.fixture(scope="module")
def sim00():
    return lhs_sample(sim00_law(), 24000, 2024)


def _argmax_where(g, mask):
    v = np.where(mask, g.values, -1.0)
    j, i = np.unravel_index(np.argmax(v), v.shape)
    return int(i), int(j)


def test_default_sigma_grid():
    s = DEFAULT_SIGMA_GRID
    assert (s.x_min, s.x_max, s.nx, s.ny) == (-1.5, 1.5, 151, 151)
    assert 0.0 in s.y_centers


def test_coexistence_eigenvalue_modes(tight):
    g = eig_posterior((1 / 3, 8 / 9), tight, NOISE)
    assert g.normalized and g.mass == pytest.approx(1.0, abs=1e-9)
    s = g.spec
    upper = (s.y_centers > 0)[:, None] & np.ones(s.nx, bool)
    for mask, im in ((upper, math.sqrt(17) / 12), (~upper, -math.sqrt(17) / 12)):
        i, j = _argmax_where(g, mask)
        ti, tj = s.cell_of(-1 / 12, im)
        assert abs(i - ti) <= 1 and abs(j - tj) <= 1


def test_origin_eigenvalue_modes(tight):
    g = eig_posterior((0.0, 0.0), tight, NOISE)
    s = g.spec
    right = np.ones(s.ny, bool)[:, None] & (s.x_centers > 0.4)[None, :]
    for mask, lam in ((right, 1.0), (~right, -0.25)):
        i, j = _argmax_where(g, mask)
        ti, tj = s.cell_of(lam, 0.0)
        assert abs(i - ti) <= 1 and abs(j - tj) <= 1


@pytest.mark.parametrize("loc", [(1 / 3, 8 / 9), (0.0, 0.0), (0.7, 0.2), (1.2, 1.4)])
def test_conjugate_symmetry(sim00, loc):
    g = eig_posterior(loc, sim00, NOISE, DEFAULT_SIGMA_GRID)
    assert sigma2_asymmetry(g) <= 1e-12


def test_asymmetric_window_rejected(tight):
    g = eig_posterior((0.3, 0.3), tight, NoiseSpec((0.05, 0.05)), GridSpec2D(-1, 1, -1, 1.2, 21, 21))
    with pytest.raises(ContractError):
        sigma2_asymmetry(g)


def test_no_mass_in_window(tight):
    with pytest.raises(DegeneratePosteriorError):
        eig_posterior((1 / 3, 8 / 9), tight, NOISE, GridSpec2D(5, 6, 5, 6, 11, 11))


def test_eig_noise_needs_two_stds(tight):
    with pytest.raises(ContractError):
        eig_posterior((0, 0), tight, NoiseSpec((0.01,)))


def _grid(values, lo=-1.0, hi=1.0):
    n = values.shape[0]
    return DensityGrid2D(GridSpec2D(lo, hi, lo, hi, n, n), values)


def test_kappa_all_negative():
    v = np.zeros((10, 10))
    v[:, :5] = 1.0
    from rdesteady.randeq import normalize
    assert kappa_from_grid(normalize(_grid(v))) == pytest.approx(1.0, abs=1e-9)


def test_kappa_mirror_symmetric():
    from rdesteady.randeq import normalize
    v = np.random.default_rng(3).random((12, 12))
    v = v + v[:, ::-1]
    assert kappa_from_grid(normalize(_grid(v))) == pytest.approx(0.5, abs=1e-9)


def test_kappa_center_at_zero_counts_nonnegative():
    from rdesteady.randeq import normalize
    v = np.zeros((3, 3))
    v[:, 1] = 1.0
    assert kappa_from_grid(normalize(_grid(v))) == 0.0


def test_kappa_needs_normalized():
    with pytest.raises(ContractError):
        kappa_from_grid(_grid(np.ones((4, 4))))


def test_kappa_origin_point_mass(tight):
    kap = kappa_from_grid(eig_posterior((0.0, 0.0), tight, NOISE, FINE))
    assert abs(kap - 0.5) <= 0.02


def test_kappa_direct_origin_exact(sim00):
    assert kappa_direct((0.0, 0.0), sim00) == 0.5


def test_kappa_direct_coexistence_point_mass(tight):
    assert kappa_direct((1 / 3, 8 / 9), tight) == 1.0


def test_kappa_direct_permutation_invariant(sim00):
    perm = sim00.permuted(np.random.default_rng(4).permutation(sim00.rows))
    for loc in ((0.2, 0.5), (0.9, 1.1), (1.3, 0.1)):
        assert kappa_direct(loc, sim00) == kappa_direct(loc, perm)


def test_kappa_direct_needs_three_params():
    with pytest.raises(ContractError):
        kappa_direct((0, 0), SampleMatrix(np.ones((4, 2))))


def _weighted_fraction(loc, samples):
    """Limit of the grid route for small noise: roots weighted by 1/|l1 - l2|^2."""
    t, d = trace_det(loc, samples.values)
    l1, l2 = eigenvalues_from_trace_det(t, d)
    w = 1.0 / np.abs(l1 - l2) ** 2
    return float(np.sum(w * ((l1.real < 0).astype(float) + (l2.real < 0))) / (2 * np.sum(w)))


@pytest.mark.parametrize("loc", [(1 / 3, 8 / 9), (0.0, 0.0), (1.0, 0.0), (1.2, 1.2)])
def test_grid_route_matches_weighted_oracle(sim00, loc):
    # away from discriminant sign changes the weights are bounded and the limit is well posed
    kap = kappa_from_grid(eig_posterior(loc, sim00, NOISE, WIDE))
    assert kap == pytest.approx(_weighted_fraction(loc, sim00), abs=0.01)


def test_kappa_direct_agrees_with_grid_at_random_probes(sim00):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for loc in rng.uniform(0.0, 1.5, (10, 2)):
        grid = kappa_from_grid(eig_posterior(tuple(loc), sim00, NOISE, WIDE))
        worst = max(worst, abs(grid - kappa_direct(tuple(loc), sim00)))
    assert worst <= 0.03


def test_window_widening_keeps_mass(sim00):
    # nested windows with identical cell centers (spacing 0.02)
    small = GridSpec2D(-1.01, 1.01, -1.01, 1.01, 101, 101)
    big = GridSpec2D(-4.01, 4.01, -4.01, 4.01, 401, 401)
    huge = GridSpec2D(-6.01, 6.01, -6.01, 6.01, 601, 601)
    noise = NoiseSpec((0.02, 0.02))
    for loc in ((0.3, 0.8), (1.4, 1.4)):
        m = [posterior_unnormalized(eig_system(loc), sim00, noise, g).mass for g in (small, big, huge)]
        assert m[0] <= m[1] * (1 + 1e-12) and m[1] <= m[2] * (1 + 1e-12)
        # full coverage: widening further captures no extra mass
        assert m[1] / m[2] == pytest.approx(1.0, abs=1e-6)


def test_kappa_map_direct(sim00):
    region = GridSpec2D(0, 1.5, 0, 1.5, 10, 10)
    kg = kappa_map(region, sim00, "direct")
    assert kg.values.shape == (10, 10)
    assert np.all((kg.values >= 0) & (kg.values <= 1))
    x, y = region.center(3, 7)
    assert kg.at(x, y) == kappa_direct((x, y), sim00)


def test_kappa_map_grid_matches_per_cell(tight):
    region = GridSpec2D(0.2, 0.5, 0.7, 1.0, 2, 2)
    noise = NoiseSpec((0.02, 0.02))
    kg = kappa_map(region, tight, "grid", noise, DEFAULT_SIGMA_GRID)
    for j, y in enumerate(region.y_centers):
        for i, x in enumerate(region.x_centers):
            assert kg.values[j, i] == kappa_from_grid(eig_posterior((x, y), tight, noise))
    assert kg.meta["method"] == "grid"


def test_kappa_map_bad_inputs(tight):
    region = GridSpec2D(0, 1, 0, 1, 2, 2)
    with pytest.raises(ValueError):
        kappa_map(region, tight, "exact")
    with pytest.raises(ContractError):
        kappa_map(region, tight, "grid")


def test_kappa_grid_invariants():
    spec = GridSpec2D(0, 1, 0, 1, 2, 2)
    KappaGrid(spec, np.full((2, 2), 1 + 1e-10))
    with pytest.raises(ContractError):
        KappaGrid(spec, np.full((2, 2), 1.1))
    with pytest.raises(ContractError):
        KappaGrid(spec, np.zeros((3, 2)))
    with pytest.raises(ContractError):
        KappaGrid(spec, np.zeros((2, 2))).at(2.0, 0.5)


def test_probe_point_validation():
    assert ProbePoint((1, 2), "a").location == (1.0, 2.0)
    with pytest.raises(ValueError):
        ProbePoint((float("nan"), 0), "b")
