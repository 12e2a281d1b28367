import math

import numpy as np
import pytest

from maxheat.errors import AnnulusDomainError, ConfigError
from maxheat.oracle import (annulus_b0, annulus_b0_curl, annulus_energy, radial_steady_theta,
                            printed_annulus_theta, printed_annulus_residual, square_torsion_center,
                            square_torsion_field, torsion_series_center)


def test_annulus_b0_value():
    bx, by = annulus_b0(1.2, 0.0)
    assert bx == 0.0
    assert by == pytest.approx(-1.0 / 1.2)


def test_annulus_b0_has_unit_circulation_density():
    theta = np.linspace(0.0, 2.0 * np.pi, 9)
    r = 1.3
    bx, by = annulus_b0(r * np.cos(theta), r * np.sin(theta))
    np.testing.assert_allclose(np.hypot(bx, by), 1.0 / r)


@pytest.mark.parametrize("x, y", [(0.5, 0.0), (0.0, 1.5), (1.2, 1.2)])
def test_annulus_b0_rejects_points_outside(x, y):
    with pytest.raises(AnnulusDomainError):
        annulus_b0(x, y)
    with pytest.raises(ValueError):
        annulus_b0(x, y)


def test_annulus_b0_tolerance_widens_the_annulus():
    annulus_b0(0.999, 0.0, tol=0.01)


def test_annulus_b0_is_curl_free():
    rng = np.random.default_rng(7)
    r = rng.uniform(1.05, 1.36, 50)
    phi = rng.uniform(0.0, 2.0 * np.pi, 50)
    assert np.max(np.abs(annulus_b0_curl(r * np.cos(phi), r * np.sin(phi)))) <= 1e-6


def test_annulus_energy():
    assert annulus_energy() == pytest.approx(math.pi * math.log(2.0) / 2.0)
    assert annulus_energy(mu=2.0) == pytest.approx(annulus_energy() / 2.0)


def test_radial_profile():
    sol = radial_steady_theta()
    assert sol.theta_of_r[0] == 0.0 and sol.theta_of_r[-1] == 0.0
    assert sol.residual <= 1e-12
    assert sol.max_closed_form_deviation() <= 1e-6
    assert sol.r_at_max == pytest.approx(1.2011, abs=1e-3)
    assert sol.theta_max == pytest.approx(0.02343, abs=1e-4)
    assert float(sol.at(sol.r_at_max)) == pytest.approx(sol.theta_max, rel=1e-5)
    assert np.all(sol.theta_of_r >= 0.0)


def test_radial_profile_is_second_order():
    coarse = radial_steady_theta(n_r=201).max_closed_form_deviation()
    fine = radial_steady_theta(n_r=401).max_closed_form_deviation()
    assert 3.5 <= coarse / fine <= 4.5


def test_radial_profile_scales_with_kappa():
    base = radial_steady_theta(n_r=501)
    slow = radial_steady_theta(kappa=4.0, n_r=501)
    np.testing.assert_allclose(slow.theta_of_r, base.theta_of_r / 4.0, rtol=1e-10, atol=1e-15)


def test_radial_profile_needs_resolution():
    with pytest.raises(ConfigError) as info:
        radial_steady_theta(n_r=50)
    assert info.value.key == "n_r"


def test_radial_profile_csv(tmp_path):
    sol = radial_steady_theta(n_r=101)
    path = sol.to_csv(tmp_path / "radial.csv")
    table = np.loadtxt(path, delimiter=",", skiprows=1)
    assert path.read_text().startswith("r,theta\n")
    np.testing.assert_array_equal(table[:, 1], sol.theta_of_r)


def test_printed_annulus_profile_is_not_a_solution():
    assert float(printed_annulus_theta(1.0)) == 0.0
    # misses the outer boundary condition
    assert float(printed_annulus_theta(math.sqrt(2.0))) == pytest.approx(math.pi / 2.0 * (1.5 - math.sqrt(2.0)))
    expected = math.pi / 2.0 * (math.log(2.0) - 1.0 / 1.2)
    assert float(printed_annulus_residual(1.2)) == pytest.approx(expected, abs=1e-5)


@pytest.mark.parametrize("n, expected", [(32, 0.07361474), (64, 0.07365719), (128, 0.07366781)])
def test_discrete_torsion_centre(n, expected):
    assert square_torsion_center(n) == pytest.approx(expected, abs=5e-7)


def test_torsion_field_symmetry():
    u = square_torsion_field(16)
    assert u.shape == (17, 17)
    assert not u[0].any() and not u[:, -1].any()
    np.testing.assert_allclose(u, u.T, atol=1e-15)
    np.testing.assert_allclose(u, u[::-1], atol=1e-15)
    assert np.unravel_index(np.argmax(u), u.shape) == (8, 8)


def test_torsion_centre_converges_to_series():
    series = torsion_series_center()
    assert series == pytest.approx(0.0736714, abs=1e-6)
    assert torsion_series_center(400) == pytest.approx(series, abs=1e-8)
    assert square_torsion_center(512) == pytest.approx(series, abs=1e-6)
    assert square_torsion_center(32) < square_torsion_center(64) < series


@pytest.mark.parametrize("n", [1, 33])
def test_torsion_rejects_bad_sizes(n):
    with pytest.raises(ConfigError):
        square_torsion_center(n)


def test_coarse_torsion_is_close_to_fine():
    assert abs(square_torsion_center(32) - square_torsion_center(512)) <= 1e-3
