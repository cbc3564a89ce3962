import numpy as np
import pytest

from infproj.errors import InfeasiblePointError, NonFiniteError
from infproj.spg import Box, SpgConfig, StepRule, spg, step_sizes, weighted_average
from infproj.synthetic import QuadraticOracle, ZeroOracle


def test_config_validation():
    with pytest.raises(ValueError):
        SpgConfig(0, 1.0)
    with pytest.raises(ValueError):
        SpgConfig(5, 0.0)
    assert SpgConfig(3, 1.0, "nonsmooth").mode is StepRule.NONSMOOTH


def test_step_rules_first_step():
    assert step_sizes(2.0, 3)[0] == pytest.approx(3 / 4)
    assert step_sizes(2.0, 3, StepRule.NONSMOOTH)[0] == pytest.approx(2.0)
    assert np.allclose(step_sizes(1.0, 4), 3.0 / np.array([2, 3, 4, 5]))


def test_weighted_average_formula():
    assert weighted_average([[0.0], [3.0]])[0] == pytest.approx(2.0)


@pytest.mark.parametrize("mode", list(StepRule))
def test_zero_field_fixed_point(mode):
    z1 = np.array([1.0, -2.0, 3.0])
    out = spg(ZeroOracle(3), z1, SpgConfig(17, 0.7, mode))
    assert np.allclose(out, z1, atol=1e-15)


def test_quadratic_exact_suboptimality():
    a, z1, g = np.array([2.0, -1.0, 0.5]), np.zeros(3), 3.0
    o = QuadraticOracle(a)
    out = spg(o, z1, SpgConfig(500, g))
    H = lambda z: o.value(z) + g / 2 * np.sum((z - z1) ** 2)
    zs = (g * z1 + a) / (g + 1)
    assert H(out) - H(zs) <= 1e-3 * H(z1)


def test_box_feasibility_and_clamp():
    o = QuadraticOracle(np.array([-5.0, 2.0]), noise_std=3.0)
    seen = []
    out = spg(o, np.array([0.5, 0.5]), SpgConfig(200, 1.0), domain=Box.nonneg(),
              rng=np.random.default_rng(0), callback=lambda t, z: seen.append(z.copy()))
    assert min(np.min(z) for z in seen) >= 0 and np.min(out) >= 0
    box = Box(-1.0, 1.0)
    out = spg(QuadraticOracle(np.array([5.0, -5.0])), np.zeros(2), SpgConfig(50, 1.0), domain=box)
    assert box.contains(out)


def test_errors():
    with pytest.raises(InfeasiblePointError):
        spg(ZeroOracle(1), np.array([-1.0]), SpgConfig(3, 1.0), domain=Box.nonneg())

    class Bad(ZeroOracle):
        def grad(self, z, sample=None):
            return np.full(self.dim, np.nan)

    with pytest.raises(NonFiniteError) as exc:
        spg(Bad(2), np.zeros(2), SpgConfig(3, 1.0))
    assert exc.value.iteration == 1


def test_gamma_warning():
    with pytest.warns(RuntimeWarning):
        spg(ZeroOracle(1), np.zeros(1), SpgConfig(3, 1.0, L_estimate=1.0))


def test_seeded_reproducibility():
    o = QuadraticOracle(np.ones(4), noise_std=1.0)
    a = spg(o, np.zeros(4), SpgConfig(100, 2.0, seed=7))
    b = spg(o, np.zeros(4), SpgConfig(100, 2.0, seed=7))
    assert np.array_equal(a, b)
