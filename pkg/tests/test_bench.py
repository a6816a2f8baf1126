import numpy as np
import pytest

from partx.bench import (
    PROBLEMS,
    get_problem,
    goldstein_price_shifted,
    himmelblau_shifted,
    mc_volume_oracle,
    rosenbrock_shifted,
)
from partx.exceptions import DimensionTooSmall


# second, independently written evaluation path (vectorised, expanded polynomials)
def rosenbrock_vec(x):
    return 100.0 * (x[:, 1] - x[:, 0] ** 2) ** 2 + (1.0 - x[:, 0]) ** 2 - 20.0


def goldstein_vec(x):
    a, b = x[:, 0], x[:, 1]
    s = a + b + 1.0
    t = 2.0 * a - 3.0 * b
    p = 19.0 - 14.0 * a + 3.0 * a**2 - 14.0 * b + 6.0 * a * b + 3.0 * b**2
    q = 18.0 - 32.0 * a + 12.0 * a**2 + 48.0 * b - 36.0 * a * b + 27.0 * b**2
    return (1.0 + s * s * p) * (30.0 + t * t * q) - 50.0


def himmelblau_vec(x):
    a, b = x[:, 0], x[:, 1]
    return a**4 + b**4 + 2 * a * a * b + 2 * a * b * b - 21 * a * a - 13 * b * b - 14 * a - 22 * b + 170.0 - 40.0


@pytest.mark.parametrize("x,expected", [((1, 1), -20.0), ((0, 0), -19.0), ((-1, 1), -16.0)])
def test_rosenbrock_values(x, expected):
    assert rosenbrock_shifted(x) == pytest.approx(expected, abs=1e-12)


def test_rosenbrock_general_dimension():
    assert rosenbrock_shifted(np.ones(5)) == -20.0
    with pytest.raises(DimensionTooSmall):
        rosenbrock_shifted([1.0])


# at the origin the second factor is 30 + 0 * 18, so the value is 20 * 30 - 50
@pytest.mark.parametrize("x,expected", [((0, -1), -47.0), ((0, 0), 550.0)])
def test_goldstein_price_values(x, expected):
    assert goldstein_price_shifted(*x) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("x", [(1, 1), (1, -1), (-1, 1), (-1, -1)])
def test_goldstein_price_corners_dual(x):
    assert goldstein_price_shifted(x) == pytest.approx(goldstein_vec(np.array([x], float))[0], rel=1e-12)


def test_himmelblau_values():
    assert himmelblau_shifted(3, 2) == -40.0
    assert himmelblau_shifted(-2.805118, 3.131312) == pytest.approx(-40.0, abs=1e-3)
    assert himmelblau_shifted(0, 0) == 130.0


@pytest.mark.parametrize("name,vec", [("rosenbrock", rosenbrock_vec), ("goldstein_price", goldstein_vec),
                                      ("himmelblau", himmelblau_vec)])
def test_dual_implementation_agreement(name, vec):
    p = get_problem(name)
    x = p.domain.uniform(1_000_000, np.random.default_rng(0))
    want = vec(x)
    got = np.fromiter((p.objective(row) for row in x), float, count=len(x))
    scale = np.maximum(np.abs(want), 1.0)
    assert np.max(np.abs(got - want) / scale) <= 1e-9


def test_oracle_range_and_error_scaling():
    p = get_problem("goldstein_price")
    e1, s1 = mc_volume_oracle(p, 2_000, np.random.default_rng(1))
    e2, s2 = mc_volume_oracle(p, 32_000, np.random.default_rng(1))
    assert 0.0 <= e1 <= p.domain.volume and 0.0 <= e2 <= p.domain.volume
    assert s1 / s2 == pytest.approx(4.0, rel=0.25)


def test_oracle_rejects_zero_samples():
    with pytest.raises(ValueError):
        mc_volume_oracle(PROBLEMS["rosenbrock"], 0, np.random.default_rng(0))


def test_registry():
    assert set(PROBLEMS) == {"rosenbrock", "goldstein_price", "himmelblau"}
    assert get_problem("himmelblau").domain.volume == 100.0
    with pytest.raises(KeyError):
        get_problem("sphere")
