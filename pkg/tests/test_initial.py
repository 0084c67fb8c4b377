import numpy as np
import pytest

from chemoflow.grid import DomainSpec, VectorField, integrate
from chemoflow.initial import PRESETS, InitialSpec, make_initial_data
from chemoflow.operators import max_divergence


@pytest.fixture
def dom():
    return DomainSpec(1.0, 1.0, 16, 16)


def test_unknown_preset_rejected():
    with pytest.raises(ValueError, match="unknown preset"):
        InitialSpec("mystery")


def test_constant_preset(dom):
    n0, c0, u0 = make_initial_data(dom, InitialSpec("constant", n_level=1.0, c_level=0.0))
    assert integrate(n0) == pytest.approx(dom.area())
    assert np.all(c0.values == 0.0)
    assert np.all(u0.u == 0.0) and np.all(u0.v == 0.0)


@pytest.mark.parametrize("preset", ["gaussian-bump", "two-bump", "random-positive"])
def test_mass_normalization(dom, preset):
    mass = 1.7
    n0, _, _ = make_initial_data(dom, InitialSpec(preset, seed=4, mass=mass))
    assert abs(integrate(n0) - mass) <= 1e-10
    assert n0.values.min() >= 0.0
    assert n0.values.max() > 0.0


@pytest.mark.parametrize("seed", range(6))
def test_random_positive_divergence_free(dom, seed):
    _, c0, u0 = make_initial_data(dom, InitialSpec("random-positive", seed=seed,
                                                   u_amplitude=0.3, c_level=0.2))
    assert max_divergence(u0) <= 1e-8
    assert c0.values.min() >= 0.0
    u0.check()  # no-slip invariant


def test_presets_cover_constants():
    assert set(PRESETS) == {"gaussian-bump", "two-bump", "random-positive", "constant"}


def test_seed_reproducibility(dom):
    a = make_initial_data(dom, InitialSpec("random-positive", seed=9, u_amplitude=0.2))
    b = make_initial_data(dom, InitialSpec("random-positive", seed=9, u_amplitude=0.2))
    assert np.array_equal(a[0].values, b[0].values)
    assert np.array_equal(a[2].u, b[2].u)
