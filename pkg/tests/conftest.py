"""Shared fixtures: a few simulated ensembles reused across test modules."""

import numpy as np
import pytest

import fracdrift as fd
from fracdrift.basis import IntervalSupport, trig_basis
from fracdrift.estimator import DensityModel
from fracdrift.sde import fou_stationary_density


@pytest.fixture(scope="session")
def linear_drift():
    return fd.linear_drift(1.0)


@pytest.fixture(scope="session")
def small_ensemble(linear_drift):
    """Stationary linear-drift ensemble, N=64, T=1, n=64."""
    grid = fd.TimeGrid(1.0, 64)
    return fd.simulate_ensemble(fd.SdeConfig(
        drift=linear_drift, sigma=1.0, H=0.7, grid=grid, n_paths=64, seed=424242,
    ))


@pytest.fixture(scope="session")
def big_ensemble(linear_drift):
    """Stationary linear-drift ensemble, N=2000, T=1, n=256 (shared by the
    statistical tests and the acceptance suite)."""
    grid = fd.TimeGrid(1.0, 256)
    return fd.simulate_ensemble(fd.SdeConfig(
        drift=linear_drift, sigma=1.0, H=0.7, grid=grid, n_paths=2000, seed=20240811,
    ))


@pytest.fixture(scope="session")
def known_density_factory():
    def make(support: IntervalSupport, theta=1.0, sigma=1.0, H=0.7) -> DensityModel:
        f, f_prime = fou_stationary_density(theta, sigma, H)
        return DensityModel.known(f, support, f_prime=f_prime)

    return make


@pytest.fixture(scope="session")
def small_kernel(small_ensemble):
    return fd.KernelGrid(small_ensemble.grid, small_ensemble.H)


@pytest.fixture(scope="session")
def big_kernel(big_ensemble):
    return fd.KernelGrid(big_ensemble.grid, big_ensemble.H)
