import numpy as np
import pytest

from surfstokes.geometry import surface_from_config
from surfstokes.manufactured import build_exact_solution, manufactured_data
from surfstokes.meshing import build_high_order_mesh, build_icosphere_base
from surfstokes.spaces import build_dof_handler


@pytest.fixture(scope="session")
def ellipsoid():
    return surface_from_config("ellipsoid:1.1,1.2,1.3")


@pytest.fixture(scope="session")
def unit_sphere():
    return surface_from_config("sphere:1")


@pytest.fixture(scope="session")
def exact(ellipsoid):
    return build_exact_solution(ellipsoid)


@pytest.fixture(scope="session")
def stokes_data(exact):
    return manufactured_data(exact)


class MeshCache:
    """Session-wide cache of meshes and handlers keyed by configuration."""

    def __init__(self, oracles):
        self.oracles = oracles
        self._base = {}
        self._mesh = {}
        self._handler = {}

    def base(self, surface, level):
        key = (surface, level)
        if key not in self._base:
            self._base[key] = build_icosphere_base(self.oracles[surface],
                                                   level)
        return self._base[key]

    def mesh(self, surface, level, k):
        key = (surface, level, k)
        if key not in self._mesh:
            self._mesh[key] = build_high_order_mesh(
                self.base(surface, level), self.oracles[surface], k)
        return self._mesh[key]

    def handler(self, surface, level, k, r, placement="gauss_lobatto"):
        key = (surface, level, k, r, placement)
        if key not in self._handler:
            self._handler[key] = build_dof_handler(
                self.mesh(surface, level, k), r, placement)
        return self._handler[key]


@pytest.fixture(scope="session")
def cache(ellipsoid, unit_sphere):
    return MeshCache({"ellipsoid": ellipsoid, "sphere": unit_sphere})


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def surface_samples(oracle, n, seed=0):
    """Deterministic sample of points on the surface."""
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    p, _, _ = oracle.project(pts * oracle.min_semi_axis, check_tube=False)
    return p
