import numpy as np
import pytest

from gpt_definetti import polyhedra
from gpt_definetti.config import override
from gpt_definetti.exceptions import Degenerate, EnumerationOverflow


def as_set(rows, decimals=8):
    return {tuple(np.round(r, decimals)) for r in rows}


def test_square_cone_rays():
    F = np.array([[1, 1, 0], [1, -1, 0], [1, 0, 1], [1, 0, -1]], dtype=float)
    rays = polyhedra.extreme_rays(F)
    rays = rays / rays[:, :1]
    assert as_set(rays) == {(1, s, t) for s in (1, -1) for t in (1, -1)}


@pytest.mark.parametrize("d", [2, 3, 5])
def test_cube_vertices(d):
    A = np.vstack([np.eye(d), -np.eye(d)])
    V = polyhedra.polytope_vertices(A, np.ones(2 * d))
    assert len(V) == 2 ** d
    assert np.allclose(np.abs(V), 1)


def test_random_polytope_round_trip():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(12, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    H = np.hstack([np.ones((12, 1)), pts])  # homogenized points
    facets = polyhedra.cone_facets(H)
    back = polyhedra.extreme_rays(facets)
    back = back / back[:, :1]
    assert as_set(back, 6) == as_set(H, 6)


def test_lineality_is_rejected():
    with pytest.raises(Degenerate):
        polyhedra.extreme_rays(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))


def test_equality_constraints():
    # nonnegative orthant in R^3 intersected with x1 = x2
    rays = polyhedra.extreme_rays(np.eye(3), E=np.array([[1.0, -1.0, 0.0]]))
    assert as_set(rays) == {(1.0, 1.0, 0.0), (0.0, 0.0, 1.0)}


def test_overflow():
    A = np.vstack([np.eye(6), -np.eye(6)])
    H = np.hstack([-A, np.ones((12, 1))])
    with pytest.raises(EnumerationOverflow):
        polyhedra.extreme_rays(np.vstack([H, np.eye(7)[-1]]), max_rays=10)


def test_disk_cache(tmp_path):
    F = np.array([[1, 1, 0], [1, -1, 0], [1, 0, 1], [1, 0, -1]], dtype=float)
    polyhedra.clear_memory_cache()
    with override(cache_dir=str(tmp_path)):
        first = polyhedra.cached_extreme_rays(F, tag="t")
        files = list(tmp_path.glob("*.json"))
        assert len(files) == 1
        polyhedra.clear_memory_cache()
        second = polyhedra.cached_extreme_rays(F, tag="t")
    assert np.array_equal(first, second)


def test_corrupt_cache_entry_is_recomputed(tmp_path):
    F = np.array([[1, 1, 0], [1, -1, 0], [1, 0, 1], [1, 0, -1]], dtype=float)
    polyhedra.clear_memory_cache()
    with override(cache_dir=str(tmp_path)):
        good = polyhedra.cached_extreme_rays(F, tag="c")
        path = next(tmp_path.glob("*.json"))
        path.write_text('{"hash": "wrong", "rays": []}')
        polyhedra.clear_memory_cache()
        again = polyhedra.cached_extreme_rays(F, tag="c")
    assert np.allclose(good, again)
