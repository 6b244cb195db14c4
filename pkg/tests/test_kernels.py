import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermilat import kernels
from fermilat.kernels import numpy_backend as npb

nb = kernels.numba_backend
pytestmark = pytest.mark.skipif(nb is None, reason="numba unavailable")


def _positions(draw, n):
    k = draw(st.integers(0, n))
    return sorted(draw(st.permutations(range(n)))[:k])


@st.composite
def layouts(draw):
    n = draw(st.integers(1, 6))
    return n, _positions(draw, n), draw(st.integers(0, 2**32 - 1))


@settings(max_examples=40, deadline=None)
@given(layouts())
def test_embed_and_slice_agree(layout):
    n, pos, seed = layout
    rng = np.random.default_rng(seed)
    d = 1 << len(pos)
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    X = rng.standard_normal((1 << n, 1 << n)) + 0j
    assert np.array_equal(npb.embed_matrix(x, n, pos), nb.embed_matrix(x, n, pos))
    np.testing.assert_allclose(npb.slice_matrix(X, n, pos), nb.slice_matrix(X, n, pos), atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 6), st.integers(0, 63))
def test_parity_vector(n, mask):
    mask &= (1 << n) - 1
    assert np.array_equal(npb.parity_vector(n, mask), nb.parity_vector(n, mask))


def test_subset_transforms_roundtrip():
    rng = np.random.default_rng(0)
    stack = rng.standard_normal((16, 4, 4)) + 0j
    for be in (npb, nb):
        np.testing.assert_allclose(be.moebius_subsets(be.zeta_subsets(stack)), stack, atol=1e-12)
    np.testing.assert_allclose(npb.zeta_subsets(stack), nb.zeta_subsets(stack), atol=1e-12)
    # zeta at the full set is the total sum
    np.testing.assert_allclose(npb.zeta_subsets(stack)[15], stack.sum(0), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=12, unique=True),
       st.integers(1, 4))
def test_counts_agree(points, a):
    pts = np.array(points, dtype=np.int64)
    assert npb.translate_count(pts, a) == nb.translate_count(pts, a)
    grid = np.zeros((10, 10), dtype=bool)
    grid[tuple((pts + 2).T)] = True
    offs = np.array([(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)], dtype=np.int64)
    assert npb.surface_count(grid, pts + 2, offs) == nb.surface_count(grid, pts + 2, offs)


def test_backend_flag(monkeypatch):
    import importlib
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-c", "import fermilat.kernels as k; print(k.BACKEND)"],
                         env={**__import__("os").environ, "FERMILAT_DISABLE_NUMBA": "1"},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    assert importlib.import_module("fermilat.kernels").BACKEND in ("numba", "numpy")
