import io

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from asced import gf2
from conftest import gf2_rank_oracle


def binary_matrices(max_rows=24, max_cols=70):
    shape = st.tuples(st.integers(0, max_rows), st.integers(1, max_cols))
    return shape.flatmap(lambda s: arrays(np.uint8, s, elements=st.integers(0, 1)))


def test_rank_examples(toric2):
    assert gf2.rank(np.eye(3, dtype=np.uint8)) == 3
    assert gf2.rank(np.zeros((4, 7), dtype=np.uint8)) == 0
    assert gf2.rank(toric2.h) == 6 == gf2_rank_oracle(toric2.h)


def test_rank_leaves_input_untouched(rng):
    m = rng.integers(0, 2, (10, 20), dtype=np.uint8)
    before = m.copy()
    gf2.rank(m)
    gf2.row_reduce(m)
    assert np.array_equal(m, before)


@given(binary_matrices())
def test_rank_matches_oracle_and_transpose(m):
    r = gf2.rank(m)
    assert r == gf2_rank_oracle(m)
    assert r == gf2.rank(m.T) if m.shape[0] else r == 0
    assert r <= min(m.shape)


def test_rank_transpose_large(rng):
    for _ in range(200):
        rows, cols = rng.integers(1, 65, 2)
        m = (rng.random((rows, cols)) < rng.random()).astype(np.uint8)
        assert gf2.rank(m) == gf2.rank(m.T)


def test_row_reduce_identity_and_duplicate_rows():
    eye = np.eye(4, dtype=np.uint8)
    red, piv, t = gf2.row_reduce(eye)
    assert np.array_equal(red, eye) and piv == [0, 1, 2, 3] and np.array_equal(t, eye)
    dup = np.array([[1, 0, 1], [1, 0, 1]], dtype=np.uint8)
    red, piv, t = gf2.row_reduce(dup)
    assert piv == [0]
    assert not red[1].any()
    # the zero row of the reduced form records the sum of both rows
    assert t[1].tolist() == [1, 1]


@given(binary_matrices(16, 40))
def test_row_reduce_contract(m):
    red, piv, t = gf2.row_reduce(m)
    assert np.array_equal(gf2.matmul(t, m), red)
    assert all(a < b for a, b in zip(piv, piv[1:]))
    assert len(piv) == gf2.rank(m)
    for r, c in enumerate(piv):
        assert red[r, c] == 1
        assert red[:, c].sum() == 1
        assert not red[r, :c].any()
    assert not red[len(piv):].any()
    assert gf2.rank(t) == m.shape[0]


@given(binary_matrices(12, 30), st.data())
def test_in_rowspace_matches_rank(m, data):
    v = data.draw(arrays(np.uint8, m.shape[1], elements=st.integers(0, 1)))
    expect = gf2.rank(np.vstack([m, v])) == gf2.rank(m)
    assert gf2.in_rowspace(m, v) == expect


def test_in_rowspace_examples(rng):
    m = rng.integers(0, 2, (5, 12), dtype=np.uint8)
    for row in m:
        assert gf2.in_rowspace(m, row)
    assert gf2.in_rowspace(m, np.zeros(12, dtype=np.uint8))
    assert gf2.in_rowspace(m, m[0] ^ m[3])
    with pytest.raises(ValueError):
        gf2.in_rowspace(m, np.zeros(5, dtype=np.uint8))


def test_complete_basis_examples(toric2):
    assert np.array_equal(gf2.complete_basis(np.zeros((0, 3), dtype=np.uint8), 3), np.eye(3, dtype=np.uint8))
    assert gf2.complete_basis(np.eye(4, dtype=np.uint8), 4).shape == (0, 4)
    base = np.vstack([toric2.stabilizer_basis, toric2.logical_basis])
    extra = gf2.complete_basis(base, 16)
    assert extra.shape == (6, 16)
    assert gf2.rank(np.vstack([base, extra])) == 16
    with pytest.raises(ValueError):
        gf2.complete_basis(np.array([[1, 1], [1, 1]], dtype=np.uint8), 2)


@given(binary_matrices(10, 24))
def test_complete_basis_reaches_full_rank(m):
    basis, _ = gf2._rref(m)
    extra = gf2.complete_basis(basis, m.shape[1])
    assert extra.shape[0] == m.shape[1] - basis.shape[0]
    assert gf2.rank(np.vstack([basis, extra])) == m.shape[1]
    assert np.array_equal(extra, gf2.complete_basis(basis, m.shape[1]))


def test_nullspace_examples(toric2):
    assert gf2.nullspace_basis(np.eye(5, dtype=np.uint8)).shape == (0, 5)
    ns = gf2.nullspace_basis(np.zeros((3, 6), dtype=np.uint8))
    assert ns.shape == (6, 6) and gf2.rank(ns) == 6
    ns = gf2.nullspace_basis(toric2.hz)
    assert ns.shape[0] == toric2.n - gf2.rank(toric2.hz)
    assert not gf2.matmul(toric2.hz, ns.T).any()


@given(binary_matrices(12, 30))
def test_nullspace_contract(m):
    ns = gf2.nullspace_basis(m)
    assert ns.shape[0] == m.shape[1] - gf2.rank(m)
    assert gf2.rank(ns) == ns.shape[0]
    if ns.shape[0] and m.shape[0]:
        assert not gf2.matmul(m, ns.T).any()


@given(binary_matrices(8, 130))
def test_pack_roundtrip(m):
    words = gf2.pack_rows(m)
    assert words.dtype == np.uint64
    assert np.array_equal(gf2.unpack_rows(words, m.shape[1]), m)


def test_matmul_matches_integer_product(rng):
    a = rng.integers(0, 2, (7, 9), dtype=np.uint8)
    b = rng.integers(0, 2, (9, 4), dtype=np.uint8)
    assert np.array_equal(gf2.matmul(a, b), (a.astype(int) @ b.astype(int)) % 2)


@given(binary_matrices(6, 20))
def test_text_format_roundtrip(m):
    text = gf2.format_matrix(m)
    assert text.splitlines()[0] == f"{m.shape[0]} {m.shape[1]}"
    assert np.array_equal(gf2.parse_matrix(text), m)


def test_matrix_file_roundtrip(tmp_path, toric2):
    path = tmp_path / "h.txt"
    gf2.write_matrix(path, toric2.h)
    assert np.array_equal(gf2.read_matrix(path), toric2.h)
    buf = io.StringIO()
    gf2.write_matrix(buf, toric2.hx)
    assert buf.getvalue().startswith("4 8\n")


@pytest.mark.parametrize("text", ["", "2 3\n010\n", "1 3\n01x\n", "a b\n"])
def test_parse_matrix_rejects_bad_text(text):
    with pytest.raises(ValueError):
        gf2.parse_matrix(text)


def test_validation_rejects_non_binary():
    with pytest.raises(ValueError):
        gf2.rank(np.array([[0, 2]]))
    with pytest.raises(ValueError):
        gf2.rank(np.array([1, 0]))
