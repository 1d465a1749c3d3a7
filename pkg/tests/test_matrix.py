import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from deepperm.errors import MatrixParseError, NegativeEntryError, NotSquareError
from deepperm.matrix import (
    InstanceClass,
    InstanceSpec,
    as_matrix,
    generate,
    load_matrix,
    save_matrix,
    staircase,
)


def test_as_matrix_is_read_only_float():
    m = as_matrix([[1, 2], [3, 4]])
    assert m.dtype == np.float64
    with pytest.raises(ValueError):
        m[0, 0] = 5


@pytest.mark.parametrize("bad,err", [
    ([[1, -1], [0, 1]], NegativeEntryError),
    ([[1, np.nan], [0, 1]], MatrixParseError),
    ([1, 2, 3], MatrixParseError),
])
def test_as_matrix_rejects(bad, err):
    with pytest.raises(err):
        as_matrix(bad)


def test_square_check():
    with pytest.raises(NotSquareError):
        as_matrix(np.ones((2, 3)), square=True)


def test_dense_text_identity(tmp_path):
    p = tmp_path / "id.txt"
    p.write_text("2 2\n1 0\n0 1\n")
    np.testing.assert_array_equal(load_matrix(p), np.eye(2))


def test_dense_text_negative_entry(tmp_path):
    p = tmp_path / "neg.txt"
    p.write_text("2 2\n1 -1\n0 1\n")
    with pytest.raises(NegativeEntryError):
        load_matrix(p)


def test_dense_text_wrong_count(tmp_path):
    p = tmp_path / "short.txt"
    p.write_text("2 2\n1 0 0\n")
    with pytest.raises(MatrixParseError):
        load_matrix(p)


def test_matrix_market_pattern(tmp_path):
    p = tmp_path / "id.mtx"
    p.write_text("%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 1\n2 2\n")
    np.testing.assert_array_equal(load_matrix(p), np.eye(2))


@pytest.mark.parametrize("suffix", [".txt", ".mtx"])
def test_round_trip_uniform(tmp_path, suffix):
    m = generate(InstanceSpec(InstanceClass.UNIFORM, n=5, seed=7))
    p = tmp_path / f"u{suffix}"
    save_matrix(m, p)
    back = load_matrix(p)
    assert np.array_equal(back, m)


def test_save_unwritable(tmp_path):
    with pytest.raises(OSError):
        save_matrix(np.eye(2), tmp_path / "missing_dir" / "x.txt")


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
              elements=st.floats(0, 1e6, allow_nan=False, allow_infinity=False)))
def test_round_trip_property(tmp_path_factory, m):
    p = tmp_path_factory.mktemp("rt") / "m.txt"
    save_matrix(m, p)
    assert np.array_equal(load_matrix(p), m)


def test_staircase_3():
    np.testing.assert_array_equal(staircase(3), [[1, 1, 1], [1, 1, 1], [1, 1, 0]])


@pytest.mark.parametrize("n", [1, 2, 5, 20])
def test_staircase_row_counts(n):
    counts = staircase(n).sum(axis=1)
    expected = [min(n, n + 2 - i) for i in range(1, n + 1)]
    np.testing.assert_array_equal(counts, expected)


def test_bernoulli_p_one():
    np.testing.assert_array_equal(generate(InstanceSpec(InstanceClass.BERNOULLI, n=2, p=1.0)), np.ones((2, 2)))


def test_block_diagonal_pattern():
    m = generate(InstanceSpec(InstanceClass.BLOCK_DIAGONAL, n=7, seed=3))
    mask = np.zeros((7, 7), dtype=bool)
    mask[:5, :5] = True
    mask[5:, 5:] = True
    assert np.all(m[~mask] == 0)
    assert np.all(m[mask] > 0)


@pytest.mark.parametrize("cls,p", [("Uniform", None), ("Bernoulli", 0.3), ("BlockDiagonal", None)])
def test_generate_is_deterministic(cls, p):
    a = generate(InstanceSpec(cls, n=9, p=p, seed=11))
    b = generate(InstanceSpec(cls, n=9, p=p, seed=11))
    c = generate(InstanceSpec(cls, n=9, p=p, seed=12))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_instance_spec_validation():
    with pytest.raises(ValueError):
        InstanceSpec(InstanceClass.BERNOULLI, n=3)
    with pytest.raises(ValueError):
        InstanceSpec(InstanceClass.UNIFORM, n=3, p=0.5)
    with pytest.raises(ValueError):
        InstanceSpec(InstanceClass.FILE)
    with pytest.raises(ValueError):
        InstanceSpec(InstanceClass.UNIFORM, n=0)


def test_instance_ids():
    assert InstanceSpec("Staircase", n=20).instance_id == "Staircase-20"
    assert InstanceSpec("File", path="/x/cage5.mtx").instance_id == "cage5"
