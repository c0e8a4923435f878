import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from citemb.embed_store import (EmbeddingFormatError, EmbeddingMatrix, ZeroVectorError, centroid,
                                cosine_distance, cosine_similarity, load, save)


def test_single_vector_round_trip(tmp_path):
    e = EmbeddingMatrix(("a",), np.array([[0.5, -0.25]]), "toy")
    save(e, tmp_path / "v.vec")
    h = load(tmp_path / "v.vec")
    assert h.ids == ("a",) and h.method_tag == "toy"
    assert h.vectors.tobytes() == e.vectors.tobytes()


def _nine_digits(x):
    return np.array([[float(f"{v:.9g}") for v in row] for row in x])


@pytest.mark.parametrize("suffix", [".vec", ".vec.gz"])
def test_large_round_trip(tmp_path, suffix):
    rng = np.random.default_rng(0)
    n = 100_000
    x = rng.standard_normal((n, 4)) * 10.0 ** rng.integers(-5, 5, size=(n, 1))
    e = EmbeddingMatrix(tuple(f"id{i}" for i in range(n)), x, "rand")
    save(e, tmp_path / ("v" + suffix))
    h = load(tmp_path / ("v" + suffix))
    assert h.ids == e.ids
    # exact under the 9-significant-digit rule, and a fixed point thereafter
    assert np.array_equal(h.vectors[:1000], _nine_digits(x[:1000]))
    save(h, tmp_path / ("w" + suffix))
    assert np.array_equal(load(tmp_path / ("w" + suffix)).vectors, h.vectors)


@pytest.mark.parametrize("text,lineno", [
    ("1 3 t\na 1 2\n", 2),
    ("2 2 t\na 1 2\na 3 4\n", 3),
    ("2 2 t\na 1 2\nb nan 4\n", 3),
    ("1 2 t\na 1 2\nb 1 2\n", 3),
])
def test_format_errors_name_line(tmp_path, text, lineno):
    (tmp_path / "bad.vec").write_text(text)
    with pytest.raises(EmbeddingFormatError, match=f"bad.vec:{lineno}:"):
        load(tmp_path / "bad.vec")


def test_bad_header(tmp_path):
    (tmp_path / "bad.vec").write_text("0 2 t\n")
    with pytest.raises(EmbeddingFormatError, match=":1:"):
        load(tmp_path / "bad.vec")


def test_matrix_validation():
    with pytest.raises(ValueError):
        EmbeddingMatrix(("a", "a"), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        EmbeddingMatrix(("a",), np.array([[np.inf, 0.0]]))
    e = EmbeddingMatrix(("a", "b"), np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert e.usable_ids() == {"b"}


def test_cosine_examples():
    assert cosine_similarity((1, 0), (0, 1)) == 0.0
    assert cosine_similarity((2, 0), (5, 0)) == 1.0
    assert cosine_similarity((1, 1), (1, 0)) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert cosine_distance((1, 0), (-1, 0)) == 2.0
    with pytest.raises(ZeroVectorError):
        cosine_similarity((0, 0), (1, 0))


def test_centroid_examples():
    assert centroid([(1, 0), (0, 1)]).tolist() == [0.5, 0.5]
    assert centroid([(3.0, -2.0)]).tolist() == [3.0, -2.0]
    with pytest.raises(ValueError):
        centroid(np.empty((0, 2)))
    x = np.random.default_rng(1).standard_normal((100, 7))
    oracle = np.array([math.fsum(x[:, j]) / 100 for j in range(7)])
    assert np.max(np.abs(centroid(x) - oracle)) < 1e-12


vec = arrays(np.float64, 5, elements=st.floats(-1e3, 1e3, allow_nan=False))


@settings(max_examples=200, deadline=None)
@given(vec, vec, st.floats(1e-3, 1e3))
def test_cosine_symmetric_scale_invariant(a, b, s):
    if np.linalg.norm(a) < 1e-6 or np.linalg.norm(b) < 1e-6:
        return
    c = cosine_similarity(a, b)
    assert -1.0 <= c <= 1.0
    assert c == cosine_similarity(b, a)
    assert abs(cosine_similarity(s * a, b) - c) < 1e-12


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 4)),
              elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_save_load_identity_on_representable(tmp_path_factory, x):
    x = _nine_digits(x)
    e = EmbeddingMatrix(tuple(f"n{i}" for i in range(len(x))), x, "h")
    p = tmp_path_factory.mktemp("rt") / "x.vec"
    save(e, p)
    assert np.array_equal(load(p).vectors, x)
