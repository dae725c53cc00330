import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticetag.errors import DimensionMismatch
from latticetag.zq import (
    Permutation,
    Rng,
    ZqMatrix,
    ZqVector,
    concat,
    mat_perm_compose,
    mat_vec_mul,
    norm_p,
    perm_apply,
    perm_invert,
    sample_binary_vector,
    sample_zq_vector,
    scalar_mul,
    vec_add,
    vec_sub,
)

Q = 17


def v(*xs, q=Q):
    return ZqVector(list(xs), q)


def schoolbook(a, x, q):
    return [sum(a[i][j] * x[j] for j in range(len(x))) % q for i in range(len(a))]


def vectors(q=Q, min_size=1, max_size=12):
    return st.lists(st.integers(0, q - 1), min_size=min_size, max_size=max_size).map(lambda xs: ZqVector(xs, q))


def same_len_pair(q=Q):
    return st.integers(1, 12).flatmap(
        lambda k: st.tuples(
            st.lists(st.integers(0, q - 1), min_size=k, max_size=k),
            st.lists(st.integers(0, q - 1), min_size=k, max_size=k),
        )
    ).map(lambda p: (ZqVector(p[0], q), ZqVector(p[1], q)))


def permutations(max_size=12):
    return st.integers(1, max_size).flatmap(lambda k: st.permutations(list(range(k)))).map(Permutation)


class TestVector:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            ZqVector([17], 17)
        with pytest.raises(ValueError):
            ZqVector([-1], 17)

    def test_immutable(self):
        x = v(1, 2)
        with pytest.raises(ValueError):
            x.elems[0] = 3

    def test_exhaustive_range_at_q5(self):
        # every vector of length 3 over Z_5 is accepted, every out-of-range entry is not
        for a in range(-1, 6):
            for b in range(5):
                if 0 <= a < 5:
                    assert ZqVector([a, b, 0], 5).tolist() == [a, b, 0]
                else:
                    with pytest.raises(ValueError):
                        ZqVector([a, b, 0], 5)

    def test_mismatch(self):
        with pytest.raises(DimensionMismatch):
            vec_add(v(1, 2), v(1))
        with pytest.raises(DimensionMismatch):
            vec_add(v(1), v(1, q=19))


class TestArithmetic:
    def test_add_examples(self):
        assert vec_add(v(1, 16), v(3, 5)) == v(4, 4)
        assert vec_add(v(5, 6, 7), v(12, 11, 10)) == v(0, 0, 0)
        assert vec_add(v(3, 9), ZqVector.zeros(2, Q)) == v(3, 9)

    def test_sub_examples(self):
        assert vec_sub(v(0), v(1)) == v(16)
        assert vec_sub(v(4, 4), v(3, 5)) == v(1, 16)
        assert vec_sub(v(3, 9), v(3, 9)).is_zero()

    def test_scalar_examples(self):
        assert scalar_mul(3, v(6, 10)) == v(1, 13)
        assert scalar_mul(0, v(6, 10)).is_zero()
        assert scalar_mul(1, v(6, 10)) == v(6, 10)

    def test_scalar_range(self):
        with pytest.raises(ValueError):
            scalar_mul(17, v(1))

    def test_matvec_examples(self):
        a = ZqMatrix([[1, 2], [3, 4]], Q)
        assert mat_vec_mul(a, v(5, 6)) == v(0, 5)
        assert mat_vec_mul(a, v(5, 6)).tolist() == schoolbook([[1, 2], [3, 4]], [5, 6], Q)
        assert mat_vec_mul(ZqMatrix([[1, 0], [0, 1]], Q), v(5, 9)) == v(5, 9)
        assert mat_vec_mul(a, v(0, 0)).is_zero()

    def test_matvec_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mat_vec_mul(ZqMatrix([[1, 2]], Q), v(1, 2, 3))

    def test_matvec_large_no_overflow(self):
        rng = Rng(7)
        q = 65521
        a = rng.zq_matrix(4, 2048, q)
        x = rng.zq_vector(2048, q)
        expect = [sum(int(a.elems[i, j]) * int(x.elems[j]) for j in range(2048)) % q for i in range(4)]
        assert mat_vec_mul(a, x).tolist() == expect

    @given(same_len_pair())
    def test_add_sub_inverse(self, pair):
        a, b = pair
        assert vec_sub(vec_add(a, b), b) == a
        assert vec_add(a, b) == vec_add(b, a)

    @given(same_len_pair(), st.integers(0, Q - 1))
    def test_scalar_distributes(self, pair, s):
        a, b = pair
        assert scalar_mul(s, vec_add(a, b)) == vec_add(scalar_mul(s, a), scalar_mul(s, b))

    @settings(max_examples=50)
    @given(st.integers(1, 4), st.integers(1, 8), st.data())
    def test_matvec_linear(self, rows, cols, data):
        ints = st.lists(st.integers(0, Q - 1), min_size=cols, max_size=cols)
        a = ZqMatrix(data.draw(st.lists(ints, min_size=rows, max_size=rows)), Q)
        x, y = ZqVector(data.draw(ints), Q), ZqVector(data.draw(ints), Q)
        assert mat_vec_mul(a, vec_add(x, y)) == vec_add(mat_vec_mul(a, x), mat_vec_mul(a, y))
        assert mat_vec_mul(a, x).tolist() == schoolbook(a.elems.tolist(), x.tolist(), Q)


class TestPermutation:
    def test_examples(self):
        p = Permutation([2, 0, 1])
        x = v(7, 8, 9)
        assert perm_apply(p, x) == v(8, 9, 7)
        # explicit binary matrix oracle
        m = np.zeros((3, 3), dtype=int)
        for i, j in enumerate([2, 0, 1]):
            m[j, i] = 1
        assert (m @ np.array([7, 8, 9]) % Q).tolist() == [8, 9, 7]
        assert (p.matrix() == m).all()

    def test_invert_examples(self):
        assert perm_invert(Permutation([2, 0, 1])).map.tolist() == [1, 2, 0]
        assert perm_invert(Permutation([1, 0])).map.tolist() == [1, 0]
        ident = Permutation.identity(4)
        assert perm_invert(ident).map.tolist() == [0, 1, 2, 3]
        assert perm_apply(Permutation([2, 1, 0]), v(1, 2, 3)) == v(3, 2, 1)

    def test_inverse_on_basis(self):
        p = Permutation([2, 0, 1])
        pi = perm_invert(p)
        for i in range(3):
            e = ZqVector.zeros(3, Q).with_element(i, 1)
            assert perm_apply(pi, perm_apply(p, e)) == e

    def test_not_bijection(self):
        with pytest.raises(ValueError):
            Permutation([0, 0, 1])
        with pytest.raises(ValueError):
            Permutation([0, 3])

    @given(permutations(), st.data())
    def test_roundtrip(self, p, data):
        x = ZqVector(data.draw(st.lists(st.integers(0, Q - 1), min_size=p.size, max_size=p.size)), Q)
        assert perm_apply(perm_invert(p), perm_apply(p, x)) == x
        assert (p.matrix() @ x.elems % Q).tolist() == perm_apply(p, x).tolist()

    @settings(max_examples=30)
    @given(permutations(8), st.data())
    def test_compose_matches_two_steps(self, p, data):
        k = p.size
        a = ZqMatrix(data.draw(st.lists(st.lists(st.integers(0, Q - 1), min_size=k, max_size=k), min_size=2, max_size=2)), Q)
        x = ZqVector(data.draw(st.lists(st.integers(0, Q - 1), min_size=k, max_size=k)), Q)
        assert mat_vec_mul(mat_perm_compose(a, p), x) == mat_vec_mul(a, perm_apply(p, x))


class TestMisc:
    def test_concat(self):
        assert concat(v(1, 2), v(3)) == v(1, 2, 3)
        assert concat(v(5), ZqVector([], Q)) == v(5)

    def test_norm(self):
        assert norm_p(ZqVector.zeros(4, Q)) == 0
        assert norm_p(v(3, 4), 2) == pytest.approx(5)
        assert norm_p(v(1, 0, 1, 1, 0), 2) == pytest.approx(3**0.5)


class TestRng:
    def test_determinism(self):
        a, b = Rng(b"\x01" * 32), Rng(b"\x01" * 32)
        assert sample_zq_vector(a, 20, Q) == sample_zq_vector(b, 20, Q)
        assert a.child("x").permutation(9).map.tolist() == b.child("x").permutation(9).map.tolist()

    def test_children_differ(self):
        r = Rng(1)
        assert r.child("a").zq_vector(32, Q) != r.child("b").zq_vector(32, Q)

    def test_binary_range(self):
        x = sample_binary_vector(Rng(3), 1000, Q)
        assert set(x.tolist()) <= {0, 1}

    def test_seed_length(self):
        with pytest.raises(ValueError):
            Rng(b"short")

    def test_uniform_mean(self):
        # 1e5 draws of one Z_17 coordinate: mean 8, sd sqrt((17^2-1)/12 / N)
        rng = Rng(11)
        draws = np.array([rng.zq_vector(1, Q).elems[0] for _ in range(100_000)])
        sd = ((Q * Q - 1) / 12 / len(draws)) ** 0.5
        assert abs(draws.mean() - 8.0) < 3 * sd
        counts = np.bincount(draws, minlength=Q)
        chi2 = ((counts - len(draws) / Q) ** 2 / (len(draws) / Q)).sum()
        assert chi2 < 39.25  # 99.9th percentile of chi^2 with 16 dof
