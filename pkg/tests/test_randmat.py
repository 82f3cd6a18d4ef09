import numpy as np
import pytest

from biortho.randmat import (
    BI_ORTHOGONAL,
    IID_GAUSSIAN,
    build_instance,
    instance_from_arrays,
    make_stream,
    sample_gaussian_dictionary,
    sample_haar_orthogonal,
    sample_signal,
)
from biortho.replica import SparsityProfile


def haar_first_columns(n, M, left=None, seed=7):
    rng = make_stream(seed)
    cols = np.empty((n, M))
    for i in range(n):
        O = sample_haar_orthogonal(M, rng)
        if left is not None:
            O = left @ O
        cols[i] = O[:, 0]
    return cols


def assert_uniform_on_sphere(cols):
    n, M = cols.shape
    # E u = 0 with Var(u_k) = 1/M
    se = np.sqrt(1.0 / M / n)
    assert np.all(np.abs(cols.mean(axis=0)) <= 4 * se)
    # E u u^T = I / M; Var(u_k^2) = (3/(M(M+2)) - 1/M^2), off-diagonal Var = 1/(M(M+2))
    cov = cols.T @ cols / n
    diag_se = np.sqrt((3 / (M * (M + 2)) - 1 / M**2) / n)
    off_se = np.sqrt(1 / (M * (M + 2)) / n)
    assert np.all(np.abs(np.diag(cov) - 1 / M) <= 5 * diag_se)
    off = cov[~np.eye(M, dtype=bool)]
    assert np.all(np.abs(off) <= 5 * off_se)


class TestHaar:
    @pytest.mark.parametrize("M", [1, 2, 5, 16, 50])
    def test_orthogonal(self, M):
        O = sample_haar_orthogonal(M, make_stream(M))
        assert np.max(np.abs(O.T @ O - np.eye(M))) <= 1e-10

    def test_order_one_is_random_sign(self):
        rng = make_stream(3)
        vals = np.array([sample_haar_orthogonal(1, rng)[0, 0] for _ in range(4000)])
        assert set(np.unique(vals)) == {-1.0, 1.0}
        # Binomial(4000, 1/2): 4 standard errors is about 126
        assert abs(np.sum(vals > 0) - 2000) <= 4 * np.sqrt(1000)

    def test_first_column_uniform_on_sphere(self):
        assert_uniform_on_sphere(haar_first_columns(10_000, 16))

    def test_left_invariance(self):
        P = sample_haar_orthogonal(16, make_stream(99))
        assert_uniform_on_sphere(haar_first_columns(10_000, 16, left=P, seed=8))

    def test_sign_correction_matters(self):
        # raw QR of LAPACK makes the first column's first entry one-signed
        rng = make_stream(5)
        raw = np.array([np.linalg.qr(rng.standard_normal((8, 8)))[0][0, 0] for _ in range(2000)])
        fixed = haar_first_columns(2000, 8)[:, 0]
        assert abs(np.mean(np.sign(raw))) > 0.9
        assert abs(np.mean(np.sign(fixed))) < 0.1

    def test_domain(self):
        with pytest.raises(ValueError):
            sample_haar_orthogonal(0, make_stream(1))


class TestGaussianDictionary:
    def test_column_norms(self):
        D = sample_gaussian_dictionary(64, 1000, make_stream(1))
        assert abs(np.mean(np.sum(D**2, axis=0)) - 1.0) <= 0.05

    def test_zero_mean(self):
        D = sample_gaussian_dictionary(1000, 1000, make_stream(2))
        se = np.sqrt(1 / 1000 / D.size)
        assert abs(D.mean()) <= 4 * se

    def test_determinism(self):
        a = sample_gaussian_dictionary(8, 16, make_stream(4))
        b = sample_gaussian_dictionary(8, 16, make_stream(4))
        c = sample_gaussian_dictionary(8, 16, make_stream(5))
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    @pytest.mark.parametrize("M, N", [(0, 4), (4, 0)])
    def test_domain(self, M, N):
        with pytest.raises(ValueError):
            sample_gaussian_dictionary(M, N, make_stream(1))


class TestSignal:
    def test_empty_support(self):
        s = sample_signal(32, 0.0, 0.0, make_stream(1))
        assert not np.any(s.x)

    def test_full_support(self):
        s = sample_signal(32, 1.0, 1.0, make_stream(1))
        assert np.all(s.x != 0)

    def test_support_fraction(self):
        s = sample_signal(10_000, 0.0, 0.3, make_stream(2))
        frac = len(s.support2) / 10_000
        assert abs(frac - 0.3) <= 4 * np.sqrt(0.3 * 0.7 / 10_000)
        assert len(s.support1) == 0

    def test_nonzeros_are_standard_normal(self):
        s = sample_signal(100_000, 1.0, 1.0, make_stream(3))
        v = s.x
        assert abs(v.mean()) <= 4 / np.sqrt(v.size)
        assert abs(v.var() - 1) <= 4 * np.sqrt(2 / v.size)

    def test_support_size_is_random(self):
        sizes = {len(sample_signal(50, 0.2, 0.2, make_stream(i)).support1) for i in range(50)}
        assert len(sizes) > 3

    @pytest.mark.parametrize("r1, r2", [(-0.1, 0.2), (0.2, 1.1)])
    def test_domain(self, r1, r2):
        with pytest.raises(ValueError):
            sample_signal(8, r1, r2, make_stream(1))


class TestStreams:
    def test_keys_are_independent_of_order(self):
        a = make_stream(1, 16, 0, 5).random(4)
        make_stream(1, 16, 0, 4).random(4)
        b = make_stream(1, 16, 0, 5).random(4)
        assert np.array_equal(a, b)

    def test_distinct_keys(self):
        assert not np.array_equal(make_stream(1, 2).random(4), make_stream(2, 1).random(4))

    @pytest.mark.parametrize("key", [(), (-1,)])
    def test_bad_keys(self, key):
        with pytest.raises(ValueError):
            make_stream(*key)


class TestInstance:
    def test_zero_signal(self):
        inst = instance_from_arrays(np.eye(4, 8), np.zeros(8))
        assert not np.any(inst.y)

    def test_single_column(self):
        prof = SparsityProfile(0.5, 0.1)
        inst = build_instance(8, prof, seed=3)
        x = np.zeros(16)
        x[2] = 1.7
        single = instance_from_arrays(inst.D, x)
        assert np.allclose(single.y, 1.7 * inst.D[:, 2], atol=1e-15)

    @pytest.mark.parametrize("kind", [BI_ORTHOGONAL, IID_GAUSSIAN])
    def test_construction_identity(self, kind):
        for seed in range(20):
            inst = build_instance(12, SparsityProfile(0.3, 0.2), kind, seed)
            assert np.max(np.abs(inst.y - inst.D @ inst.x)) <= 1e-12
            assert inst.D.shape == (12, 24)

    def test_bi_orthogonal_blocks(self):
        inst = build_instance(10, SparsityProfile(1.0, 0.2), BI_ORTHOGONAL, (1, 2, 3))
        O1, O2 = inst.D[:, :10], inst.D[:, 10:]
        for O in (O1, O2):
            assert np.max(np.abs(O.T @ O - np.eye(10))) <= 1e-10
        assert np.max(np.abs(inst.D @ inst.D.T - 2 * np.eye(10))) <= 1e-9
        assert inst.seed == (1, 2, 3)

    def test_reproducible(self):
        prof = SparsityProfile(0.0, 0.2)
        a = build_instance(16, prof, BI_ORTHOGONAL, (9, 16, 2, 5))
        b = build_instance(16, prof, BI_ORTHOGONAL, (9, 16, 2, 5))
        assert np.array_equal(a.D, b.D) and np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)

    def test_concentrated_profile_leaves_block_one_empty(self):
        inst = build_instance(16, SparsityProfile(0.0, 0.3), BI_ORTHOGONAL, 1)
        assert not np.any(inst.signal.block1)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            build_instance(4, SparsityProfile(1.0, 0.1), "dct", 0)

    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            instance_from_arrays(np.eye(4), np.zeros(4))
