import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kvlab.numerics import (
    KvtFormatError,
    matmul,
    randomized_hadamard,
    randomized_hadamard_inverse,
    read_kvt,
    softmax_rows,
    truncated_svd,
    write_kvt,
    hadamard_signs,
)


def matmul_oracle(a, b):
    """Naive triple loop in float64, coded independently of the library path."""
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n), dtype=np.float64)
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += float(a[i, t]) * float(b[t, j])
            out[i, j] = acc
    return out


def power_iteration_rank_error(k, rank, iters=12, seed=5):
    """Independent low-rank oracle: seeded subspace iteration, returns the
    relative Frobenius error of its own rank-`rank` reconstruction."""
    rng = np.random.default_rng(seed)
    a = k.astype(np.float64)
    q, _ = np.linalg.qr(rng.standard_normal((a.shape[1], rank)))
    for _ in range(iters):
        q, _ = np.linalg.qr(a.T @ (a @ q))
    approx = (a @ q) @ q.T
    return np.linalg.norm(a - approx) / np.linalg.norm(a)


class TestMatmul:
    def test_identity(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
        assert np.array_equal(matmul(np.eye(2, dtype=np.float32), m), m)

    def test_orthogonal_pick(self):
        out = matmul(np.array([[1.0, 0.0]]), np.array([[0.0], [5.0]]))
        assert np.array_equal(out, np.array([[0.0]], dtype=np.float32))

    def test_against_triple_loop_oracle(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((7, 5)).astype(np.float32)
        b = rng.standard_normal((5, 3)).astype(np.float32)
        assert np.allclose(matmul(a, b), matmul_oracle(a, b), atol=1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            matmul(np.zeros((2, 3), np.float32), np.zeros((2, 3), np.float32))

    def test_associativity_with_identity(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((4, 6)).astype(np.float32)
        b = rng.standard_normal((6, 5)).astype(np.float32)
        eye = np.eye(5, dtype=np.float32)
        assert np.array_equal(matmul(matmul(a, b), eye), matmul(a, matmul(b, eye)))


class TestSoftmaxRows:
    def test_symmetry(self):
        out = softmax_rows(np.zeros((1, 3), np.float32))
        assert np.allclose(out, 1.0 / 3.0, atol=1e-7)

    def test_stability_under_large_inputs(self):
        out = softmax_rows(np.array([[1000.0, 0.0]], np.float32))
        assert np.all(np.isfinite(out))
        assert out[0, 0] == pytest.approx(1.0, abs=1e-6)

    def test_against_float64_oracle(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((1, 40)).astype(np.float32)
        e = np.exp(x.astype(np.float64))
        assert np.allclose(softmax_rows(x), e / e.sum(), atol=1e-7)

    def test_empty_row_rejected(self):
        with pytest.raises(ValueError):
            softmax_rows(np.zeros((2, 0), np.float32))

    @given(
        st.lists(
            st.lists(st.floats(-50, 50), min_size=2, max_size=8),
            min_size=1,
            max_size=6,
        ).filter(lambda rows: len({len(r) for r in rows}) == 1)
    )
    @settings(max_examples=50, deadline=None)
    def test_rows_sum_to_one(self, rows):
        out = softmax_rows(np.array(rows, dtype=np.float32))
        assert np.allclose(out.sum(axis=1), 1.0, atol=1e-6)


class TestTruncatedSvd:
    def test_full_rank_is_exact(self):
        rng = np.random.default_rng(0)
        k = rng.standard_normal((20, 12)).astype(np.float32)
        rec = truncated_svd(k, 12).reconstruct()
        assert np.linalg.norm(rec - k) / np.linalg.norm(k) < 1e-4

    def test_rank_one_outer_product(self):
        rng = np.random.default_rng(1)
        u = rng.standard_normal((30, 1)).astype(np.float32)
        v = rng.standard_normal((1, 17)).astype(np.float32)
        k = u @ v
        rec = truncated_svd(k, 1).reconstruct()
        assert np.linalg.norm(rec - k) / np.linalg.norm(k) < 1e-5

    def test_basis_rows_orthonormal(self):
        rng = np.random.default_rng(2)
        f = truncated_svd(rng.standard_normal((40, 25)).astype(np.float32), 10)
        gram = f.right @ f.right.T
        assert np.allclose(gram, np.eye(10), atol=1e-4)

    def test_error_monotone_in_rank(self):
        rng = np.random.default_rng(3)
        k = rng.standard_normal((200, 150)).astype(np.float32)
        errs = []
        for rank in (8, 32, 128, 150):
            rec = truncated_svd(k, rank).reconstruct()
            errs.append(np.linalg.norm(rec - k))
        assert all(a >= b - 1e-6 for a, b in zip(errs, errs[1:]))
        assert errs[-1] / np.linalg.norm(k) < 1e-4

    def test_rank_160_matches_power_iteration_oracle(self):
        rng = np.random.default_rng(9)
        k = rng.standard_normal((4096, 1024)).astype(np.float32)
        rec = truncated_svd(k, 160).reconstruct()
        rel = np.linalg.norm(rec.astype(np.float64) - k) / np.linalg.norm(k)
        oracle = power_iteration_rank_error(k, 160)
        assert abs(rel - oracle) / oracle < 0.02

    def test_rank_out_of_range(self):
        k = np.zeros((4, 4), np.float32)
        for bad in (0, 5):
            with pytest.raises(ValueError):
                truncated_svd(k + np.eye(4, dtype=np.float32), bad)


class TestRandomizedHadamard:
    def test_isometry(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal(256).astype(np.float32)
        x /= np.linalg.norm(x)
        y = randomized_hadamard(x, seed=13)
        assert abs(np.linalg.norm(y) - 1.0) < 1e-5

    def test_involution_recovers_input(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(128).astype(np.float32)
        y = randomized_hadamard(x, seed=21)
        back = randomized_hadamard_inverse(y, seed=21)
        assert np.allclose(back, x, atol=1e-5)

    def test_h2_definition(self):
        # find a seed whose two signs are (+, +), then H2 maps (1,0) to
        # (1/sqrt(2), 1/sqrt(2))
        seed = next(s for s in range(100) if np.all(hadamard_signs(2, s) == 1.0))
        y = randomized_hadamard(np.array([1.0, 0.0], np.float32), seed)
        assert np.allclose(y, [2**-0.5, 2**-0.5], atol=1e-6)

    def test_seeds_differ(self):
        x = np.arange(1, 65, dtype=np.float32)
        assert not np.allclose(randomized_hadamard(x, 0), randomized_hadamard(x, 1))

    def test_non_power_of_two_rejected(self):
        with pytest.raises(ValueError):
            randomized_hadamard(np.zeros(12, np.float32), 0)

    @given(st.integers(0, 2**20), st.integers(2, 6))
    @settings(max_examples=40, deadline=None)
    def test_isometry_property(self, seed, logg):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(2**logg).astype(np.float32)
        y = randomized_hadamard(x, seed=seed)
        nx = np.linalg.norm(x)
        if nx > 1e-3:
            assert abs(np.linalg.norm(y) - nx) / nx < 1e-5


class TestKvtFormat:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        arr = rng.standard_normal((3, 5, 2)).astype(np.float32)
        p = tmp_path / "t.kvt"
        write_kvt(p, arr)
        back = read_kvt(p)
        assert back.shape == arr.shape
        assert np.array_equal(back, arr)

    def test_scalar_round_trip(self, tmp_path):
        p = tmp_path / "s.kvt"
        write_kvt(p, np.float32(3.25))
        back = read_kvt(p)
        assert back.shape == ()
        assert back == np.float32(3.25)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.kvt"
        p.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(KvtFormatError):
            read_kvt(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "t.kvt"
        write_kvt(p, np.ones((4, 4), np.float32))
        blob = p.read_bytes()
        p.write_bytes(blob[:-8])
        with pytest.raises(KvtFormatError):
            read_kvt(p)

    def test_extent_overflow(self, tmp_path):
        import struct

        p = tmp_path / "o.kvt"
        p.write_bytes(b"KVT1" + struct.pack("<I", 1) + struct.pack("<Q", 1 << 60))
        with pytest.raises(KvtFormatError):
            read_kvt(p)
