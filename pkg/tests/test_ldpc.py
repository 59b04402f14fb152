import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from molcomm import ldpc
from molcomm._backend import available
from molcomm.errors import ConstructionError, ContractError, ParameterError


@pytest.fixture(scope="module")
def code200():
    return ldpc.build_regular_code(200, 100, seed=0)


@pytest.fixture(scope="module")
def toy():
    return ldpc.build_regular_code(8, 4, seed=0)


def all_codewords(code):
    return np.array([ldpc.encode(code, np.array(u)) for u in itertools.product((0, 1), repeat=code.k)])


def ml_decode(codewords, llr):
    # Maximizing sum((1 - 2c) * llr) is minimizing sum(c * llr).
    return codewords[np.argmin(codewords @ llr)]


def gf2_multiply(H, word):
    out = []
    for row in H:
        acc = 0
        for h, w in zip(row, word):
            acc ^= int(h) & int(w)
        out.append(acc)
    return np.array(out)


class TestConstruction:
    def test_reference_code_structure(self, code200):
        H = code200.H
        assert H.shape == (100, 200)
        assert np.all(H.sum(axis=0) == 3) and np.all(H.sum(axis=1) == 6)
        assert ldpc.gf2_rank(H) == 100
        assert (code200.n, code200.k, code200.dv, code200.dc) == (200, 100, 3, 6)
        assert not np.any((code200.G.astype(int) @ H.T.astype(int)) % 2)
        assert code200.metadata["four_cycles"] == 0 == ldpc.count_four_cycles(H)

    def test_toy_code(self, toy):
        H = toy.H
        assert H.shape == (4, 8)
        assert np.all(H.sum(axis=0) == 3) and np.all(H.sum(axis=1) == 6)
        assert ldpc.gf2_rank(H) == 4 and toy.k == 4
        # Exhaustive check: exactly 2**k words of length 8 satisfy every parity.
        words = np.array(list(itertools.product((0, 1), repeat=8)))
        assert np.sum(~((words @ H.T) % 2).any(axis=1)) == 16

    def test_deterministic(self):
        a = ldpc.build_regular_code(48, 24, seed=3)
        b = ldpc.build_regular_code(48, 24, seed=3)
        c = ldpc.build_regular_code(48, 24, seed=4)
        np.testing.assert_array_equal(a.H, b.H)
        assert not np.array_equal(a.H, c.H)

    @pytest.mark.parametrize("n,k", [(201, 100), (200, 99), (10, 0), (10, 10), (5, 6)])
    def test_bad_dimensions(self, n, k):
        with pytest.raises(ParameterError):
            ldpc.build_regular_code(n, k)

    def test_exhausted_retries(self, monkeypatch):
        monkeypatch.setattr(ldpc, "gf2_rank", lambda H: -1)
        monkeypatch.setattr(ldpc, "CONSTRUCTION_RETRIES", 3)
        with pytest.raises(ConstructionError, match="3 attempts"):
            ldpc.build_regular_code(24, 12, seed=1)

    @pytest.mark.parametrize("seed", range(5))
    def test_other_seeds_are_valid(self, seed):
        code = ldpc.build_regular_code(96, 48, seed=seed)
        assert ldpc.gf2_rank(code.H) == 48
        assert np.all(code.H.sum(axis=0) == 3) and np.all(code.H.sum(axis=1) == 6)

    def test_rref_rank_of_known_matrix(self):
        M = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]])
        assert ldpc.gf2_rank(M) == 2


class TestEncode:
    def test_zero_message(self, code200):
        np.testing.assert_array_equal(ldpc.encode(code200, np.zeros(100)), 0)

    def test_unit_vector_gives_generator_row(self, code200):
        e1 = np.zeros(100, dtype=int)
        e1[0] = 1
        np.testing.assert_array_equal(ldpc.encode(code200, e1), code200.G[0])

    def test_random_messages_are_codewords_and_systematic(self, code200, rng):
        for _ in range(1000):
            u = rng.integers(0, 2, 100)
            c = ldpc.encode(code200, u)
            assert not ldpc.syndrome(code200, c).any()
            np.testing.assert_array_equal(code200.message_bits(c), u)

    def test_length_mismatch(self, code200):
        with pytest.raises(ContractError):
            ldpc.encode(code200, np.zeros(99))
        with pytest.raises(ContractError):
            ldpc.syndrome(code200, np.zeros(199))


class TestSyndrome:
    def test_flip_gives_column(self, code200, rng):
        c = ldpc.encode(code200, rng.integers(0, 2, 100))
        for j in (0, 57, 199):
            w = c.copy()
            w[j] ^= 1
            np.testing.assert_array_equal(ldpc.syndrome(code200, w), code200.H[:, j])

    def test_matches_brute_force_multiply(self, toy):
        for word in itertools.product((0, 1), repeat=8):
            np.testing.assert_array_equal(ldpc.syndrome(toy, np.array(word)),
                                          gf2_multiply(toy.H, word))


class TestDecode:
    def test_strong_correct_llrs(self, code200, rng):
        for _ in range(1000):
            c = ldpc.encode(code200, rng.integers(0, 2, 100))
            res = ldpc.decode_bp(code200, 20.0 * (1 - 2 * c.astype(float)))
            np.testing.assert_array_equal(res.decoded, c)
            assert res.converged and res.iterations <= 1

    def test_single_flip_matches_ml(self, toy):
        # The flipped bit is weaker than the rest; an equally strong flip would
        # make its repetition partner tie under ML.
        cws = all_codewords(toy)
        for c in cws:
            for j in range(8):
                llr = 20.0 * (1 - 2 * c.astype(float))
                llr[j] = -llr[j] / 4
                res = ldpc.decode_bp(toy, llr)
                np.testing.assert_array_equal(res.decoded, c)
                np.testing.assert_array_equal(ml_decode(cws, llr), c)

    def test_single_full_flip_on_reference_code(self, code200, rng):
        c = ldpc.encode(code200, rng.integers(0, 2, 100))
        for j in range(0, 200, 7):
            llr = 20.0 * (1 - 2 * c.astype(float))
            llr[j] = -llr[j]
            res = ldpc.decode_bp(code200, llr)
            np.testing.assert_array_equal(res.decoded, c)
            assert res.converged

    def test_zero_llrs(self, code200):
        res = ldpc.decode_bp(code200, np.zeros(200))
        np.testing.assert_array_equal(res.decoded, 0)
        assert res.converged and res.iterations == 1

    def test_bad_inputs(self, code200):
        with pytest.raises(ContractError):
            ldpc.decode_bp(code200, np.zeros(10))
        with pytest.raises(ParameterError):
            ldpc.decode_bp(code200, np.zeros(200), max_iter=0)

    def test_non_finite_inputs_are_clamped(self, code200):
        llr = np.full(200, np.inf)
        llr[3] = np.nan
        res = ldpc.decode_bp(code200, llr)
        np.testing.assert_array_equal(res.decoded, 0)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), sigma=st.floats(0.5, 1.2))
    def test_converged_means_codeword(self, code200, seed, sigma):
        rng = np.random.default_rng(seed)
        c = ldpc.encode(code200, rng.integers(0, 2, 100))
        llr = 2 * ((1 - 2 * c) + sigma * rng.standard_normal(200)) / sigma**2
        res = ldpc.decode_bp(code200, llr)
        if res.converged:
            assert not ldpc.syndrome(code200, res.decoded).any()
        assert 1 <= res.iterations <= 10

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_complement_symmetry(self, code200, toy, seed):
        rng = np.random.default_rng(seed)
        for code in (code200, toy):
            # Even check degree makes the all-ones word a codeword.
            assert not ldpc.syndrome(code, np.ones(code.n)).any()
            llr = rng.normal(0, 3, code.n)
            a = ldpc.decode_bp(code, llr)
            b = ldpc.decode_bp(code, -llr)
            np.testing.assert_array_equal(b.decoded, 1 - a.decoded)
            assert (a.iterations, a.converged) == (b.iterations, b.converged)

    def test_pure(self, code200, rng):
        llr = rng.normal(0, 2, 200)
        first = ldpc.decode_bp(code200, llr.copy())
        for _ in range(3):
            again = ldpc.decode_bp(code200, llr.copy())
            np.testing.assert_array_equal(first.decoded, again.decoded)
            assert first.iterations == again.iterations

    def test_backends_agree(self, code200, rng):
        for _ in range(200):
            llr = rng.normal(1, 2.5, 200)
            results = [ldpc.decode_bp(code200, llr, backend=b) for b in available()]
            for r in results[1:]:
                np.testing.assert_array_equal(r.decoded, results[0].decoded)
                assert (r.iterations, r.converged) == (results[0].iterations, results[0].converged)

    def test_block_errors_within_twice_ml(self, toy):
        # Moderate noise: BPSK over AWGN at sigma 0.8 (Eb/N0 about 1.9 dB at rate 1/2).
        cws = all_codewords(toy)
        rng = np.random.default_rng(7)
        sigma, trials = 0.8, 10_000
        bp_err = ml_err = 0
        for _ in range(trials):
            c = cws[rng.integers(len(cws))]
            llr = 2 * ((1 - 2 * c.astype(float)) + sigma * rng.standard_normal(8)) / sigma**2
            bp_err += not np.array_equal(ldpc.decode_bp(toy, llr).decoded, c)
            ml_err += not np.array_equal(ml_decode(cws, llr), c)
        assert ml_err > 100
        assert ml_err <= bp_err <= 2 * ml_err


class TestAlist:
    def test_round_trip(self, code200, tmp_path):
        path = tmp_path / "h.alist"
        ldpc.write_alist(path, code200.H)
        first = path.read_text().splitlines()
        assert first[0] == "200 100" and first[1] == "3 6"
        np.testing.assert_array_equal(ldpc.read_alist(path), code200.H)
        loaded = ldpc.load_code(path)
        np.testing.assert_array_equal(loaded.G, code200.G)
        assert loaded.k == 100

    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.alist"
        path.write_text("8 4\n3 6\n")
        with pytest.raises(ParameterError):
            ldpc.read_alist(path)
        path.write_text("2 1\n1 2\n1 1\n2\n1\n2\n1 0\n")
        with pytest.raises(ParameterError):
            ldpc.read_alist(path)
