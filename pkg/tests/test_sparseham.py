"""Coloring decomposition and symmetric product-formula simulation."""
import math

import numpy as np
import pytest

from adiagen.qcore import (
    DenseHermitian,
    matrix_exponential,
    random_sparse_hermitian,
    spectral_norm,
)
from adiagen.sparseham import (
    BlockPiece,
    ColoringError,
    Diagonal,
    EntryColor,
    InconsistentOracleError,
    OffDiagonal,
    RowOracle,
    SparseHamiltonian,
    color_entry,
    decompose,
    load_coo,
    piece_exponential,
    save_coo,
    simulate_sparse,
    sparse_from_dense,
    trotter_step,
    trotter_unitary,
)


def explicit_4x4():
    """4x4 with 2 nonzeros per row: diagonal plus a (2,3) coupling."""
    H = np.zeros((4, 4), dtype=complex)
    H[0, 0] = 1.0
    H[1, 1] = -0.5
    H[2, 2] = 0.25
    H[2, 3] = 0.5 + 0.5j
    H[3, 2] = 0.5 - 0.5j
    return sparse_from_dense(DenseHermitian(H))


class TestColorEntry:
    def test_diagonal_rule(self):
        H = sparse_from_dense(DenseHermitian(np.diag(np.arange(1.0, 9.0))))
        c = color_entry(H, 5, 5)
        assert (c.k, c.i_mod_k, c.j_mod_k) == (1, 0, 0)

    def test_smallest_separating_modulus(self):
        c = color_entry(explicit_4x4(), 2, 3)
        assert (c.k, c.i_mod_k, c.j_mod_k) == (2, 0, 1)

    def test_rindex_by_hand(self):
        # Row 2 nonzeros sit at columns {2, 3}; entry (2,3) is the second.
        c = color_entry(explicit_4x4(), 2, 3)
        assert c.rindex == 2
        # Column index mirrors row 3, whose nonzeros are {2, 3}: (3,2) is first.
        assert c.cindex == 1

    def test_mirror_entries_share_color(self):
        H = explicit_4x4()
        assert color_entry(H, 2, 3) == color_entry(H, 3, 2)


class TestDecompose:
    def test_diagonal_pieces_only(self):
        H = sparse_from_dense(DenseHermitian(np.diag([1.0, 2.0, 3.0, 4.0])))
        pieces = decompose(H)
        for p in pieces:
            assert p.color.k == 1
            assert all(isinstance(b, Diagonal) for b in p.blocks)

    def test_exact_reconstruction_4x4(self):
        H = explicit_4x4()
        pieces = decompose(H)
        total = sum((p.materialize(4).entries for p in pieces), np.zeros((4, 4), dtype=complex))
        assert np.array_equal(total, H.materialize().entries)

    def test_block_disjointness(self):
        H = sparse_from_dense(random_sparse_hermitian(3, 4, 1.0, seed=5))
        for p in decompose(H):
            touched = []
            for b in p.blocks:
                touched += [b.i] if isinstance(b, Diagonal) else [b.i, b.j]
            assert len(touched) == len(set(touched))

    def test_norm_domination(self):
        H = random_sparse_hermitian(4, 4, 1.0, seed=6)
        sh = sparse_from_dense(H)
        norm = spectral_norm(H)
        for p in decompose(sh):
            assert p.norm() <= norm + 1e-12

    def test_piece_count_bound(self):
        for seed in range(5):
            n, D = 4, 3
            H = sparse_from_dense(random_sparse_hermitian(n, D, 1.0, seed=seed), D=D)
            assert len(decompose(H)) <= (D + 1) ** 2 * n**6

    def test_inconsistent_oracle_rejected(self):
        rows = {0: [(1, 1.0 + 0j)], 1: []}
        bad = SparseHamiltonian(
            oracle=RowOracle(n=1, row_fn=lambda i: rows[i]), D=2, lam=1.0)
        with pytest.raises(InconsistentOracleError):
            bad.materialize()


class TestPieceExponential:
    def test_empty_piece_is_identity(self):
        p = BlockPiece(color=EntryColor(1, 0, 0, 1, 1), blocks=())
        v = np.array([0.6, 0.8], dtype=complex)
        assert np.array_equal(piece_exponential(p, 1.7, v), v)

    def test_diagonal_phase(self):
        p = BlockPiece(color=EntryColor(1, 0, 0, 1, 1), blocks=(Diagonal(0, math.pi),))
        v = piece_exponential(p, 1.0, np.array([1.0, 1.0], dtype=complex) / math.sqrt(2))
        assert v[0] == pytest.approx(-1 / math.sqrt(2), abs=1e-12)
        assert v[1] == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_off_diagonal_quarter_turn(self):
        p = BlockPiece(color=EntryColor(2, 0, 1, 1, 1), blocks=(OffDiagonal(0, 1, 1.0),))
        v = piece_exponential(p, math.pi / 2, np.array([1.0, 0.0], dtype=complex))
        assert np.allclose(v, [0.0, -1j], atol=1e-12)

    def test_matches_2x2_eigendecomposition(self):
        # Oracle: exponentiate the dense 2x2 block directly.
        val = 0.3 - 0.4j
        p = BlockPiece(color=EntryColor(2, 0, 1, 1, 1), blocks=(OffDiagonal(0, 1, val),))
        t = 0.9
        block = np.array([[0, val], [np.conjugate(val), 0]])
        vals, vecs = np.linalg.eigh(block)
        expU = (vecs * np.exp(-1j * vals * t)) @ vecs.conj().T
        rng = np.random.default_rng(1)
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        assert np.allclose(piece_exponential(p, t, v), expU @ v, atol=1e-12)

    def test_matches_matrix_exponential(self):
        H = random_sparse_hermitian(3, 3, 1.0, seed=9)
        pieces = decompose(sparse_from_dense(H))
        for p in pieces[:4]:
            exact = matrix_exponential(p.materialize(8), 0.6).entries
            got = piece_exponential(p, 0.6, np.eye(8, dtype=complex))
            assert np.max(np.abs(got - exact)) < 1e-10


class TestTrotterStep:
    def test_single_piece_collapses(self):
        H = random_sparse_hermitian(2, 1, 1.0, seed=3)
        # Keep the diagonal only so everything lands in one color class.
        Hd = DenseHermitian(np.diag(np.diag(H.entries)))
        pieces = decompose(sparse_from_dense(Hd))
        delta = 0.37
        got = trotter_unitary(pieces, delta, 1, 4)
        exact = matrix_exponential(Hd, 2 * delta).entries
        assert np.max(np.abs(got - exact)) < 1e-12

    def test_commuting_pieces_exact(self):
        H = DenseHermitian(np.diag([0.3, -1.2, 0.8, 0.1]))
        pieces = decompose(sparse_from_dense(H))
        got = trotter_unitary(pieces, 0.21, 1, 4)
        exact = matrix_exponential(H, 0.42).entries
        assert np.max(np.abs(got - exact)) < 1e-12

    def test_noncommuting_third_order_per_step(self):
        H = random_sparse_hermitian(3, 4, 1.0, seed=8)
        pieces = decompose(sparse_from_dense(H))
        errors = []
        deltas = [0.1, 0.05, 0.025, 0.0125]
        for d in deltas:
            got = trotter_step(pieces, d, np.eye(8, dtype=complex))
            errors.append(spectral_norm(got - matrix_exponential(H, 2 * d).entries))
        slopes = np.diff(np.log(errors)) / np.diff(np.log(deltas))
        assert np.all(slopes > 2.5)

    def test_rejects_nonpositive_delta(self):
        with pytest.raises(ValueError):
            trotter_step([], 0.0, np.eye(2, dtype=complex))


class TestSimulateSparse:
    def test_time_zero(self):
        H = sparse_from_dense(random_sparse_hermitian(2, 2, 1.0, seed=1))
        assert np.array_equal(simulate_sparse(H, 0.0, 1e-3), np.eye(4))

    def test_diagonal_exact(self):
        H = DenseHermitian(np.diag([1.0, -2.0, 0.5, 3.0]))
        U = simulate_sparse(sparse_from_dense(H), 1.0, 1e-6)
        assert spectral_norm(U - matrix_exponential(H, 1.0).entries) < 1e-12

    def test_meets_requested_accuracy(self):
        H = random_sparse_hermitian(5, 4, 1.0, seed=42)
        sh = sparse_from_dense(H, D=4, lam=1.0)
        U = simulate_sparse(sh, 1.0, 1e-3)
        assert spectral_norm(U - matrix_exponential(H, 1.0).entries) <= 1e-3


class TestCooRoundTrip:
    def test_round_trip(self, tmp_path):
        H = random_sparse_hermitian(3, 3, 1.0, seed=4)
        path = tmp_path / "h.coo"
        save_coo(H, path)
        H2 = load_coo(path)
        assert np.allclose(H.entries, H2.entries, atol=1e-15)

    def test_rejects_asymmetric_file(self, tmp_path):
        path = tmp_path / "bad.coo"
        path.write_text("0 1 1.0 0.0\n")
        with pytest.raises(InconsistentOracleError):
            load_coo(path)
