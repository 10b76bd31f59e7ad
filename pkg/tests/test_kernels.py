import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgnnflow.errors import ShapeMismatch
from dgnnflow.graph import CsrGraph, WeightSet
from dgnnflow.kernels import (
    GcnWeights,
    GruParams,
    LstmParams,
    fixed_dot,
    gcn_coefficients,
    gru_cell,
    lstm_cell,
    matrix_gru_evolve,
    message_pass,
    node_transform,
    sigmoid,
    tanh,
)

F32 = np.float32


def csr_from(n, edges):
    """edges: (src, dst, w); rows are destinations."""
    edges = sorted(edges, key=lambda e: (e[1], e[0]))
    row_ptr = [0] * (n + 1)
    for _, d, _ in edges:
        row_ptr[d + 1] += 1
    for i in range(n):
        row_ptr[i + 1] += row_ptr[i]
    return CsrGraph(np.array(row_ptr, np.int64), np.array([e[0] for e in edges], np.int64),
                    np.array([e[2] for e in edges], F32))


def dense_mp(n, edges, x):
    a = np.eye(n)
    deg = np.ones(n)
    for s, d, w in edges:
        a[d, s] += w
        deg[d] += 1
    dm = np.diag(deg ** -0.5)
    return dm @ a @ dm @ x.astype(np.float64)


def random_graph(rng, n, m):
    pairs = {(int(rng.integers(n)), int(rng.integers(n))) for _ in range(m)}
    return [(s, d, float(rng.integers(-3, 4))) for s, d in pairs]


def rand_params(cls, rng, f_x, hidden, scale=0.5):
    shapes = cls.shapes(f_x, hidden)
    return cls(**{k: rng.uniform(-scale, scale, v).astype(F32) for k, v in shapes.items()})


def zero_params(cls, f_x, hidden):
    return cls(**{k: np.zeros(v, F32) for k, v in cls.shapes(f_x, hidden).items()})


# scalar oracles, written without numpy matrix ops

def _sig(a):
    return 1.0 / (1.0 + math.exp(-a))


def _lin(x, W, h, U, b, j):
    return (sum(float(x[k]) * float(W[k, j]) for k in range(len(x)))
            + sum(float(h[k]) * float(U[k, j]) for k in range(len(h))) + float(b[j]))


def scalar_gru(x, h, p):
    H = len(h)
    z = [_sig(_lin(x, p.W_z, h, p.U_z, p.b_z, j)) for j in range(H)]
    r = [_sig(_lin(x, p.W_r, h, p.U_r, p.b_r, j)) for j in range(H)]
    rh = [r[j] * float(h[j]) for j in range(H)]
    ht = [math.tanh(_lin(x, p.W_h, rh, p.U_h, p.b_h, j)) for j in range(H)]
    return [(1 - z[j]) * float(h[j]) + z[j] * ht[j] for j in range(H)]


def scalar_lstm(x, h, c, p):
    H = len(h)
    gate = {g: [_lin(x, getattr(p, f"W_{g}"), h, getattr(p, f"U_{g}"), getattr(p, f"b_{g}"), j)
                for j in range(H)] for g in "ifog"}
    c2 = [_sig(gate["f"][j]) * float(c[j]) + _sig(gate["i"][j]) * math.tanh(gate["g"][j]) for j in range(H)]
    h2 = [_sig(gate["o"][j]) * math.tanh(c2[j]) for j in range(H)]
    return h2, c2


class TestMessagePass:
    def test_isolated_node(self):
        x = np.array([[1.0, 2.0]], F32)
        assert message_pass(CsrGraph.empty(1), x).tolist() == [[1.0, 2.0]]

    def test_two_nodes(self):
        # 0 -> 1 with weight 1: d = (1, 2)
        x = np.array([[1.0, 0.0], [0.0, 1.0]], F32)
        m = message_pass(csr_from(2, [(0, 1, 1.0)]), x)
        np.testing.assert_allclose(m[0], x[0], rtol=1e-6)
        np.testing.assert_allclose(m[1], x[0] / math.sqrt(2) + x[1] / 2, rtol=1e-6)

    def test_coefficients(self):
        coef, self_coef = gcn_coefficients(csr_from(3, [(0, 2, 2.0), (1, 2, 1.0)]))
        np.testing.assert_allclose(self_coef, [1, 1, 1 / 3], rtol=1e-7)
        np.testing.assert_allclose(coef, [2 / math.sqrt(3), 1 / math.sqrt(3)], rtol=1e-6)

    @pytest.mark.parametrize("seed", range(10))
    def test_against_dense(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 30))
        edges = random_graph(rng, n, int(rng.integers(0, 80)))
        x = rng.standard_normal((n, 5)).astype(F32)
        got = message_pass(csr_from(n, edges), x)
        ref = dense_mp(n, edges, x)
        assert np.abs(got - ref).max() <= 1e-5 * max(1.0, np.abs(ref).max())

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 25), st.integers(1, 7))
    def test_row_blocks_bit_identical(self, seed, n, block):
        rng = np.random.default_rng(seed)
        csr = csr_from(n, random_graph(rng, n, 3 * n))
        x = rng.standard_normal((n, 4)).astype(F32)
        whole = message_pass(csr, x)
        parts = np.concatenate([message_pass(csr, x, rows=np.arange(a, min(a + block, n)))
                                for a in range(0, n, block)])
        assert whole.tobytes() == parts.tobytes()

    def test_does_not_mutate_inputs(self):
        rng = np.random.default_rng(0)
        csr = csr_from(4, random_graph(rng, 4, 8))
        x = rng.standard_normal((4, 3)).astype(F32)
        snap = (csr.row_ptr.copy(), csr.col_idx.copy(), csr.edge_weight.copy(), x.copy())
        message_pass(csr, x)
        for a, b in zip(snap, (csr.row_ptr, csr.col_idx, csr.edge_weight, x)):
            assert a.tobytes() == b.tobytes()


class TestNodeTransform:
    def test_identity(self):
        m = np.array([[1.0, -2.0], [0.5, 3.0]], F32)
        w = GcnWeights(np.eye(2, dtype=F32), np.zeros(2, F32))
        assert node_transform(m, w, activate=False).tolist() == m.tolist()
        assert node_transform(m, w).tolist() == [[1.0, 0.0], [0.5, 3.0]]

    @pytest.mark.parametrize("shape", [(1, 1, 1), (5, 3, 4), (17, 8, 2)])
    def test_matmul_oracle(self, shape):
        n, fi, fo = shape
        rng = np.random.default_rng(n)
        m = rng.standard_normal((n, fi)).astype(F32)
        w = GcnWeights(rng.standard_normal((fi, fo)).astype(F32), rng.standard_normal(fo).astype(F32))
        ref = np.maximum(m.astype(np.float64) @ w.W + w.b, 0)
        np.testing.assert_allclose(node_transform(m, w), ref, rtol=1e-5, atol=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            fixed_dot(np.zeros((2, 3), F32), np.zeros((4, 1), F32))


class TestCells:
    @pytest.mark.parametrize("f_x,hidden", [(1, 1), (3, 4), (6, 2)])
    def test_gru_scalar_oracle(self, f_x, hidden):
        rng = np.random.default_rng(f_x * 10 + hidden)
        p = rand_params(GruParams, rng, f_x, hidden)
        for _ in range(5):
            x = rng.uniform(-2, 2, f_x).astype(F32)
            h = rng.uniform(-1, 1, hidden).astype(F32)
            np.testing.assert_allclose(gru_cell(x, h, p), scalar_gru(x, h, p), rtol=1e-6, atol=1e-6)

    @pytest.mark.parametrize("f_x,hidden", [(1, 1), (4, 3), (8, 4)])
    def test_lstm_scalar_oracle(self, f_x, hidden):
        rng = np.random.default_rng(f_x * 10 + hidden)
        p = rand_params(LstmParams, rng, f_x, hidden)
        for _ in range(5):
            x = rng.uniform(-2, 2, f_x).astype(F32)
            h = rng.uniform(-1, 1, hidden).astype(F32)
            c = rng.uniform(-2, 2, hidden).astype(F32)
            h2, c2 = lstm_cell(x, h, c, p)
            rh, rc = scalar_lstm(x, h, c, p)
            np.testing.assert_allclose(h2, rh, rtol=1e-6, atol=1e-6)
            np.testing.assert_allclose(c2, rc, rtol=1e-6, atol=1e-6)

    def test_matrix_gru_columns(self):
        rng = np.random.default_rng(3)
        p = rand_params(GruParams, rng, 4, 4)
        W = rng.uniform(-1, 1, (4, 3)).astype(F32)
        out = matrix_gru_evolve(W, p)
        for j in range(3):
            np.testing.assert_allclose(out[:, j], scalar_gru(W[:, j], W[:, j], p), rtol=1e-6, atol=1e-6)

    def test_zero_gru_halves_state(self):
        h = np.array([0.8, -0.4, 2.0], F32)
        out = gru_cell(np.ones(2, F32), h, zero_params(GruParams, 2, 3))
        assert out.tolist() == (h / 2).tolist()

    def test_zero_lstm(self):
        c = np.array([1.0, -3.0], F32)
        h2, c2 = lstm_cell(np.ones(2, F32), np.ones(2, F32), c, zero_params(LstmParams, 2, 2))
        np.testing.assert_allclose(c2, c / 2, rtol=1e-7)
        np.testing.assert_allclose(h2, 0.5 * np.tanh(c / 2), rtol=1e-6)

    def test_zero_matrix_gru_k_steps(self):
        W = np.arange(12, dtype=F32).reshape(4, 3) - 5
        p = zero_params(GruParams, 4, 4)
        cur = W
        for k in range(1, 6):
            cur = matrix_gru_evolve(cur, p)
            assert cur.tolist() == (W * F32(2.0 ** -k)).tolist()

    def test_matrix_gru_shape_check(self):
        with pytest.raises(ShapeMismatch):
            matrix_gru_evolve(np.zeros((3, 2), F32), zero_params(GruParams, 4, 4))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 20), st.integers(1, 6))
    def test_rows_independent(self, seed, n, block):
        rng = np.random.default_rng(seed)
        p = rand_params(GruParams, rng, 3, 4)
        q = rand_params(LstmParams, rng, 3, 4)
        x = rng.standard_normal((n, 3)).astype(F32)
        h = rng.standard_normal((n, 4)).astype(F32)
        c = rng.standard_normal((n, 4)).astype(F32)
        whole = gru_cell(x, h, p)
        lw = lstm_cell(x, h, c, q)
        for a in range(0, n, block):
            b = min(a + block, n)
            assert gru_cell(x[a:b], h[a:b], p).tobytes() == whole[a:b].tobytes()
            lh, lc = lstm_cell(x[a:b], h[a:b], c[a:b], q)
            assert lh.tobytes() == lw[0][a:b].tobytes() and lc.tobytes() == lw[1][a:b].tobytes()


floats = st.floats(-1e6, 1e6, allow_nan=False, width=32)


@given(st.lists(floats, min_size=1, max_size=30))
def test_activation_bounds(vals):
    a = np.array(vals, F32)
    s = sigmoid(a)
    t = tanh(a)
    assert ((s >= 0) & (s <= 1)).all() and ((t >= -1) & (t <= 1)).all()
    # strict in float32 only where the value is representably away from the limit
    small = np.abs(a) <= 10
    assert ((s[small] > 0) & (s[small] < 1)).all()
    mid = np.abs(a) <= 8
    assert ((t[mid] > -1) & (t[mid] < 1)).all()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_cell_outputs_bounded(seed):
    rng = np.random.default_rng(seed)
    p = rand_params(GruParams, rng, 3, 3, scale=3.0)
    q = rand_params(LstmParams, rng, 3, 3, scale=3.0)
    x = rng.uniform(-5, 5, (4, 3)).astype(F32)
    h = rng.uniform(-1, 1, (4, 3)).astype(F32)
    c = rng.uniform(-5, 5, (4, 3)).astype(F32)
    assert (np.abs(gru_cell(x, h, p)) <= 1).all()
    h2, _ = lstm_cell(x, h, c, q)
    assert (np.abs(h2) <= 1).all()


def test_params_from_weights():
    ws = WeightSet({f"g.{k}": np.zeros(v, F32) for k, v in GruParams.shapes(2, 3).items()})
    p = GruParams.from_weights(ws, "g")
    assert (p.input_dim, p.hidden) == (2, 3)
    with pytest.raises(ShapeMismatch):
        LstmParams.from_weights(ws, "g")
