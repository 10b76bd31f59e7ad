import numpy as np
import pytest

from dgnnflow.errors import (
    ColIdxOutOfRange,
    EmbedShapeMismatch,
    NonFiniteValue,
    RenumberNotBijective,
    RowPtrNotMonotone,
)
from dgnnflow.graph import (
    ColIdxNotSorted,
    CsrGraph,
    NodeStateStore,
    RenumberTable,
    Snapshot,
    TemporalEdgeList,
    WeightSet,
    validate_snapshot,
)
from dgnnflow.preprocess import EdgeGroup, ZeroFeatures, build_renumber_table, build_snapshot, coo_to_csr


def snap(row_ptr, col_idx, weights=None, l2r=None, embed=None):
    n = len(row_ptr) - 1
    csr = CsrGraph(np.array(row_ptr, dtype=np.int64), np.array(col_idx, dtype=np.int64),
                   np.ones(len(col_idx), np.float32) if weights is None else np.array(weights, np.float32))
    table = RenumberTable(np.arange(n) if l2r is None else l2r)
    emb = np.zeros((n, 2), np.float32) if embed is None else embed
    return Snapshot(0, table, csr, emb)


def test_empty_graph_is_valid():
    validate_snapshot(snap([0], []))


def test_row_ptr_decreasing():
    with pytest.raises(RowPtrNotMonotone):
        validate_snapshot(snap([0, 2, 1], [0]))


def test_row_ptr_end_mismatch():
    with pytest.raises(RowPtrNotMonotone):
        validate_snapshot(snap([0, 1, 1], [0, 1]))


def test_col_out_of_range():
    with pytest.raises(ColIdxOutOfRange):
        validate_snapshot(snap([0, 1, 2], [0, 2]))


def test_col_unsorted_within_row():
    with pytest.raises(ColIdxNotSorted):
        validate_snapshot(snap([0, 2, 2], [1, 0]))
    with pytest.raises(ColIdxNotSorted):
        validate_snapshot(snap([0, 2, 2], [1, 1]))
    # descending across a row boundary is fine
    validate_snapshot(snap([0, 1, 2], [1, 0]))


def test_renumber_duplicates():
    with pytest.raises(RenumberNotBijective):
        validate_snapshot(snap([0, 0, 0], [], l2r=[5, 5]))


def test_embed_shape():
    with pytest.raises(EmbedShapeMismatch):
        validate_snapshot(snap([0, 0, 0], [], embed=np.zeros((3, 2), np.float32)))


def test_non_finite_embed():
    emb = np.zeros((2, 2), np.float32)
    emb[1, 1] = np.nan
    with pytest.raises(NonFiniteValue):
        validate_snapshot(snap([0, 0, 0], [], embed=emb))


def test_path_graph_from_preprocess_is_valid():
    edges = TemporalEdgeList([10, 20], [20, 30], [1.0, 1.0], [0, 0])
    g = EdgeGroup(0, edges, 3)
    t = build_renumber_table(g)
    s = build_snapshot(g, t, coo_to_csr(g, t), ZeroFeatures(4))
    validate_snapshot(s)
    assert s.n_nodes == 3 and s.n_edges == 2


def test_renumber_roundtrip():
    t = RenumberTable([3, 7, 9, 100])
    for i, r in enumerate(t.local_to_raw):
        assert t.raw_to_local[int(r)] == i
    for r, i in t.raw_to_local.items():
        assert t.local_to_raw[i] == r
    assert t.lookup([9, 4, 100]).tolist() == [2, -1, 3]


def test_temporal_edge_list_extrema_and_iteration():
    e = TemporalEdgeList([1, 2], [2, 3], [0.5, 1.5], [30, 10])
    assert (e.t_min, e.t_max) == (10, 30)
    assert [x.time for x in e] == [30, 10]


def test_edge_list_rejects_bad_values():
    with pytest.raises(NonFiniteValue):
        TemporalEdgeList([1], [2], [np.inf], [0])
    with pytest.raises(Exception):
        TemporalEdgeList([1], [2], [1.0], [-1])


def test_weight_set_rejects_non_finite():
    with pytest.raises(NonFiniteValue):
        WeightSet({"a": np.array([np.nan])})


def test_state_store_absent_is_zero():
    s = NodeStateStore(3)
    h, c = s.gather([4, 5])
    assert not h.any() and not c.any()
    s.commit([5], np.ones((1, 3), np.float32), np.full((1, 3), 2, np.float32))
    h, c = s.gather([4, 5])
    assert h[0].tolist() == [0, 0, 0] and h[1].tolist() == [1, 1, 1] and c[1].tolist() == [2, 2, 2]
