import numpy as np
import pytest

from isograph.cube import DISP, ISO, SUB, LabeledCuboidGraph, decode_code
from isograph.rules import (
    ClassificationError,
    PatternError,
    RewriteRule,
    RuleKind,
    apply_rule,
    decompose,
    find_patterns,
    peel_sequence,
    select_s_rule,
    strip_singular_and_isolated,
    strip_states,
)
from isograph.cube import classify_states


def cell(states_str, c=0.5):
    lab = {"s": 0.25, "i": 0.5, "d": 0.75}
    return LabeledCuboidGraph.unit([lab[ch] for ch in states_str], c)


def pattern_ids(g, neighbors=None):
    return sorted({p.pattern_id for p in find_patterns(g, neighbors)})


def test_t1_pattern_at_corner():
    st = ["d"] * 8
    st[0] = "i"
    pats = [p for p in find_patterns(cell("".join(st))) if p.pattern_id == "T1sub"]
    assert len(pats) == 1 and pats[0].nodes[0] == 0


def test_s1_pattern_isolated_disperse_corner():
    pats = [p for p in find_patterns(cell("dsssssss")) if p.pattern_id == "S1sub"]
    assert len(pats) == 1 and pats[0].nodes[0] == 0


def test_f2_pattern_needs_matching_neighbor():
    # face x=1 (corners 4,5,6,7) at the level, others disperse
    st = ["d", "d", "d", "d", "i", "i", "i", "i"]
    g = cell("".join(st))
    assert "F2graph" not in pattern_ids(g)
    disp = [0.9] * 8
    assert "F2graph" in pattern_ids(g, {1: disp})
    cont = [0.1] * 8
    assert "F2graph" not in pattern_ids(g, {1: cont})


def test_apply_t1_saturates_iso_node():
    st = ["d"] * 8
    st[0] = "i"
    g = cell("".join(st))
    rule = RewriteRule(RuleKind.T1, (0, 4, 2, 1))
    out = apply_rule(g, rule)
    assert out.labels[0] == 1.0
    # idempotent: the disperse cell no longer matches, so the guard trips
    with pytest.raises(PatternError):
        apply_rule(out, rule)


def test_apply_s1_saturates_disperse_corner():
    g = cell("dsssssss")
    rule = RewriteRule(RuleKind.S1, (0, 4, 2, 1))
    out = apply_rule(g, rule)
    assert out.labels[0] == 0.0
    assert np.array_equal(out.labels[1:], g.labels[1:])


def test_apply_s3_saturates_sub_corner():
    g = cell("sddddddd")
    rule = RewriteRule(RuleKind.S3, (0, 4, 2, 1))
    out = apply_rule(g, rule)
    assert out.labels[0] == 1.0


def test_rules_never_cross_level_except_saturation():
    g = cell("dsssssss")
    out = apply_rule(g, RewriteRule(RuleKind.S1, (0, 4, 2, 1)))
    changed = np.nonzero(out.labels != g.labels)[0]
    assert all(out.labels[i] in (0.0, 1.0) for i in changed)


def test_strip_lone_corner_touch():
    st = ["d"] * 8
    st[0] = "i"
    out = strip_singular_and_isolated(cell("".join(st)))
    assert all(s == DISP for s in out.states())


def test_strip_fixpoint_on_regular_cell():
    g = cell("dsssssss")
    out = strip_singular_and_isolated(g)
    assert np.array_equal(out.labels, g.labels)


def test_strip_f1_membrane():
    # iso-nodes on two antipodal parallel edges, everything else disperse
    st = ["s"] * 8
    for n in (0, 4):   # edge along x at (j, k) = (0, 0)
        st[n] = "i"
    for n in (3, 7):   # antipodal edge at (j, k) = (1, 1)
        st[n] = "i"
    for n in (1, 2, 5, 6):
        st[n] = "d"
    g = cell("".join(st))
    assert any(p.pattern_id == "F1graph" for p in find_patterns(g))
    out = strip_singular_and_isolated(g)
    assert all(s == DISP for s in out.states())


def test_residual_corner_touch_after_edge_removal_is_stripped():
    # an at-level edge among disperse nodes with one sub node hanging off:
    # removing the edge leaves a corner touch that must also go
    st = ["d"] * 8
    st[0] = "i"
    st[1] = "i"
    st[3] = "s"
    out = strip_states(tuple({"s": SUB, "i": ISO, "d": DISP}[x] for x in st))
    assert sum(1 for s in out if s == DISP) == 7


def test_select_s_rule_table():
    def sel(states_str):
        return select_s_rule(classify_states(cell(states_str).states()))

    # four disperse in two antipodal edge pairs: two parallel L-faces
    assert sel("ddssssdd") == (RuleKind.S2, 1)
    # four isolated disperse corners: six L-faces
    assert sel("dssdsdds") == (RuleKind.S1, 3)
    # six disperse, the two continuous on a face diagonal
    assert sel("sdsdddds") == (RuleKind.S3, 1)
    # irreducible cells select nothing
    assert sel("dsssssss") is None


def test_select_s_rule_rejects_out_of_domain():
    from isograph.cube import GraphClassification
    cls = GraphClassification(
        n_disperse=4, l_faces=[(0, False)], singular=[], is_disperse=False,
        is_continuous=False, is_regular=True, reducible=True,
    )
    with pytest.raises(ClassificationError):
        select_s_rule(cls)


def test_decompose_irreducible_fixpoint():
    g = cell("dsssssss")
    dec = decompose(g)
    assert dec.pieces == [] and np.array_equal(dec.rest.labels, g.labels)


def test_decompose_space_diagonal():
    dec = decompose(cell("dssssssd"))
    assert len(dec.pieces) == 1
    assert dec.peel_kinds == [RuleKind.S1]
    rest_cls = classify_states(dec.rest.states())
    assert rest_cls.n_disperse == 1 and not rest_cls.reducible


def test_decompose_four_isolated_corners():
    dec = decompose(cell("dssdsdds"))
    assert len(dec.pieces) == 3
    assert classify_states(dec.rest.states()).n_disperse == 1
    # each piece is a single-path cell: one disperse corner in a sub cell
    for piece in dec.pieces:
        st = piece.states()
        assert sum(1 for s in st if s == DISP) == 1


def test_decompose_requires_stripped_cell():
    st = ["d"] * 8
    st[0] = "i"
    with pytest.raises(PatternError):
        decompose(cell("".join(st)))


def test_peel_sequence_terminates_for_all_codes():
    for code in range(3**8):
        work = strip_states(decode_code(code))
        peels, rest = peel_sequence(work)
        assert len(peels) <= 3
        cls = classify_states(rest)
        if not (cls.is_disperse or cls.is_continuous):
            assert not cls.reducible
            assert not cls.l_faces  # irreducible rest graph has no L-face


def test_peel_order_is_lowest_node_first():
    peels, _rest = peel_sequence(cell("dssdsdds").states())
    targets = [t[0] for _k, t, _b in peels]
    assert targets == sorted(targets)
