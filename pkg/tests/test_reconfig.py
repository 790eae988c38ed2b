import itertools
import json
import random

import pytest
from hypothesis import given, settings, strategies as st

import corpus
from bpmnverify.errors import DuplicateId, ParseError, PatchError, UnknownId
from bpmnverify.model import FlowNode, NodeKind, SequenceFlow, ViolationCode, validate_wellformed
from bpmnverify.reconfig import (
    AddFlow,
    AddNode,
    Patch,
    RemoveFlow,
    RemoveNode,
    RerouteFlow,
    apply_patch,
    diff,
    emit_patch,
    load_patch,
    parse_patch,
    patch_from_json,
    patch_to_json,
)
from generators import random_model

INSERT_B = Patch((
    AddNode(FlowNode("B", NodeKind.TASK)),
    RerouteFlow("A__E", "A", "B"),
    AddFlow(SequenceFlow("B__E", "B", "E")),
))


def test_insert_task(m1):
    new = apply_patch(m1, INSERT_B)
    assert validate_wellformed(new) == []
    assert [(f.source, f.target) for f in new.flows] == [("S", "A"), ("A", "B"), ("B", "E")]
    assert load_patch(corpus.FIXTURES / "m1-insert-task-b.patch").ops == INSERT_B.ops


def test_remove_and_join_cascades(m2):
    new = apply_patch(m2, Patch((RemoveNode("g2"),)))
    assert all("g2" not in (f.source, f.target) for f in new.flows)
    found = {v.code for v in validate_wellformed(new)}
    assert {ViolationCode.BAD_DEGREE, ViolationCode.DANGLING_FLOW} <= found
    assert len(m2.flows) == 6  # input untouched


def test_m2_to_m3(m2, m3):
    patch = load_patch(corpus.FIXTURES / "m2-to-m3.patch")
    assert apply_patch(m2, patch).graph_equal(m3)
    assert diff(m2, m3).ops == (RemoveNode("g1"), AddNode(FlowNode("g1", NodeKind.XOR_SPLIT)))


def test_replace_in_place_keeps_position_and_flows(m2):
    new = apply_patch(m2, Patch((RemoveNode("A"), AddNode(FlowNode("A", NodeKind.TASK, "Renamed")))))
    assert [n.id for n in new.nodes] == [n.id for n in m2.nodes]
    assert new.flows == m2.flows and new.node("A").name == "Renamed"


def test_name_change_diff(m2):
    renamed = apply_patch(m2, Patch((RemoveNode("A"), AddNode(FlowNode("A", NodeKind.TASK, "Renamed")))))
    assert diff(m2, renamed).ops == (RemoveNode("A"), AddNode(FlowNode("A", NodeKind.TASK, "Renamed")))


def test_diff_identity(m1):
    assert diff(m1, m1).ops == ()


@pytest.mark.parametrize("patch,error,index", [
    (Patch((RemoveNode("nope"),)), UnknownId, 0),
    (Patch((AddNode(FlowNode("T", NodeKind.TASK)), AddNode(FlowNode("A", NodeKind.TASK)))), DuplicateId, 1),
    (Patch((AddFlow(SequenceFlow("S__A", "S", "E")),)), DuplicateId, 0),
    (Patch((RemoveFlow("S__A"), AddFlow(SequenceFlow("x", "S", "ghost")))), UnknownId, 1),
    (Patch((RerouteFlow("missing", "S", "E"),)), UnknownId, 0),
])
def test_patch_errors_are_atomic(m1, patch, error, index):
    before = (m1.nodes, m1.flows)
    with pytest.raises(error) as err:
        apply_patch(m1, patch)
    assert err.value.op_index == index
    assert isinstance(err.value, PatchError)
    assert (m1.nodes, m1.flows) == before


@pytest.mark.parametrize("a,b", list(itertools.product(corpus.NAMES, repeat=2)))
def test_diff_apply_law_on_corpus(a, b):
    old, new = corpus.model(a), corpus.model(b)
    assert apply_patch(old, diff(old, new)).graph_equal(new)


def test_diff_is_deterministic_and_ordered(m2, m3):
    p = diff(corpus.model("multi_end"), m2)
    assert p == diff(corpus.model("multi_end"), m2)
    rank = {RemoveFlow: 0, RemoveNode: 1, AddNode: 2, RerouteFlow: 3, AddFlow: 4}
    kinds = [rank[type(op)] for op in p.ops]
    assert kinds == sorted(kinds)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6))
def test_diff_apply_law_random(s1, s2, n1, n2):
    a = random_model(random.Random(s1), n1)
    b = random_model(random.Random(s2), n2)
    assert apply_patch(a, diff(a, b)).graph_equal(b)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_cascade_completeness(seed, size):
    m = random_model(random.Random(seed), size)
    victim = random.Random(seed).choice(m.nodes).id
    new = apply_patch(m, Patch((RemoveNode(victim),)))
    assert all(victim not in (f.source, f.target) for f in new.flows)


def test_patch_text_round_trip(m2, m3):
    p = diff(corpus.model("approve_order"), m3)
    assert parse_patch(emit_patch(p)) == p
    assert parse_patch(emit_patch(INSERT_B)) == INSERT_B


def test_patch_json_round_trip(m2, m3):
    p = diff(m2, corpus.model("approve_order"))
    assert patch_from_json(patch_to_json(p)) == p
    assert json.loads(patch_to_json(p))["ops"][0]["op"] in {"remove-flow", "remove-node"}


@pytest.mark.parametrize("text", [
    "frobnicate x",
    "add-node gizmo X",
    "remove-node",
    "add-flow a b",
    "remove-node a;",
])
def test_patch_syntax_errors(text):
    with pytest.raises(ParseError):
        parse_patch(text)


@pytest.mark.parametrize("text", ["{", '{"ops": [{"op": "explode"}]}', '{"ops": [{"op": "remove-node"}]}'])
def test_patch_json_errors(text):
    with pytest.raises(ParseError):
        patch_from_json(text)
