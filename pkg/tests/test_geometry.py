import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slnwitness.errors import DomainError, UnphysicalVectorError
from slnwitness.geometry import (
    COMPONENT_LABELS,
    STRATEGIES,
    component_labels,
    independent_dimension,
    reconstruct_full,
    reduce_to_independent,
    vertex,
    vertex_grid,
    vertex_matrix,
)
from slnwitness.physics import ExperimentParams, fock_oracle_table, joint_table

from .test_physics import params_strategy


def test_dimension_formula():
    assert independent_dimension(2, 1, 2, 3) == 8
    assert independent_dimension(2, 1, 2, 2) == 5
    # two-setting two-outcome Bell scenario
    assert independent_dimension(2, 2, 2, 2) == 8


def test_labels():
    assert COMPONENT_LABELS[0] == "P(0,0|g1)"
    assert COMPONENT_LABELS[-1] == "P_A(0|g2)"
    assert len(component_labels("single")) == 5


def test_vacuum_vector():
    v = reduce_to_independent(joint_table(ExperimentParams(0.0, 0.8, 0.6, 0.5, 1.0)))
    e1, e2 = math.exp(-0.25), math.exp(-1.0)
    assert np.allclose(v, [e1, 0, 1 - e1, 0, e2, 0, e1, e2], atol=1e-15)


def test_vacuum_reconstruction():
    t = reconstruct_full(reduce_to_independent(joint_table(ExperimentParams(0.0, 0.8, 0.6, 0.5, 1.0)))).p
    assert np.allclose(t[:, :, 1:], 0.0, atol=1e-15)


@given(params_strategy())
def test_round_trip(params):
    table = joint_table(params)
    assert reconstruct_full(reduce_to_independent(table)).allclose(table, 1e-14)


@given(params_strategy())
def test_round_trip_single(params):
    table = joint_table(params, "single")
    back = reconstruct_full(reduce_to_independent(table))
    assert back.n_outcomes == 2 and back.allclose(table, 1e-14)


def test_case_c_against_oracle():
    p = ExperimentParams(1.0, 0.8, 0.3, 0.1, 0.8)
    a = reduce_to_independent(joint_table(p))
    b = reduce_to_independent(fock_oracle_table(p))
    assert np.abs(a - b).max() <= 1e-10


def test_unphysical_vector():
    v = np.array([0.5, 0.4, 0.0, 0.0, 0.3, 0.1, 0.8, 0.5])
    with pytest.raises(UnphysicalVectorError):
        reconstruct_full(v)


def test_bad_length():
    with pytest.raises(DomainError):
        reconstruct_full(np.zeros(7))


@pytest.mark.parametrize(
    "s, t, expected",
    [
        ((0, 0), 1.0, [1, 0, 0, 0, 1, 0, 1, 1]),
        ((1, 1), 0.5, [0, 0, 0.25, 0.5, 0, 0, 0, 0]),
        ((1, 0), 0.0, [0, 0, 0, 0, 0, 0, 0, 1]),
    ],
)
def test_vertex_values(s, t, expected):
    assert np.array_equal(vertex(s, t).m, np.array(expected, dtype=float))


def test_vertex_domain():
    with pytest.raises(DomainError):
        vertex((0, 0), 1.2)
    with pytest.raises(DomainError):
        vertex((0, 2), 0.5)


@given(st.sampled_from(STRATEGIES), st.floats(0, 1))
def test_vertex_is_physical(s, t):
    table = reconstruct_full(vertex(s, t).m)
    table.validate(1e-12)
    # Alice is deterministic on each setting
    assert set(np.round(table.alice_marginal[:, 0], 12)) <= {0.0, 1.0}


def test_grid_sizes():
    assert len(vertex_grid(2)) == 8
    assert {v.t for v in vertex_grid(2)} == {0.0, 1.0}
    grid = vertex_grid(30)
    assert len(grid) == 120
    m = np.array([v.m for v in grid])
    assert m.min() >= 0 and m.max() <= 1
    assert np.array_equal(m, vertex_matrix(30))
    with pytest.raises(DomainError):
        vertex_grid(1)


def test_refined_grid_contains_coarse():
    coarse = {tuple(np.round(v, 14)) for v in vertex_matrix(30)}
    fine = {tuple(np.round(v, 14)) for v in vertex_matrix(59)}
    assert coarse <= fine
