"""
Tests for stage 1: occupancy correction, query proposal and query modes.
"""

import numpy as np
import pytest
import torch

from app.geometry import Resolution, VolumeSpec
from app.networks import (
    OccupancyNet,
    QueryMode,
    QueryProposal,
    VoxelQuerySet,
    init_parameters,
    occupancy_tensor,
    predict_occupancy,
    propose_queries,
    select_query_mask,
    stage1_loss,
)
from app.numerics import DTYPE, grad_check, make_torch_rng
from app.utils.errors import InvalidInputError
from app.voxel import OccupancyGrid, VoxelGrid, downsample_occupancy


@pytest.fixture
def net(tiny_spec):
    net = OccupancyNet(tiny_spec, channels=4)
    init_parameters(net, make_torch_rng(11))
    return net


def _random_grid(spec, resolution, seed, density=0.3):
    rng = np.random.default_rng(seed)
    return OccupancyGrid(spec, resolution, rng.random(spec.dims_for(resolution)) < density)


def test_predict_occupancy_shapes(net, tiny_spec):
    m_in = _random_grid(tiny_spec, Resolution.OUTPUT, 0)
    logits, m_out = predict_occupancy(m_in, net)
    assert tuple(logits.shape) == tiny_spec.query_dims
    assert m_out.resolution == Resolution.QUERY
    assert np.array_equal(m_out.bits, (torch.sigmoid(logits) > 0.5).numpy())


def test_occupancy_net_supports_unit_factor():
    spec = VolumeSpec((0.0, 0.0, 0.0), 0.4, (4, 4, 2), (4, 4, 2))
    net = OccupancyNet(spec, channels=2)
    init_parameters(net, make_torch_rng(0))
    logits, m_out = predict_occupancy(OccupancyGrid.full(spec, Resolution.OUTPUT), net)
    assert tuple(logits.shape) == (4, 4, 2)
    assert m_out.bits.shape == (4, 4, 2)


def test_occupancy_net_rejects_unsupported_volumes():
    with pytest.raises(InvalidInputError):
        OccupancyNet(VolumeSpec((0, 0, 0), 0.4, (12, 12, 3), (4, 4, 1)))
    with pytest.raises(InvalidInputError):
        OccupancyNet(VolumeSpec((0, 0, 0), 0.4, (6, 6, 2), (3, 3, 1)))


def test_predict_occupancy_rejects_query_grid(net, tiny_spec):
    with pytest.raises(InvalidInputError):
        predict_occupancy(OccupancyGrid.empty(tiny_spec, Resolution.QUERY), net)


def test_propose_queries_follows_scan_order(tiny_spec, generator):
    qset = VoxelQuerySet(tiny_spec, 5)
    init_parameters(qset, generator)
    bits = np.zeros(tiny_spec.query_dims, dtype=bool)
    bits[0, 1, 1] = bits[2, 0, 0] = bits[3, 3, 1] = True
    q_p, proposal = propose_queries(qset, OccupancyGrid(tiny_spec, Resolution.QUERY, bits))
    assert proposal.count == 3
    assert proposal.indices.tolist() == [[0, 1, 1], [2, 0, 0], [3, 3, 1]]
    embedded = (qset.queries + qset.pos_embed)
    for row, (i, j, k) in enumerate(proposal.indices):
        assert torch.equal(q_p[row], embedded[i, j, k])


def test_propose_queries_empty_and_dense(tiny_spec, generator):
    qset = VoxelQuerySet(tiny_spec, 4)
    init_parameters(qset, generator)
    q_p, proposal = propose_queries(qset, OccupancyGrid.empty(tiny_spec, Resolution.QUERY))
    assert proposal.count == 0 and tuple(q_p.shape) == (0, 4)
    q_p, proposal = propose_queries(qset, OccupancyGrid.full(tiny_spec, Resolution.QUERY))
    assert proposal.count == tiny_spec.cell_count(Resolution.QUERY)
    assert torch.equal(q_p, qset.embedded())


def test_query_proposal_needs_query_mask(tiny_spec):
    with pytest.raises(InvalidInputError):
        QueryProposal.from_mask(OccupancyGrid.empty(tiny_spec, Resolution.OUTPUT))


def test_stage1_loss_matches_per_cell_bce(generator):
    spec = VolumeSpec((0, 0, 0), 0.4, (8, 8, 4), (4, 4, 2))
    logits = torch.randn(4, 4, 2, generator=generator, dtype=DTYPE)
    target = _random_grid(spec, Resolution.QUERY, 3, 0.5)
    expected = 0.0
    for index in np.ndindex(4, 4, 2):
        x = float(logits[index])
        y = float(target.bits[index])
        p = 1.0 / (1.0 + np.exp(-x))
        expected -= y * np.log(p) + (1 - y) * np.log(1 - p)
    assert float(stage1_loss(logits, target)) == pytest.approx(expected / 32, rel=1e-12)


def test_stage1_loss_gradient(generator, tiny_spec):
    target = _random_grid(tiny_spec, Resolution.QUERY, 4, 0.5)
    logits = torch.randn(tiny_spec.query_dims, generator=generator, dtype=DTYPE)
    assert grad_check(lambda x: stage1_loss(x, target), [logits]).passed


def test_stage1_loss_rejects_shape_mismatch(tiny_spec):
    with pytest.raises(InvalidInputError):
        stage1_loss(torch.zeros(2, 2, 2, dtype=DTYPE), OccupancyGrid.empty(tiny_spec, Resolution.QUERY))


@pytest.mark.parametrize("text, kind, percent", [
    ("occupancy", "occupancy", 0.0),
    ("Dense", "dense", 0.0),
    ("random:10", "random", 10.0),
    ("random:12.5%", "random", 12.5),
    ("oracle", "oracle", 0.0),
    ("raw", "raw", 0.0),
])
def test_query_mode_parse(text, kind, percent):
    mode = QueryMode.parse(text)
    assert (mode.kind, mode.percent) == (kind, percent)
    assert QueryMode.parse(str(mode)) == mode


@pytest.mark.parametrize("text", ["sparse", "random", "random:0", "random:150", "dense:5"])
def test_query_mode_rejects(text):
    with pytest.raises(InvalidInputError):
        QueryMode.parse(text)


def test_select_query_mask_modes(tiny_spec, net):
    m_in = _random_grid(tiny_spec, Resolution.OUTPUT, 5, 0.1)
    labels = np.zeros(tiny_spec.dims, dtype=np.uint8)
    labels[:2, :2, :2] = 2
    gt = VoxelGrid(tiny_spec, labels)

    dense = select_query_mask(QueryMode.parse("dense"), tiny_spec, m_in)
    assert dense.popcount == tiny_spec.cell_count(Resolution.QUERY)
    raw = select_query_mask(QueryMode.parse("raw"), tiny_spec, m_in)
    assert raw == downsample_occupancy(m_in, tiny_spec)
    oracle = select_query_mask(QueryMode.parse("oracle"), tiny_spec, m_in, gt=gt)
    assert oracle.popcount == 1 and oracle.bits[0, 0, 0]
    occupancy = select_query_mask(QueryMode.parse("occupancy"), tiny_spec, m_in, net=net)
    assert occupancy == predict_occupancy(m_in, net)[1]

    first = select_query_mask(QueryMode.parse("random:25"), tiny_spec, m_in, generator=make_torch_rng(2))
    second = select_query_mask(QueryMode.parse("random:25"), tiny_spec, m_in, generator=make_torch_rng(2))
    assert first == second
    assert first.popcount == 8


def test_select_query_mask_missing_inputs(tiny_spec):
    m_in = OccupancyGrid.empty(tiny_spec, Resolution.OUTPUT)
    for text in ("occupancy", "oracle", "random:5"):
        with pytest.raises(InvalidInputError):
            select_query_mask(QueryMode.parse(text), tiny_spec, m_in)


def test_occupancy_net_learns_a_single_scene(tiny_sample, tiny_spec):
    """A short fit drives the stage-1 loss down on one scene."""
    net = OccupancyNet(tiny_spec, channels=8)
    init_parameters(net, make_torch_rng(0))
    target = downsample_occupancy(tiny_sample.gt.occupancy(), tiny_spec)
    inputs = occupancy_tensor(tiny_sample.m_in)
    optimizer = torch.optim.Adam(net.parameters(), lr=1e-2)
    first = float(stage1_loss(net(inputs), target))
    for _ in range(100):
        optimizer.zero_grad()
        loss = stage1_loss(net(inputs), target)
        loss.backward()
        optimizer.step()
    assert float(loss) < 0.7 * first
