"""
Gradient suite: finite-difference checks of every differentiable operation
on randomized small shapes.

Each case builder takes a generator and returns ``(function, inputs)`` for
``grad_check``. Network parameters are randomized, zero-initialized heads
included, so that sample positions land away from lattice nodes where
bilinear interpolation has kinks.
"""

import zlib
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import torch

from app.geometry.camera import Camera, CameraIntrinsics, CameraPose
from app.geometry.volume import Resolution, VolumeSpec
from app.losses.losses import ClassWeights, affinity_loss, semantic_loss
from app.networks.attention import CrossAttentionLayer, DeformableAttention, SelfAttentionLayer
from app.networks.completion import CameraView, cross_attend, output_head, self_attend
from app.networks.features import FeatureExtractor, FeatureMap
from app.networks.init import randomize_parameters
from app.networks.occupancy_net import QueryProposal, stage1_loss
from app.numerics.gradcheck import GradCheckReport, grad_check
from app.numerics.ops import DTYPE, bilinear_sample, softmax_normalize
from app.numerics.rng import derive_seed, make_torch_rng
from app.utils.logging_setup import get_logger
from app.voxel.grid import OccupancyGrid, VoxelGrid

logger = get_logger("gradcheck")

Case = Tuple[Callable[..., torch.Tensor], List[torch.Tensor]]

# small lattice shared by the voxel cases
TINY_SPEC = VolumeSpec((0.0, -0.8, 0.0), 0.4, (4, 4, 2), (2, 2, 1))
FLAT_SPEC = VolumeSpec((0.0, -0.4, 0.0), 0.4, (2, 2, 1), (2, 2, 1))


def _rand(generator: torch.Generator, *shape, scale: float = 1.0) -> torch.Tensor:
    return torch.randn(*shape, generator=generator, dtype=DTYPE) * scale


def _labels(generator: torch.Generator, shape, classes: int) -> torch.Tensor:
    return torch.randint(0, classes, shape, generator=generator)


def case_bilinear_sample(g: torch.Generator) -> Case:
    fmap = _rand(g, 5, 5, 3)
    points = torch.rand(6, 2, generator=g, dtype=DTYPE) * 3.6 + 0.2
    weights = _rand(g, 3)
    return (lambda m, p: (bilinear_sample(m, p) * weights).sum()), [fmap, points]


def case_softmax(g: torch.Generator) -> Case:
    weights = _rand(g, 5)
    return (lambda x: (softmax_normalize(x) * weights).sum()), [_rand(g, 5)]


def case_deformable_attention(g: torch.Generator) -> Case:
    layer = DeformableAttention(4, points=4, heads=2, radius=1.0)
    randomize_parameters(layer, g, std=0.3)
    queries = _rand(g, 3, 4)
    refs = torch.rand(3, 2, generator=g, dtype=DTYPE) * 3.0 + 1.0
    fmap = _rand(g, 6, 6, 4)
    weights = _rand(g, 4)

    def function(q, m, *params):
        return (layer(q, refs, m)[0] * weights).sum()
    return function, [queries, fmap, *layer.parameters()]


def _tiny_views(g: torch.Generator, d: int) -> List[CameraView]:
    intr = CameraIntrinsics(8.0, 8.0, 8.0, 6.0, 16, 12)
    views = []
    for x in (0.0, -0.3):
        camera = Camera(intr, CameraPose.looking_forward((x, 0.05, 0.9)))
        views.append(CameraView(camera, FeatureMap(_rand(g, 6, 8, d), 0.5)))
    return views


def case_cross_attend(g: torch.Generator) -> Case:
    d = 4
    layers = [CrossAttentionLayer(d, points=3, heads=1, radius=0.7)]
    for layer in layers:
        randomize_parameters(layer, g, std=0.3)
    mask = torch.rand(TINY_SPEC.query_dims, generator=g) < 0.7
    mask[0, 0, 0] = True
    proposal = QueryProposal.from_mask(OccupancyGrid(TINY_SPEC, Resolution.QUERY, mask.numpy()))
    views = _tiny_views(g, d)
    q_p = _rand(g, proposal.count, d)
    weights = _rand(g, d)

    def function(q, m0, m1, *params):
        live = [CameraView(views[0].camera, FeatureMap(m0, 0.5)),
                CameraView(views[1].camera, FeatureMap(m1, 0.5))]
        return (cross_attend(q, proposal, live, TINY_SPEC, layers) * weights).sum()
    params = [p for layer in layers for p in layer.parameters()]
    return function, [q_p, views[0].features.tensor, views[1].features.tensor, *params]


def case_self_attend(g: torch.Generator) -> Case:
    spec = VolumeSpec((0.0, -1.6, 0.0), 0.4, (8, 8, 4), (4, 4, 2))
    layers = [SelfAttentionLayer(4, points=3, heads=1, radius=0.7)]
    randomize_parameters(layers[0], g, std=0.3)
    weights = _rand(g, 4)

    def function(f, *params):
        return (self_attend(f, spec, layers) * weights).sum()
    return function, [_rand(g, 4, 4, 2, 4), *layers[0].parameters()]


def case_output_head(g: torch.Generator) -> Case:
    head = torch.nn.Linear(3, 4, dtype=DTYPE)
    randomize_parameters(head, g)
    weights = _rand(g, *TINY_SPEC.dims, 4)

    def function(f, *params):
        return (output_head(f, TINY_SPEC, head) * weights).sum()
    return function, [_rand(g, 2, 2, 1, 3), *head.parameters()]


def case_semantic_loss(g: torch.Generator) -> Case:
    gt = VoxelGrid(FLAT_SPEC, _labels(g, FLAT_SPEC.dims, 3).numpy())
    weights = ClassWeights(torch.rand(3, generator=g, dtype=DTYPE).numpy() + 0.5)
    return (lambda logits: semantic_loss(logits, gt, weights)), [_rand(g, 2, 2, 1, 3)]


def case_affinity_loss(g: torch.Generator) -> Case:
    labels = _labels(g, FLAT_SPEC.dims, 3).numpy()
    labels.reshape(-1)[:2] = [0, 1]
    gt = VoxelGrid(FLAT_SPEC, labels)
    return (lambda logits: affinity_loss(logits, gt)), [_rand(g, 2, 2, 1, 3)]


def case_stage1_loss(g: torch.Generator) -> Case:
    spec = VolumeSpec((0.0, -1.6, 0.0), 0.4, (8, 8, 4), (4, 4, 2))
    target = OccupancyGrid(spec, Resolution.QUERY, (torch.rand(4, 4, 2, generator=g) < 0.5).numpy())
    return (lambda logits: stage1_loss(logits, target)), [_rand(g, 4, 4, 2)]


def case_extract_features(g: torch.Generator) -> Case:
    extractor = FeatureExtractor(4, scale=0.5)
    randomize_parameters(extractor, g, std=0.3)
    image = torch.rand(1, 3, 8, 8, generator=g, dtype=DTYPE)
    points = torch.rand(5, 2, generator=g, dtype=DTYPE) * 2.6 + 0.2
    weights = _rand(g, 4)

    def function(img, *params):
        return (bilinear_sample(extractor(img)[0], points) * weights).sum()
    return function, [image, *extractor.parameters()]


GRADIENT_SUITE: Dict[str, Callable[[torch.Generator], Case]] = {
    "bilinear_sample": case_bilinear_sample,
    "softmax_normalize": case_softmax,
    "deformable_attention": case_deformable_attention,
    "cross_attend": case_cross_attend,
    "self_attend": case_self_attend,
    "output_head": case_output_head,
    "semantic_loss": case_semantic_loss,
    "affinity_loss": case_affinity_loss,
    "stage1_loss": case_stage1_loss,
    "extract_features": case_extract_features,
}


def run_case(name: str, seed: int, max_coords: Optional[int] = 24,
             tolerance: float = 1e-4) -> GradCheckReport:
    generator = make_torch_rng(derive_seed(seed, zlib.crc32(name.encode())))
    function, inputs = GRADIENT_SUITE[name](generator)
    return grad_check(function, inputs, h=1e-5, tolerance=tolerance,
                      max_coords=max_coords, generator=generator)


def run_suite(seeds: int = 10, names: Optional[Sequence[str]] = None,
              max_coords: Optional[int] = 24) -> List[Tuple[str, int, GradCheckReport]]:
    """Run the selected checks for seeds ``0 .. seeds - 1``."""
    results = []
    for name in names or list(GRADIENT_SUITE):
        for seed in range(seeds):
            report = run_case(name, seed, max_coords)
            logger.info(f"{name} seed {seed}: {report.summary()}")
            results.append((name, seed, report))
    return results
