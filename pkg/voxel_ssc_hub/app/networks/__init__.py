"""
Networks of the two-stage pipeline: image features, occupancy correction
and query proposal, deformable attention and sparse-to-dense completion.
"""

from .features import FeatureExtractor, FeatureMap, block_layout, extract_features, frame_tensor
from .occupancy_net import (
    OccupancyNet,
    QueryMode,
    QueryProposal,
    occupancy_tensor,
    predict_occupancy,
    propose_queries,
    select_query_mask,
    stage1_loss,
)
from .queries import VoxelQuerySet
from .attention import (
    CrossAttentionLayer,
    DeformableAttention,
    SelfAttentionLayer,
    deformable_attention,
    sampling_pattern,
)
from .completion import (
    CameraView,
    Stage2Model,
    cross_attend,
    output_head,
    reference_pixels,
    scatter_with_mask_tokens,
    self_attend,
)
from .checkpoint import (
    collect_state,
    decode_tensors,
    encode_tensors,
    load_checkpoint,
    read_checkpoint,
    restore_checkpoint,
    save_checkpoint,
)
from .init import init_parameters, randomize_parameters

__all__ = [
    'FeatureExtractor',
    'FeatureMap',
    'block_layout',
    'extract_features',
    'frame_tensor',
    'OccupancyNet',
    'QueryMode',
    'QueryProposal',
    'occupancy_tensor',
    'predict_occupancy',
    'propose_queries',
    'select_query_mask',
    'stage1_loss',
    'VoxelQuerySet',
    'CrossAttentionLayer',
    'DeformableAttention',
    'SelfAttentionLayer',
    'deformable_attention',
    'sampling_pattern',
    'CameraView',
    'Stage2Model',
    'cross_attend',
    'output_head',
    'reference_pixels',
    'scatter_with_mask_tokens',
    'self_attend',
    'collect_state',
    'decode_tensors',
    'encode_tensors',
    'load_checkpoint',
    'read_checkpoint',
    'restore_checkpoint',
    'save_checkpoint',
    'init_parameters',
    'randomize_parameters',
]
