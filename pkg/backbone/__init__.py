"""
backbone
~~~~~~~~

Reparameterizable RepViT mixers, the multi-scale context / context
fusion add-on, C2f blocks and the pyramid feature extractor.
"""

from .c2f import (BaseAbstractC2f, BlockConfig, Bottleneck, C2f,
                  C2fRepViTCAMF, OddChannelError, RepViTCAMFUnit,
                  c2f_repvitcamf_forward)
from .camf import (MSC_KERNELS, ContextFusion, MultiScaleContext,
                   context_fusion, multiscale_context)
from .cost import CostReport, count_params, measure_throughput, profile_cost
from .network import (Backbone, BackboneInputError, backbone_forward,
                      scale_depth, scale_width)
from .repvit import (AlreadyFusedError, MixerMode, RepVitBlock,
                     RepVitBranchSet, fold_batchnorm, fuse_model,
                     fuse_reparam, is_fused, repvit_forward)

__all__ = [
    "AlreadyFusedError",
    "Backbone",
    "BackboneInputError",
    "BaseAbstractC2f",
    "BlockConfig",
    "Bottleneck",
    "C2f",
    "C2fRepViTCAMF",
    "ContextFusion",
    "CostReport",
    "MSC_KERNELS",
    "MixerMode",
    "MultiScaleContext",
    "OddChannelError",
    "RepViTCAMFUnit",
    "RepVitBlock",
    "RepVitBranchSet",
    "backbone_forward",
    "c2f_repvitcamf_forward",
    "context_fusion",
    "count_params",
    "fold_batchnorm",
    "fuse_model",
    "fuse_reparam",
    "is_fused",
    "measure_throughput",
    "multiscale_context",
    "profile_cost",
    "repvit_forward",
    "scale_depth",
    "scale_width",
]
