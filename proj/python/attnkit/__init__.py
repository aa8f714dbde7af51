# SPDX-License-Identifier: Apache-2.0
"""Attention-pattern metrics, distillation losses, and curation primitives.

Thin wrapper over the C++ core; all heavy lifting happens in `_core`.
"""

from ._core import (  # noqa: F401
    CodecError,
    NumericError,
    attention_distance,
    attention_entropy,
    attention_kl_loss,
    classify_pattern,
    cross_similarity,
    feature_cosine_loss,
    greedy_dedup,
    linear_cka,
    nmi_head,
    nmi_layer,
    select_target_layer,
    to_grayscale,
)

__all__ = [
    "CodecError",
    "NumericError",
    "attention_distance",
    "attention_entropy",
    "attention_kl_loss",
    "classify_pattern",
    "cross_similarity",
    "feature_cosine_loss",
    "greedy_dedup",
    "linear_cka",
    "nmi_head",
    "nmi_layer",
    "select_target_layer",
    "to_grayscale",
]
