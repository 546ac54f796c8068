# SPDX-License-Identifier: Apache-2.0
"""Entity-aware group-relative reward shaping for search agents."""

from ._core import (
    PROTOCOL_VERSION,
    SERVICE_VERSION,
    EgrpoError,
    handle_request,
    match_entities,
    parse_thoughts,
    score_group,
    train,
)

__all__ = [
    "PROTOCOL_VERSION",
    "SERVICE_VERSION",
    "EgrpoError",
    "handle_request",
    "match_entities",
    "parse_thoughts",
    "score_group",
    "train",
]
