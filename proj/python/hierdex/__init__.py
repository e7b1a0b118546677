# Copyright 2026 The HierDex Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Python access to the hierdex core: metrics, fusion, configs and data."""

import json

from ._core import (
    CompletionThresholds,
    DemoSet,
    EmaFilter,
    FusionConfig,
    ObjectState,
    RewardWeights,
    Rot,
    RotationRule,
    check_reset,
    completion_rate,
    fuse_poses,
    load_dataset,
    quat_angle,
    resample_interp,
    resample_skip,
    reward,
    rot_frobenius_error,
    save_dataset,
    slerp,
)
from . import _core

__all__ = [
    "CompletionThresholds", "DemoSet", "EmaFilter", "FusionConfig",
    "ObjectState", "RewardWeights", "Rot", "RotationRule", "check_reset",
    "completion_rate", "config_hash", "default_config", "fuse_poses",
    "gen_dataset", "load_dataset", "normalize_config", "quat_angle",
    "resample_interp", "resample_skip", "reward", "rot_frobenius_error",
    "save_dataset", "slerp",
]


def default_config():
    """Full run config with every default filled in."""
    return json.loads(_core._default_config())


def normalize_config(config):
    """Validates a partial config and returns it with defaults filled in.

    Raises ValueError on unknown keys or out-of-range values.
    """
    return json.loads(_core._normalize_config(json.dumps(config)))


def config_hash(config):
    """Digest stamped on every artifact produced under this config."""
    return _core._config_hash(json.dumps(config))


def gen_dataset(config=None, seed=0):
    return _core._gen_dataset(json.dumps(config or {}), seed)
