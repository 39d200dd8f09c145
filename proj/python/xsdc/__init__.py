# Copyright 2026 The XSDC Authors
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

"""Semi-supervised clustering with a trainable Nystrom feature map."""

import json

from ._xsdc import *  # noqa: F401,F403
from ._xsdc import default_config, train as _train


def config(**overrides):
    """Default training configuration as a dict, with top-level overrides."""
    cfg = json.loads(default_config())
    for key, value in overrides.items():
        if key not in cfg:
            raise KeyError(key)
        cfg[key] = value
    return cfg


def train(dataset, cfg=None):
    """Train on `dataset`; `cfg` is a dict or JSON string."""
    if cfg is None:
        cfg = config()
    if not isinstance(cfg, str):
        cfg = json.dumps(cfg)
    return _train(dataset, cfg)
