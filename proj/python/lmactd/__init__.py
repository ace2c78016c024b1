# Copyright 2026 The lmactd Authors.
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

"""Time-domain post-hoc explanations for audio classifiers."""

import torch  # noqa: F401  (loads libtorch before the extension)

from lmactd._lmactd import (  # noqa: F401
    Error,
    InvalidArgument,
    Pipeline,
    average_decrease,
    average_gain,
    average_increase,
    complexity,
    faithfulness,
    input_fidelity,
    masking_loss,
    mix_at_snr,
    mos_summary,
    run_cli,
    sparseness,
    synthetic_corpus,
)
