# Copyright (c) 2026 The seqtrain Authors. All Rights Reserved.
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
"""Python bindings for the seqtrain C++ core."""

from seqtrain._core import (
    ConfigError,
    Error,
    FormatError,
    ShapeError,
    TrainingError,
    WorkerAbort,
    average_params,
    chunk_sequences,
    dataset_sequences,
    deserialize_params,
    evaluate,
    forward,
    load_checkpoint,
    main,
    serialize_params,
    train,
    write_dataset,
)

__all__ = [
    "ConfigError",
    "Error",
    "FormatError",
    "ShapeError",
    "TrainingError",
    "WorkerAbort",
    "average_params",
    "chunk_sequences",
    "dataset_sequences",
    "deserialize_params",
    "evaluate",
    "forward",
    "load_checkpoint",
    "main",
    "serialize_params",
    "train",
    "write_dataset",
]
