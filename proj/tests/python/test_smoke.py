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
import json

import numpy as np
import pytest

import seqtrain

TRAIN = "synth:delayed_echo,k=1,classes=4,n=12,min_len=5,max_len=20,seed=3"
DEV = "synth:delayed_echo,k=1,classes=4,n=4,min_len=5,max_len=20,seed=4"
NETWORK = {
    "fw": {"class": "lstm", "n_out": 6, "direction": 1},
    "bw": {"class": "lstm", "n_out": 6, "direction": -1},
    "out": {"class": "softmax", "loss": "ce", "n_out": 4, "from": ["fw", "bw"]},
}


def config(out_dir, **extra):
    cfg = {
        "task": "train",
        "train": TRAIN,
        "dev": DEV,
        "network": NETWORK,
        "chunk_size": 8,
        "max_chunks_per_batch": 4,
        "num_epochs": 2,
        "learning_rate": 0.01,
        "out_dir": str(out_dir),
    }
    cfg.update(extra)
    return json.dumps(cfg)


def test_train_evaluate_forward(tmp_path):
    reports = seqtrain.train(config(tmp_path))
    assert [r["epoch"] for r in reports] == [1, 2]
    assert all(0.0 <= r["dev_fer"] <= 1.0 for r in reports)

    ckpt = str(tmp_path / "best.rtnm")
    result = seqtrain.evaluate(ckpt, DEV, batch_size=3)
    assert result["frames"] > 0
    assert result["fer"] == pytest.approx(result["errors"] / result["frames"])

    acts = seqtrain.forward(ckpt, DEV, ["out", "fw"])
    lengths = [x.shape[0] for x, _ in seqtrain.dataset_sequences(DEV)]
    assert [a.shape for a in acts["out"]] == [(n, 4) for n in lengths]
    assert [a.shape for a in acts["fw"]] == [(n, 6) for n in lengths]
    for a in acts["out"]:
        np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-12)


def test_training_is_deterministic(tmp_path):
    a = seqtrain.train(config(tmp_path / "a"))
    b = seqtrain.train(config(tmp_path / "b"))
    assert [r["train_ce"] for r in a] == [r["train_ce"] for r in b]
    pa = seqtrain.load_checkpoint(str(tmp_path / "a" / "epoch2.rtnm"))["params"]
    pb = seqtrain.load_checkpoint(str(tmp_path / "b" / "epoch2.rtnm"))["params"]
    assert pa.keys() == pb.keys()
    for name in pa:
        np.testing.assert_array_equal(pa[name], pb[name])


def test_params_round_trip_and_average():
    rng = np.random.default_rng(0)
    params = {"a/W": rng.standard_normal((3, 2)), "a/b": rng.standard_normal(2)}
    back = seqtrain.deserialize_params(seqtrain.serialize_params(params))
    for name in params:
        np.testing.assert_array_equal(back[name], params[name])
    delta = {k: rng.standard_normal(v.shape) for k, v in params.items()}
    plus = {k: params[k] + delta[k] for k in params}
    minus = {k: params[k] - delta[k] for k in params}
    avg = seqtrain.average_params([plus, minus])
    for name in params:
        np.testing.assert_allclose(avg[name], params[name], atol=1e-15)
    with pytest.raises(seqtrain.FormatError):
        seqtrain.deserialize_params(seqtrain.serialize_params(params)[:-1])


def test_chunking():
    assert [c[2] for c in seqtrain.chunk_sequences([738], 250, 250)] == [250, 250, 238]
    assert [c[1] for c in seqtrain.chunk_sequences([300], 250, 125)] == [0, 125, 250]


def test_dataset_file_round_trip(tmp_path):
    seqs = seqtrain.dataset_sequences("synth:delayed_echo,k=2,classes=5,n=6,min_len=3,max_len=9,seed=7")
    path = str(tmp_path / "d.rtnd")
    seqtrain.write_dataset(path, seqs, 5)
    back = seqtrain.dataset_sequences(path)
    assert len(back) == len(seqs)
    for (x0, y0), (x1, y1) in zip(seqs, back):
        np.testing.assert_array_equal(x0, x1)
        np.testing.assert_array_equal(y0, y1)


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(seqtrain.ConfigError, match="bogus"):
        seqtrain.train(config(tmp_path), ["bogus=1"])
    assert issubclass(seqtrain.ConfigError, seqtrain.Error)
    assert issubclass(seqtrain.Error, RuntimeError)
    with pytest.raises(seqtrain.Error):
        seqtrain.load_checkpoint(str(tmp_path / "missing.rtnm"))


def test_cli_entry_point(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(config(tmp_path / "o", num_epochs=1))
    assert seqtrain.main([str(cfg)]) == 0
    assert (tmp_path / "o" / "epoch1.rtnm").exists()
    assert seqtrain.main([str(cfg), "--set", "nope=1"]) == 2
