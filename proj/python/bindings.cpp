/* Copyright (c) 2026 The seqtrain Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "seqtrain/cli.hpp"
#include "seqtrain/cluster.hpp"
#include "seqtrain/engine.hpp"
#include "seqtrain/error.hpp"

namespace py = pybind11;
using namespace seqtrain;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.dims().begin(), t.dims().end());
  Array out(shape);
  std::memcpy(out.mutable_data(), t.data().data(), t.size() * sizeof(double));
  return out;
}

Tensor from_numpy(const Array& a) {
  Dims dims(a.shape(), a.shape() + a.ndim());
  std::vector<double> data(a.data(), a.data() + a.size());
  return Tensor(std::move(dims), std::move(data));
}

py::dict params_to_dict(const ParamSet& p) {
  py::dict d;
  for (const auto& [name, t] : p) d[py::str(name)] = to_numpy(t);
  return d;
}

ParamSet params_from_dict(const py::dict& d) {
  ParamSet p;
  for (const auto& [k, v] : d) p.add(py::cast<std::string>(k), from_numpy(py::cast<Array>(v)));
  return p;
}

py::dict report_to_dict(const EpochReport& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["lr"] = r.lr;
  d["train_ce"] = r.train_ce();
  d["train_fer"] = r.train_fer();
  d["dev_ce"] = r.has_dev ? py::cast(r.dev_loss) : py::none();
  d["dev_fer"] = r.has_dev ? py::cast(r.dev_fer) : py::none();
  d["batches"] = r.batches;
  d["seconds"] = r.wall_seconds;
  return d;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig load_config(const std::string& text, const std::vector<std::string>& overrides) {
  const bool inline_json = text.find('{') != std::string::npos;
  return parse_config(inline_json ? text : read_text(text), overrides);
}

py::list train(const std::string& config, const std::vector<std::string>& overrides, const std::string& verbosity) {
  const auto cfg = load_config(config, overrides);
  std::vector<EpochReport> reps;
  {
    py::gil_scoped_release release;
    Session s = open_session(cfg);
    Logger log(parse_verbosity(verbosity), cfg.log_file);
    if (cfg.num_workers > 1) {
      AsyncTrainer trainer(s.net, s.train, cfg, s.state.optimizer);
      reps = run_training(s, cluster_runner(trainer), log);
    } else {
      reps = run_training(s, sequential_runner(s), log);
    }
  }
  py::list out;
  for (const auto& r : reps) out.append(report_to_dict(r));
  return out;
}

std::pair<Network, Checkpoint> restore(const std::string& checkpoint) {
  auto ckpt = load_checkpoint(checkpoint);
  auto [net, unused] = build_network(parse_network(ckpt.network_json), ckpt.input_dim, 0);
  net.check_params(ckpt.params);
  return {std::move(net), std::move(ckpt)};
}

py::dict evaluate_checkpoint(const std::string& checkpoint, const std::string& dataset, std::size_t batch_size) {
  EvalResult r;
  {
    py::gil_scoped_release release;
    const auto [net, ckpt] = restore(checkpoint);
    const auto data = open_dataset(dataset, std::size_t{256} << 20);
    net.check_dataset(data->info());
    r = evaluate(net, ckpt.params, *data, batch_size);
  }
  py::dict d;
  d["ce"] = r.loss_per_frame();
  d["fer"] = r.fer();
  d["frames"] = r.frames;
  d["errors"] = r.errors;
  d["loss_sum"] = r.loss_sum;
  return d;
}

py::dict forward(const std::string& checkpoint, const std::string& dataset, const std::vector<std::string>& layers) {
  const auto [net, ckpt] = restore(checkpoint);
  const auto data = open_dataset(dataset, std::size_t{256} << 20);
  for (const auto& name : layers) {
    if (!net.graph().contains(name)) throw ConfigError("unknown layer '" + name + "'");
  }
  py::dict out;
  for (const auto& name : layers) out[py::str(name)] = py::list();
  for (std::size_t i = 0; i < data->size(); ++i) {
    const std::vector<std::size_t> one = {i};
    const auto acts = net.activations(ckpt.params, sequence_batch(*data, one).inputs, layers);
    for (const auto& name : layers) {
      const auto& y = acts.at(name).values;
      out[py::str(name)].cast<py::list>().append(to_numpy(y.reshaped({y.dim(0), y.dim(2)})));
    }
  }
  return out;
}

py::list dataset_sequences(const std::string& descriptor) {
  const auto data = open_dataset(descriptor, 0);
  py::list out;
  for (std::size_t i = 0; i < data->size(); ++i) {
    const auto s = data->get(i);
    py::array_t<std::int32_t> labels(static_cast<py::ssize_t>(s->labels.size()));
    std::copy(s->labels.begin(), s->labels.end(), labels.mutable_data());
    out.append(py::make_tuple(to_numpy(s->inputs), labels));
  }
  return out;
}

void write_sparse_dataset(const std::string& path, const py::list& sequences, std::size_t num_classes) {
  std::vector<Sequence> seqs;
  std::size_t input_dim = 0;
  for (const auto& item : sequences) {
    const auto pair = item.cast<py::tuple>();
    Sequence s;
    s.id = seqs.size();
    s.inputs = from_numpy(pair[0].cast<Array>());
    if (s.inputs.rank() != 2) throw ShapeError("inputs must be 2-D [L, D]");
    for (auto l : pair[1].cast<std::vector<std::int32_t>>()) s.labels.push_back(l);
    input_dim = s.inputs.dim(1);
    seqs.push_back(std::move(s));
  }
  write_dataset(path, DatasetInfo{TargetKind::sparse, input_dim, num_classes}, seqs);
}

py::dict checkpoint_dict(const std::string& path) {
  const auto c = load_checkpoint(path);
  py::dict d;
  d["params"] = params_to_dict(c.params);
  d["epoch"] = c.state.epoch;
  d["lr"] = c.state.optimizer.learning_rate;
  d["best_dev_score"] = c.state.best_dev_score;
  d["network"] = c.network_json;
  d["input_dim"] = c.input_dim;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sequence model training core";

  // Registered base first: later translators take precedence.
  auto& error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<FormatError>(m, "FormatError", error.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", error.ptr());
  py::register_exception<WorkerAbort>(m, "WorkerAbort", error.ptr());

  m.def("train", &train, py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
        py::arg("verbosity") = "quiet",
        "Train from a config file path or JSON text; returns one dict per epoch.");
  m.def("evaluate", &evaluate_checkpoint, py::arg("checkpoint"), py::arg("dataset"), py::arg("batch_size") = 16,
        "Cross-entropy per frame and frame error rate of a checkpoint on a dataset.");
  m.def("forward", &forward, py::arg("checkpoint"), py::arg("dataset"), py::arg("layers"),
        "Per-sequence [L, D] activations of the named layers.");
  m.def("dataset_sequences", &dataset_sequences, py::arg("descriptor"),
        "(inputs, labels) pairs of a sparse dataset file or synth descriptor.");
  m.def("write_dataset", &write_sparse_dataset, py::arg("path"), py::arg("sequences"), py::arg("num_classes"),
        "Write (inputs, labels) pairs as an RTND file.");
  m.def(
      "chunk_sequences",
      [](const std::vector<std::size_t>& lengths, std::size_t chunk_size, std::size_t chunk_step) {
        std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> out;
        for (const auto& c : chunk_sequences(lengths, chunk_size, chunk_step))
          out.emplace_back(c.seq, c.start, c.valid_len);
        return out;
      },
      py::arg("lengths"), py::arg("chunk_size"), py::arg("chunk_step"), "(seq, start, valid_len) triples.");
  m.def(
      "serialize_params", [](const py::dict& p) {
        const auto bytes = serialize_params(params_from_dict(p));
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      },
      py::arg("params"));
  m.def(
      "deserialize_params",
      [](const py::bytes& b) {
        const std::string s = b;
        return params_to_dict(deserialize_params(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())));
      },
      py::arg("data"));
  m.def(
      "average_params",
      [](const std::vector<py::dict>& sets) {
        std::vector<ParamSet> ps;
        for (const auto& d : sets) ps.push_back(params_from_dict(d));
        return params_to_dict(average_params(ps));
      },
      py::arg("sets"));
  m.def("load_checkpoint", &checkpoint_dict, py::arg("path"));
  m.def(
      "main",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "seqtrain");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);
        py::gil_scoped_release release;
        return run_cli(static_cast<int>(args.size()), argv.data());
      },
      py::arg("args"), "Run the command-line tool; returns its exit code.");
}
