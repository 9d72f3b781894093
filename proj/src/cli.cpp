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

#include "seqtrain/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seqtrain/cluster.hpp"
#include "seqtrain/engine.hpp"
#include "seqtrain/error.hpp"
#include "seqtrain/log.hpp"
#include "seqtrain/net_config.hpp"

namespace seqtrain {

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int train(const ExperimentConfig& cfg, Logger& log) {
  Session s = open_session(cfg);
  log.debug("network has " + std::to_string(s.params.num_elements()) + " parameters");
  if (cfg.num_workers > 1) {
    AsyncTrainer trainer(s.net, s.train, cfg, s.state.optimizer);
    run_training(s, cluster_runner(trainer), log);
  } else {
    run_training(s, sequential_runner(s), log);
  }
  return 0;
}

int eval(const ExperimentConfig& cfg, Logger& log) {
  Session s = open_session(cfg);
  const auto r = evaluate(s.net, s.params, *s.eval, cfg.max_chunks_per_batch);
  std::ostringstream line;
  line.precision(6);
  line << std::fixed << "eval_ce " << r.loss_per_frame() << " eval_fer " << r.fer() << " frames " << r.frames;
  log.info(line.str());
  return 0;
}

int forward(const ExperimentConfig& cfg, Logger& log) {
  Session s = open_session(cfg);
  const auto paths = forward_dump(s.net, s.params, *s.eval, cfg.forward_layers, cfg.output, cfg.max_chunks_per_batch);
  for (const auto& p : paths) log.info("wrote " + p);
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Sequence model training tool"};
  app.name("seqtrain");
  std::string config_path;
  std::string task;
  std::vector<std::string> sets;
  std::string verbosity;
  std::string out_dir;
  app.add_option("config", config_path, "JSON configuration file")->required();
  app.add_option("--task", task, "train, eval or forward (overrides the config)");
  app.add_option("--set", sets, "override a config key, key=value (repeatable)");
  app.add_option("--verbosity", verbosity, "info or debug");
  app.add_option("--out-dir", out_dir, "directory for checkpoints and the log");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    std::vector<std::string> overrides = sets;
    if (!task.empty()) overrides.push_back("task=" + task);
    if (!verbosity.empty()) overrides.push_back("verbosity=" + verbosity);
    if (!out_dir.empty()) overrides.push_back("out_dir=" + out_dir);
    const ExperimentConfig cfg = parse_config(read_text(config_path), overrides);

    std::string log_path = cfg.log_file;
    if (log_path.empty() && !cfg.out_dir.empty()) {
      std::filesystem::create_directories(cfg.out_dir);
      log_path = (std::filesystem::path(cfg.out_dir) / "seqtrain.log").string();
    }
    Logger log(parse_verbosity(cfg.verbosity), log_path);
    log.debug("task " + task_name(cfg.task) + " seed " + std::to_string(cfg.seed));
    switch (cfg.task) {
      case Task::train: return train(cfg, log);
      case Task::eval: return eval(cfg, log);
      case Task::forward: return forward(cfg, log);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "seqtrain: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "seqtrain: error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace seqtrain
