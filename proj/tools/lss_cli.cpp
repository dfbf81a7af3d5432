/**
 * Copyright (c) 2026 The lss-index Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "lss/lss.hpp"

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "key = value config file");
  cmd->add_option("-s,--set", c.overrides, "override a config key (key=value), repeatable");
  cmd->add_option("-o,--out", c.out, "output directory");
  cmd->add_option("-t,--threads", c.threads, "worker threads (default: LSS_THREADS or all cores)");
  cmd->add_option("--seed", c.seed, "master seed");
}

lss::ExperimentConfig resolve(const Common& c, const std::vector<std::string>& extra) {
  auto settings = c.config_path.empty() ? lss::Settings{} : lss::Settings::load(c.config_path);
  for (const auto& o : c.overrides) settings.assign(o);
  for (const auto& o : extra) settings.assign(o);
  if (!c.out.empty()) settings.set("out", c.out);
  if (c.threads) settings.set("threads", std::to_string(*c.threads));
  if (c.seed) settings.set("seed", std::to_string(*c.seed));
  return lss::ExperimentConfig::from(settings);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-sensitive hashing for wide output layers"};
  app.require_subcommand(1);
  Common common;
  std::string modes, bits, tables;

  auto* gen = app.add_subcommand("gen-data", "write the train/test splits of the configured data");
  auto* train_model = app.add_subcommand("train-model", "train the base model");
  auto* build_index = app.add_subcommand("build-index", "build a randomly initialised index");
  auto* train_index = app.add_subcommand("train-index", "learn the hash functions from retrieval feedback");
  auto* infer = app.add_subcommand("infer", "evaluate inference modes on the test split");
  auto* sweep = app.add_subcommand("sweep-kl", "train and evaluate an index per (K, L)");
  for (auto* cmd : {gen, train_model, build_index, train_index, infer, sweep}) add_common(cmd, common);
  infer->add_option("--modes", modes, "comma list of full, lss, random-hash");
  sweep->add_option("--bits", bits, "comma list of K values");
  sweep->add_option("--tables", tables, "comma list of L values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    std::vector<std::string> extra;
    if (!modes.empty()) extra.push_back("eval.modes=" + modes);
    if (!bits.empty()) extra.push_back("sweep.bits=" + bits);
    if (!tables.empty()) extra.push_back("sweep.tables=" + tables);
    const auto cfg = resolve(common, extra);
    auto& log = std::cout;
    if (gen->parsed()) lss::cmd_gen_data(cfg, log);
    if (train_model->parsed()) lss::cmd_train_model(cfg, log);
    if (build_index->parsed()) lss::cmd_build_index(cfg, log);
    if (train_index->parsed()) lss::cmd_train_index(cfg, log);
    if (infer->parsed()) lss::cmd_infer(cfg, log);
    if (sweep->parsed()) lss::cmd_sweep_kl(cfg, log);
  } catch (const lss::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
