// Copyright 2026 The pcseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pcseg/commands.hpp"
#include "pcseg/kernels.hpp"

// Exit codes: 0 success, 1 validation failure, 2 missing input, 3 runtime
// error. Logs are line-delimited JSON on stderr; results go to stdout or
// --out.

namespace {

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text << "\n";
  } else {
    std::filesystem::path p(out_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p);
    out << text << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pcseg: two-stage class-agnostic 3D point cloud segmentation"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "pipeline config JSON")
      ->required()
      ->check(CLI::ExistingFile);

  std::string checkpoint;
  std::string split = "eval";
  std::string tag;
  std::string in_tag;
  std::string out_tag;
  std::string out_path;
  std::vector<std::size_t> query_counts = {100, 150, 200, 250, 300, 350, 400};

  CLI::App* cmd_synth = app.add_subcommand("synth", "generate synthetic scenes");
  CLI::App* cmd_lift = app.add_subcommand("lift", "lift 2D masks onto partial clouds");
  CLI::App* cmd_pretrain = app.add_subcommand("pretrain", "stage-1 training on lifted frames");
  CLI::App* cmd_pseudo =
      app.add_subcommand("pseudo-label", "select confident masks on full clouds");
  CLI::App* cmd_finetune =
      app.add_subcommand("finetune", "stage-2 training on pseudo labels");

  CLI::App* cmd_infer = app.add_subcommand("infer", "predict masks for a scene split");
  cmd_infer->add_option("--checkpoint", checkpoint, "parameter checkpoint")->required();
  cmd_infer->add_option("--split", split, "scene split (train|eval)");
  cmd_infer->add_option("--tag", tag, "prediction tag")->required();

  CLI::App* cmd_merge = app.add_subcommand("merge-sam3d", "bottom-up merging baseline");
  cmd_merge->add_option("--split", split, "scene split (train|eval)");
  cmd_merge->add_option("--tag", tag, "prediction tag (default sam3d)");

  CLI::App* cmd_post =
      app.add_subcommand("postprocess", "smooth + split an existing prediction set");
  cmd_post->add_option("--split", split, "scene split (train|eval)");
  cmd_post->add_option("--in-tag", in_tag, "input prediction tag")->required();
  cmd_post->add_option("--out-tag", out_tag, "output tag (default <in>_post)");

  CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate predictions against GT");
  cmd_eval->add_option("--split", split, "scene split (train|eval)");
  cmd_eval->add_option("--tag", tag, "prediction tag")->required();
  cmd_eval->add_option("--out", out_path, "report path (default stdout)");

  CLI::App* cmd_sweep = app.add_subcommand("sweep-queries", "AP vs query count table");
  cmd_sweep->add_option("--checkpoint", checkpoint, "parameter checkpoint")->required();
  cmd_sweep->add_option("--split", split, "scene split (train|eval)");
  cmd_sweep->add_option("--queries", query_counts, "query counts to sweep");
  cmd_sweep->add_option("--out", out_path, "output table path");

  CLI::App* cmd_pipeline =
      app.add_subcommand("pipeline", "synth -> lift -> pretrain -> pseudo-label -> "
                                     "finetune -> baseline -> three-row report");
  cmd_pipeline->add_option("--out", out_path, "also print the report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  pcseg::cmd::Logger log(&std::cerr);
  try {
    const pcseg::cfg::PipelineConfig config = pcseg::cfg::load_config(config_path);
    if (!pcseg::kernels::set_backend(config.kernel_backend))
      throw pcseg::ValidationError("kernel backend '" + config.kernel_backend +
                                   "' is not supported on this host");
    log.info("start", nlohmann::json{{"config_hash", pcseg::cfg::config_hash(config)},
                                     {"kernel_backend", pcseg::kernels::backend_name()}}
                          .dump());

    if (cmd_synth->parsed()) {
      pcseg::cmd::synth(config, log);
    } else if (cmd_lift->parsed()) {
      pcseg::cmd::lift(config, log);
    } else if (cmd_pretrain->parsed()) {
      pcseg::cmd::pretrain(config, log);
    } else if (cmd_pseudo->parsed()) {
      pcseg::cmd::pseudo_label(config, log);
    } else if (cmd_finetune->parsed()) {
      pcseg::cmd::finetune(config, log);
    } else if (cmd_infer->parsed()) {
      pcseg::cmd::infer(config, log, checkpoint, split, tag);
    } else if (cmd_merge->parsed()) {
      pcseg::cmd::merge_sam3d(config, log, split, tag.empty() ? "sam3d" : tag);
    } else if (cmd_post->parsed()) {
      pcseg::cmd::postprocess_predictions(config, log, split, in_tag,
                                          out_tag.empty() ? in_tag + "_post" : out_tag);
    } else if (cmd_eval->parsed()) {
      const pcseg::eval::EvalReport report =
          pcseg::cmd::evaluate_predictions(config, log, split, tag);
      emit(pcseg::eval::report_json(report), out_path);
    } else if (cmd_sweep->parsed()) {
      const std::filesystem::path table =
          out_path.empty() ? config.output_root / "query_sweep.json"
                           : std::filesystem::path(out_path);
      pcseg::cmd::sweep_queries(config, log, checkpoint, split, query_counts, table);
    } else if (cmd_pipeline->parsed()) {
      const std::string report = pcseg::cmd::pipeline(config, log);
      emit(report, out_path);
    }
    return 0;
  } catch (const pcseg::ValidationError& e) {
    log.info("error", nlohmann::json{{"kind", "validation"}, {"what", e.what()}}.dump());
    return 1;
  } catch (const pcseg::MissingInputError& e) {
    log.info("error", nlohmann::json{{"kind", "missing_input"}, {"what", e.what()}}.dump());
    return 2;
  } catch (const std::exception& e) {
    log.info("error", nlohmann::json{{"kind", "runtime"}, {"what", e.what()}}.dump());
    return 3;
  }
}
