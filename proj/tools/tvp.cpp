// Command line front end over the pipeline stages.
#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tvp/pipeline.hpp"
#include "tvp/synth.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;
constexpr int kExitStage = 4;

struct CommonOpts {
  std::string config_path;
  std::optional<int> hour;
  std::optional<uint64_t> seed;
  std::optional<int> workers;
};

tvp::PipelineConfig resolve_config(const CommonOpts& opts) {
  tvp::PipelineConfig cfg;
  if (!opts.config_path.empty()) cfg = tvp::load_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.workers) cfg.workers = *opts.workers;
  cfg.validate();
  return cfg;
}

void print_report(const tvp::StageReport& rep) {
  std::printf("stage %-12s %8.1f ms", rep.name.c_str(), rep.ms);
  for (const auto& [k, v] : rep.counts)
    std::printf("  %s=%lld", k.c_str(), static_cast<long long>(v));
  std::printf("\n");
}

int run_stage(const std::string& name, const CommonOpts& opts) {
  tvp::PipelineConfig cfg;
  try {
    cfg = resolve_config(opts);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  }
  tvp::Pipeline pipeline(cfg);
  try {
    if (name == "run") {
      auto report = pipeline.run_all();
      for (const auto& s : report.stages) print_report(s);
      std::printf("match throughput: %.0f points/s\n",
                  report.match_points_per_s);
      std::printf("report: %s/report.json\n", cfg.output_dir.c_str());
    } else if (name == "match") {
      print_report(pipeline.stage_match());
    } else if (name == "behaviors") {
      print_report(pipeline.stage_behaviors());
    } else if (name == "perspective") {
      print_report(pipeline.stage_perspective());
    } else if (name == "restrict") {
      print_report(pipeline.stage_restrict());
    } else if (name == "violations") {
      print_report(pipeline.stage_violations());
    } else if (name == "infer") {
      print_report(pipeline.stage_infer());
    } else if (name == "export") {
      print_report(pipeline.stage_export(opts.hour));
    } else {
      std::fprintf(stderr, "unknown stage: %s\n", name.c_str());
      return kExitConfig;
    }
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    // missing/unreadable/malformed inputs vs. everything else
    const bool input_problem = msg.find("cannot open") != std::string::npos ||
                               msg.find("missing") != std::string::npos ||
                               msg.find("malformed") != std::string::npos ||
                               msg.find("empty") != std::string::npos;
    std::fprintf(stderr, "%s error: %s\n",
                 input_problem ? "input" : "stage", msg.c_str());
    return input_problem ? kExitInput : kExitStage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "stage error: %s\n", e.what());
    return kExitStage;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"traffic violation-prone location pipeline"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string stage_name;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "config file");
    sub->add_option("--seed", opts.seed, "override RNG seed");
    sub->add_option("--workers", opts.workers, "matching worker threads");
  };

  // synth has its own knobs
  tvp::SynthSpec spec;
  std::string synth_dir = "data";
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--out", synth_dir, "output directory");
  synth->add_option("--rows", spec.rows, "grid rows");
  synth->add_option("--cols", spec.cols, "grid cols");
  synth->add_option("--trajectories", spec.traj_count, "trajectory count");
  synth->add_option("--noise", spec.noise_sigma_m, "GPS noise sigma, m");
  synth->add_option("--days", spec.span_days, "time span in days");
  synth->add_option("--seed", spec.seed, "RNG seed");

  for (const char* name : {"match", "behaviors", "perspective", "restrict",
                           "violations", "infer", "export", "run"}) {
    auto* sub = app.add_subcommand(
        name, std::string(name) == "run"
                  ? std::string("run every stage in order")
                  : std::string("run the ") + name + " stage");
    add_common(sub);
    if (std::string(name) == "export" || std::string(name) == "run")
      sub->add_option("--hour", opts.hour, "filter exported map to one hour");
  }
  auto* runsub = app.get_subcommand("run");
  runsub->add_option("--stage", stage_name,
                     "run a single named stage instead of the full sequence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (synth->parsed()) {
    try {
      auto result = tvp::generate_synthetic(spec);
      tvp::write_synthetic(result, synth_dir);
      std::printf("wrote synthetic dataset to %s (%zu truth violations)\n",
                  synth_dir.c_str(), result.truth.size());
      return kExitOk;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "stage error: %s\n", e.what());
      return kExitStage;
    }
  }

  std::string chosen = app.get_subcommands().front()->get_name();
  if (chosen == "run" && !stage_name.empty()) chosen = stage_name;
  return run_stage(chosen, opts);
}
