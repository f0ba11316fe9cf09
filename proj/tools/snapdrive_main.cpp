// Command-line driver over the C interface.

#include <cstdio>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "snapdrive/snapdrive.h"

namespace {

constexpr int kExitModuleError = 1;
constexpr int kExitUsage = 2;

int report(sd_status status, const char* what) {
  std::fprintf(stderr, "snapdrive: %s: %s (%s)\n", what, sd_last_error(), sd_status_name(status));
  return status == SD_ERR_USAGE ? kExitUsage : kExitModuleError;
}

std::string subcommand_list() {
  std::string out;
  for (size_t i = 0; i < sd_subcommand_count(); ++i) {
    if (!out.empty()) out += ", ";
    out += sd_subcommand_name(i);
  }
  return out;
}

bool known_subcommand(const std::string& name) {
  for (size_t i = 0; i < sd_subcommand_count(); ++i) {
    if (name == sd_subcommand_name(i)) return true;
  }
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analysis pipeline for geo-tagged short-video posts"};
  app.footer("Subcommands: " + subcommand_list());
  std::string command;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> rule;
  std::optional<int> threshold;
  std::optional<int> k;
  std::optional<std::string> out_dir;
  bool quiet = false;

  app.add_option("subcommand", command, "Stage to run")->required();
  app.add_option("--config", config, "Pipeline config (JSON)")->required();
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--jobs", jobs, "Cities processed concurrently")->check(CLI::PositiveNumber);
  app.add_option("--rule", rule, "Voting rule")->check(CLI::IsMember({"single", "majority", "threshold"}));
  app.add_option("--threshold", threshold, "Threshold percentage for --rule threshold")
      ->check(CLI::IsMember({10, 30, 50, 70, 90}));
  app.add_option("--k", k, "Cluster count")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", out_dir, "Output directory");
  app.add_flag("-q,--quiet", quiet, "Do not list written files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (!known_subcommand(command)) {
    std::fprintf(stderr, "snapdrive: unknown subcommand '%s' (expected one of: %s)\n", command.c_str(),
                 subcommand_list().c_str());
    return kExitUsage;
  }
  if (threshold && (!rule || *rule != "threshold")) {
    std::fprintf(stderr, "snapdrive: --threshold requires --rule threshold\n");
    return kExitUsage;
  }

  sd_pipeline* raw = nullptr;
  if (const sd_status s = sd_pipeline_open(config.c_str(), &raw); s != SD_OK) {
    report(s, "cannot load config");
    return s == SD_ERR_IO ? kExitUsage : kExitModuleError;
  }
  std::unique_ptr<sd_pipeline, decltype(&sd_pipeline_close)> pipeline(raw, sd_pipeline_close);

  sd_status s = SD_OK;
  if (seed && (s = sd_pipeline_set_seed(pipeline.get(), *seed)) != SD_OK) return report(s, "--seed");
  if (jobs && (s = sd_pipeline_set_jobs(pipeline.get(), *jobs)) != SD_OK) return report(s, "--jobs");
  if (rule && (s = sd_pipeline_set_rule(pipeline.get(), rule->c_str(), threshold.value_or(50))) != SD_OK) {
    return report(s, "--rule");
  }
  if (k && (s = sd_pipeline_set_k(pipeline.get(), *k)) != SD_OK) return report(s, "--k");
  if (out_dir && (s = sd_pipeline_set_out_dir(pipeline.get(), out_dir->c_str())) != SD_OK) return report(s, "--out-dir");

  size_t written = 0;
  if ((s = sd_pipeline_run(pipeline.get(), command.c_str(), &written)) != SD_OK) return report(s, command.c_str());
  if (!quiet) {
    for (size_t i = 0; i < written; ++i) std::printf("%s\n", sd_pipeline_output(pipeline.get(), i));
  }
  return 0;
}
