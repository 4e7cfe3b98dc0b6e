// Command-line front end: one subcommand per stage plus "pipeline".
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tracecurate/config.hpp"
#include "tracecurate/corpus.hpp"
#include "tracecurate/stages.hpp"

namespace tc = tracecurate;

namespace {

int fail(std::string_view kind, int code, const std::string& message,
         const tc::Json& extra = tc::Json::object()) {
  tc::Json j{{"error", kind}, {"exit_code", code}, {"message", message}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  std::cerr << j.dump() << std::endl;
  return code;
}

struct Common {
  std::string in;
  std::string out;
  std::string config_path;
  std::vector<std::string> overrides;
  bool force = false;
  bool lenient = false;
};

void add_common(CLI::App* cmd, Common& c, const char* out_help) {
  cmd->add_option("-i,--in", c.in, "input JSONL corpus")->required();
  cmd->add_option("-o,--out", c.out, out_help)->required();
  cmd->add_option("-c,--config", c.config_path, "pipeline config (JSON)");
  cmd->add_option("--set", c.overrides, "override a config key: key=value");
  cmd->add_flag("--force", c.force, "redo a stage recorded under another config");
  cmd->add_flag("--lenient", c.lenient, "skip malformed lines instead of aborting");
}

tc::StageOptions resolve(const Common& c) {
  tc::StageOptions o;
  if (!c.config_path.empty()) o.config = tc::PipelineConfig::load(c.config_path);
  if (c.lenient) o.config.set("parse_mode=\"lenient\"");
  for (const auto& s : c.overrides) o.config.set(s);
  o.config.validate();
  o.force = c.force;
  if (!std::filesystem::exists(c.in)) {
    throw tc::DataError(fmt::format("input {} does not exist", c.in));
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curate reasoning-trace corpora: segment, judge, revise, score, sample."};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tc::kToolVersion));

  Common common;
  std::string format = "json";
  std::string view = "auto";
  std::string rejects;
  std::string audit;
  std::string ids;
  std::size_t size = 0;
  double fraction = 0.0;

  using Runner = tc::StageSummary (*)(const std::string&, const std::string&,
                                      const tc::StageOptions&);
  struct Sub {
    const char* name;
    const char* help;
    Runner run;
  };
  const std::vector<Sub> subs = {
      {"segment", "split thinking blocks into subtrajectories", tc::run_segment},
      {"judge", "obtain criterion and independence verdicts", tc::run_judge},
      {"revise", "drop suboptimal independent subtrajectories", tc::run_revise},
      {"score", "compute quality scores", tc::run_score},
      {"sample", "select a distribution-matched subset", tc::run_sample},
      {"filter", "rule-based and difficulty filtering", tc::run_filter},
      {"decontaminate", "drop records sharing an n-gram with a benchmark",
       tc::run_decontaminate},
      {"report", "thinking-efficacy statistics", tc::run_report},
  };
  std::vector<std::pair<CLI::App*, Runner>> commands;
  for (const auto& s : subs) {
    CLI::App* cmd = app.add_subcommand(s.name, s.help);
    const bool is_report = std::string_view(s.name) == "report";
    add_common(cmd, common, is_report ? "report file" : "output JSONL corpus");
    if (is_report) {
      cmd->add_option("--format", format, "json, markdown or csv");
      cmd->add_option("--view", view, "auto, original, revised or compare");
    }
    if (std::string_view(s.name) == "sample") {
      cmd->add_option("-d,--size", size, "target sample size");
      cmd->add_option("--fraction", fraction, "target size as a share of the corpus");
      cmd->add_option("--audit", audit, "audit JSON path");
      cmd->add_option("--ids", ids, "selected id list path");
    }
    if (std::string_view(s.name) == "sample" || std::string_view(s.name) == "filter" ||
        std::string_view(s.name) == "decontaminate") {
      cmd->add_option("--rejects", rejects, "rejection log path");
    }
    commands.emplace_back(cmd, s.run);
  }
  CLI::App* pipeline = app.add_subcommand("pipeline", "run every stage in order");
  add_common(pipeline, common, "output directory");
  pipeline->add_option("--format", format, "report format");
  pipeline->add_option("-d,--size", size, "target sample size");
  pipeline->add_option("--fraction", fraction, "target size as a share of the corpus");

  CLI::App* show = app.add_subcommand("config", "print the resolved config and its hash");
  show->add_option("-c,--config", common.config_path, "pipeline config (JSON)");
  show->add_option("--set", common.overrides, "override a config key: key=value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", tc::kExitConfig, e.what());
  }

  try {
    if (show->parsed()) {
      tc::PipelineConfig config;
      if (!common.config_path.empty()) config = tc::PipelineConfig::load(common.config_path);
      for (const auto& s : common.overrides) config.set(s);
      config.validate();
      std::cout << tc::Json{{"config", config.to_json()}, {"config_hash", config.hash()}}.dump(2)
                << std::endl;
      return tc::kExitOk;
    }

    tc::StageOptions options = resolve(common);
    if (size > 0) options.config.set(fmt::format("sample_size={}", size));
    if (fraction > 0.0) options.config.set(fmt::format("sample_fraction={}", fraction));
    options.report_format = tc::parse_report_format(format);
    options.report_view = tc::parse_report_view(view);
    options.rejects_path = rejects;
    options.audit_path = audit;
    options.ids_path = ids;

    if (pipeline->parsed()) {
      tc::Json all = tc::Json::array();
      for (const auto& s : tc::run_pipeline(common.in, common.out, options)) {
        all.push_back(s.to_json());
      }
      std::cout << all.dump(2) << std::endl;
      return tc::kExitOk;
    }
    for (const auto& [cmd, run] : commands) {
      if (cmd->parsed()) {
        std::cout << run(common.in, common.out, options).to_json().dump(2) << std::endl;
        return tc::kExitOk;
      }
    }
    return fail("config", tc::kExitConfig, "no subcommand given");
  } catch (const tc::DependencyError& e) {
    return fail("dependency", e.exit_code(), e.what(), {{"missing_stage", e.missing_stage()}});
  } catch (const tc::Error& e) {
    return fail(tc::error_kind_name(e.kind()), e.exit_code(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("data", tc::kExitData, e.what());
  } catch (const std::exception& e) {
    return fail("data", tc::kExitData, e.what());
  }
}
