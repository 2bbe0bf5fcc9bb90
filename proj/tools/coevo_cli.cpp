// Command-line driver. Talks to the library only through the C API.

#include <coevo/coevo.h>

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

namespace {

int report_failure(coevo_status status) {
  const char* err = coevo_last_error_json();
  std::cerr << (err ? err : "{\"error\":{\"code\":\"internal\",\"message\":\"unknown failure\"}}") << "\n";
  return coevo_exit_code(status);
}

coevo_experiment* load(const std::string& path, int& code) {
  coevo_experiment* exp = nullptr;
  const coevo_status st = coevo_experiment_load(path.c_str(), &exp);
  code = st == COEVO_OK ? 0 : report_failure(st);
  return exp;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  coevo_string_free(s);
  return out;
}

int validate(const std::string& path) {
  int code = 0;
  coevo_experiment* exp = load(path, code);
  if (!exp) return code;
  char* plan = nullptr;
  const coevo_status st = coevo_experiment_plan(exp, &plan);
  coevo_experiment_free(exp);
  if (st != COEVO_OK) return report_failure(st);
  const auto j = nlohmann::json::parse(take(plan));
  std::cout << "ok\n";
  std::cout << "kind: " << j.at("kind").get<std::string>() << "  runs: " << j.at("runs") << "  config_hash: "
            << j.at("config_hash").get<std::string>() << "\n";
  for (const auto& line : j.at("summary")) std::cout << "  " << line.get<std::string>() << "\n";
  for (const auto& w : j.at("warnings")) std::cout << "warning: " << w.get<std::string>() << "\n";
  return 0;
}

int run(const std::string& path, const std::string& out, int workers) {
  int code = 0;
  coevo_experiment* exp = load(path, code);
  if (!exp) return code;
  char* manifest = nullptr;
  const coevo_status st = coevo_experiment_run(exp, out.empty() ? nullptr : out.c_str(), workers, &manifest);
  coevo_experiment_free(exp);
  if (st != COEVO_OK) return report_failure(st);
  const auto j = nlohmann::json::parse(take(manifest));
  for (const auto& w : j.at("warnings")) std::cerr << "warning: " << w.get<std::string>() << "\n";
  std::cout << j.at("kind").get<std::string>() << " done in " << j.at("wall_time_seconds").get<double>() << " s, "
            << "config_hash " << j.at("config_hash").get<std::string>() << "\n";
  for (const auto& f : j.at("files")) std::cout << "  " << f.at("name").get<std::string>() << "\n";
  if (j.contains("sweep"))
    for (const auto& r : j.at("sweep").at("runs")) std::cout << "  " << r.at("directory").get<std::string>() << "/\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coevo: co-evolving network dynamics experiments"};
  app.set_version_flag("--version", std::string(coevo_version()));
  app.require_subcommand(1);

  std::string config, out;
  int workers = 0;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment config (or re-run a manifest.json)");
  run_cmd->add_option("config", config, "Config or manifest JSON")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", out, "Output directory (overrides config and COEVO_OUT_DIR)");
  run_cmd->add_option("--workers", workers, "Worker threads for replica ensembles")->check(CLI::PositiveNumber);

  auto* val_cmd = app.add_subcommand("validate", "Check a config and print the resolved plan");
  val_cmd->add_option("config", config, "Config or manifest JSON")->required()->check(CLI::ExistingFile);
  val_cmd->add_option("--workers", workers, "Accepted for symmetry with run")->check(CLI::PositiveNumber);
  val_cmd->add_option("--out", out, "Accepted for symmetry with run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (*run_cmd) return run(config, out, workers);
  return validate(config);
}
