#pragma once

// JSON-configured experiments: schema check, plan, execution and manifest.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace coevo {

inline const char* tool_version() { return COEVO_VERSION; }

struct RunOptions {
  /// Empty: config "output", then $COEVO_OUT_DIR, then ./coevo-out.
  std::filesystem::path out_dir;
  /// Overrides the config "workers" key when set.
  std::optional<std::size_t> workers;
};

class Job;

class Experiment {
 public:
  /// Full schema and range check. Accepts either a config or a manifest
  /// written by run(), whose recorded config is used. Throws ConfigError.
  static Experiment parse(const nlohmann::json& j);
  static Experiment load(const std::filesystem::path& path);

  const std::string& kind() const;
  /// Config with defaults filled in (sweep configs keep the sweep key).
  const nlohmann::json& resolved() const;
  /// {"kind", "summary": [...], "warnings": [...], "runs"}.
  nlohmann::json plan() const;
  /// Writes artifacts and manifest.json, returns the manifest.
  nlohmann::json run(const RunOptions& opts = {}) const;

  std::filesystem::path output_dir(const RunOptions& opts) const;

 private:
  nlohmann::json resolved_;
  std::string output_;
  std::size_t workers_ = 1;
  std::shared_ptr<const Job> job_;
  // sweep children, in value order
  std::string sweep_key_;
  std::vector<nlohmann::json> sweep_values_;
  std::vector<Experiment> children_;
};

/// CLI exit status: 0 ok, 2 config or argument errors, 4 invariant
/// violations, 3 every other model or runtime failure.
int exit_code(ErrorCode code);
const char* to_string(ErrorCode code);
nlohmann::json error_json(ErrorCode code, const std::string& message, const std::string& field);

}  // namespace coevo
