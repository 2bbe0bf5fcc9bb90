#include <coevo/coevo.h>

#include <cstring>
#include <string>

#include "closures.hpp"
#include "experiment.hpp"

struct coevo_experiment {
  coevo::Experiment exp;
};

namespace {

thread_local std::string last_error;

coevo_status status_of(coevo::ErrorCode code) {
  switch (code) {
    case coevo::ErrorCode::invalid_argument: return COEVO_ERR_INVALID_ARGUMENT;
    case coevo::ErrorCode::config: return COEVO_ERR_CONFIG;
    case coevo::ErrorCode::model: return COEVO_ERR_MODEL;
    case coevo::ErrorCode::invariant: return COEVO_ERR_INVARIANT;
    case coevo::ErrorCode::nullcline_not_found: return COEVO_ERR_NULLCLINE_NOT_FOUND;
    case coevo::ErrorCode::consensus_boundary: return COEVO_ERR_CONSENSUS_BOUNDARY;
    case coevo::ErrorCode::closure_singular: return COEVO_ERR_CLOSURE_SINGULAR;
    case coevo::ErrorCode::continuation_failed: return COEVO_ERR_CONTINUATION_FAILED;
    case coevo::ErrorCode::integration: return COEVO_ERR_INTEGRATION;
  }
  return COEVO_ERR_INTERNAL;
}

coevo_status fail(coevo::ErrorCode code, const std::string& what, const std::string& field) {
  last_error = coevo::error_json(code, what, field).dump();
  return status_of(code);
}

template <class F>
coevo_status guarded(F&& f) {
  last_error.clear();
  try {
    f();
    return COEVO_OK;
  } catch (const coevo::Error& e) {
    return fail(e.code(), e.what(), e.field());
  } catch (const nlohmann::json::exception& e) {
    return fail(coevo::ErrorCode::config, e.what(), "");
  } catch (const std::exception& e) {
    nlohmann::json j = {{"error", {{"code", "internal"}, {"message", e.what()}, {"field", nullptr}, {"exit_code", 3}}}};
    last_error = j.dump();
    return COEVO_ERR_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

coevo::MinimalParams params_of(const coevo_minimal_params* p) {
  coevo::require(p != nullptr, "params is null", "params");
  coevo::MinimalParams q;
  q.alpha_pm = p->alpha_pm;
  q.alpha_mp = p->alpha_mp;
  q.beta_pp = p->beta_pp;
  q.beta_mm = p->beta_mm;
  q.beta_pm = p->beta_pm;
  q.gamma_pp = p->gamma_pp;
  q.gamma_mm = p->gamma_mm;
  q.gamma_pm = p->gamma_pm;
  q.validate();
  return q;
}

coevo::ClosureKind kind_of(coevo_closure k) {
  coevo::require(k == COEVO_CLOSURE_CONDITIONAL || k == COEVO_CLOSURE_KIRKWOOD, "unknown closure kind", "kind");
  return k == COEVO_CLOSURE_KIRKWOOD ? coevo::ClosureKind::kirkwood : coevo::ClosureKind::conditional;
}

}  // namespace

extern "C" {

const char* coevo_version(void) { return coevo::tool_version(); }

int coevo_exit_code(coevo_status status) {
  switch (status) {
    case COEVO_OK: return 0;
    case COEVO_ERR_INVALID_ARGUMENT:
    case COEVO_ERR_CONFIG: return 2;
    case COEVO_ERR_INVARIANT: return 4;
    default: return 3;
  }
}

const char* coevo_last_error_json(void) { return last_error.empty() ? nullptr : last_error.c_str(); }

void coevo_string_free(char* s) { delete[] s; }

coevo_status coevo_experiment_from_json(const char* json, coevo_experiment** out) {
  return guarded([&] {
    coevo::require(json && out, "null argument", "json");
    *out = nullptr;
    auto parsed = nlohmann::json::parse(json);
    *out = new coevo_experiment{coevo::Experiment::parse(parsed)};
  });
}

coevo_status coevo_experiment_load(const char* path, coevo_experiment** out) {
  return guarded([&] {
    coevo::require(path && out, "null argument", "path");
    *out = nullptr;
    *out = new coevo_experiment{coevo::Experiment::load(path)};
  });
}

void coevo_experiment_free(coevo_experiment* exp) { delete exp; }

coevo_status coevo_experiment_plan(const coevo_experiment* exp, char** plan_json) {
  return guarded([&] {
    coevo::require(exp && plan_json, "null argument", "experiment");
    *plan_json = dup(exp->exp.plan().dump(2));
  });
}

coevo_status coevo_experiment_config(const coevo_experiment* exp, char** config_json) {
  return guarded([&] {
    coevo::require(exp && config_json, "null argument", "experiment");
    *config_json = dup(exp->exp.resolved().dump(2));
  });
}

coevo_status coevo_experiment_run(const coevo_experiment* exp, const char* out_dir, int workers,
                                  char** manifest_json) {
  return guarded([&] {
    coevo::require(exp != nullptr, "null experiment", "experiment");
    coevo::RunOptions opts;
    if (out_dir && *out_dir) opts.out_dir = out_dir;
    if (workers > 0) opts.workers = static_cast<std::size_t>(workers);
    const auto manifest = exp->exp.run(opts);
    if (manifest_json) *manifest_json = dup(manifest.dump(2));
  });
}

coevo_status coevo_closure_rhs(const coevo_minimal_params* p, coevo_closure kind, const double moments[6],
                               double out[6]) {
  return guarded([&] {
    coevo::require(moments && out, "null argument", "moments");
    std::array<double, 6> a;
    std::copy(moments, moments + 6, a.begin());
    const auto d = coevo::closure_rhs(coevo::MinimalMoments::from_array(a), params_of(p), kind_of(kind));
    std::copy(d.begin(), d.end(), out);
  });
}

coevo_status coevo_polarization_stable(const coevo_minimal_params* p, double rho_p, int* stable, double* margin) {
  return guarded([&] {
    const auto s = coevo::polarization_stable(params_of(p), rho_p);
    if (stable) *stable = s.stable ? 1 : 0;
    if (margin) *margin = s.margin;
  });
}

coevo_status coevo_continue_small_epsilon(const coevo_minimal_params* p, double rho_p, coevo_closure kind,
                                          double moments[6], double* dfdeps, double* residual) {
  return guarded([&] {
    const auto b = coevo::continue_small_epsilon(params_of(p), rho_p, kind_of(kind));
    if (moments) {
      const auto a = b.moments.to_array();
      std::copy(a.begin(), a.end(), moments);
    }
    if (dfdeps) *dfdeps = b.dfdeps;
    if (residual) *residual = b.residual;
  });
}

}  // extern "C"
