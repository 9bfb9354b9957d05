#include "decoupler/decoupler.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "commands.hpp"
#include "decoupling.hpp"
#include "decoupling_field.hpp"
#include "errors.hpp"
#include "nonlinearity.hpp"
#include "oracles.hpp"

struct dc_field {
  decoupler::DecouplingField f;
};

struct dc_nonlinearity {
  decoupler::NonlinearitySpec s;
};

namespace {

thread_local std::string g_error;

dc_status record(dc_status st, const char* what) {
  g_error = what;
  return st;
}

template <class F>
dc_status guard(F&& body) {
  try {
    body();
    g_error.clear();
    return DC_OK;
  } catch (const decoupler::Error& e) {
    return record(static_cast<dc_status>(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return record(DC_ERR_CONFIG, e.what());
  } catch (const std::exception& e) {
    return record(DC_ERR_INTERNAL, e.what());
  } catch (...) {
    return record(DC_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

#define DC_CHECK_PTR(p) \
  if (!(p)) return record(DC_ERR_INVALID_ARGUMENT, #p " is null")

}  // namespace

extern "C" {

const char* dc_version(void) { return decoupler::kLibraryVersion; }

const char* dc_last_error(void) { return g_error.c_str(); }

void dc_run_options_init(dc_run_options* opt) {
  if (!opt) return;
  opt->seed = -1;
  opt->workers = -1;
  opt->out_dir = nullptr;
  opt->tier = nullptr;
  opt->log = nullptr;
  opt->user = nullptr;
}

int dc_run(const char* command, const char* config_json, const dc_run_options* opt, char** report_json) {
  if (report_json) *report_json = nullptr;
  if (!command) {
    g_error = "command is null";
    return decoupler::kExitConfig;
  }
  decoupler::RunOptions ro;
  if (opt) {
    if (opt->seed >= 0) ro.seed = static_cast<std::uint64_t>(opt->seed);
    if (opt->workers >= 0) ro.workers = opt->workers;
    if (opt->out_dir) ro.out_dir = opt->out_dir;
    if (opt->tier) ro.tier = std::string(opt->tier);
    if (opt->log) {
      auto cb = opt->log;
      void* user = opt->user;
      ro.log = [cb, user](const std::string& line) { cb(line.c_str(), user); };
    }
  }
  nlohmann::json cfg = nlohmann::json::object();
  if (config_json && *config_json) {
    cfg = nlohmann::json::parse(config_json, nullptr, false);
    if (cfg.is_discarded()) {
      g_error = "config is not valid JSON";
      return decoupler::kExitConfig;
    }
  }
  const auto out = decoupler::run_command(command, cfg, ro);
  g_error = out.error;
  if (report_json && !out.report.is_null()) *report_json = dup_string(out.report.dump(2));
  return out.exit_code;
}

void dc_string_free(char* s) { std::free(s); }

dc_status dc_nonlinearity_create(const char* family, const char* params_json, dc_nonlinearity** out) {
  DC_CHECK_PTR(family);
  DC_CHECK_PTR(out);
  return guard([&] {
    std::map<std::string, double> params;
    if (params_json && *params_json) params = nlohmann::json::parse(params_json).get<std::map<std::string, double>>();
    *out = new dc_nonlinearity{decoupler::make_nonlinearity(family, params)};
  });
}

dc_status dc_nonlinearity_tabulated(double b0, double db, const double* values, size_t count, dc_nonlinearity** out) {
  DC_CHECK_PTR(values);
  DC_CHECK_PTR(out);
  return guard([&] {
    *out = new dc_nonlinearity{decoupler::make_tabulated(b0, db, std::vector<double>(values, values + count))};
  });
}

dc_status dc_nonlinearity_eval(const dc_nonlinearity* s, double b, double* out) {
  DC_CHECK_PTR(s);
  DC_CHECK_PTR(out);
  return guard([&] {
    decoupler::require(s->s.dim == 1, "scalar nonlinearity required");
    *out = s->s.scalar(b);
  });
}

void dc_nonlinearity_free(dc_nonlinearity* s) { delete s; }

dc_status dc_field_load(const char* path, dc_field** out) {
  DC_CHECK_PTR(path);
  DC_CHECK_PTR(out);
  return guard([&] { *out = new dc_field{decoupler::load_field(path)}; });
}

dc_status dc_field_save(const dc_field* f, const char* path) {
  DC_CHECK_PTR(f);
  DC_CHECK_PTR(path);
  return guard([&] { decoupler::save_field(path, f->f); });
}

dc_status dc_field_oracle(const dc_nonlinearity* s, double Q0, double dq, double B, double db, dc_field** out) {
  DC_CHECK_PTR(s);
  DC_CHECK_PTR(out);
  return guard([&] { *out = new dc_field{decoupler::oracle_field(decoupler::oracle_for(s->s), Q0, dq, B, db)}; });
}

dc_status dc_field_rescale(const dc_field* f, double zeta, dc_field** out) {
  DC_CHECK_PTR(f);
  DC_CHECK_PTR(out);
  return guard([&] { *out = new dc_field{decoupler::rescale(f->f, zeta)}; });
}

dc_status dc_field_eval(const dc_field* f, double q, double b, double* out) {
  DC_CHECK_PTR(f);
  DC_CHECK_PTR(out);
  return guard([&] { *out = f->f.eval(q, b); });
}

dc_status dc_field_horizon(const dc_field* f, double* out) {
  DC_CHECK_PTR(f);
  DC_CHECK_PTR(out);
  *out = f->f.horizon();
  return DC_OK;
}

dc_status dc_field_shape(const dc_field* f, int* nq, int* nb) {
  DC_CHECK_PTR(f);
  if (nq) *nq = f->f.nq;
  if (nb) *nb = f->f.nb;
  return DC_OK;
}

void dc_field_free(dc_field* f) { delete f; }

}  // extern "C"
