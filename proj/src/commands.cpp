#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>

#include "decoupling.hpp"
#include "errors.hpp"
#include "oracles.hpp"
#include "parallel.hpp"
#include "pde_h.hpp"
#include "rng.hpp"
#include "spde_harness.hpp"
#include "verify.hpp"

namespace decoupler {

using nlohmann::json;

namespace {

json jnum(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

const json& section(const json& cfg, const char* name, const std::set<std::string>& allowed) {
  static const json empty = json::object();
  if (!cfg.contains(name)) return empty;
  const json& s = cfg.at(name);
  if (!s.is_object()) fail(ErrorKind::Config, std::string("config section '") + name + "' must be an object");
  for (auto it = s.begin(); it != s.end(); ++it)
    if (!allowed.count(it.key())) fail(ErrorKind::Config, std::string("unknown key '") + it.key() + "' in '" + name + "'");
  return s;
}

template <class T>
T get(const json& s, const char* key, T fallback) {
  if (!s.contains(key)) return fallback;
  try {
    return s.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Config, std::string("config key '") + key + "' has the wrong type");
  }
}

NonlinearitySpec parse_nonlinearity(const json& cfg) {
  if (!cfg.contains("nonlinearity")) fail(ErrorKind::Config, "config needs a 'nonlinearity' section");
  const json& n = cfg.at("nonlinearity");
  if (n.contains("tabulated")) {
    const json& t = n.at("tabulated");
    return make_tabulated(get<double>(t, "b0", 0.0), get<double>(t, "db", 0.0),
                          get<std::vector<double>>(t, "values", {}));
  }
  if (!n.contains("family")) fail(ErrorKind::Config, "nonlinearity needs 'family' or 'tabulated'");
  return make_nonlinearity(get<std::string>(n, "family", ""), get<std::map<std::string, double>>(n, "params", {}));
}

std::filesystem::path out_path(const RunOptions& opt, const std::string& name) {
  return std::filesystem::path(opt.out_dir) / name;
}

bool writing(const RunOptions& opt) { return !opt.out_dir.empty(); }

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p);
  if (!os) fail(ErrorKind::Io, "cannot open " + p.string());
  os << text;
}

std::optional<OracleSpec> try_oracle(const NonlinearitySpec& s) {
  try {
    return oracle_for(s);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::shared_ptr<const Diffusivity> field_diffusivity(const std::string& path) {
  if (path.empty()) return nullptr;
  auto f = std::make_shared<DecouplingField>(load_field(path));
  return std::make_shared<GridDiffusivity>(f);
}

json field_summary(const DecouplingField& F) {
  return {{"quantity", F.quantity}, {"provenance", F.provenance}, {"horizon", F.horizon()}, {"nq", F.nq},
          {"dq", F.dq}, {"nb", F.nb}, {"b0", F.b0}, {"db", F.db}, {"qbar_lower", jnum(F.qbar_lower)}};
}

json cmd_decouple(const json& cfg, const RunOptions& opt, std::uint64_t seed) {
  const json& s = section(cfg, "decouple",
                          {"Q0", "q_step", "B", "db", "steps_per_unit", "n_paths", "tol", "max_iter", "warmup_iters",
                           "warmup_paths", "extend_to"});
  const auto sigma = parse_nonlinearity(cfg);
  GridConfig g;
  g.Q0 = get(s, "Q0", g.Q0);
  g.q_step = get(s, "q_step", g.q_step);
  g.B = get(s, "B", g.B);
  g.db = get(s, "db", g.db);
  McConfig mc;
  mc.steps_per_unit = get(s, "steps_per_unit", mc.steps_per_unit);
  mc.n_paths = get(s, "n_paths", mc.n_paths);
  mc.tol = get(s, "tol", mc.tol);
  mc.max_iter = get(s, "max_iter", mc.max_iter);
  mc.warmup_iters = get(s, "warmup_iters", mc.warmup_iters);
  mc.warmup_paths = get(s, "warmup_paths", mc.warmup_paths);
  mc.seed = seed;
  const double extend_to = get(s, "extend_to", g.Q0);

  std::vector<double> probe;
  for (int i = 0; i <= 400; ++i) probe.push_back(-g.B + 2.0 * g.B * i / 400.0);
  json hypothesis;
  try {
    const auto hyp = hypothesis_check(sigma, probe);
    hypothesis = {{"class", hyp.interval_class}, {"beta", hyp.beta},           {"K", hyp.K},
                  {"gamma", hyp.gamma},          {"certificate", hyp.certificate}, {"certified_horizon", jnum(hyp.certified_horizon)},
                  {"note", hyp.note}};
  } catch (const Error& e) {
    // Outside the checker's classes; the Picard run below still applies.
    if (e.kind() != ErrorKind::InvalidArgument) throw;
    hypothesis = {{"class", "unclassified"}, {"certificate", false}, {"note", e.what()}};
  }

  PicardReport pr;
  auto J = picard_solve(sigma, g, mc, &pr);
  json result;
  result["picard"] = {{"iterations", pr.iterations}, {"converged", pr.converged}, {"residuals", pr.residuals},
                      {"paths_used", pr.paths_used}, {"max_stderr", pr.max_stderr},
                      {"worst_contraction", pr.worst_contraction}};
  if (extend_to > g.Q0 + 1e-12) {
    McConfig me = mc;
    me.seed = seed + 1;
    ExtendReport er;
    J = extend(J, extend_to - g.Q0, me, &er);
    result["extension"] = {{"from", g.Q0}, {"to", extend_to}, {"slice_lipschitz", er.slice_lipschitz},
                           {"allowed_step", er.allowed_step}, {"certified_horizon", er.certified_horizon},
                           {"iterations", er.picard.iterations}};
  }
  J.compute_lipschitz();
  result["field"] = field_summary(J);
  result["hypothesis"] = hypothesis;
  const double lip_top = J.lipschitz.empty() ? 0.0 : J.lipschitz.back();
  result["certified_horizon"] = {
      {"statement", "J exists on [0, Qbar) with Qbar >= Q + Lip(J(Q, .))^-2"},
      {"Q", J.horizon()},
      {"lipschitz_at_Q", lip_top},
      {"qbar_lower", lip_top > 0.0 ? jnum(J.horizon() + 1.0 / (lip_top * lip_top)) : json(nullptr)}};
  if (auto o = try_oracle(sigma); o && J.horizon() < o->blowup()) {
    const double inf = std::numeric_limits<double>::infinity();
    const double err = x_norm_error(J, [&](double q, double b) { return oracle_J(*o, q, b); }, inf);
    const double se = x_norm_stderr(J, inf);
    result["closed_form"] = {{"x_err", err}, {"x_stderr", se}, {"tolerance", std::max(2e-2, 3.0 * se)},
                             {"within", err <= std::max(2e-2, 3.0 * se)}};
  }
  if (writing(opt)) {
    save_field(out_path(opt, "field.dcf").string(), J);
    std::ostringstream res, lip;
    res << "iteration,residual,paths\n" << std::setprecision(17);
    for (std::size_t i = 0; i < pr.residuals.size(); ++i)
      res << i + 1 << "," << pr.residuals[i] << "," << (i < pr.paths_used.size() ? pr.paths_used[i] : 0) << "\n";
    write_text(out_path(opt, "residuals.csv"), res.str());
    lip << "q,lipschitz\n" << std::setprecision(17);
    for (int i = 0; i < J.nq; ++i) lip << J.q(i) << "," << J.lipschitz[i] << "\n";
    write_text(out_path(opt, "lipschitz.csv"), lip.str());
  }
  if (!pr.converged) fail(ErrorKind::NotConverged, "Picard iteration did not converge");
  return result;
}

json cmd_pde(const json& cfg, const RunOptions& opt) {
  const json& s =
      section(cfg, "pde", {"Q0", "b_min", "b_max", "h_b", "q_out", "cfl", "dq_floor", "kinks", "boundary", "compare_field"});
  const auto sigma = parse_nonlinearity(cfg);
  require(sigma.dim == 1, "pde: scalar nonlinearity required");
  PdeConfig pc;
  pc.Q0 = get(s, "Q0", pc.Q0);
  pc.b_min = get(s, "b_min", pc.b_min);
  pc.b_max = get(s, "b_max", pc.b_max);
  pc.h_b = get(s, "h_b", pc.h_b);
  pc.q_out = get(s, "q_out", pc.q_out);
  pc.cfl = get(s, "cfl", pc.cfl);
  pc.dq_floor = get(s, "dq_floor", pc.dq_floor);
  pc.kinks = get(s, "kinks", pc.kinks);
  pc.boundary = get(s, "boundary", pc.boundary);
  const auto H = solve_h(
      [&](double b) {
        const double v = sigma.scalar(b);
        return v * v;
      },
      pc);
  const auto res = residual_check(H);
  json result;
  result["field"] = field_summary(H.field);
  result["solver"] = {{"steps", H.steps}, {"min_dq", H.min_dq}, {"max_dq", H.max_dq}, {"floor_events", H.floor_events},
                      {"kinks", H.kinks}, {"boundary", pc.boundary}};
  result["residual"] = {{"l1_linf", res.l1_linf}, {"max_abs", res.max_abs}, {"exclusion_radius", res.exclusion_radius},
                        {"excluded_nodes", res.excluded_nodes}};
  result["sqrt_h_lipschitz"] = sqrt_h_lipschitz(H);
  const auto& F = H.field;
  if (auto o = try_oracle(sigma); o && F.horizon() < o->blowup()) {
    double worst_abs = 0.0, worst_rel = 0.0;
    std::ostringstream tab;
    tab << "q,b,H,H_exact,abs_err,rel_err\n" << std::setprecision(12);
    const int every = std::max(1, int(std::lround(0.1 / F.dq)));
    for (int i = 0; i < F.nq; ++i)
      for (int j = 0; j < F.nb; ++j) {
        const double e = oracle_H(*o, F.q(i), F.b(j));
        const double ae = std::abs(F.at(i, j) - e);
        const double re = e > 0.0 ? ae / e : (ae == 0.0 ? 0.0 : INFINITY);
        worst_abs = std::max(worst_abs, ae);
        if (e > 0.0) worst_rel = std::max(worst_rel, re);
        if (i % every == 0) tab << F.q(i) << "," << F.b(j) << "," << F.at(i, j) << "," << e << "," << ae << "," << re << "\n";
      }
    result["closed_form"] = {{"max_abs_err", worst_abs}, {"max_rel_err", worst_rel}};
    if (writing(opt)) write_text(out_path(opt, "error_table.csv"), tab.str());
  }
  const std::string cmp_path = get<std::string>(s, "compare_field", "");
  if (!cmp_path.empty()) {
    const auto J = load_field(cmp_path);
    const auto c = compare_to_decoupling(H, J);
    result["compare"] = {{"discrepancy", c.discrepancy}, {"budget", c.budget}, {"within", c.discrepancy <= c.budget},
                         {"worst_q", c.worst_q},         {"worst_b", c.worst_b}, {"probes", c.probes}};
  }
  if (writing(opt)) save_field(out_path(opt, "h_field.dcf").string(), H.field);
  return result;
}

json cmd_onepoint(const json& cfg, const RunOptions& opt, std::uint64_t seed) {
  const json& s = section(cfg, "spde", {"rhos", "t", "a", "n", "h", "replicas", "steps", "ref_paths", "ref_steps", "field",
                                        "require_certificate", "bootstrap"});
  const auto sigma = parse_nonlinearity(cfg);
  OnePointConfig oc;
  oc.rhos = get(s, "rhos", oc.rhos);
  oc.t = get(s, "t", oc.t);
  oc.a = get(s, "a", oc.a);
  oc.n = get(s, "n", oc.n);
  oc.h = get(s, "h", oc.h);
  oc.replicas = get(s, "replicas", oc.replicas);
  oc.steps = get(s, "steps", oc.steps);
  oc.ref_paths = get(s, "ref_paths", oc.ref_paths);
  oc.ref_steps = get(s, "ref_steps", oc.ref_steps);
  oc.bootstrap = get(s, "bootstrap", oc.bootstrap);
  oc.require_certificate = get(s, "require_certificate", oc.require_certificate);
  oc.J = field_diffusivity(get<std::string>(s, "field", ""));
  oc.seed = seed;
  if (opt.log) oc.progress = [&](int k) { opt.log("replica " + std::to_string(k + 1) + " done"); };
  const auto rep = one_point_harness(sigma, oc);
  json rows = json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"rho", r.rho}, {"dt", r.dt}, {"steps", r.steps}, {"samples", r.samples}, {"w2", r.w2},
                    {"mean", r.mean}, {"var", r.var}, {"gaussian_w2", jnum(r.gaussian_w2)}});
  json probes = json::array();
  for (const auto& p : rep.probes) probes.push_back({p[0], p[1]});
  json result = {{"rows", rows},
                 {"reference", {{"mean", rep.ref_mean}, {"var", rep.ref_var}, {"samples", rep.ref_samples}}},
                 {"non_increasing", rep.non_increasing}, {"non_increasing_within_noise", rep.non_increasing_within_noise},
                 {"w2_diff", rep.w2_diff}, {"w2_diff_se", rep.w2_diff_se},
                 {"certified_horizon", jnum(rep.certified_horizon)},
                 {"probes", probes},
                 {"probe_spacing", rep.spacing},
                 {"grid", {{"n", rep.n}, {"L", rep.L}, {"h", rep.h}}},
                 {"replicas", rep.replicas}};
  if (writing(opt))
    for (std::size_t r = 0; r < rep.samples.size(); ++r)
      write_ensemble_csv(out_path(opt, "samples_rho" + std::to_string(r) + ".csv").string(), rep.samples[r], 1);
  return result;
}

json cmd_multipoint(const json& cfg, const RunOptions&, std::uint64_t seed) {
  const json& s = section(cfg, "multipoint", {"probes", "rho", "a", "n", "h", "replicas", "copies_per_dim",
                                              "ref_samples", "ref_steps", "field"});
  const auto sigma = parse_nonlinearity(cfg);
  MultipointHarnessConfig mc;
  if (!s.contains("probes") || !s.at("probes").is_array()) fail(ErrorKind::Config, "multipoint needs a 'probes' array");
  for (const auto& p : s.at("probes"))
    mc.probes.push_back({get(p, "t", 1.0), get(p, "R", 0.0), get(p, "x", 0.0), get(p, "y", 0.0)});
  mc.rho = get(s, "rho", mc.rho);
  mc.a = get(s, "a", mc.a);
  mc.n = get(s, "n", mc.n);
  mc.h = get(s, "h", mc.h);
  mc.replicas = get(s, "replicas", mc.replicas);
  mc.copies_per_dim = get(s, "copies_per_dim", mc.copies_per_dim);
  mc.ref_samples = get(s, "ref_samples", mc.ref_samples);
  mc.ref_steps = get(s, "ref_steps", mc.ref_steps);
  mc.J = field_diffusivity(get<std::string>(s, "field", ""));
  mc.seed = seed;
  const auto r = multipoint_harness(sigma, mc);
  json probes = json::array();
  for (const auto& p : r.probes) probes.push_back({{"t", p.t}, {"R", p.R}, {"x", p.x}, {"y", p.y}});
  return {{"probes", probes},
          {"p", r.p.p},
          {"p_raw", r.p_raw},
          {"closure_adjustment", r.closure_adjustment},
          {"limit_exponent", r.limit_exponent},
          {"p_convention", "exact shared quadratic-variation time at finite rho"},
          {"q_targets", r.q_targets},
          {"field_cov", r.field_cov},
          {"field_cov_se", r.field_cov_se},
          {"ref_cov", r.ref_cov},
          {"ref_cov_se", r.ref_cov_se},
          {"max_cov_z", r.max_cov_z},
          {"cov_ok", r.cov_ok},
          {"w2_joint", jnum(r.w2_joint)},
          {"w2_method", r.w2_method},
          {"samples", r.samples},
          {"dt", r.dt},
          {"steps", r.steps},
          {"grid", {{"n", r.n}, {"L", r.L}, {"h", r.h}}}};
}

json cmd_oracle(const json& cfg, const RunOptions& opt) {
  const json& s = section(cfg, "oracle", {"q", "b", "compare_field"});
  const auto sigma = parse_nonlinearity(cfg);
  const auto o = oracle_for(sigma);
  const auto qs = get<std::vector<double>>(s, "q", {0.0, 0.25, 0.5});
  const auto bs = get<std::vector<double>>(s, "b", {-1.0, 0.0, 1.0});
  json table = json::array();
  std::ostringstream csv;
  csv << "q,b,J,H\n" << std::setprecision(17);
  for (double q : qs)
    for (double b : bs) {
      const double J = oracle_J(o, q, b), H = oracle_H(o, q, b);
      table.push_back({{"q", q}, {"b", b}, {"J", J}, {"H", H}});
      csv << q << "," << b << "," << J << "," << H << "\n";
    }
  json result = {{"family", o.family}, {"blowup", jnum(o.blowup())}, {"table", table}};
  const std::string path = get<std::string>(s, "compare_field", "");
  if (!path.empty()) {
    const auto F = load_field(path);
    const double inf = std::numeric_limits<double>::infinity();
    std::function<double(double, double)> f = [&](double q, double b) { return oracle_J(o, q, b); };
    if (F.quantity == "H") f = [&](double q, double b) { return oracle_H(o, q, b); };
    result["compare"] = {{"quantity", F.quantity}, {"x_err", x_norm_error(F, f, inf)}, {"x_stderr", x_norm_stderr(F, inf)}};
  }
  if (writing(opt)) write_text(out_path(opt, "oracle.csv"), csv.str());
  return result;
}

json cmd_verify(const json& cfg, const RunOptions& opt, std::uint64_t seed, bool* all_pass) {
  std::string tier = opt.tier ? *opt.tier : get<std::string>(cfg, "tier", "smoke");
  std::vector<int> ids = tier_criteria(tier);
  if (cfg.contains("criteria")) ids = get<std::vector<int>>(cfg, "criteria", ids);
  VerifyOptions vo;
  vo.tier = tier;
  vo.seed = seed;
  vo.log = opt.log;
  json rows = json::array();
  json failed = json::array();
  *all_pass = true;
  for (int id : ids) {
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r = run_criterion(id, vo);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (opt.log)
      opt.log("criterion " + std::to_string(id) + ": " + (r.pass ? "PASS" : "FAIL") + " (" + r.detail + ") " +
              std::to_string(secs) + " s");
    rows.push_back({{"id", id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}, {"data", r.data}});
    if (!r.pass) {
      *all_pass = false;
      failed.push_back(id);
    }
  }
  return {{"tier", tier}, {"criteria", rows}, {"failed", failed}, {"all_pass", *all_pass}};
}

int exit_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::Config:
    case ErrorKind::Io:
      return kExitConfig;
    default:
      return kExitNumerical;
  }
}

}  // namespace

CommandOutcome run_command(const std::string& command, const json& config, const RunOptions& opt) {
  CommandOutcome out;
  try {
    if (!config.is_object()) fail(ErrorKind::Config, "config must be a JSON object");
    static const std::set<std::string> top = {"version", "nonlinearity", "decouple", "pde",      "spde",
                                              "multipoint", "oracle",    "seed",     "workers", "tier", "criteria"};
    for (auto it = config.begin(); it != config.end(); ++it)
      if (!top.count(it.key())) fail(ErrorKind::Config, "unknown top-level key '" + it.key() + "'");
    if (config.contains("version") && get<int>(config, "version", kConfigVersion) != kConfigVersion)
      fail(ErrorKind::Config, "unsupported config version");
    json resolved = config;
    const std::uint64_t seed = opt.seed ? *opt.seed : get<std::uint64_t>(config, "seed", default_seed());
    resolved["seed"] = seed;
    resolved["command"] = command;
    const int w = opt.workers ? *opt.workers : get<int>(config, "workers", 1);
    require(w >= 0, "workers must be >= 0");
    set_workers(w);
    if (opt.tier) resolved["tier"] = *opt.tier;
    if (writing(opt)) std::filesystem::create_directories(opt.out_dir);

    json result;
    bool pass = true;
    if (command == "decouple") {
      result = cmd_decouple(config, opt, seed);
    } else if (command == "pde") {
      result = cmd_pde(config, opt);
    } else if (command == "spde-onepoint") {
      result = cmd_onepoint(config, opt, seed);
    } else if (command == "spde-multipoint") {
      result = cmd_multipoint(config, opt, seed);
    } else if (command == "oracle") {
      result = cmd_oracle(config, opt);
    } else if (command == "verify") {
      result = cmd_verify(config, opt, seed, &pass);
    } else {
      fail(ErrorKind::Config, "unknown command '" + command + "'");
    }
    resolved.erase("workers");
    out.report = {{"command", command}, {"version", kLibraryVersion}, {"config", resolved}, {"result", result}};
    if (writing(opt)) write_text(out_path(opt, "report.json"), out.report.dump(2) + "\n");
    out.exit_code = pass ? kExitOk : kExitCriterion;
  } catch (const Error& e) {
    out.exit_code = exit_for(e.kind());
    out.error = e.what();
  } catch (const json::exception& e) {
    out.exit_code = kExitConfig;
    out.error = std::string("config: ") + e.what();
  } catch (const std::filesystem::filesystem_error& e) {
    out.exit_code = kExitConfig;
    out.error = e.what();
  } catch (const std::exception& e) {
    out.exit_code = kExitNumerical;
    out.error = e.what();
  }
  return out;
}

}  // namespace decoupler
