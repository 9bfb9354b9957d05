#include "decoupling_field.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "errors.hpp"

namespace decoupler {

DecouplingField::DecouplingField(int nq_, double dq_, int nb_, double b0_, double db_)
    : nq(nq_), dq(dq_), nb(nb_), b0(b0_), db(db_), values(std::size_t(nq_) * nb_, 0.0) {
  require(nq_ >= 1 && nb_ >= 2, "DecouplingField: need nq >= 1 and nb >= 2");
  require(db_ > 0.0, "DecouplingField: db must be positive");
  require(nq_ == 1 || dq_ > 0.0, "DecouplingField: dq must be positive");
}

void DecouplingField::row_at(double qv, double* out) const {
  const double h = horizon();
  if (qv < -1e-12 * (1.0 + h) || qv > h * (1.0 + 1e-12) + 1e-15)
    fail(ErrorKind::Horizon, "DecouplingField: q outside [0, horizon]");
  if (nq == 1) {
    std::copy(values.begin(), values.begin() + nb, out);
    return;
  }
  const double x = std::clamp(qv / dq, 0.0, double(nq - 1));
  int i = std::min(int(x), nq - 2);
  const double t = x - i;
  const double* r0 = &values[std::size_t(i) * nb];
  const double* r1 = r0 + nb;
  if (t == 0.0) {
    std::copy(r0, r0 + nb, out);
    return;
  }
  for (int j = 0; j < nb; ++j) out[j] = r0[j] + t * (r1[j] - r0[j]);
}

double DecouplingField::eval(double qv, double bv) const {
  const double h = horizon();
  if (qv < -1e-12 * (1.0 + h) || qv > h * (1.0 + 1e-12) + 1e-15)
    fail(ErrorKind::Horizon, "DecouplingField: q outside [0, horizon]");
  double x = nq == 1 ? 0.0 : std::clamp(qv / dq, 0.0, double(nq - 1));
  int i = nq == 1 ? 0 : std::min(int(x), nq - 2);
  const double t = x - i;
  const double inv = 1.0 / db;
  const double v0 = interp_row(&values[std::size_t(i) * nb], nb, b0, inv, bv);
  if (t == 0.0 || nq == 1) return v0;
  const double v1 = interp_row(&values[std::size_t(i + 1) * nb], nb, b0, inv, bv);
  return v0 + t * (v1 - v0);
}

void DecouplingField::compute_lipschitz() {
  lipschitz.assign(nq, 0.0);
  for (int i = 0; i < nq; ++i)
    for (int j = 0; j + 1 < nb; ++j) lipschitz[i] = std::max(lipschitz[i], std::abs(at(i, j + 1) - at(i, j)) / db);
}

double DecouplingField::max_stderr() const {
  double s = 0.0;
  for (double v : stderr_values) s = std::max(s, v);
  return s;
}

double x_norm_error(const DecouplingField& F, const std::function<double(double, double)>& f, double b_window) {
  double worst = 0.0;
  for (int i = 0; i < F.nq; ++i)
    for (int j = 0; j < F.nb; ++j) {
      const double b = F.b(j);
      if (std::abs(b) > b_window) continue;
      worst = std::max(worst, std::abs(F.at(i, j) - f(F.q(i), b)) / japanese(b));
    }
  return worst;
}

double x_norm_stderr(const DecouplingField& F, double b_window) {
  double worst = 0.0;
  for (int i = 0; i < F.nq; ++i)
    for (int j = 0; j < F.nb; ++j) {
      const double b = F.b(j);
      if (std::abs(b) > b_window) continue;
      worst = std::max(worst, F.se(i, j) / japanese(b));
    }
  return worst;
}

GridDiffusivity::GridDiffusivity(std::shared_ptr<const DecouplingField> f) : f_(std::move(f)) {
  require(f_ && f_->quantity == "J", "GridDiffusivity: field must hold J");
}

double GridDiffusivity::lipschitz_bound() const {
  double l = 0.0;
  if (f_->lipschitz.empty()) return std::numeric_limits<double>::infinity();
  for (double v : f_->lipschitz) l = std::max(l, v);
  return l;
}

void save_field(const std::string& path, const DecouplingField& f) {
  nlohmann::json h;
  h["format"] = "decoupler-field";
  h["version"] = 1;
  h["quantity"] = f.quantity;
  h["provenance"] = f.provenance;
  h["horizon"] = f.horizon();
  h["nq"] = f.nq;
  h["dq"] = f.dq;
  h["nb"] = f.nb;
  h["b0"] = f.b0;
  h["db"] = f.db;
  h["lipschitz"] = f.lipschitz;
  h["qbar_lower"] = std::isnan(f.qbar_lower) ? nlohmann::json(nullptr) : nlohmann::json(f.qbar_lower);
  h["has_stderr"] = !f.stderr_values.empty();
  h["endianness"] = "little";
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "cannot open " + path);
  os << h.dump() << "\n";
  os.write(reinterpret_cast<const char*>(f.values.data()), std::streamsize(f.values.size() * sizeof(double)));
  if (!f.stderr_values.empty())
    os.write(reinterpret_cast<const char*>(f.stderr_values.data()),
             std::streamsize(f.stderr_values.size() * sizeof(double)));
}

DecouplingField load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "cannot open " + path);
  std::string line;
  std::getline(is, line);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const std::exception& e) {
    fail(ErrorKind::Io, path + ": bad field header: " + e.what());
  }
  if (h.value("format", "") != "decoupler-field" || h.value("version", 0) != 1)
    fail(ErrorKind::Io, path + ": unsupported field container");
  DecouplingField f(h.at("nq").get<int>(), h.at("dq").get<double>(), h.at("nb").get<int>(), h.at("b0").get<double>(),
                    h.at("db").get<double>());
  f.quantity = h.value("quantity", "J");
  f.provenance = h.value("provenance", "");
  f.lipschitz = h.value("lipschitz", std::vector<double>{});
  if (!h["qbar_lower"].is_null()) f.qbar_lower = h["qbar_lower"].get<double>();
  is.read(reinterpret_cast<char*>(f.values.data()), std::streamsize(f.values.size() * sizeof(double)));
  if (h.value("has_stderr", false)) {
    f.stderr_values.resize(f.values.size());
    is.read(reinterpret_cast<char*>(f.stderr_values.data()), std::streamsize(f.stderr_values.size() * sizeof(double)));
  }
  if (!is) fail(ErrorKind::Io, path + ": truncated field container");
  return f;
}

}  // namespace decoupler
