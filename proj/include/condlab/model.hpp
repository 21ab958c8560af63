#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "condlab/numerics.hpp"

namespace condlab {

enum class BulkFamily { Geometric, Table };

// Normalized bulk occupation weights w with a geometric tail, so the
// generating function z(phi) = sum_n w(n) phi^n has radius phi_bar = 1/p > 1
// and all tilted moments below have exact closed forms.
class BulkWeights {
 public:
  static BulkWeights geometric(double p) {
    if (!(p > 0.0 && p < 1.0))
      throw std::domain_error("BulkWeights::geometric: p must lie in (0,1)");
    BulkWeights b;
    b.family_ = BulkFamily::Geometric;
    b.p_ = p;
    b.rho_c_ = p / (1.0 - p);
    return b;
  }

  // Explicit head w_0..w_K; beyond the table w(n) = w_K * tail_ratio^(n-K).
  // Weights are normalized at construction.
  static BulkWeights table(std::vector<double> weights, double tail_ratio) {
    if (weights.empty()) throw std::domain_error("BulkWeights::table: empty table");
    if (!(tail_ratio > 0.0 && tail_ratio < 1.0))
      throw std::domain_error("BulkWeights::table: tail_ratio must lie in (0,1)");
    for (double w : weights)
      if (!(w > 0.0)) throw std::domain_error("BulkWeights::table: weights must be positive");
    BulkWeights b;
    b.family_ = BulkFamily::Table;
    b.p_ = tail_ratio;
    b.table_ = std::move(weights);
    double total = b.z(1.0);
    for (double& w : b.table_) w /= total;
    b.rho_c_ = b.moment1(1.0);
    return b;
  }

  BulkFamily family() const { return family_; }
  double p() const { return p_; }
  double phi_bar() const { return 1.0 / p_; }
  double rho_c() const { return rho_c_; }
  const std::vector<double>& head() const { return table_; }

  double pmf(i64 n) const {
    if (n < 0) return 0.0;
    if (family_ == BulkFamily::Geometric)
      return (1.0 - p_) * std::pow(p_, static_cast<double>(n));
    i64 k = static_cast<i64>(table_.size()) - 1;
    if (n <= k) return table_[static_cast<size_t>(n)];
    return table_.back() * std::pow(p_, static_cast<double>(n - k));
  }

  double log_pmf(i64 n) const {
    if (n < 0) return kLogZero;
    if (family_ == BulkFamily::Geometric)
      return std::log1p(-p_) + static_cast<double>(n) * std::log(p_);
    i64 k = static_cast<i64>(table_.size()) - 1;
    if (n <= k) return std::log(table_[static_cast<size_t>(n)]);
    return std::log(table_.back()) + static_cast<double>(n - k) * std::log(p_);
  }

  // z(phi) = sum w(n) phi^n, exact for 0 <= phi < phi_bar.
  double z(double phi) const {
    check_tilt(phi);
    if (family_ == BulkFamily::Geometric) return (1.0 - p_) / (1.0 - p_ * phi);
    double s = 0.0, pw = 1.0;
    i64 k = static_cast<i64>(table_.size()) - 1;
    for (i64 n = 0; n <= k; ++n, pw *= phi) s += table_[static_cast<size_t>(n)] * pw;
    double y = p_ * phi;
    // pw now holds phi^(k+1); tail = w_K phi^K y/(1-y).
    return s + table_.back() * (pw / (phi == 0.0 ? 1.0 : phi)) * y / (1.0 - y);
  }

  // sum n w(n) phi^n
  double moment1(double phi) const {
    check_tilt(phi);
    if (family_ == BulkFamily::Geometric) {
      double x = p_ * phi;
      return (1.0 - p_) * x / ((1.0 - x) * (1.0 - x));
    }
    double s = 0.0, pw = 1.0;
    i64 k = static_cast<i64>(table_.size()) - 1;
    for (i64 n = 0; n <= k; ++n, pw *= phi) s += static_cast<double>(n) * table_[static_cast<size_t>(n)] * pw;
    double y = p_ * phi;
    double phiK = std::pow(phi, static_cast<double>(k));
    double g1 = y / (1.0 - y);
    double g2 = y / ((1.0 - y) * (1.0 - y));
    return s + table_.back() * phiK * (static_cast<double>(k) * g1 + g2);
  }

  // sum n^2 w(n) phi^n
  double moment2(double phi) const {
    check_tilt(phi);
    if (family_ == BulkFamily::Geometric) {
      double x = p_ * phi;
      return (1.0 - p_) * x * (1.0 + x) / ((1.0 - x) * (1.0 - x) * (1.0 - x));
    }
    double s = 0.0, pw = 1.0;
    i64 k = static_cast<i64>(table_.size()) - 1;
    for (i64 n = 0; n <= k; ++n, pw *= phi)
      s += static_cast<double>(n) * static_cast<double>(n) * table_[static_cast<size_t>(n)] * pw;
    double y = p_ * phi;
    double phiK = std::pow(phi, static_cast<double>(k));
    double kk = static_cast<double>(k);
    double g1 = y / (1.0 - y);
    double g2 = y / ((1.0 - y) * (1.0 - y));
    double g3 = y * (1.0 + y) / ((1.0 - y) * (1.0 - y) * (1.0 - y));
    return s + table_.back() * phiK * (kk * kk * g1 + 2.0 * kk * g2 + g3);
  }

  // R(phi) = mean occupation under the phi-tilted single-site law.
  double R(double phi) const {
    if (phi == 0.0) return 0.0;
    return moment1(phi) / z(phi);
  }

  double tilted_var(double phi) const {
    double zz = z(phi);
    double m1 = moment1(phi) / zz;
    return moment2(phi) / zz - m1 * m1;
  }

 private:
  void check_tilt(double phi) const {
    if (!(phi >= 0.0) || !(p_ * phi < 1.0))
      throw std::domain_error("BulkWeights: tilt phi outside [0, phi_bar)");
  }

  BulkFamily family_ = BulkFamily::Geometric;
  double p_ = 0.5;
  double rho_c_ = 1.0;
  std::vector<double> table_;
};

// Size-dependent perturbation theta * L^-gamma * (n+1)^kappa * (1 + delta(n)).
// theta = 0 and kappa = -1 are accepted as documented boundary cases (the
// unperturbed limit and the qualitative single-condensate experiment).
struct PerturbationParams {
  double theta;
  double gamma;
  double kappa;
  std::function<double(i64)> delta;  // bounded nuisance, default zero
  double delta_bound;

  PerturbationParams(double theta_, double gamma_, double kappa_,
                     std::function<double(i64)> delta_ = nullptr,
                     double delta_bound_ = 0.0)
      : theta(theta_), gamma(gamma_), kappa(kappa_), delta(std::move(delta_)),
        delta_bound(delta_bound_) {
    if (!(theta >= 0.0)) throw std::domain_error("PerturbationParams: theta must be >= 0");
    if (!(gamma > 0.0)) throw std::domain_error("PerturbationParams: gamma must be > 0");
    if (!(kappa >= -1.0)) throw std::domain_error("PerturbationParams: kappa must be >= -1");
    if (!(delta_bound >= 0.0 && delta_bound < 1.0))
      throw std::domain_error("PerturbationParams: delta_bound must lie in [0,1)");
    if (delta_bound > 0.0 && !delta)
      throw std::domain_error("PerturbationParams: delta_bound declared without delta");
  }

  double delta_at(i64 n) const { return delta ? delta(n) : 0.0; }
};

class ModelSpec {
 public:
  ModelSpec(BulkWeights bulk, PerturbationParams pert, i64 L, i64 N)
      : bulk_(std::move(bulk)), pert_(std::move(pert)), L_(L), N_(N) {
    if (L_ < 1) throw std::domain_error("ModelSpec: L must be >= 1");
    if (N_ < 0) throw std::domain_error("ModelSpec: N must be >= 0");
    amp_ = pert_.theta * std::pow(static_cast<double>(L_), -pert_.gamma);
    for (i64 n = 0; n <= N_; ++n)
      if (!(perturbed_pmf(n) > 0.0))
        throw std::domain_error("ModelSpec: perturbed weight not positive at n=" +
                                std::to_string(n));
  }

  const BulkWeights& bulk() const { return bulk_; }
  const PerturbationParams& pert() const { return pert_; }
  i64 L() const { return L_; }
  i64 N() const { return N_; }
  double rho() const { return static_cast<double>(N_) / static_cast<double>(L_); }

  // theta * L^-gamma
  double pert_amplitude() const { return amp_; }

  double bulk_pmf(i64 n) const { return bulk_.pmf(n); }

  double perturbed_pmf(i64 n) const {
    if (n < 0) return 0.0;
    double w = bulk_.pmf(n);
    if (pert_.theta == 0.0) return w;
    return w + amp_ * std::pow(static_cast<double>(n) + 1.0, pert_.kappa) *
                   (1.0 + pert_.delta_at(n));
  }

  // Exact in log space even where the bulk part underflows.
  double log_perturbed_pmf(i64 n) const {
    if (n < 0) return kLogZero;
    double lb = bulk_.log_pmf(n);
    if (pert_.theta == 0.0) return lb;
    double lp = std::log(pert_.theta) - pert_.gamma * std::log(static_cast<double>(L_)) +
                pert_.kappa * std::log(static_cast<double>(n) + 1.0) +
                std::log1p(pert_.delta_at(n));
    return log_add(lb, lp);
  }

  u64 hash() const;

 private:
  BulkWeights bulk_;
  PerturbationParams pert_;
  i64 L_;
  i64 N_;
  double amp_;
};

namespace detail {

inline void hash_mix(u64& h, u64 v) {
  h ^= v;
  h *= 0x100000001B3ull;
}

inline u64 dbits(double x) { return std::bit_cast<u64>(x); }

}  // namespace detail

inline u64 ModelSpec::hash() const {
  u64 h = 0xCBF29CE484222325ull;
  detail::hash_mix(h, bulk_.family() == BulkFamily::Geometric ? 0x47u : 0x54u);
  detail::hash_mix(h, detail::dbits(bulk_.p()));
  for (double w : bulk_.head()) detail::hash_mix(h, detail::dbits(w));
  detail::hash_mix(h, detail::dbits(pert_.theta));
  detail::hash_mix(h, detail::dbits(pert_.gamma));
  detail::hash_mix(h, detail::dbits(pert_.kappa));
  detail::hash_mix(h, pert_.delta ? 1u : 0u);
  detail::hash_mix(h, static_cast<u64>(L_));
  detail::hash_mix(h, static_cast<u64>(N_));
  return h;
}

// Grand-canonical summary at tilt phi. The size-dependent pair diverges at
// phi = 1 (kappa > -1 makes the perturbation series non-summable), so z_L
// and R_L are absent there and the accessors say where to go instead.
struct GrandCanonical {
  double z;
  double R;
  std::optional<double> z_L_opt;
  std::optional<double> R_L_opt;

  double z_L() const {
    if (!z_L_opt)
      throw std::domain_error(
          "z_L diverges at phi = 1; use truncated_rho_c for a finite-size density");
    return *z_L_opt;
  }
  double R_L() const {
    if (!R_L_opt)
      throw std::domain_error(
          "R_L diverges at phi = 1; use truncated_rho_c for a finite-size density");
    return *R_L_opt;
  }
};

namespace detail {

// sum_n (n+1)^kappa phi^n (1+delta(n)) * n^power for power in {0,1}.
// Stops once the geometric tail bound falls below 1e-14 of the partial sum.
inline double perturbation_series(const PerturbationParams& pert, double phi, int power) {
  if (phi == 0.0) return power == 0 ? 1.0 + pert.delta_at(0) : 0.0;
  double s = 0.0;
  double phin = 1.0;
  double b = pert.delta_bound;
  for (i64 n = 0;; ++n, phin *= phi) {
    double np1 = static_cast<double>(n) + 1.0;
    double base = std::pow(np1, pert.kappa) * phin;
    s += base * (1.0 + pert.delta_at(n)) * (power == 0 ? 1.0 : static_cast<double>(n));
    if (n >= 8) {
      double q = phi;
      if (pert.kappa > 0.0) q *= std::pow((np1 + 1.0) / np1, pert.kappa);
      if (power == 1) q *= np1 / (np1 - 1.0);
      if (q < 1.0) {
        double head = base * (1.0 + b) * (power == 0 ? 1.0 : np1);
        double tail = head * q / (1.0 - q);
        if (tail < 1e-14 * s) return s;
      }
    }
    if (n > 100000000)
      throw std::runtime_error("perturbation_series: no convergence (phi too close to 1)");
  }
}

}  // namespace detail

inline GrandCanonical grand_canonical(const ModelSpec& m, double phi) {
  if (!(phi >= 0.0 && phi <= 1.0))
    throw std::domain_error("grand_canonical: phi must lie in [0,1]");
  GrandCanonical g;
  g.z = m.bulk().z(phi);
  g.R = m.bulk().R(phi);
  if (phi == 1.0 && m.pert().theta > 0.0) return g;
  if (m.pert().theta == 0.0) {
    g.z_L_opt = g.z;
    g.R_L_opt = g.R;
    return g;
  }
  double amp = m.pert_amplitude();
  double s0 = detail::perturbation_series(m.pert(), phi, 0);
  double s1 = detail::perturbation_series(m.pert(), phi, 1);
  double zl = g.z + amp * s0;
  g.z_L_opt = zl;
  g.R_L_opt = (m.bulk().moment1(phi) + amp * s1) / zl;
  return g;
}

// Inverse of the bulk density R on [0, rho_c]; exactly 1 beyond criticality.
inline double invert_density(const BulkWeights& bulk, double rho) {
  if (!(rho >= 0.0)) throw std::domain_error("invert_density: rho must be >= 0");
  if (rho == 0.0) return 0.0;
  if (rho > bulk.rho_c()) return 1.0;
  auto f = [&bulk](double phi) { return bulk.R(phi); };
  return bisect_increasing(f, 0.0, 1.0 - 1e-13, rho, 1e-17, 1e-13);
}

// Inverse of R over the full tilt range [0, phi_bar); used by the rate
// function, where supercritical densities need tilts beyond 1.
inline double invert_density_extended(const BulkWeights& bulk, double u) {
  if (!(u >= 0.0)) throw std::domain_error("invert_density_extended: u must be >= 0");
  if (u == 0.0) return 0.0;
  double hi = bulk.phi_bar() * (1.0 - 1e-13);
  if (bulk.R(hi) < u)
    throw std::runtime_error(
        "invert_density_extended: tilt saturation, u beyond representable range");
  auto f = [&bulk](double phi) { return bulk.R(phi); };
  return bisect_increasing(f, 0.0, hi, u, 1e-17, 1e-12 * std::max(1.0, u));
}

// Finite cutoff mean of the perturbed weights:
// sum_{n<=cutoff} n w_L(n) / sum_{n<=cutoff} w_L(n).
inline double truncated_rho_c(const ModelSpec& m, i64 cutoff) {
  if (cutoff < 0) throw std::domain_error("truncated_rho_c: cutoff must be >= 0");
  CompensatedSum num, den;
  for (i64 n = 0; n <= cutoff; ++n) {
    double w = m.perturbed_pmf(n);
    num.add(static_cast<double>(n) * w);
    den.add(w);
  }
  return num.value() / den.value();
}

// --- model files -----------------------------------------------------------
//
// Plain key=value text. Keys:
//   bulk.family   geometric | table
//   bulk.p        geometric parameter (family geometric)
//   bulk.weights  comma-separated head weights (family table)
//   bulk.tail_ratio  geometric tail ratio (family table)
//   pert.theta, pert.gamma, pert.kappa
//   system.L, system.N
// '#' starts a comment; blank lines ignored.

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("model file: bad numeric value for " + key + ": '" + v + "'");
  }
}

inline i64 parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return static_cast<i64>(x);
  } catch (const std::exception&) {
    throw std::invalid_argument("model file: bad integer value for " + key + ": '" + v + "'");
  }
}

}  // namespace detail

inline ModelSpec parse_model_spec(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = detail::trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("model file: expected key=value, got '" + line + "'");
    std::string key = detail::trim(line.substr(0, eq));
    std::string val = detail::trim(line.substr(eq + 1));
    if (kv.count(key)) throw std::invalid_argument("model file: duplicate key " + key);
    kv[key] = val;
  }
  static const char* known[] = {"bulk.family", "bulk.p",          "bulk.weights",
                                "bulk.tail_ratio", "pert.theta",  "pert.gamma",
                                "pert.kappa",  "system.L",        "system.N"};
  for (const auto& [k, v] : kv) {
    bool ok = false;
    for (const char* name : known) ok = ok || (k == name);
    if (!ok) throw std::invalid_argument("model file: unknown key " + k);
  }
  auto need = [&kv](const std::string& key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument("model file: missing key " + key);
    return it->second;
  };

  std::string family = need("bulk.family");
  BulkWeights bulk = BulkWeights::geometric(0.5);
  if (family == "geometric") {
    bulk = BulkWeights::geometric(detail::parse_double("bulk.p", need("bulk.p")));
  } else if (family == "table") {
    std::vector<double> ws;
    std::stringstream ss(need("bulk.weights"));
    std::string item;
    while (std::getline(ss, item, ','))
      ws.push_back(detail::parse_double("bulk.weights", detail::trim(item)));
    bulk = BulkWeights::table(std::move(ws),
                              detail::parse_double("bulk.tail_ratio", need("bulk.tail_ratio")));
  } else {
    throw std::invalid_argument("model file: bulk.family must be geometric or table");
  }

  PerturbationParams pert(detail::parse_double("pert.theta", need("pert.theta")),
                          detail::parse_double("pert.gamma", need("pert.gamma")),
                          detail::parse_double("pert.kappa", need("pert.kappa")));
  i64 L = detail::parse_int("system.L", need("system.L"));
  i64 N = detail::parse_int("system.N", need("system.N"));
  return ModelSpec(std::move(bulk), std::move(pert), L, N);
}

inline ModelSpec load_model_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open model file: " + path);
  return parse_model_spec(in);
}

// Typical cluster scale C_L = ((rho - rho_c_eff) L^gamma / (theta Gamma(kappa+2)))^(1/(kappa+2))
// for a caller-supplied effective critical density.
inline double cluster_scale_with(const ModelSpec& m, double rho_c_eff) {
  if (!(m.pert().theta > 0.0))
    throw std::domain_error("cluster scale undefined for theta = 0");
  if (!(m.rho() > rho_c_eff))
    throw std::domain_error("cluster scale requires rho > rho_c (rho = " +
                            std::to_string(m.rho()) + ", rho_c = " +
                            std::to_string(rho_c_eff) + ")");
  double k2 = m.pert().kappa + 2.0;
  return std::pow((m.rho() - rho_c_eff) * std::pow(static_cast<double>(m.L()), m.pert().gamma) /
                      (m.pert().theta * std::tgamma(k2)),
                  1.0 / k2);
}

}  // namespace condlab
