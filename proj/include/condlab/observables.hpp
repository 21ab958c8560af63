#pragma once

// Cluster-scale formulas, size-biased tail curves (empirical and limiting),
// accumulated profiles, maximum-cluster statistics, and phase classification.

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "condlab/model.hpp"
#include "condlab/numerics.hpp"
#include "condlab/partition.hpp"
#include "condlab/sampler.hpp"

namespace condlab {

// Self-consistent finite-size background density: condensate sites of scale C
// expose the bulk to an effective fugacity exp(-1/C), so the background density
// solves rho_b = R(exp(-1/C(rho_b))) with C the cluster scale computed at rho_b.
// Below the critical density (or without perturbation) there is no condensate
// and no correction.
inline double finite_size_rho_c(const ModelSpec& m) {
  double rc = m.bulk().rho_c();
  if (!(m.pert().theta > 0.0) || !(m.rho() > rc)) return rc;
  const PerturbationParams& p = m.pert();
  for (int it = 0; it < 300; ++it) {
    double c = p.gamma < p.kappa + 2.0 ? cluster_scale_with(m, rc)
                                       : (m.rho() - rc) * static_cast<double>(m.L());
    double next = m.bulk().R(std::exp(-1.0 / c));
    if (std::abs(next - rc) < 1e-13) return next;
    rc = next;
  }
  return rc;
}

// Typical cluster scale C_L = ((rho - rho_c) L^gamma / (theta Gamma(kappa+2)))^{1/(kappa+2)};
// corrected mode replaces rho_c by the finite-size background density.
inline double cluster_scale(const ModelSpec& m, bool corrected) {
  double rc = corrected ? finite_size_rho_c(m) : m.bulk().rho_c();
  return cluster_scale_with(m, rc);
}

struct TailCurve {
  std::vector<double> s_grid;
  std::vector<double> empirical;    // may be empty when only the limit curve is wanted
  std::vector<double> theoretical;  // may be empty when only data is wanted
  double c_scale = 0.0;
  double mixture_weight = 0.0;
  bool corrected = false;
  i64 n_realizations = 0;
};

inline std::vector<double> default_s_grid() {
  std::vector<double> grid;
  grid.reserve(121);
  for (int k = 0; k <= 120; ++k) grid.push_back(0.05 * k);
  return grid;
}

// Empirical size-biased tail pi_bar(s) = (1/N) sum_x eta_x 1{eta_x > C s},
// averaged over realizations (accumulated in realization order, compensated).
inline std::vector<double> empirical_tail(const std::vector<Configuration>& configs,
                                          double c_scale, const std::vector<double>& s_grid) {
  if (configs.empty()) throw std::invalid_argument("empirical_tail: no configurations");
  if (!(c_scale > 0.0)) throw std::invalid_argument("empirical_tail: need C > 0");
  const i64 L = configs.front().L();
  const i64 N = configs.front().total;
  for (const auto& cfg : configs)
    if (cfg.L() != L || cfg.total != N)
      throw std::invalid_argument("empirical_tail: configurations disagree on (L, N)");
  std::vector<CompensatedSum> acc(s_grid.size());
  std::vector<i64> sorted;
  for (const auto& cfg : configs) {
    if (N == 0) continue;
    sorted = cfg.occupations;
    std::sort(sorted.begin(), sorted.end());
    // suffix mass above each sorted position
    std::vector<double> suffix(sorted.size() + 1, 0.0);
    for (size_t i = sorted.size(); i > 0; --i)
      suffix[i - 1] = suffix[i] + static_cast<double>(sorted[i - 1]);
    for (size_t k = 0; k < s_grid.size(); ++k) {
      // occupations are integers: eta > C*s iff eta >= floor(C*s) + 1
      i64 threshold = static_cast<i64>(c_scale * s_grid[k]);
      auto it = std::upper_bound(sorted.begin(), sorted.end(), threshold);
      acc[k].add(suffix[static_cast<size_t>(it - sorted.begin())] / static_cast<double>(N));
    }
  }
  std::vector<double> out(s_grid.size());
  for (size_t k = 0; k < s_grid.size(); ++k)
    out[k] = acc[k].value() / static_cast<double>(configs.size());
  return out;
}

// Limiting size-biased tail in the mesoscopic regime: an atom at 0 of mass
// rho_c/rho plus Gamma(kappa+2, 1) on scale C_L, i.e. value(s) =
// ((rho - rho_c)/rho) * Q(kappa+2, s). Corrected mode substitutes the
// finite-size background density in both the mixture weight and C_L.
inline TailCurve theoretical_tail(const ModelSpec& m, const std::vector<double>& s_grid,
                                  bool corrected) {
  detail::require_supercritical(m, "theoretical_tail");
  detail::require_mesoscopic_exponents(m, "theoretical_tail");
  double rc = corrected ? finite_size_rho_c(m) : m.bulk().rho_c();
  TailCurve curve;
  curve.s_grid = s_grid;
  curve.corrected = corrected;
  curve.c_scale = cluster_scale_with(m, rc);
  curve.mixture_weight = (m.rho() - rc) / m.rho();
  curve.theoretical.reserve(s_grid.size());
  for (double s : s_grid) {
    if (!(s >= 0.0)) throw std::invalid_argument("theoretical_tail: grid values must be >= 0");
    curve.theoretical.push_back(curve.mixture_weight * gamma_q(m.pert().kappa + 2.0, s));
  }
  return curve;
}

// Limiting tail in the macroscopic regime (gamma > kappa+2 > 1): a single cluster
// of mass (rho - rho_c) L, i.e. a step of height (rho - rho_c)/rho on scale
// C = (rho - rho_c) L dropping to 0 at s = 1.
inline TailCurve theoretical_tail_macroscopic(const ModelSpec& m,
                                              const std::vector<double>& s_grid, bool corrected) {
  detail::require_supercritical(m, "theoretical_tail_macroscopic");
  const PerturbationParams& p = m.pert();
  if (!(p.gamma > p.kappa + 2.0))
    throw std::domain_error("theoretical_tail_macroscopic requires gamma > kappa + 2");
  double rc = corrected ? finite_size_rho_c(m) : m.bulk().rho_c();
  TailCurve curve;
  curve.s_grid = s_grid;
  curve.corrected = corrected;
  curve.c_scale = (m.rho() - rc) * static_cast<double>(m.L());
  curve.mixture_weight = (m.rho() - rc) / m.rho();
  curve.theoretical.reserve(s_grid.size());
  for (double s : s_grid) curve.theoretical.push_back(s < 1.0 ? curve.mixture_weight : 0.0);
  return curve;
}

inline double max_cluster_fraction(const Configuration& cfg) {
  if (cfg.L() < 1) throw std::invalid_argument("max_cluster_fraction: empty configuration");
  i64 mx = *std::max_element(cfg.occupations.begin(), cfg.occupations.end());
  return static_cast<double>(mx) / static_cast<double>(cfg.L());
}

// Accumulated profile H(k) = sum_{x <= k} eta_x for k = 1..L; H(L) = N.
inline std::vector<i64> accumulated_profile(const Configuration& cfg) {
  std::vector<i64> h(cfg.occupations.size());
  i64 run = 0;
  for (size_t x = 0; x < cfg.occupations.size(); ++x) {
    run += cfg.occupations[x];
    h[x] = run;
  }
  return h;
}

// Least-squares slope of the accumulated profile pooled over jump-free stretches;
// a jump is a site with occupation above the threshold (default 5 * rho).
inline double bulk_profile_slope(const Configuration& cfg, double jump_threshold = -1.0) {
  const i64 L = cfg.L();
  if (L < 1) throw std::invalid_argument("bulk_profile_slope: empty configuration");
  if (jump_threshold < 0.0)
    jump_threshold = 5.0 * static_cast<double>(cfg.total) / static_cast<double>(L);
  std::vector<i64> h = accumulated_profile(cfg);
  double num = 0.0, den = 0.0;
  i64 start = 0;
  auto flush = [&](i64 begin, i64 end) {  // fit H(k) on sites begin..end-1 (0-based)
    i64 len = end - begin;
    if (len < 2) return;
    double mean_k = 0.0, mean_h = 0.0;
    for (i64 x = begin; x < end; ++x) {
      mean_k += static_cast<double>(x);
      mean_h += static_cast<double>(h[static_cast<size_t>(x)]);
    }
    mean_k /= static_cast<double>(len);
    mean_h /= static_cast<double>(len);
    for (i64 x = begin; x < end; ++x) {
      double dk = static_cast<double>(x) - mean_k;
      num += dk * (static_cast<double>(h[static_cast<size_t>(x)]) - mean_h);
      den += dk * dk;
    }
  };
  for (i64 x = 0; x < L; ++x) {
    if (static_cast<double>(cfg.occupations[static_cast<size_t>(x)]) > jump_threshold) {
      flush(start, x);
      start = x + 1;
    }
  }
  flush(start, L);
  if (den == 0.0)
    throw std::domain_error("bulk_profile_slope: no jump-free stretch of length >= 2");
  return num / den;
}

// ----- phase classification -----

enum class Regime { Subcritical, MesoscopicClusters, SingleMacroscopicCluster, TransitionLine };

struct PhaseReport {
  Regime regime = Regime::Subcritical;
  double c_scale = 0.0;
  double mixture_weight = 0.0;
  std::string limit_law;  // description of the applicable limiting statement
};

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Subcritical: return "Subcritical";
    case Regime::MesoscopicClusters: return "MesoscopicClusters";
    case Regime::SingleMacroscopicCluster: return "SingleMacroscopicCluster";
    case Regime::TransitionLine: return "TransitionLine";
  }
  return "?";
}

inline PhaseReport classify_phase(const ModelSpec& m) {
  const PerturbationParams& p = m.pert();
  if (!(p.kappa > -1.0))
    throw std::domain_error("classify_phase requires kappa > -1");
  if (!(p.gamma > 0.0)) throw std::domain_error("classify_phase requires gamma > 0");
  PhaseReport rep;
  double rho = m.rho(), rc = m.bulk().rho_c();
  rep.mixture_weight = rho > rc ? (rho - rc) / rho : 0.0;
  if (!(rho > rc)) {
    rep.regime = Regime::Subcritical;
    rep.c_scale = 0.0;
    rep.limit_law = "single-site marginals converge to the tilted bulk law at the matching "
                    "fugacity; no condensate";
    return rep;
  }
  if (p.gamma < p.kappa + 2.0) {
    rep.regime = Regime::MesoscopicClusters;
    rep.c_scale = cluster_scale_with(m, rc);
    rep.limit_law = "size-biased cluster sizes on scale C_L converge to an atom at 0 plus "
                    "Gamma(kappa+2, 1)";
  } else if (p.gamma > p.kappa + 2.0) {
    rep.regime = Regime::SingleMacroscopicCluster;
    rep.c_scale = (rho - rc) * static_cast<double>(m.L());
    rep.limit_law = "the maximum occupation carries the whole excess: max_x eta_x / L -> "
                    "rho - rho_c";
  } else {
    rep.regime = Regime::TransitionLine;
    rep.c_scale = cluster_scale_with(m, rc);
    rep.limit_law = "none: boundary case gamma = kappa + 2; a hierarchical cluster structure "
                    "(Poisson-Dirichlet type) is conjectured but unsupported here";
  }
  return rep;
}

// Sup-distance between two curves on identical grids, plus the same statistic
// with the first grid point excluded (the s = 0 endpoint is degenerate for
// empirical tails).
inline std::pair<double, double> curve_distance(const std::vector<double>& s_a,
                                                const std::vector<double>& a,
                                                const std::vector<double>& s_b,
                                                const std::vector<double>& b) {
  if (s_a != s_b) throw std::invalid_argument("curve_distance: grids differ");
  if (a.size() != s_a.size() || b.size() != s_b.size())
    throw std::invalid_argument("curve_distance: curve/grid size mismatch");
  double sup_all = 0.0, sup_tail = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    double d = std::abs(a[k] - b[k]);
    sup_all = std::max(sup_all, d);
    if (k >= 1) sup_tail = std::max(sup_tail, d);
  }
  return {sup_all, sup_tail};
}

// Distance between a curve's own empirical and theoretical columns.
inline std::pair<double, double> curve_distance(const TailCurve& curve) {
  return curve_distance(curve.s_grid, curve.empirical, curve.s_grid, curve.theoretical);
}

// Exact size-biased first-value law from the partition table:
// P[first = n] = (L/N) n w_L(n) Z_{L-1,N-n} / Z_{L,N}, n = 0..N.
inline std::vector<double> size_biased_first_exact(const ModelSpec& m,
                                                   const LogPartitionTable& table) {
  if (table.model_hash() != m.hash())
    throw std::invalid_argument("size_biased_first_exact: table/model mismatch");
  if (m.N() < 1) throw std::domain_error("size_biased_first_exact: requires N >= 1");
  std::vector<double> out(static_cast<size_t>(m.N()) + 1, 0.0);
  double log_pref = std::log(static_cast<double>(m.L()) / static_cast<double>(m.N()));
  double log_z = table.at(m.L(), m.N());
  for (i64 n = 1; n <= m.N(); ++n)
    out[static_cast<size_t>(n)] =
        std::exp(log_pref + std::log(static_cast<double>(n)) + m.log_perturbed_pmf(n) +
                 table.at(m.L() - 1, m.N() - n) - log_z);
  return out;
}

inline void write_tail_csv(std::ostream& os, const TailCurve& curve) {
  os << "s,empirical,theoretical,n_realizations\n";
  char buf[96];
  for (size_t k = 0; k < curve.s_grid.size(); ++k) {
    double emp = k < curve.empirical.size() ? curve.empirical[k] : 0.0;
    double the = k < curve.theoretical.size() ? curve.theoretical[k] : 0.0;
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%lld\n", curve.s_grid[k], emp, the,
                  static_cast<long long>(curve.n_realizations));
    os << buf;
  }
}

}  // namespace condlab
