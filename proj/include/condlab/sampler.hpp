#pragma once

// Sampling from the canonical measure: an exact sequential sampler driven by the
// partition table, a continuous-time zero-range MCMC sampler, the size-biased
// site reordering, and validity checks for general pair-interaction kernels.

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "condlab/model.hpp"
#include "condlab/numerics.hpp"
#include "condlab/partition.hpp"
#include "condlab/rng.hpp"

namespace condlab {

struct Configuration {
  std::vector<i64> occupations;
  i64 total = 0;

  i64 L() const { return static_cast<i64>(occupations.size()); }
};

inline Configuration make_configuration(std::vector<i64> occ) {
  Configuration cfg;
  cfg.occupations = std::move(occ);
  cfg.total = 0;
  for (i64 v : cfg.occupations) {
    if (v < 0) throw std::invalid_argument("occupations must be nonnegative");
    cfg.total += v;
  }
  return cfg;
}

// Exact draw from the canonical measure: site j is drawn from its conditional law
// P[eta_j = n | l sites and m particles remain] = w_L(n) Z_{l-1,m-n} / Z_{l,m},
// then the remainder recurses; the last site takes what is left.
inline Configuration direct_sample(const ModelSpec& model, const LogPartitionTable& table,
                                   RngStream& rng) {
  if (table.model_hash() != model.hash())
    throw std::invalid_argument("direct_sample: table was built for a different model");
  if (table.L_max() < model.L() || table.N_max() < model.N())
    throw std::invalid_argument("direct_sample: table extents below (L, N)");
  Configuration cfg;
  cfg.occupations.assign(static_cast<size_t>(model.L()), 0);
  cfg.total = model.N();
  i64 m = model.N();
  for (i64 l = model.L(); l >= 1; --l) {
    size_t slot = static_cast<size_t>(model.L() - l);
    if (l == 1) {
      cfg.occupations[slot] = m;
      break;
    }
    double log_denom = table.at(l, m);
    double u = rng.next_double();
    double acc = 0.0;
    i64 pick = m, last_positive = 0;
    for (i64 n = 0; n <= m; ++n) {
      double p = std::exp(model.log_perturbed_pmf(n) + table.at(l - 1, m - n) - log_denom);
      if (p > 0.0) last_positive = n;
      acc += p;
      if (u < acc) {
        pick = n;
        break;
      }
      if (n == m) pick = last_positive;  // acc fell short of 1 by roundoff
    }
    cfg.occupations[slot] = pick;
    m -= pick;
  }
  return cfg;
}

// Size-biased reordering: repeatedly pick a remaining site with probability
// proportional to its occupation (integer-exact via next_below on the remaining
// mass); once the mass is exhausted, the empty sites follow in uniform order.
struct SizeBiasedConfig {
  std::vector<i64> values;       // occupations in size-biased order
  std::vector<i64> permutation;  // values[i] = source.occupations[permutation[i]]
};

inline SizeBiasedConfig size_biased_permutation(const Configuration& cfg, RngStream& rng) {
  if (cfg.total <= 0)
    throw std::domain_error("size_biased_permutation: requires at least one particle");
  const i64 L = cfg.L();
  std::vector<i64> remaining(static_cast<size_t>(L));
  for (i64 x = 0; x < L; ++x) remaining[static_cast<size_t>(x)] = x;
  SizeBiasedConfig out;
  out.values.reserve(static_cast<size_t>(L));
  out.permutation.reserve(static_cast<size_t>(L));
  i64 mass = cfg.total;
  size_t tail = remaining.size();
  while (mass > 0) {
    u64 r = rng.next_below(static_cast<u64>(mass));
    u64 cum = 0;
    for (size_t i = 0; i < tail; ++i) {
      i64 site = remaining[i];
      cum += static_cast<u64>(cfg.occupations[static_cast<size_t>(site)]);
      if (r < cum) {
        out.values.push_back(cfg.occupations[static_cast<size_t>(site)]);
        out.permutation.push_back(site);
        mass -= cfg.occupations[static_cast<size_t>(site)];
        remaining[i] = remaining[tail - 1];
        --tail;
        break;
      }
    }
  }
  // Fisher-Yates over the surviving (empty) sites.
  for (size_t i = tail; i > 1; --i) {
    u64 j = rng.next_below(static_cast<u64>(i));
    std::swap(remaining[i - 1], remaining[static_cast<size_t>(j)]);
  }
  for (size_t i = 0; i < tail; ++i) {
    out.values.push_back(0);
    out.permutation.push_back(remaining[i]);
  }
  return out;
}

// ----- zero-range MCMC -----

enum class Kernel { CompleteGraph, NearestNeighborRing };

struct ZrpDynamics {
  std::vector<double> g;  // g[n] for n = 0..N, g[0] = 0
  Kernel kernel = Kernel::CompleteGraph;
  double burn_in = -1.0;  // negative: default 10 * L / min_{n>=1} g(n)
};

// Rates g(n) = g1 * w(n-1) / w(n) target the product measure with weights w
// (the realized stationary weights are g1^n w(n)/w(0), a tilt of w, and the
// canonical measure is tilt-invariant).
inline ZrpDynamics make_zrp_rates(const ModelSpec& model, Kernel kernel = Kernel::CompleteGraph,
                                  double g1 = 1.0, bool use_perturbed = true) {
  if (!(g1 > 0.0)) throw std::invalid_argument("make_zrp_rates: g1 must be positive");
  ZrpDynamics dyn;
  dyn.kernel = kernel;
  dyn.g.assign(static_cast<size_t>(model.N()) + 1, 0.0);
  for (i64 n = 1; n <= model.N(); ++n) {
    double lw_prev = use_perturbed ? model.log_perturbed_pmf(n - 1) : model.bulk().log_pmf(n - 1);
    double lw = use_perturbed ? model.log_perturbed_pmf(n) : model.bulk().log_pmf(n);
    dyn.g[static_cast<size_t>(n)] = g1 * std::exp(lw_prev - lw);
  }
  return dyn;
}

inline double min_positive_rate(const ZrpDynamics& dyn) {
  double m = std::numeric_limits<double>::infinity();
  for (size_t n = 1; n < dyn.g.size(); ++n) m = std::min(m, dyn.g[n]);
  return m;
}

struct Trajectory {
  std::vector<double> times;
  std::vector<Configuration> states;
};

// Continuous-time jump chain: total rate W = sum_x g(eta_x); the departing site is
// chosen proportional to g(eta_x), the target per the kernel; waiting times are
// exponential. States are recorded every `thinning` time units after burn-in,
// until t_end time units of recording span are covered.
inline Trajectory simulate_zrp(const ZrpDynamics& dyn, const Configuration& init, double t_end,
                               double thinning, RngStream& rng) {
  if (!(t_end > 0.0)) throw std::invalid_argument("simulate_zrp: t_end must be positive");
  if (!(thinning > 0.0)) throw std::invalid_argument("simulate_zrp: thinning must be positive");
  const i64 L = init.L();
  if (L < 1) throw std::invalid_argument("simulate_zrp: empty configuration");
  for (i64 v : init.occupations)
    if (v < 0 || static_cast<size_t>(v) >= dyn.g.size())
      throw std::invalid_argument("simulate_zrp: occupation outside the rate table");

  double burn = dyn.burn_in;
  if (burn < 0.0) {
    double gmin = min_positive_rate(dyn);
    burn = std::isfinite(gmin) && gmin > 0.0 ? 10.0 * static_cast<double>(L) / gmin : 0.0;
  }

  Trajectory out;
  std::vector<i64> eta = init.occupations;
  double w_total = 0.0;
  for (i64 v : eta) w_total += dyn.g[static_cast<size_t>(v)];

  double t = 0.0;
  double record_at = burn + thinning;
  const double record_end = burn + t_end;
  i64 events_since_refresh = 0;
  auto record_state = [&](double when) {
    out.times.push_back(when);
    Configuration snap;
    snap.occupations = eta;
    snap.total = init.total;
    out.states.push_back(std::move(snap));
  };

  while (record_at <= record_end) {
    if (w_total <= 0.0) {  // absorbing (N = 0): the state never changes again
      for (; record_at <= record_end; record_at += thinning) record_state(record_at);
      break;
    }
    double dt = rng.next_exponential(w_total);
    double t_jump = t + dt;
    while (record_at <= record_end && record_at <= t_jump) {
      record_state(record_at);
      record_at += thinning;
    }
    if (record_at > record_end) break;
    // pick departing site proportional to g(eta_x)
    double target = rng.next_double() * w_total;
    double acc = 0.0;
    i64 from = -1;
    for (i64 x = 0; x < L; ++x) {
      acc += dyn.g[static_cast<size_t>(eta[static_cast<size_t>(x)])];
      if (target < acc) {
        from = x;
        break;
      }
    }
    if (from < 0) {  // roundoff: fall back to the last site with a positive rate
      for (i64 x = L - 1; x >= 0; --x)
        if (dyn.g[static_cast<size_t>(eta[static_cast<size_t>(x)])] > 0.0) {
          from = x;
          break;
        }
    }
    i64 to;
    if (dyn.kernel == Kernel::CompleteGraph) {
      if (L == 1) {
        to = from;
      } else {
        to = static_cast<i64>(rng.next_below(static_cast<u64>(L - 1)));
        if (to >= from) ++to;
      }
    } else {
      to = rng.next_below(2) == 0 ? from - 1 : from + 1;
      to = (to % L + L) % L;
    }
    size_t f = static_cast<size_t>(from), g_ = static_cast<size_t>(to);
    w_total -= dyn.g[static_cast<size_t>(eta[f])] + dyn.g[static_cast<size_t>(eta[g_])];
    eta[f] -= 1;
    eta[g_] += 1;
    w_total += dyn.g[static_cast<size_t>(eta[f])] + dyn.g[static_cast<size_t>(eta[g_])];
    t = t_jump;
    if (++events_since_refresh >= 4096) {  // kill accumulated float drift in W
      events_since_refresh = 0;
      w_total = 0.0;
      for (i64 v : eta) w_total += dyn.g[static_cast<size_t>(v)];
    }
  }
  return out;
}

// ----- product-measure validity for pair kernels c(n, m) -----

enum class ProductVerdict { ZeroRange, CurlFree, Fail };

struct ProductConditionReport {
  ProductVerdict verdict = ProductVerdict::Fail;
  i64 witness_n = -1;  // first violating pair, (-1,-1) when none
  i64 witness_m = -1;
  double max_rel_violation = 0.0;
};

// A pair kernel has product-form stationary measures iff it is zero-range
// (c(n,m) independent of m) or satisfies, for all n, m >= 1,
//   c(n,m-1)/c(m,n-1) = [c(n,0)/c(1,n-1)] * [c(1,m-1)/c(m,0)].
template <class KernelFn>
ProductConditionReport check_product_conditions(KernelFn&& c, i64 n_max) {
  if (n_max < 1) throw std::invalid_argument("check_product_conditions: need n_max >= 1");
  for (i64 n = 1; n <= n_max; ++n)
    for (i64 m = 0; m <= n_max; ++m)
      if (!(c(n, m) > 0.0))
        throw std::domain_error("check_product_conditions: c(" + std::to_string(n) + ", " +
                                std::to_string(m) + ") is not positive");
  ProductConditionReport report;
  bool zero_range = true;
  for (i64 n = 1; n <= n_max && zero_range; ++n) {
    double base = c(n, 0);
    for (i64 m = 1; m <= n_max; ++m)
      if (std::abs(c(n, m) - base) > 1e-12 * std::max(std::abs(base), std::abs(c(n, m)))) {
        zero_range = false;
        break;
      }
  }
  if (zero_range) {
    report.verdict = ProductVerdict::ZeroRange;
    return report;
  }
  report.verdict = ProductVerdict::CurlFree;
  for (i64 n = 1; n <= n_max; ++n) {
    for (i64 m = 1; m <= n_max; ++m) {
      double lhs = c(n, m - 1) / c(m, n - 1);
      double rhs = (c(n, 0) / c(1, n - 1)) * (c(1, m - 1) / c(m, 0));
      double rel = std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs));
      report.max_rel_violation = std::max(report.max_rel_violation, rel);
      if (rel > 1e-9 && report.verdict != ProductVerdict::Fail) {
        report.verdict = ProductVerdict::Fail;
        report.witness_n = n;
        report.witness_m = m;
      }
    }
  }
  return report;
}

// Stationary product weights realized by a pair kernel that passed the checks:
// w(0) = 1, w(n) = prod_{m=1}^{n} c(1, m-1) / c(m, 0).
template <class KernelFn>
std::vector<double> stationary_weights_from_kernel(KernelFn&& c, i64 n_max) {
  std::vector<double> w(static_cast<size_t>(n_max) + 1, 1.0);
  for (i64 n = 1; n <= n_max; ++n)
    w[static_cast<size_t>(n)] = w[static_cast<size_t>(n - 1)] * c(1, n - 1) / c(n, 0);
  return w;
}

// ----- CSV writers (sites are 1-based in all emitted files) -----

inline void write_config_csv(std::ostream& os, const Configuration& cfg) {
  os << "site,occupation\n";
  for (i64 x = 0; x < cfg.L(); ++x)
    os << (x + 1) << ',' << cfg.occupations[static_cast<size_t>(x)] << '\n';
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "time,site,occupation\n";
  char buf[32];
  for (size_t k = 0; k < traj.states.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", traj.times[k]);
    for (i64 x = 0; x < traj.states[k].L(); ++x)
      os << buf << ',' << (x + 1) << ',' << traj.states[k].occupations[static_cast<size_t>(x)]
         << '\n';
  }
}

}  // namespace condlab
