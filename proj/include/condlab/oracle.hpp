#pragma once

// Brute-force reference measures computed by full enumeration of the configuration
// space {eta : sum_x eta_x = N}. Used to cross-check the convolution table, the
// samplers, and the grand-canonical approximation on small systems.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "condlab/model.hpp"
#include "condlab/numerics.hpp"

namespace condlab {

inline constexpr double kEnumerationBudget = 1e7;

inline double log_state_count(i64 L, i64 N) {
  if (L < 1 || N < 0) throw std::invalid_argument("log_state_count: need L >= 1, N >= 0");
  return log_binomial(N + L - 1, L - 1);
}

namespace detail {

template <class Fn>
void enumerate_rec(std::vector<i64>& eta, size_t pos, i64 rem, Fn& fn) {
  if (pos + 1 == eta.size()) {
    eta[pos] = rem;
    fn(const_cast<const std::vector<i64>&>(eta));
    return;
  }
  for (i64 v = 0; v <= rem; ++v) {
    eta[pos] = v;
    enumerate_rec(eta, pos + 1, rem - v, fn);
  }
}

}  // namespace detail

// Calls fn(eta) once for every configuration of N particles on L sites,
// in lexicographic order of (eta_1, ..., eta_L).
template <class Fn>
void enumerate_states(i64 L, i64 N, Fn&& fn) {
  if (L < 1 || N < 0) throw std::invalid_argument("enumerate_states: need L >= 1, N >= 0");
  if (log_state_count(L, N) > std::log(kEnumerationBudget))
    throw std::invalid_argument("enumerate_states: C(" + std::to_string(N + L - 1) + ", " +
                                std::to_string(L - 1) + ") states exceed budget " +
                                std::to_string(kEnumerationBudget));
  std::vector<i64> eta(static_cast<size_t>(L), 0);
  detail::enumerate_rec(eta, 0, N, fn);
}

// Exact canonical quantities on a small system: normalization, single-site marginal,
// and the first one / two entries of the size-biased site ordering (sites picked with
// probability proportional to their occupation; exhausted mass leaves a uniform order
// over the remaining empty sites).
struct BruteMeasure {
  i64 L = 0;
  i64 N = 0;
  double log_z = kLogZero;
  std::vector<double> marginal;               // P[eta_1 = n]
  std::vector<double> sb_first;               // P[first size-biased value = n]
  std::vector<std::vector<double>> sb_pair;   // P[first = n1, second = n2] (L >= 2)
};

inline BruteMeasure brute_measure(const ModelSpec& model) {
  const i64 L = model.L();
  const i64 N = model.N();
  std::vector<double> logw(static_cast<size_t>(N) + 1);
  for (i64 n = 0; n <= N; ++n) logw[static_cast<size_t>(n)] = model.log_perturbed_pmf(n);

  LogAccumulator z;
  std::vector<LogAccumulator> marg(static_cast<size_t>(N) + 1);
  std::vector<LogAccumulator> first(static_cast<size_t>(N) + 1);
  std::vector<std::vector<LogAccumulator>> pair;
  if (L >= 2)
    pair.assign(static_cast<size_t>(N) + 1,
                std::vector<LogAccumulator>(static_cast<size_t>(N) + 1));

  std::vector<i64> count(static_cast<size_t>(N) + 1, 0);
  enumerate_states(L, N, [&](const std::vector<i64>& eta) {
    double lp = 0.0;
    for (i64 v : eta) lp += logw[static_cast<size_t>(v)];
    z.add(lp);
    marg[static_cast<size_t>(eta[0])].add(lp);
    if (N == 0) return;

    std::fill(count.begin(), count.end(), 0);
    for (i64 v : eta) ++count[static_cast<size_t>(v)];
    for (i64 a = 1; a <= N; ++a) {
      i64 ca = count[static_cast<size_t>(a)];
      if (ca == 0) continue;
      double w1 = static_cast<double>(ca) * static_cast<double>(a) / static_cast<double>(N);
      first[static_cast<size_t>(a)].add(lp + std::log(w1));
      if (L < 2) continue;
      i64 rem = N - a;
      if (rem == 0) {
        // First pick drained the system; the second site is a uniformly random empty one.
        pair[static_cast<size_t>(a)][0].add(lp + std::log(w1));
        continue;
      }
      for (i64 b = 1; b <= rem; ++b) {
        i64 cb = count[static_cast<size_t>(b)] - (a == b ? 1 : 0);
        if (cb <= 0) continue;
        double w2 = static_cast<double>(cb) * static_cast<double>(b) / static_cast<double>(rem);
        pair[static_cast<size_t>(a)][static_cast<size_t>(b)].add(lp + std::log(w1) + std::log(w2));
      }
    }
  });

  BruteMeasure out;
  out.L = L;
  out.N = N;
  out.log_z = z.value();
  auto normalize = [&](const LogAccumulator& acc) {
    return is_log_zero(acc.value()) ? 0.0 : std::exp(acc.value() - out.log_z);
  };
  out.marginal.resize(static_cast<size_t>(N) + 1);
  out.sb_first.resize(static_cast<size_t>(N) + 1);
  for (i64 n = 0; n <= N; ++n) {
    out.marginal[static_cast<size_t>(n)] = normalize(marg[static_cast<size_t>(n)]);
    out.sb_first[static_cast<size_t>(n)] = normalize(first[static_cast<size_t>(n)]);
  }
  if (N == 0) out.sb_first[0] = 1.0;  // degenerate: every site is empty
  if (L >= 2) {
    out.sb_pair.assign(static_cast<size_t>(N) + 1,
                       std::vector<double>(static_cast<size_t>(N) + 1, 0.0));
    for (i64 a = 0; a <= N; ++a)
      for (i64 b = 0; b <= N; ++b)
        out.sb_pair[static_cast<size_t>(a)][static_cast<size_t>(b)] =
            normalize(pair[static_cast<size_t>(a)][static_cast<size_t>(b)]);
    if (N == 0) out.sb_pair[0][0] = 1.0;
  }
  return out;
}

// Total variation distance between the exact canonical single-site marginal at
// density rho = N/L and the tilted grand-canonical law nu_Phi(n) ~ w(n) Phi^n
// with Phi chosen to match rho (capped at the critical tilt above rho_c).
// The grand-canonical mass beyond N enters the distance exactly.
struct EquivalencePoint {
  i64 L = 0;
  i64 N = 0;
  double tv = 0.0;
};

inline std::vector<EquivalencePoint> brute_equivalence_check(const BulkWeights& bulk,
                                                             const PerturbationParams& pert,
                                                             double rho,
                                                             const std::vector<i64>& L_values) {
  if (!(rho >= 0.0)) throw std::invalid_argument("brute_equivalence_check: need rho >= 0");
  std::vector<EquivalencePoint> out;
  out.reserve(L_values.size());
  for (i64 L : L_values) {
    i64 N = static_cast<i64>(std::llround(rho * static_cast<double>(L)));
    ModelSpec model(bulk, pert, L, N);
    BruteMeasure bm = brute_measure(model);
    double phi = invert_density(bulk, rho);
    double z = bulk.z(phi);
    CompensatedSum covered;
    double dist = 0.0;
    for (i64 n = 0; n <= N; ++n) {
      double nu = bulk.pmf(n) * std::pow(phi, static_cast<double>(n)) / z;
      covered.add(nu);
      dist += std::abs(bm.marginal[static_cast<size_t>(n)] - nu);
    }
    dist += std::max(0.0, 1.0 - covered.value());  // nu-mass outside the canonical support
    out.push_back({L, N, 0.5 * dist});
  }
  return out;
}

}  // namespace condlab
