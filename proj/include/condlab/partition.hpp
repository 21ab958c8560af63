#pragma once

// Canonical partition functions Z_{L,N} = sum over configurations of prod_x w_L(eta_x),
// computed exactly in log space by convolution, plus asymptotic approximations:
// single-site ratios, cluster occupation sums A_ell(n), the large-deviation rate
// function of the bulk weights, and saddle-point leading orders of log Z.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "condlab/model.hpp"
#include "condlab/numerics.hpp"
#include "condlab/parallel.hpp"

namespace condlab {

inline constexpr double kTableEntryBudget = 5e7;

// Row-major table of log Z_{l,m} for 0 <= l <= L_max, 0 <= m <= N_max.
// Row 0 is log of an indicator: Z_{0,0} = 1, Z_{0,m>0} = 0.
class LogPartitionTable {
 public:
  LogPartitionTable(i64 L_max, i64 N_max, u64 model_hash)
      : L_max_(L_max), N_max_(N_max), model_hash_(model_hash) {
    if (L_max < 0 || N_max < 0) throw std::invalid_argument("table extents must be nonnegative");
    double entries = (static_cast<double>(L_max) + 1.0) * (static_cast<double>(N_max) + 1.0);
    if (entries > kTableEntryBudget)
      throw std::invalid_argument("partition table too large: (L_max+1)*(N_max+1) = " +
                                  std::to_string(entries) + " exceeds " +
                                  std::to_string(kTableEntryBudget) + " entries");
    data_.assign(static_cast<size_t>(L_max + 1) * static_cast<size_t>(N_max + 1), kLogZero);
  }

  i64 L_max() const { return L_max_; }
  i64 N_max() const { return N_max_; }
  u64 model_hash() const { return model_hash_; }

  double at(i64 l, i64 m) const {
    if (l < 0 || l > L_max_ || m < 0 || m > N_max_)
      throw std::out_of_range("table index (" + std::to_string(l) + ", " + std::to_string(m) +
                              ") outside [0," + std::to_string(L_max_) + "]x[0," +
                              std::to_string(N_max_) + "]");
    return data_[idx(l, m)];
  }

  double* row(i64 l) { return data_.data() + idx(l, 0); }
  const double* row(i64 l) const { return data_.data() + idx(l, 0); }
  const std::vector<double>& raw() const { return data_; }
  std::vector<double>& raw() { return data_; }

 private:
  size_t idx(i64 l, i64 m) const {
    return static_cast<size_t>(l) * static_cast<size_t>(N_max_ + 1) + static_cast<size_t>(m);
  }

  i64 L_max_;
  i64 N_max_;
  u64 model_hash_;
  std::vector<double> data_;
};

// Exact log Z_{l,m} for all l <= L_max, m <= N_max via the one-site convolution
// Z_{l,m} = sum_n w_L(n) Z_{l-1,m-n}, evaluated with a max-shifted sum that skips
// terms more than kLseCutoff below the running maximum.
inline LogPartitionTable build_table(const ModelSpec& model, i64 L_max = -1, i64 N_max = -1) {
  if (L_max < 0) L_max = model.L();
  if (N_max < 0) N_max = model.N();
  LogPartitionTable table(L_max, N_max, model.hash());

  std::vector<double> logw(static_cast<size_t>(N_max) + 1);
  for (i64 n = 0; n <= N_max; ++n) logw[static_cast<size_t>(n)] = model.log_perturbed_pmf(n);

  table.row(0)[0] = 0.0;  // Z_{0,0} = 1; Z_{0,m>0} stays 0
  if (L_max >= 1) {
    double* first = table.row(1);
    for (i64 m = 0; m <= N_max; ++m) first[m] = logw[static_cast<size_t>(m)];
  }
  for (i64 l = 2; l <= L_max; ++l) {
    const double* prev = table.row(l - 1);
    double* cur = table.row(l);
    parallel_for(N_max + 1, [&](i64 m) {
      // Rows l >= 1 are strictly positive (every log is finite), so no sentinel checks.
      double best = kLogZero;
      for (i64 n = 0; n <= m; ++n) {
        double t = logw[static_cast<size_t>(n)] + prev[m - n];
        if (t > best) best = t;
      }
      double cut = best - kLseCutoff;
      double sum = 0.0;
      for (i64 n = 0; n <= m; ++n) {
        double t = logw[static_cast<size_t>(n)] + prev[m - n];
        if (t > cut) sum += std::exp(t - best);
      }
      cur[m] = best + std::log(sum);
    });
  }
  return table;
}

// Exact ratio Z_{L-1,N-n} / Z_{L,N} from a prebuilt table.
inline double z_ratio_exact(const LogPartitionTable& table, i64 L, i64 N, i64 n) {
  if (L < 1 || L > table.L_max()) throw std::invalid_argument("z_ratio_exact: L outside table");
  if (N < 0 || N > table.N_max()) throw std::invalid_argument("z_ratio_exact: N outside table");
  if (n < 0 || n > N) throw std::invalid_argument("z_ratio_exact: need 0 <= n <= N");
  return std::exp(table.at(L - 1, N - n) - table.at(L, N));
}

namespace detail {

inline void require_supercritical(const ModelSpec& m, const char* what) {
  if (!(m.rho() > m.bulk().rho_c()))
    throw std::domain_error(std::string(what) + " requires rho > rho_c (rho = " +
                            std::to_string(m.rho()) + ", rho_c = " +
                            std::to_string(m.bulk().rho_c()) + ")");
}

inline void require_mesoscopic_exponents(const ModelSpec& m, const char* what) {
  if (!(m.pert().kappa > -1.0))
    throw std::domain_error(std::string(what) + " requires kappa > -1 (kappa = " +
                            std::to_string(m.pert().kappa) + ")");
  if (!(m.pert().gamma < m.pert().kappa + 2.0))
    throw std::domain_error(std::string(what) + " requires gamma < kappa + 2 (gamma = " +
                            std::to_string(m.pert().gamma) + ", kappa + 2 = " +
                            std::to_string(m.pert().kappa + 2.0) + ")");
}

}  // namespace detail

// Mesoscopic-regime approximation Z_{L-1,N-n} / Z_{L,N} ~ exp(-n / C_L)
// with C_L the typical cluster scale.
inline double z_ratio_asymptotic(const ModelSpec& m, i64 n) {
  if (n < 0) throw std::invalid_argument("z_ratio_asymptotic: need n >= 0");
  detail::require_supercritical(m, "z_ratio_asymptotic");
  detail::require_mesoscopic_exponents(m, "z_ratio_asymptotic");
  double c = cluster_scale_with(m, m.bulk().rho_c());
  return std::exp(-static_cast<double>(n) / c);
}

// ----- cluster occupation sums A_ell(n) = sum over compositions n_1+...+n_ell = n
//       of prod_i (n_i + 1)^kappa -----

inline double log_composition_count(i64 ell, i64 n) {
  if (ell < 1 || n < 0) throw std::invalid_argument("log_composition_count: need ell >= 1, n >= 0");
  return log_binomial(n + ell - 1, ell - 1);
}

namespace detail {

struct CompositionSum {
  double kappa;
  const std::vector<double>* log_np1;
  LogAccumulator acc;

  void recurse(i64 slots, i64 rem, double log_prod) {
    if (slots == 1) {
      acc.add(log_prod + kappa * (*log_np1)[static_cast<size_t>(rem)]);
      return;
    }
    for (i64 j = 0; j <= rem; ++j)
      recurse(slots - 1, rem - j, log_prod + kappa * (*log_np1)[static_cast<size_t>(j)]);
  }
};

}  // namespace detail

inline constexpr double kCompositionBudget = 1e7;

// Exact A_ell(n) in log space by enumerating all C(n+ell-1, ell-1) compositions.
inline double log_a_ell_brute(i64 ell, i64 n, double kappa) {
  if (ell < 1 || n < 0) throw std::invalid_argument("log_a_ell_brute: need ell >= 1, n >= 0");
  double log_count = log_composition_count(ell, n);
  if (log_count > std::log(kCompositionBudget))
    throw std::invalid_argument("log_a_ell_brute: C(" + std::to_string(n + ell - 1) + ", " +
                                std::to_string(ell - 1) + ") compositions exceed budget " +
                                std::to_string(kCompositionBudget));
  std::vector<double> log_np1(static_cast<size_t>(n) + 1);
  for (i64 j = 0; j <= n; ++j) log_np1[static_cast<size_t>(j)] = std::log(static_cast<double>(j) + 1.0);
  detail::CompositionSum cs{kappa, &log_np1, LogAccumulator{}};
  cs.recurse(ell, n, 0.0);
  return cs.acc.value();
}

inline double a_ell_brute(i64 ell, i64 n, double kappa) {
  return std::exp(log_a_ell_brute(ell, n, kappa));
}

// Sparse (n >> ell) asymptotic: A_ell(n) ~ n^{(kappa+1) ell - 1} Gamma(kappa+1)^ell / Gamma((kappa+1) ell).
inline double log_a_ell_sparse(i64 ell, i64 n, double kappa) {
  if (ell < 1 || n < 1) throw std::invalid_argument("log_a_ell_sparse: need ell >= 1, n >= 1");
  if (!(kappa > -1.0)) throw std::domain_error("log_a_ell_sparse requires kappa > -1");
  double k1 = kappa + 1.0;
  return (k1 * static_cast<double>(ell) - 1.0) * std::log(static_cast<double>(n)) +
         static_cast<double>(ell) * std::lgamma(k1) - std::lgamma(k1 * static_cast<double>(ell));
}

namespace detail {

// Moments of the tilted pure-power weights v(n) = (n+1)^kappa phi^n:
// z_k = sum v, m1 = sum n v, m2 = sum n^2 v. Series truncated when a geometric
// bound on the remainder drops below 1e-14 of the partial sum.
struct PowerWeightMoments {
  double z, m1, m2;
};

inline PowerWeightMoments power_weight_moments(double kappa, double phi) {
  if (!(phi >= 0.0 && phi < 1.0)) throw std::domain_error("power_weight_moments: need 0 <= phi < 1");
  PowerWeightMoments out{0.0, 0.0, 0.0};
  if (phi == 0.0) {
    out.z = 1.0;
    return out;
  }
  CompensatedSum z, m1, m2;
  double term = 1.0;  // (n+1)^kappa phi^n at n = 0
  for (i64 n = 0;; ++n) {
    double nd = static_cast<double>(n);
    z.add(term);
    m1.add(nd * term);
    m2.add(nd * nd * term);
    double next = std::pow(nd + 2.0, kappa) * std::pow(phi, nd + 1.0);
    if (n >= 8) {
      // For n >= 1 the term ratio is at most ((n+2)/(n+1))^max(kappa,0) * phi; bound the
      // n^2-weighted tail by a geometric series once that ratio is safely below 1.
      double growth = kappa > 0.0 ? std::pow((nd + 3.0) / (nd + 2.0), kappa) : 1.0;
      double ratio = growth * phi * ((nd + 2.0) / (nd + 1.0)) * ((nd + 2.0) / (nd + 1.0));
      if (ratio < 1.0) {
        double tail = (nd + 1.0) * (nd + 1.0) * next / (1.0 - ratio);
        if (tail < 1e-14 * std::max(1.0, m2.value())) {
          out.z = z.value();
          out.m1 = m1.value();
          out.m2 = m2.value();
          return out;
        }
      }
    }
    term = next;
    if (n > 100000000) throw std::runtime_error("power_weight_moments failed to converge");
  }
}

}  // namespace detail

// Dense (n ~ u * ell) asymptotic via a tilted local CLT:
// A_ell(n) ~ phi^{-n} z_kappa(phi)^ell / sqrt(2 pi ell sigma^2), with phi chosen so the
// tilted mean occupation equals u = n / ell.
inline double log_a_ell_dense(i64 ell, i64 n, double kappa) {
  if (ell < 1 || n < 1) throw std::invalid_argument("log_a_ell_dense: need ell >= 1, n >= 1");
  if (!(kappa > -1.0)) throw std::domain_error("log_a_ell_dense requires kappa > -1");
  double u = static_cast<double>(n) / static_cast<double>(ell);
  auto mean_occ = [&](double phi) {
    auto m = detail::power_weight_moments(kappa, phi);
    return m.m1 / m.z;
  };
  // The tilted mean diverges like (kappa+1)/(1-phi) as phi -> 1; open the bracket
  // just far enough that the series stays cheap to sum.
  double eps = std::min(0.5, (kappa + 1.0) / (10.0 * std::max(u, 1.0)));
  int widen = 0;
  while (mean_occ(1.0 - eps) < u) {
    eps *= 0.25;
    if (++widen > 20)
      throw std::runtime_error("log_a_ell_dense: tilt saturates below u = " + std::to_string(u));
  }
  double phi = bisect_increasing(mean_occ, 0.0, 1.0 - eps, u, 1e-15, 1e-11 * std::max(1.0, u));
  auto m = detail::power_weight_moments(kappa, phi);
  double mean = m.m1 / m.z;
  double var = m.m2 / m.z - mean * mean;
  return -static_cast<double>(n) * std::log(phi) + static_cast<double>(ell) * std::log(m.z) -
         0.5 * std::log(2.0 * kPi * static_cast<double>(ell) * var);
}

// ----- large-deviation rate function of the bulk weights -----

struct RateFunctionData {
  double u;       // target mean occupation
  double phi;     // minimizing tilt, may exceed the radius-1 grand-canonical domain
  double value;   // I(u) = u ln phi - ln z(phi)
  double sigma2;  // variance of the tilted single-site law at phi
};

// I(u) = sup_phi { u ln phi - ln z(phi) }, attained at the extended tilt with mean u.
inline RateFunctionData rate_function(const BulkWeights& bulk, double u) {
  if (!(u >= 0.0)) throw std::invalid_argument("rate_function: need u >= 0");
  RateFunctionData out{};
  out.u = u;
  if (u == 0.0) {
    out.phi = 0.0;
    out.value = -std::log(bulk.pmf(0));
    out.sigma2 = 0.0;
    return out;
  }
  double phi = invert_density_extended(bulk, u);
  out.phi = phi;
  out.value = u * std::log(phi) - std::log(bulk.z(phi));
  out.sigma2 = bulk.tilted_var(phi);
  return out;
}

// ----- partition decomposition: bulk term plus perturbed-cluster corrections -----
//
// Z_{L,N} = S_0 + sum_{ell=1}^{L} C(L,ell) (theta L^-gamma)^ell
//                 sum_n A_ell(n) * [bulk Z_{L-ell, N-n}],
// where S_0 is the pure-bulk partition function. Returns log of the partial sums
// after including ell = 0, 1, ..., ell_max.
inline std::vector<double> decomposition_partial(const ModelSpec& model, i64 ell_max) {
  const PerturbationParams& p = model.pert();
  if (p.delta) throw std::invalid_argument("decomposition_partial requires delta == 0");
  if (ell_max < 0 || ell_max > model.L())
    throw std::invalid_argument("decomposition_partial: need 0 <= ell_max <= L");
  double inner_work = 0.0;
  for (i64 ell = 1; ell <= ell_max; ++ell)
    inner_work += std::exp(log_binomial(model.N() + ell, ell));  // sum_n C(n+ell-1, ell-1)
  if (inner_work > kCompositionBudget)
    throw std::invalid_argument("decomposition_partial: composition enumeration exceeds budget");

  ModelSpec bulk_model(model.bulk(), PerturbationParams{0.0, p.gamma, p.kappa, nullptr, 0.0},
                       model.L(), model.N());
  LogPartitionTable bulk = build_table(bulk_model, model.L(), model.N());

  double log_amp = p.theta > 0.0
                       ? std::log(p.theta) - p.gamma * std::log(static_cast<double>(model.L()))
                       : kLogZero;
  LogAccumulator total;
  total.add(bulk.at(model.L(), model.N()));  // S_0
  std::vector<double> partial(static_cast<size_t>(ell_max) + 1);
  partial[0] = total.value();
  for (i64 ell = 1; ell <= ell_max; ++ell) {
    if (is_log_zero(log_amp)) {
      partial[static_cast<size_t>(ell)] = total.value();
      continue;
    }
    LogAccumulator inner;
    for (i64 n = 0; n <= model.N(); ++n) {
      double lz = bulk.at(model.L() - ell, model.N() - n);
      if (is_log_zero(lz)) continue;
      inner.add(lz + log_a_ell_brute(ell, n, p.kappa));
    }
    if (!is_log_zero(inner.value()))
      total.add(log_binomial(model.L(), ell) + static_cast<double>(ell) * log_amp + inner.value());
    partial[static_cast<size_t>(ell)] = total.value();
  }
  return partial;
}

// ----- saddle-point leading order of log Z_{L,N} above rho_c -----

struct SaddlePointData {
  double alpha;           // growth exponent: log Z ~ L^alpha * (kappa+2) * s_star
  double s_star;          // optimal rescaled cluster action
  double leading_log_z;   // L^alpha * (kappa+2) * s_star
};

inline SaddlePointData log_z_mesoscopic(const ModelSpec& m) {
  const PerturbationParams& p = m.pert();
  if (!(p.theta > 0.0)) throw std::domain_error("log_z_mesoscopic requires theta > 0");
  detail::require_supercritical(m, "log_z_mesoscopic");
  detail::require_mesoscopic_exponents(m, "log_z_mesoscopic");
  double k2 = p.kappa + 2.0;
  SaddlePointData out{};
  out.alpha = 1.0 - p.gamma / k2;
  out.s_star = std::pow(m.rho() - m.bulk().rho_c(), (p.kappa + 1.0) / k2) *
               std::pow(p.theta * std::tgamma(k2), 1.0 / k2) / (p.kappa + 1.0);
  out.leading_log_z = std::pow(static_cast<double>(m.L()), out.alpha) * k2 * out.s_star;
  return out;
}

inline double log_z_macroscopic(const ModelSpec& m) {
  const PerturbationParams& p = m.pert();
  if (!(p.theta > 0.0)) throw std::domain_error("log_z_macroscopic requires theta > 0");
  detail::require_supercritical(m, "log_z_macroscopic");
  if (!(p.kappa + 2.0 > 1.0))
    throw std::domain_error("log_z_macroscopic requires kappa + 2 > 1 (kappa = " +
                            std::to_string(p.kappa) + ")");
  if (!(p.gamma > p.kappa + 2.0))
    throw std::domain_error("log_z_macroscopic requires gamma > kappa + 2 (gamma = " +
                            std::to_string(p.gamma) + ", kappa + 2 = " +
                            std::to_string(p.kappa + 2.0) + ")");
  return std::log(p.theta) + (p.kappa + 1.0 - p.gamma) * std::log(static_cast<double>(m.L())) +
         p.kappa * std::log(m.rho() - m.bulk().rho_c());
}

// Leading order of log(Z_{L,N} / S_0) above rho_c; dispatches on the exponent regime.
inline double log_z_asymptotic(const ModelSpec& m) {
  const PerturbationParams& p = m.pert();
  if (p.gamma == p.kappa + 2.0)
    throw std::domain_error("log_z_asymptotic: no asymptotic available on the transition line "
                            "gamma == kappa + 2");
  if (p.gamma < p.kappa + 2.0) return log_z_mesoscopic(m).leading_log_z;
  return log_z_macroscopic(m);
}

// ----- binary persistence: magic, extents, model hash, raw little-endian doubles -----

inline constexpr char kTableMagic[8] = {'C', 'L', 'P', 'T', 'B', 'L', '0', '1'};

inline void save_table(const LogPartitionTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kTableMagic, 8);
  u64 header[3] = {static_cast<u64>(table.L_max()), static_cast<u64>(table.N_max()),
                   table.model_hash()};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(table.raw().data()),
            static_cast<std::streamsize>(table.raw().size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline LogPartitionTable load_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kTableMagic, 8) != 0)
    throw std::runtime_error("not a partition table file: " + path);
  u64 header[3];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in) throw std::runtime_error("truncated table header: " + path);
  if (header[0] > 1e9 || header[1] > 1e9 ||
      (static_cast<double>(header[0]) + 1.0) * (static_cast<double>(header[1]) + 1.0) >
          kTableEntryBudget)
    throw std::runtime_error("table extents in header exceed budget: " + path);
  LogPartitionTable table(static_cast<i64>(header[0]), static_cast<i64>(header[1]), header[2]);
  in.read(reinterpret_cast<char*>(table.raw().data()),
          static_cast<std::streamsize>(table.raw().size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated table data: " + path);
  return table;
}

// Loads a cached table when the file exists and matches the model hash and extents;
// otherwise builds and saves it.
inline LogPartitionTable load_or_build_table(const ModelSpec& model, const std::string& path,
                                             i64 L_max = -1, i64 N_max = -1) {
  if (L_max < 0) L_max = model.L();
  if (N_max < 0) N_max = model.N();
  {
    std::ifstream probe(path, std::ios::binary);
    if (probe) {
      probe.close();
      LogPartitionTable cached = load_table(path);
      if (cached.model_hash() == model.hash() && cached.L_max() >= L_max &&
          cached.N_max() >= N_max)
        return cached;
    }
  }
  LogPartitionTable fresh = build_table(model, L_max, N_max);
  save_table(fresh, path);
  return fresh;
}

}  // namespace condlab
