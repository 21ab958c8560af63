// Command-line driver: model reports, partition tables, sampling, tail curves,
// profiles, maximum-cluster statistics, and the enumeration cross-check suite.
//
// Exit codes: 0 success, 2 model/regime error, 3 verification failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "condlab/model.hpp"
#include "condlab/numerics.hpp"
#include "condlab/observables.hpp"
#include "condlab/oracle.hpp"
#include "condlab/parallel.hpp"
#include "condlab/partition.hpp"
#include "condlab/rng.hpp"
#include "condlab/sampler.hpp"

namespace {

using condlab::i64;
using condlab::u64;
using json = nlohmann::ordered_json;

struct CommonOpts {
  std::string model_path;
  std::string out_path;
  std::string table_path;
  u64 seed = 0;
  i64 realizations = 1;
  std::string sampler = "direct";
  bool corrected = true;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_model = true) {
  auto* model = cmd->add_option("--model", opts.model_path, "model file (key = value lines)");
  if (needs_model) model->required();
  cmd->add_option("--seed", opts.seed, "master seed (default 0)");
  cmd->add_option("--out", opts.out_path, "output path (default: stdout)");
  cmd->add_option("--table", opts.table_path,
                  "partition table cache file (loaded when the model hash matches, "
                  "otherwise built and saved)");
}

// Writes to --out when given, stdout otherwise.
void emit(const CommonOpts& opts, const std::string& payload) {
  if (opts.out_path.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream f(opts.out_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file: " + opts.out_path);
  f << payload;
  if (!f) throw std::runtime_error("write failed: " + opts.out_path);
}

condlab::LogPartitionTable obtain_table(const condlab::ModelSpec& model,
                                        const CommonOpts& opts) {
  if (!opts.table_path.empty()) return condlab::load_or_build_table(model, opts.table_path);
  return condlab::build_table(model);
}

condlab::Configuration balanced_init(const condlab::ModelSpec& model) {
  std::vector<i64> occ(static_cast<size_t>(model.L()), model.N() / model.L());
  for (i64 x = 0; x < model.N() % model.L(); ++x) occ[static_cast<size_t>(x)] += 1;
  return condlab::make_configuration(std::move(occ));
}

struct ZrpOpts {
  double thinning = 1.0;
  double burn_in = -1.0;
  double g1 = 1.0;
  bool use_perturbed = true;
  std::string kernel = "complete";
};

void add_zrp(CLI::App* cmd, ZrpOpts& z) {
  cmd->add_option("--thinning", z.thinning, "time between recorded states (default 1.0)");
  cmd->add_option("--burn-in", z.burn_in, "burn-in time (default: 10 L / min g)");
  cmd->add_option("--g1", z.g1, "rate scale g(1) multiplier (default 1.0)");
  cmd->add_option("--use-perturbed", z.use_perturbed,
                  "target the size-dependent weights (default true)");
  cmd->add_option("--kernel", z.kernel, "complete | ring (default complete)")
      ->check(CLI::IsMember({"complete", "ring"}));
}

condlab::Kernel parse_kernel(const std::string& name) {
  return name == "ring" ? condlab::Kernel::NearestNeighborRing : condlab::Kernel::CompleteGraph;
}

// One configuration per realization, each from its own RNG stream.
std::vector<condlab::Configuration> draw_realizations(
    const condlab::ModelSpec& model, const CommonOpts& opts, const ZrpOpts& zopts,
    const condlab::LogPartitionTable* table) {
  const i64 M = opts.realizations;
  if (M < 1) throw std::invalid_argument("--realizations must be >= 1");
  std::vector<condlab::Configuration> configs(static_cast<size_t>(M));
  if (opts.sampler == "direct") {
    if (table == nullptr) throw std::logic_error("direct sampler requires a table");
    condlab::parallel_for(M, [&](i64 r) {
      condlab::RngStream rng(opts.seed, static_cast<u64>(r));
      configs[static_cast<size_t>(r)] = condlab::direct_sample(model, *table, rng);
    });
  } else {
    condlab::ZrpDynamics dyn =
        condlab::make_zrp_rates(model, parse_kernel(zopts.kernel), zopts.g1, zopts.use_perturbed);
    dyn.burn_in = zopts.burn_in;
    condlab::Configuration init = balanced_init(model);
    condlab::parallel_for(M, [&](i64 r) {
      condlab::RngStream rng(opts.seed, static_cast<u64>(r));
      condlab::Trajectory traj =
          condlab::simulate_zrp(dyn, init, zopts.thinning, zopts.thinning, rng);
      configs[static_cast<size_t>(r)] = std::move(traj.states.back());
    });
  }
  return configs;
}

std::string with_realization_suffix(const std::string& path, i64 r) {
  std::filesystem::path p(path);
  std::filesystem::path stem = p.stem();
  stem += "_r" + std::to_string(r);
  stem += p.extension();
  return (p.parent_path() / stem).string();
}

json phase_json(const condlab::ModelSpec& model) {
  condlab::PhaseReport rep = condlab::classify_phase(model);
  json j;
  j["regime"] = condlab::regime_name(rep.regime);
  j["C_L"] = rep.c_scale;
  j["mixture_weight"] = rep.mixture_weight;
  j["theorem"] = rep.limit_law;
  return j;
}

int cmd_model(const CommonOpts& opts) {
  condlab::ModelSpec model = condlab::load_model_spec(opts.model_path);
  json j;
  j["L"] = model.L();
  j["N"] = model.N();
  j["rho"] = model.rho();
  j["rho_c"] = model.bulk().rho_c();
  j["rho_c_L"] = condlab::finite_size_rho_c(model);
  j["phi_bar"] = model.bulk().phi_bar();
  j["Phi_rho"] = condlab::invert_density(model.bulk(), model.rho());
  try {
    j["C_L_plain"] = condlab::cluster_scale(model, false);
  } catch (const std::domain_error&) {
    j["C_L_plain"] = nullptr;
  }
  try {
    j["C_L_corrected"] = condlab::cluster_scale(model, true);
  } catch (const std::domain_error&) {
    j["C_L_corrected"] = nullptr;
  }
  j["phase"] = phase_json(model);
  emit(opts, j.dump(2) + "\n");
  return 0;
}

int cmd_partition(const CommonOpts& opts) {
  condlab::ModelSpec model = condlab::load_model_spec(opts.model_path);
  condlab::LogPartitionTable table = obtain_table(model, opts);
  if (!opts.out_path.empty()) condlab::save_table(table, opts.out_path);
  json j;
  j["L"] = model.L();
  j["N"] = model.N();
  j["log_Z"] = table.at(model.L(), model.N());
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "0x%016llx",
                static_cast<unsigned long long>(table.model_hash()));
  j["model_hash"] = hash_buf;
  if (!opts.out_path.empty()) j["table_file"] = opts.out_path;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_sample(const CommonOpts& opts, const ZrpOpts& zopts, bool trajectory) {
  condlab::ModelSpec model = condlab::load_model_spec(opts.model_path);
  if (trajectory) {
    if (opts.sampler != "zrp")
      throw std::invalid_argument("--trajectory requires --sampler zrp");
    if (opts.realizations != 1)
      throw std::invalid_argument("--trajectory requires --realizations 1");
    condlab::ZrpDynamics dyn =
        condlab::make_zrp_rates(model, parse_kernel(zopts.kernel), zopts.g1, zopts.use_perturbed);
    dyn.burn_in = zopts.burn_in;
    condlab::RngStream rng(opts.seed, 0);
    double t_end = zopts.thinning * 100.0;
    condlab::Trajectory traj =
        condlab::simulate_zrp(dyn, balanced_init(model), t_end, zopts.thinning, rng);
    std::ostringstream os;
    condlab::write_trajectory_csv(os, traj);
    emit(opts, os.str());
    return 0;
  }
  std::optional<condlab::LogPartitionTable> table;
  if (opts.sampler == "direct") table.emplace(obtain_table(model, opts));
  std::vector<condlab::Configuration> configs =
      draw_realizations(model, opts, zopts, table ? &*table : nullptr);
  if (configs.size() > 1 && opts.out_path.empty())
    throw std::invalid_argument("--realizations > 1 requires --out (one file per realization)");
  for (size_t r = 0; r < configs.size(); ++r) {
    std::ostringstream os;
    condlab::write_config_csv(os, configs[r]);
    if (configs.size() == 1) {
      emit(opts, os.str());
    } else {
      CommonOpts one = opts;
      one.out_path = with_realization_suffix(opts.out_path, static_cast<i64>(r) + 1);
      emit(one, os.str());
    }
  }
  return 0;
}

int cmd_tails(const CommonOpts& opts, const ZrpOpts& zopts) {
  condlab::ModelSpec model = condlab::load_model_spec(opts.model_path);
  std::vector<double> grid = condlab::default_s_grid();
  const condlab::PerturbationParams& p = model.pert();
  condlab::TailCurve curve;
  try {
    curve = p.gamma < p.kappa + 2.0
                ? condlab::theoretical_tail(model, grid, opts.corrected)
                : condlab::theoretical_tail_macroscopic(model, grid, opts.corrected);
  } catch (const std::domain_error&) {
    // No limiting curve applies (subcritical, theta = 0, or the boundary
    // gamma = kappa + 2): emit the empirical column on the raw occupation
    // scale with a zero overlay.
    curve.s_grid = grid;
    curve.c_scale = 1.0;
    curve.corrected = opts.corrected;
    curve.theoretical.assign(grid.size(), 0.0);
  }
  std::optional<condlab::LogPartitionTable> table;
  if (opts.sampler == "direct") table.emplace(obtain_table(model, opts));
  std::vector<condlab::Configuration> configs =
      draw_realizations(model, opts, zopts, table ? &*table : nullptr);
  curve.empirical = condlab::empirical_tail(configs, curve.c_scale, grid);
  curve.n_realizations = opts.realizations;
  std::ostringstream os;
  condlab::write_tail_csv(os, curve);
  emit(opts, os.str());
  return 0;
}

int cmd_profile(const CommonOpts& opts, const ZrpOpts& zopts) {
  condlab::ModelSpec model = condlab::load_model_spec(opts.model_path);
  std::optional<condlab::LogPartitionTable> table;
  if (opts.sampler == "direct") table.emplace(obtain_table(model, opts));
  std::vector<condlab::Configuration> configs =
      draw_realizations(model, opts, zopts, table ? &*table : nullptr);
  std::ostringstream os;
  os << "realization,k,H\n";
  for (size_t r = 0; r < configs.size(); ++r) {
    std::vector<i64> h = condlab::accumulated_profile(configs[r]);
    for (size_t k = 0; k < h.size(); ++k)
      os << (r + 1) << ',' << (k + 1) << ',' << h[k] << '\n';
  }
  emit(opts, os.str());
  return 0;
}

int cmd_maxcluster(const CommonOpts& opts, const ZrpOpts& zopts) {
  condlab::ModelSpec model = condlab::load_model_spec(opts.model_path);
  double target = model.rho() - model.bulk().rho_c();
  std::optional<condlab::LogPartitionTable> table;
  if (opts.sampler == "direct") table.emplace(obtain_table(model, opts));
  std::vector<condlab::Configuration> configs =
      draw_realizations(model, opts, zopts, table ? &*table : nullptr);
  std::ostringstream os;
  os << "realization,max_fraction,target\n";
  char buf[80];
  for (size_t r = 0; r < configs.size(); ++r) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", r + 1,
                  condlab::max_cluster_fraction(configs[r]), target);
    os << buf;
  }
  emit(opts, os.str());
  return 0;
}

// Enumeration cross-check suite on small systems; exit 3 on any failure.
int cmd_oracle() {
  using namespace condlab;
  BulkWeights bulk = BulkWeights::geometric(0.5);
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    std::printf("%s  %s\n", ok ? "[ok]  " : "[FAIL]", what.c_str());
    if (!ok) ++failures;
  };
  for (double kappa : {0.0, 0.5}) {
    PerturbationParams pert{0.1, 1.0, kappa, nullptr, 0.0};
    double worst_z = 0.0, worst_sb = 0.0, worst_norm = 0.0;
    for (i64 L = 1; L <= 6; ++L) {
      for (i64 N = 0; N <= 8; ++N) {
        ModelSpec model(bulk, pert, L, N);
        BruteMeasure brute = brute_measure(model);
        LogPartitionTable table = build_table(model);
        worst_z = std::max(worst_z, std::abs(std::expm1(brute.log_z - table.at(L, N))));
        double norm = 0.0;
        for (double v : brute.marginal) norm += v;
        worst_norm = std::max(worst_norm, std::abs(norm - 1.0));
        if (N >= 1) {
          std::vector<double> sb = size_biased_first_exact(model, table);
          for (i64 n = 0; n <= N; ++n)
            worst_sb = std::max(worst_sb, std::abs(sb[static_cast<size_t>(n)] -
                                                   brute.sb_first[static_cast<size_t>(n)]));
        }
      }
    }
    char line[160];
    std::snprintf(line, sizeof(line),
                  "kappa=%.1f: enumeration vs recursion log Z, worst rel err %.3e", kappa,
                  worst_z);
    check(worst_z < 1e-10, line);
    std::snprintf(line, sizeof(line), "kappa=%.1f: marginal normalization, worst |sum-1| %.3e",
                  kappa, worst_norm);
    check(worst_norm < 1e-12, line);
    std::snprintf(line, sizeof(line),
                  "kappa=%.1f: size-biased first value, table vs enumeration, worst %.3e", kappa,
                  worst_sb);
    check(worst_sb < 1e-10, line);
  }
  PerturbationParams pert{0.1, 1.0, 0.0, nullptr, 0.0};
  for (double rho : {0.5, 2.0}) {
    auto pts = brute_equivalence_check(bulk, pert, rho, {4, 6, 8});
    bool decreasing = pts[0].tv > pts[1].tv && pts[1].tv > pts[2].tv;
    char line[160];
    std::snprintf(line, sizeof(line),
                  "rho=%.1f: grand-canonical TV decreasing over L=4,6,8 (%.4f > %.4f > %.4f)",
                  rho, pts[0].tv, pts[1].tv, pts[2].tv);
    check(decreasing, line);
  }
  std::printf(failures == 0 ? "oracle suite: all checks passed\n"
                            : "oracle suite: %d check(s) FAILED\n",
              failures);
  return failures == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"condensing lattice gas toolkit: exact partition functions, samplers, "
               "and cluster statistics"};
  app.require_subcommand(1);

  CommonOpts mo;
  CLI::App* c_model = app.add_subcommand("model", "print a model report (JSON)");
  add_common(c_model, mo);

  CommonOpts po;
  CLI::App* c_part = app.add_subcommand("partition", "build the partition table");
  add_common(c_part, po);

  CommonOpts so;
  ZrpOpts sz;
  bool trajectory = false;
  CLI::App* c_sample = app.add_subcommand("sample", "draw configurations (CSV)");
  add_common(c_sample, so);
  c_sample->add_option("--realizations", so.realizations, "number of independent draws");
  c_sample->add_option("--sampler", so.sampler, "direct | zrp")
      ->check(CLI::IsMember({"direct", "zrp"}));
  c_sample->add_flag("--trajectory", trajectory, "record a thinned zrp trajectory instead");
  add_zrp(c_sample, sz);

  CommonOpts to;
  ZrpOpts tz;
  to.realizations = 48;
  CLI::App* c_tails = app.add_subcommand("tails", "size-biased tail curves (CSV)");
  add_common(c_tails, to);
  c_tails->add_option("--realizations", to.realizations, "realizations to average (default 48)");
  c_tails->add_option("--sampler", to.sampler, "direct | zrp")
      ->check(CLI::IsMember({"direct", "zrp"}));
  c_tails->add_option("--corrected", to.corrected,
                      "finite-size corrected constants (default true)");
  add_zrp(c_tails, tz);

  CommonOpts fo;
  ZrpOpts fz;
  CLI::App* c_profile = app.add_subcommand("profile", "accumulated profiles (CSV)");
  add_common(c_profile, fo);
  c_profile->add_option("--realizations", fo.realizations, "number of realizations");
  c_profile->add_option("--sampler", fo.sampler, "direct | zrp")
      ->check(CLI::IsMember({"direct", "zrp"}));
  add_zrp(c_profile, fz);

  CommonOpts xo;
  ZrpOpts xz;
  CLI::App* c_max = app.add_subcommand("maxcluster", "maximum cluster fractions (CSV)");
  add_common(c_max, xo);
  c_max->add_option("--realizations", xo.realizations, "number of realizations");
  c_max->add_option("--sampler", xo.sampler, "direct | zrp")
      ->check(CLI::IsMember({"direct", "zrp"}));
  add_zrp(c_max, xz);

  CLI::App* c_oracle =
      app.add_subcommand("oracle", "run the enumeration cross-check suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (c_model->parsed()) return cmd_model(mo);
    if (c_part->parsed()) return cmd_partition(po);
    if (c_sample->parsed()) return cmd_sample(so, sz, trajectory);
    if (c_tails->parsed()) return cmd_tails(to, tz);
    if (c_profile->parsed()) return cmd_profile(fo, fz);
    if (c_max->parsed()) return cmd_maxcluster(xo, xz);
    if (c_oracle->parsed()) return cmd_oracle();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
