#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "condlab/model.hpp"

using namespace condlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
PerturbationParams pert(double theta, double gamma, double kappa) {
  return PerturbationParams{theta, gamma, kappa, nullptr, 0.0};
}
}  // namespace

TEST_CASE("geometric bulk weights: pmf, generating function, density") {
  BulkWeights b = BulkWeights::geometric(0.5);
  CHECK_THAT(b.pmf(0), WithinAbs(0.5, 1e-16));
  CHECK_THAT(b.pmf(3), WithinAbs(0.0625, 1e-16));
  CHECK_THAT(b.log_pmf(3), WithinRel(std::log(0.0625), 1e-14));
  CHECK(b.pmf(-1) == 0.0);
  CHECK(b.log_pmf(-2) == kLogZero);

  CHECK_THAT(b.z(0.0), WithinAbs(0.5, 1e-16));
  CHECK_THAT(b.z(1.0), WithinAbs(1.0, 1e-14));
  CHECK(b.R(0.0) == 0.0);
  CHECK_THAT(b.R(1.0), WithinAbs(1.0, 1e-13));     // critical density
  CHECK_THAT(b.R(2.0 / 3.0), WithinAbs(0.5, 1e-13));
  CHECK(b.rho_c() == 1.0);
  CHECK(b.phi_bar() == 2.0);
  CHECK_THROWS_AS(b.z(2.5), std::domain_error);    // beyond the radius
  CHECK_THROWS_AS(b.z(-0.1), std::domain_error);
  CHECK_THROWS_AS(BulkWeights::geometric(0.0), std::domain_error);
  CHECK_THROWS_AS(BulkWeights::geometric(1.0), std::domain_error);
}

TEST_CASE("closed-form moments match direct series summation") {
  BulkWeights b = BulkWeights::geometric(0.5);
  for (double phi : {0.3, 0.8, 1.2}) {
    double z = 0.0, m1 = 0.0, m2 = 0.0;
    double t = b.pmf(0);  // term pmf(n) phi^n, updated incrementally so the
    for (i64 n = 0; n < 4000; ++n) {  // underflowing tail never meets an overflow
      z += t;
      m1 += static_cast<double>(n) * t;
      m2 += static_cast<double>(n) * static_cast<double>(n) * t;
      t *= 0.5 * phi;
    }
    CHECK_THAT(b.z(phi), WithinRel(z, 1e-12));
    CHECK_THAT(b.moment1(phi), WithinRel(m1, 1e-12));
    CHECK_THAT(b.moment2(phi), WithinRel(m2, 1e-12));
    CHECK_THAT(b.tilted_var(phi), WithinRel(m2 / z - (m1 / z) * (m1 / z), 1e-10));
  }
}

TEST_CASE("a table head with geometric tail reproduces the geometric family") {
  // head {1, 0.5} with ratio 0.5 normalizes to exactly Geometric(1/2)
  BulkWeights t = BulkWeights::table({1.0, 0.5}, 0.5);
  BulkWeights g = BulkWeights::geometric(0.5);
  for (i64 n = 0; n <= 30; ++n) CHECK_THAT(t.pmf(n), WithinRel(g.pmf(n), 1e-13));
  CHECK_THAT(t.rho_c(), WithinRel(1.0, 1e-12));
  for (double phi : {0.2, 0.9, 1.5}) {
    CHECK_THAT(t.z(phi), WithinRel(g.z(phi), 1e-12));
    CHECK_THAT(t.moment1(phi), WithinRel(g.moment1(phi), 1e-12));
    CHECK_THAT(t.moment2(phi), WithinRel(g.moment2(phi), 1e-12));
  }
}

TEST_CASE("table weights normalize and match series moments") {
  BulkWeights t = BulkWeights::table({2.0, 1.0, 3.0, 0.5}, 0.4);
  double total = 0.0;
  for (i64 n = 0; n < 300; ++n) total += t.pmf(n);
  CHECK_THAT(total, WithinAbs(1.0, 1e-13));
  for (double phi : {0.5, 1.3}) {
    double z = 0.0, m1 = 0.0;
    for (i64 n = 0; n < 2000; ++n) {
      double term = t.pmf(n) * std::pow(phi, static_cast<double>(n));
      z += term;
      m1 += static_cast<double>(n) * term;
    }
    CHECK_THAT(t.z(phi), WithinRel(z, 1e-12));
    CHECK_THAT(t.moment1(phi), WithinRel(m1, 1e-12));
  }
  CHECK_THROWS_AS(BulkWeights::table({}, 0.5), std::domain_error);
  CHECK_THROWS_AS(BulkWeights::table({1.0, -0.5}, 0.5), std::domain_error);
  CHECK_THROWS_AS(BulkWeights::table({1.0}, 1.0), std::domain_error);
}

TEST_CASE("density inversion round-trips and saturates above criticality") {
  BulkWeights b = BulkWeights::geometric(0.5);
  for (double rho : {0.05, 0.3, 0.6, 0.9, 0.99}) {
    double phi = invert_density(b, rho);
    CHECK_THAT(b.R(phi), WithinAbs(rho, 1e-10));
  }
  CHECK(invert_density(b, 0.0) == 0.0);
  CHECK(invert_density(b, 1.5) == 1.0);
  CHECK(invert_density(b, 100.0) == 1.0);
  CHECK_THROWS_AS(invert_density(b, -0.1), std::domain_error);

  // monotonicity of R on the closed unit interval
  double prev = -1.0;
  for (double phi = 0.0; phi <= 1.0; phi += 0.05) {
    double r = b.R(phi);
    CHECK(r > prev);
    prev = r;
  }
}

TEST_CASE("extended inversion reaches supercritical means") {
  BulkWeights b = BulkWeights::geometric(0.5);
  for (double u : {0.5, 1.0, 3.0, 20.0}) {
    double phi = invert_density_extended(b, u);
    CHECK_THAT(b.R(phi), WithinRel(u, 1e-9));
  }
  CHECK(invert_density_extended(b, 1.0) > 0.999);
  CHECK(invert_density_extended(b, 3.0) > 1.0);  // beyond the grand-canonical domain
  CHECK_THROWS_AS(invert_density_extended(b, 1e14), std::runtime_error);  // tilt saturation
}

TEST_CASE("perturbed weights add the polynomial term exactly") {
  BulkWeights b = BulkWeights::geometric(0.5);
  ModelSpec m(b, pert(0.1, 1.0, 0.5), 512, 1024);
  // 0.5^9 + 0.1 * 512^-1 * 9^0.5
  CHECK_THAT(m.perturbed_pmf(8), WithinRel(0.0025390625, 1e-14));
  CHECK_THAT(m.pert_amplitude(), WithinRel(0.1 / 512.0, 1e-15));
  CHECK(m.perturbed_pmf(-1) == 0.0);

  ModelSpec unpert(b, pert(0.0, 1.0, 0.5), 512, 1024);
  for (i64 n = 0; n <= 20; ++n) {
    CHECK(unpert.perturbed_pmf(n) == b.pmf(n));
    CHECK(m.perturbed_pmf(n) > b.pmf(n));
    CHECK_THAT(std::exp(m.log_perturbed_pmf(n)), WithinRel(m.perturbed_pmf(n), 1e-13));
  }
  // bulk part underflows in linear space far out; the log form stays exact
  CHECK_THAT(m.log_perturbed_pmf(5000),
             WithinRel(std::log(0.1 / 512.0) + 0.5 * std::log(5001.0), 1e-12));
}

TEST_CASE("bounded nuisance perturbations enter both pmf forms") {
  BulkWeights b = BulkWeights::geometric(0.5);
  auto delta = [](i64 n) { return n % 2 == 0 ? 0.25 : -0.25; };
  ModelSpec m(b, PerturbationParams{0.2, 1.0, 0.0, delta, 0.25}, 8, 10);
  for (i64 n = 0; n <= 10; ++n) {
    double expect = b.pmf(n) + 0.2 / 8.0 * (1.0 + delta(n));
    CHECK_THAT(m.perturbed_pmf(n), WithinRel(expect, 1e-13));
    CHECK_THAT(std::exp(m.log_perturbed_pmf(n)), WithinRel(expect, 1e-13));
  }
}

TEST_CASE("parameter validation rejects out-of-range inputs") {
  BulkWeights b = BulkWeights::geometric(0.5);
  CHECK_THROWS_AS(pert(-0.1, 1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(pert(0.1, 0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(pert(0.1, 1.0, -1.5), std::domain_error);
  CHECK_THROWS_AS(PerturbationParams(0.1, 1.0, 0.0, nullptr, 0.5), std::domain_error);
  CHECK_THROWS_AS(ModelSpec(b, pert(0.1, 1.0, 0.0), 0, 4), std::domain_error);
  CHECK_THROWS_AS(ModelSpec(b, pert(0.1, 1.0, 0.0), 4, -1), std::domain_error);
  // a nuisance below -1 can push a weight negative; construction must catch it
  auto bad = [](i64) { return -2.0; };
  CHECK_THROWS_AS(ModelSpec(b, PerturbationParams{100.0, 1.0, 0.0, bad, 0.9}, 2, 3),
                  std::domain_error);
}

TEST_CASE("model hashes separate parameter changes") {
  BulkWeights b = BulkWeights::geometric(0.5);
  ModelSpec base(b, pert(0.1, 1.0, 0.0), 8, 16);
  CHECK(base.hash() == ModelSpec(b, pert(0.1, 1.0, 0.0), 8, 16).hash());
  CHECK(base.hash() != ModelSpec(b, pert(0.2, 1.0, 0.0), 8, 16).hash());
  CHECK(base.hash() != ModelSpec(b, pert(0.1, 2.0, 0.0), 8, 16).hash());
  CHECK(base.hash() != ModelSpec(b, pert(0.1, 1.0, 0.5), 8, 16).hash());
  CHECK(base.hash() != ModelSpec(b, pert(0.1, 1.0, 0.0), 9, 16).hash());
  CHECK(base.hash() != ModelSpec(b, pert(0.1, 1.0, 0.0), 8, 17).hash());
  CHECK(base.hash() != ModelSpec(BulkWeights::geometric(0.4), pert(0.1, 1.0, 0.0), 8, 16).hash());
}

TEST_CASE("grand-canonical summary: exact series, divergence at the critical tilt") {
  BulkWeights b = BulkWeights::geometric(0.5);
  ModelSpec m(b, pert(0.1, 1.0, 0.0), 64, 128);
  for (double phi : {0.0, 0.4, 0.9}) {
    GrandCanonical g = grand_canonical(m, phi);
    CHECK(g.z == b.z(phi));
    CHECK(g.R == b.R(phi));
    // kappa = 0: sum (n+1)^0 phi^n = 1/(1-phi)
    double amp = 0.1 / 64.0;
    CHECK_THAT(g.z_L(), WithinRel(b.z(phi) + amp / (1.0 - phi), 1e-12));
    CHECK(g.R_L() >= g.R);
  }
  GrandCanonical crit = grand_canonical(m, 1.0);
  CHECK(crit.z == b.z(1.0));
  CHECK_THROWS_AS(crit.z_L(), std::domain_error);
  CHECK_THROWS_AS(crit.R_L(), std::domain_error);
  CHECK_THROWS_AS(grand_canonical(m, 1.5), std::domain_error);

  ModelSpec unpert(b, pert(0.0, 1.0, 0.0), 64, 128);
  GrandCanonical u = grand_canonical(unpert, 1.0);
  CHECK(u.z_L() == u.z);
  CHECK(u.R_L() == u.R);
}

TEST_CASE("perturbed generating function stays within the uniform envelope") {
  // |z_L - z| <= 2 theta Gamma(kappa+1) L^-gamma (1-phi)^-(kappa+1)
  BulkWeights b = BulkWeights::geometric(0.5);
  for (double kappa : {0.0, 0.5, 1.0, 2.0}) {
    ModelSpec m(b, pert(0.1, 1.0, kappa), 64, 128);
    for (double phi : {0.0, 0.3, 0.7, 0.9, 0.99}) {
      GrandCanonical g = grand_canonical(m, phi);
      double envelope = 2.0 * 0.1 * std::tgamma(kappa + 1.0) / 64.0 *
                        std::pow(1.0 - phi, -(kappa + 1.0));
      CHECK(std::abs(g.z_L() - g.z) <= envelope);
    }
  }
}

TEST_CASE("finite-cutoff mean of the perturbed weights") {
  BulkWeights b = BulkWeights::geometric(0.5);
  ModelSpec m(b, pert(0.1, 1.0, 0.0), 512, 1024);
  CHECK_THAT(truncated_rho_c(m, 1024), WithinAbs(86.235964198535, 1e-8));
  CHECK(truncated_rho_c(m, 0) == 0.0);
  CHECK_THROWS_AS(truncated_rho_c(m, -1), std::domain_error);

  // theta = 0: the cutoff mean climbs to the bulk critical density
  ModelSpec unpert(b, pert(0.0, 1.0, 0.0), 512, 1024);
  CHECK_THAT(truncated_rho_c(unpert, 400), WithinAbs(1.0, 1e-6));
  CHECK(truncated_rho_c(unpert, 10) < truncated_rho_c(unpert, 400));
}

TEST_CASE("model files parse, validate, and reject malformed input") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_model_spec(in);
  };
  ModelSpec m = parse("# comment\n"
                      "bulk.family = geometric\n"
                      "bulk.p = 0.5\n"
                      "\n"
                      "pert.theta = 0.1   # trailing comment\n"
                      "pert.gamma = 1.0\n"
                      "pert.kappa = 0.5\n"
                      "system.L = 512\n"
                      "system.N = 1024\n");
  CHECK(m.L() == 512);
  CHECK(m.N() == 1024);
  CHECK(m.rho() == 2.0);
  CHECK(m.pert().kappa == 0.5);
  CHECK(m.bulk().family() == BulkFamily::Geometric);

  ModelSpec t = parse("bulk.family = table\n"
                      "bulk.weights = 2.0, 1.0, 0.5\n"
                      "bulk.tail_ratio = 0.4\n"
                      "pert.theta = 0\n"
                      "pert.gamma = 1\n"
                      "pert.kappa = 0\n"
                      "system.L = 4\n"
                      "system.N = 2\n");
  CHECK(t.bulk().family() == BulkFamily::Table);
  CHECK(t.bulk().head().size() == 3);

  CHECK_THROWS_AS(parse("bulk.family = geometric\n"), std::invalid_argument);  // missing keys
  CHECK_THROWS_AS(parse("bulk.family = geometric\nbulk.p = 0.5\nbulk.p = 0.6\n"
                        "pert.theta = 0\npert.gamma = 1\npert.kappa = 0\n"
                        "system.L = 2\nsystem.N = 1\n"),
                  std::invalid_argument);  // duplicate
  CHECK_THROWS_AS(parse("bulk.family = geometric\nbulk.p = 0.5\nwhat = 1\n"
                        "pert.theta = 0\npert.gamma = 1\npert.kappa = 0\n"
                        "system.L = 2\nsystem.N = 1\n"),
                  std::invalid_argument);  // unknown key
  CHECK_THROWS_AS(parse("bulk.family = geometric\nbulk.p = abc\n"
                        "pert.theta = 0\npert.gamma = 1\npert.kappa = 0\n"
                        "system.L = 2\nsystem.N = 1\n"),
                  std::invalid_argument);  // bad number
  CHECK_THROWS_AS(parse("bulk.family = weird\nbulk.p = 0.5\n"
                        "pert.theta = 0\npert.gamma = 1\npert.kappa = 0\n"
                        "system.L = 2\nsystem.N = 1\n"),
                  std::invalid_argument);  // bad family
  CHECK_THROWS_AS(parse("no equals sign here\n"), std::invalid_argument);
  CHECK_THROWS_AS(load_model_spec("/nonexistent/path.model"), std::invalid_argument);
}

TEST_CASE("caller-supplied effective density shifts the cluster scale") {
  BulkWeights b = BulkWeights::geometric(0.5);
  ModelSpec m(b, pert(0.1, 1.0, 0.0), 512, 1024);
  CHECK_THAT(cluster_scale_with(m, 1.0), WithinRel(std::sqrt(5120.0), 1e-13));
  CHECK(cluster_scale_with(m, 0.9) > cluster_scale_with(m, 1.0));
  CHECK_THROWS_AS(cluster_scale_with(m, 2.5), std::domain_error);  // rho below effective rho_c
  ModelSpec unpert(b, pert(0.0, 1.0, 0.0), 512, 1024);
  CHECK_THROWS_AS(cluster_scale_with(unpert, 1.0), std::domain_error);
}
