#include <catch2/catch_amalgamated.hpp>
#include <qsd/oracle.hpp>
#include <qsd/synthesis.hpp>

#include "helpers.hpp"

using namespace qsd;
using namespace qsd::testing;

TEST_CASE("theta estimates from log-survival slopes") {
  CHECK(estimate_theta(chain_a(), 1, 2000) == Catch::Approx(0.5).margin(1e-3));
  CHECK(estimate_theta(chain_b(), 0, 2000) == Catch::Approx(0.5).margin(1e-3));
  // state with zero row dies in one step
  auto dead = chain_from_rows(2, {{1, 1, 0.5}});
  CHECK(estimate_theta(dead, 0, 100) == 0.0);
}

TEST_CASE("dyadic j estimates land on integers") {
  auto ja = estimate_j(chain_a(), 1, 0.5, 4000);
  CHECK(ja.j_hat == 1);
  CHECK(std::abs(ja.unrounded - 1.0) < 0.05);
  CHECK_FALSE(ja.flagged);

  auto j0 = estimate_j(chain_a(), 0, 0.5, 4000);
  CHECK(j0.j_hat == 0);
  CHECK(std::abs(j0.unrounded) < 0.05);

  auto jd = estimate_j(chain_d(), 2, 0.5, 4000);
  CHECK(jd.j_hat == 2);
  CHECK(std::abs(jd.unrounded - 2.0) < 0.1);
}

TEST_CASE("j estimate flags states dying below the leading rate") {
  auto jf = estimate_j(chain_fourclass(), 1, 0.5, 2000);
  CHECK(jf.degenerate);
}

TEST_CASE("oracle estimates agree with certificates on every fixture") {
  struct Case {
    AbsorbedChain chain;
    const char* name;
  };
  std::vector<Case> cases{{chain_a(), "a"},
                          {chain_b(), "b"},
                          {chain_c(), "c"},
                          {chain_d(), "d"},
                          {chain_fourclass(), "fourclass"},
                          {chain_twoleads(), "twoleads"}};
  for (auto& cs : cases) {
    auto syn = synthesize(cs.chain);
    Vec eta = syn.cert.eta_total();
    for (int x = 0; x < cs.chain.size(); ++x) {
      INFO(cs.name << " state " << x);
      double th = estimate_theta(cs.chain, x, 4000);
      if (eta[x] > 0) {
        CHECK(std::abs(th - syn.cert.theta_bar) <= 1e-3);
        auto je = estimate_j(cs.chain, x, syn.cert.theta_bar, 4000);
        CHECK(je.j_hat == syn.cert.j_state[x]);
        CHECK_FALSE(je.degenerate);
      } else {
        // survival decays at the best reachable sub-leading rate
        double best = 0;
        const auto& g = syn.graph;
        int c0 = g.class_of[x];
        for (int c = 0; c < g.k; ++c)
          if (g.accessible(c0, c)) best = std::max(best, g.theta[c]);
        CHECK(std::abs(th - best) <= 1e-3);
      }
    }
  }
}

TEST_CASE("rescaled iterates are invariant under doubling the rescale step") {
  auto d = chain_d();
  Vec mu = Vec::Zero(3);
  mu[2] = 1.0;
  auto per_step = iterate(d, mu, 40, 0.5);
  // same trajectory, dividing by theta^2 every second step
  Vec v = mu;
  for (int k = 1; k <= 20; ++k) {
    v = step_measure(d, step_measure(d, v)) / 0.25;
    CHECK((v - per_step[2 * k]).cwiseAbs().maxCoeff() <=
          1e-12 * v.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("limit check sees the exact 1/n residual of the equal-rate fixture") {
  auto chain = chain_a();
  auto syn = synthesize(chain);
  auto lc = check_limit(chain, syn.cert, 1, Vec::Ones(2), 2000);
  CHECK(lc.pass);
  CHECK_FALSE(lc.refuted);
  // residual is exactly 1/n, so n * residual pins to 1
  for (std::size_t k = 0; k < lc.ns.size(); ++k) {
    if (lc.ns[k] < 10) continue;
    CHECK(std::abs(lc.ns[k] * lc.residuals[k] - 1.0) < 1e-6);
  }
}

TEST_CASE("limit check measures the geometric ratio on the tail fixture") {
  auto chain = chain_b();
  auto syn = synthesize(chain);
  auto lc = check_limit(chain, syn.cert, 0, Vec::Ones(2), 200);
  CHECK(lc.pass);
  CHECK(lc.measured_ratio ==
        Catch::Approx(std::max(syn.cert.envelope.ratio, 0.4)).margin(0.05));
}

TEST_CASE("limit check refutes a corrupted certificate with a witness") {
  auto chain = chain_a();
  auto syn = synthesize(chain);
  auto bad = syn.cert;
  bad.eta[0][1] = 0.7;  // true limit is 0.6
  auto lc = check_limit(chain, bad, 1, Vec::Ones(2), 2000);
  CHECK_FALSE(lc.pass);
  CHECK(lc.witness_n > 0);
}

TEST_CASE("section-2 invariants pass on fixtures") {
  for (auto chain :
       {chain_a(), chain_d(), chain_fourclass(), chain_twoleads()}) {
    auto syn = synthesize(chain);
    auto rep = check_section2_invariants(chain, syn.cert);
    CHECK(rep.all_pass());
    CHECK(rep.masked_worst <= 1e-10);
  }
  // the normalization nu(eta) = 1 pins eta at the bottom class
  auto syn = synthesize(chain_a());
  CHECK(syn.cert.eta[0][0] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("section-2 checks catch a measure with mass on a positive-j state") {
  auto chain = chain_a();
  auto syn = synthesize(chain);
  auto bad = syn.cert;
  bad.nu[0] = Vec::Zero(2);
  bad.nu[0][0] = 0.8;
  bad.nu[0][1] = 0.2;  // j = 1 there
  auto rep = check_section2_invariants(chain, bad);
  CHECK_FALSE(rep.all_pass());
  CHECK_FALSE(rep.fixed_point);
  CHECK_FALSE(rep.nu_normalized);
}

TEST_CASE("section-2 invariants pass on seeded random chains") {
  for (std::uint64_t seed = 700; seed < 715; ++seed) {
    auto chain = random_reducible_chain(seed);
    auto syn = synthesize(chain);
    auto rep = check_section2_invariants(chain, syn.cert);
    INFO("seed " << seed);
    CHECK(rep.all_pass());
  }
}

TEST_CASE("conditional law matches the closed form of the equal-rate fixture") {
  auto chain = chain_a();
  auto syn = synthesize(chain);
  Vec mu = Vec::Zero(2);
  mu[1] = 1.0;
  const int n = 1000;
  auto cl = conditional_law(chain, syn.cert, mu, n);
  double denom = 1.0 + 0.6 * n;
  CHECK(cl.exact[0] == Catch::Approx(0.6 * n / denom).epsilon(1e-10));
  CHECK(cl.exact[1] == Catch::Approx(1.0 / denom).epsilon(1e-10));
  CHECK(cl.mixture[0] == 1.0);  // the mixture weight is carried by n^1 eta(1)
  CHECK(cl.tv == Catch::Approx(2.0 / denom).epsilon(1e-8));
}

TEST_CASE("a quasi-stationary start keeps the conditional law fixed") {
  auto chain = chain_b();
  auto syn = synthesize(chain);
  for (int n : {1, 5, 20, 200}) {
    auto cl = conditional_law(chain, syn.cert, syn.cert.nu[0], n);
    CHECK(cl.tv <= 1e-12);
  }
}

TEST_CASE("uniform start on the chained fixture converges to the bottom") {
  auto chain = chain_d();
  auto syn = synthesize(chain);
  Vec mu = Vec::Constant(3, 1.0 / 3);
  auto coarse = conditional_law(chain, syn.cert, mu, 200);
  auto fine = conditional_law(chain, syn.cert, mu, 2000);
  CHECK(fine.tv < coarse.tv);
  CHECK(fine.tv < 0.01);
}

TEST_CASE("monte carlo cross-check against the exact conditional law") {
  auto chain = chain_a();
  auto syn = synthesize(chain);
  const int n = 20;
  const long samples = 1000000;
  auto mc = monte_carlo_conditional(chain, 1, n, samples, 0);
  Vec mu = Vec::Zero(2);
  mu[1] = 1.0;
  auto cl = conditional_law(chain, syn.cert, mu, n);
  REQUIRE(mc.survivors > 0);
  for (int s = 0; s < 2; ++s) {
    double p = cl.exact[s];
    double se = std::sqrt(p * (1 - p) / static_cast<double>(mc.survivors));
    CHECK(std::abs(mc.empirical[s] - p) <= 3 * se + 1e-12);
  }
}

TEST_CASE("monte carlo at n = 0 returns the start point") {
  auto mc = monte_carlo_conditional(chain_a(), 1, 0, 100, 7);
  CHECK(mc.empirical[1] == 1.0);
  CHECK(mc.survivors == 100);
}

TEST_CASE("monte carlo reports zero survivors") {
  auto all_absorbing = chain_from_rows(2, {{0, 1, 0.0}, {1, 0, 0.0}});
  REQUIRE_THROWS_WITH(monte_carlo_conditional(all_absorbing, 0, 1, 100, 0),
                      Catch::Matchers::ContainsSubstring("surviving"));
}

TEST_CASE("monte carlo error shrinks like the root of the sample count") {
  auto chain = chain_a();
  auto syn = synthesize(chain);
  const int n = 6;
  Vec mu = Vec::Zero(2);
  mu[1] = 1.0;
  auto cl = conditional_law(chain, syn.cert, mu, n);
  const int replicates = 48;
  auto rms_error = [&](long samples, std::uint64_t salt) {
    double acc = 0;
    for (int r = 0; r < replicates; ++r) {
      auto mc = monte_carlo_conditional(chain, 1, n, samples,
                                        salt + static_cast<std::uint64_t>(r));
      double e = mc.empirical[0] - cl.exact[0];
      acc += e * e;
    }
    return std::sqrt(acc / replicates);
  };
  double err_full = rms_error(80000, 1000);
  double err_half = rms_error(40000, 2000);
  double ratio = err_half / err_full;
  CHECK(ratio > std::sqrt(2.0) * 0.7);
  CHECK(ratio < std::sqrt(2.0) * 1.3);
}
