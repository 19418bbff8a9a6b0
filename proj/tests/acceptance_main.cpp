// Acceptance suite: every criterion below runs end to end at its stated
// tolerance and prints one pass/fail line. The binary exits nonzero when any
// criterion fails.

#include <functional>
#include <iostream>
#include <qsd/commands.hpp>

#include "helpers.hpp"

using namespace qsd;
using namespace qsd::testing;

namespace {

int failures = 0;

void criterion(int id, const std::string& label,
               const std::function<void(std::string&)>& body) {
  std::string detail;
  bool ok = true;
  try {
    body(detail);
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  if (!detail.empty() && detail[0] == '!') {
    ok = false;
    detail = detail.substr(1);
  }
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << label;
  if (!ok && !detail.empty()) std::cout << " [" << detail << "]";
  std::cout << std::endl;
  if (!ok) ++failures;
}

void require(std::string& detail, bool cond, const std::string& msg) {
  if (!cond && detail.empty()) detail = "!" + msg;
}

}  // namespace

int main() {
  criterion(1, "two-state fixture: exact rate, exponents, eta and the 1/n residual",
            [](std::string& detail) {
    auto chain = chain_a();
    auto syn = synthesize(chain);
    require(detail, std::abs(syn.cert.theta_bar - 0.5) <= 0.5 * kThetaTol,
            "theta_bar not 0.5");
    require(detail, syn.cert.j_state == std::vector<int>{0, 1}, "j mismatch");
    require(detail, std::abs(syn.cert.eta[0][0] - 1.0) <= 1e-9, "eta(0)");
    require(detail, std::abs(syn.cert.eta[0][1] - 0.6) <= 1e-9, "eta(1)");
    require(detail, syn.cert.nu[0][0] == 1.0 && syn.cert.nu[0][1] == 0.0,
            "nu not the point mass");
    Vec mu = Vec::Zero(2);
    mu[1] = 1.0;
    auto seq = iterate(chain, mu, 2000, 0.5);
    for (int n = 1; n <= 2000; ++n) {
      double m = mass(seq[static_cast<std::size_t>(n)]);
      require(detail, std::abs(m - (1.0 + 0.6 * n)) <= 1e-8 * (1.0 + 0.6 * n),
              "survival mass deviates from 1 + 0.6 n");
      double residual = std::abs(m / n - 0.6);
      require(detail, std::abs(n * residual - 1.0) <= 1e-6,
              "residual is not exactly 1/n");
    }
  });

  criterion(2, "fast-downstream fixture: tail measure and fixed-point residual",
            [](std::string& detail) {
    auto chain = chain_b();
    auto syn = synthesize(chain);
    require(detail, std::abs(syn.cert.nu[0][0] - 0.6) <= 1e-10, "nu(0)");
    require(detail, std::abs(syn.cert.nu[0][1] - 0.4) <= 1e-10, "nu(1)");
    Vec next = step_measure(chain, syn.cert.nu[0]);
    double res = (next - 0.5 * syn.cert.nu[0]).cwiseAbs().sum();
    require(detail, res <= 1e-12, "fixed-point residual " + std::to_string(res));
  });

  criterion(3, "fast-upstream fixture: eta on the feeder state",
            [](std::string& detail) {
    auto syn = synthesize(chain_c());
    require(detail, std::abs(syn.cert.eta[0][0] - 5.0 / 3.0) <= 1e-9,
            "eta(feeder) not 5/3");
  });

  criterion(4, "three-level fixture: path count and dyadic estimates agree",
            [](std::string& detail) {
    auto chain = chain_d();
    auto syn = synthesize(chain);
    require(detail, syn.cert.j_state == std::vector<int>{0, 1, 2},
            "certificate j mismatch");
    require(detail, syn.graph.j_class == std::vector<int>{0, 1, 2},
            "condensation j mismatch");
    for (int x = 0; x < 3; ++x) {
      auto je = estimate_j(chain, x, syn.cert.theta_bar, 4000);
      require(detail, je.j_hat == x, "estimate at state " + std::to_string(x));
      require(detail, std::abs(je.unrounded - x) <= 0.1,
              "unrounded estimate off by more than 0.1");
    }
  });

  criterion(5, "four-class diamond: exponents and the eta support",
            [](std::string& detail) {
    auto syn = synthesize(chain_fourclass());
    require(detail, syn.cert.j_state == std::vector<int>{0, 0, 0, 1},
            "j mismatch");
    require(detail, syn.cert.eta[0][0] > 0 && syn.cert.eta[0][2] > 0 &&
                        syn.cert.eta[0][3] > 0,
            "eta must be positive on the classes above the lead");
    require(detail, syn.cert.eta[0][1] == 0.0,
            "eta must vanish on the inaccessible class");
  });

  criterion(6, "masked eigen-identity at 1e-10 on fixtures and 50 random chains",
            [](std::string& detail) {
    std::vector<AbsorbedChain> chains{chain_a(), chain_b(), chain_c(),
                                      chain_d(), chain_fourclass(),
                                      chain_twoleads()};
    for (std::uint64_t seed = 9000; seed < 9050; ++seed)
      chains.push_back(random_reducible_chain(seed));
    for (std::size_t i = 0; i < chains.size(); ++i) {
      auto syn = synthesize(chains[i]);
      auto rep = check_section2_invariants(chains[i], syn.cert, 50);
      require(detail, rep.masked_worst <= 1e-10,
              "chain " + std::to_string(i) + " worst relative error " +
                  std::to_string(rep.masked_worst));
    }
  });

  criterion(7, "no support edge raises the polynomial parameter",
            [](std::string& detail) {
    std::vector<AbsorbedChain> chains{chain_a(), chain_b(), chain_c(),
                                      chain_d(), chain_fourclass(),
                                      chain_twoleads()};
    for (std::uint64_t seed = 9000; seed < 9050; ++seed)
      chains.push_back(random_reducible_chain(seed));
    for (std::size_t i = 0; i < chains.size(); ++i) {
      auto syn = synthesize(chains[i]);
      auto rep = check_section2_invariants(chains[i], syn.cert, 1);
      require(detail, rep.j_monotone,
              "chain " + std::to_string(i) + " has a raising edge");
    }
  });

  criterion(8, "two disconnected leads span a segment of fixed points",
            [](std::string& detail) {
    auto chain = chain_twoleads();
    auto syn = synthesize(chain);
    require(detail, syn.cert.nu.size() == 2, "expected two extreme measures");
    for (int k = 0; k <= 10; ++k) {
      double lam = k / 10.0;
      Vec mix = lam * syn.cert.nu[0] + (1 - lam) * syn.cert.nu[1];
      Vec next = step_measure(chain, mix);
      double res = (next - syn.cert.theta_bar * mix).cwiseAbs().sum();
      require(detail, res <= 1e-10,
              "combination " + std::to_string(lam) + " residual " +
                  std::to_string(res));
    }
  });

  criterion(9, "operator laboratory: 100 seeded instances per composition case",
            [](std::string& detail) {
    for (int case_id : {1, 2, 3}) {
      auto res = cmd_operator_lab(case_id, 0, 100);
      const auto& lab = res.report["operator_lab"];
      require(detail, lab["status"] == "pass",
              "case " + std::to_string(case_id) + " worst mismatch " +
                  lab["worst_e_mismatch"].dump() + ", worst identity " +
                  lab["worst_identity_residual"].dump());
      require(detail, lab["worst_e_mismatch"].get<double>() <= 1e-6,
              "case " + std::to_string(case_id) + " limit mismatch");
      require(detail, lab["worst_identity_residual"].get<double>() <= 1e-10,
              "case " + std::to_string(case_id) + " commutation identity");
      if (case_id == 3)
        for (const auto& r : lab["results"])
          require(detail,
                  r["fitted_j"].get<double>() == r["predicted_j"].get<double>(),
                  "case 3 fitted exponent is not 1 + J_R");
    }
  });

  criterion(10, "rate shapes: bounded n-scaled residual and the geometric ratio",
            [](std::string& detail) {
    auto a = chain_a();
    auto syn_a = synthesize(a);
    auto lc_a = check_limit(a, syn_a.cert, 1, Vec::Ones(2), 2000);
    require(detail, lc_a.pass, "envelope test failed on the 1/n fixture");
    double first = 0, last = 0;
    for (std::size_t k = 0; k < lc_a.ns.size(); ++k) {
      double scaled = lc_a.ns[k] * lc_a.residuals[k];
      require(detail, scaled <= 1.5, "n * residual unbounded");
      if (lc_a.ns[k] == 100) first = scaled;
      if (lc_a.ns[k] == 2000) last = scaled;
    }
    require(detail, std::abs(last - 1.0) <= 1e-6 && std::abs(first - 1.0) <= 1e-6,
            "n * residual does not settle at the constant");

    auto b = chain_b();
    auto syn_b = synthesize(b);
    auto lc_b = check_limit(b, syn_b.cert, 0, Vec::Ones(2), 200);
    double want = std::max(syn_b.spectra[0].gap, 0.2 / 0.5);
    require(detail, std::abs(lc_b.measured_ratio - want) <= 0.05,
            "measured ratio " + std::to_string(lc_b.measured_ratio) +
                " vs " + std::to_string(want));
  });

  criterion(11, "drift workflow: windows 200 and 400 agree on the structure",
            [](std::string& detail) {
    std::string path = std::string(QSD_FIXTURE_DIR) + "/downdrift.rules";
    auto res = cmd_lyapunov(path, "", {200, 400});
    require(detail, res.report["lyapunov"]["pass"] == true,
            "drift criterion failed");
    require(detail, res.report["stability"]["stable"] == true,
            "windows disagree");
    double vtv = res.report["stability"]["vtv_gap"][0].get<double>();
    double drift = res.report["stability"]["theta_drift"][0].get<double>();
    require(detail, vtv <= 1e-8,
            "weighted distance " + std::to_string(vtv));
    require(detail, drift <= 1e-10, "rate drift " + std::to_string(drift));
  });

  criterion(12, "Monte Carlo cross-check at a million samples, seed 0",
            [](std::string& detail) {
    auto chain = chain_a();
    auto syn = synthesize(chain);
    auto mc = monte_carlo_conditional(chain, 1, 20, 1000000, 0);
    Vec delta = Vec::Zero(2);
    delta[1] = 1.0;
    auto cl = conditional_law(chain, syn.cert, delta, 20);
    for (int s = 0; s < 2; ++s) {
      double p = cl.exact[s];
      double se =
          std::sqrt(p * (1 - p) / static_cast<double>(mc.survivors));
      require(detail, std::abs(mc.empirical[s] - p) <= 3 * se,
              "state " + std::to_string(s) + " outside three standard errors");
    }
  });

  if (failures == 0) {
    std::cout << "all criteria passed" << std::endl;
    return 0;
  }
  std::cout << failures << " criteria failed" << std::endl;
  return 1;
}
