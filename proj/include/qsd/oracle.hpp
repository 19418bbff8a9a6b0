#pragma once

#include "qsd/certificate.hpp"
#include "qsd/rng.hpp"

namespace qsd {

// Empirical probes of the certificate claims. Everything here runs off
// rescaled iteration (never matrix powers) so survival probabilities far
// below the underflow threshold stay measurable in log space.

struct SurvivalCurve {
  std::vector<double> log_survival;  // log(delta_x S_n 1), index n, -inf when dead
  int died_at = -1;                  // first n with zero survival, -1 if never
};

inline SurvivalCurve survival_curve(const AbsorbedChain& chain, int x, int n_max) {
  SurvivalCurve out;
  out.log_survival.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
  Vec mu = Vec::Zero(chain.size());
  mu[x] = 1.0;
  double log_mass = 0;
  for (int n = 1; n <= n_max; ++n) {
    mu = step_measure(chain, mu);
    double m = mu.sum();
    if (m <= 0) {
      out.died_at = n;
      for (int k = n; k <= n_max; ++k)
        out.log_survival[k] = -std::numeric_limits<double>::infinity();
      return out;
    }
    log_mass += std::log(m);
    mu /= m;
    out.log_survival[n] = log_mass;
  }
  return out;
}

// theta-hat = exp(slope of log survival), least squares over the back half.
inline double estimate_theta(const AbsorbedChain& chain, int x, int n_max) {
  SurvivalCurve c = survival_curve(chain, x, n_max);
  if (c.died_at >= 0) return 0.0;
  int lo = n_max / 2;
  double sn = 0, sl = 0, snn = 0, snl = 0, count = 0;
  for (int n = lo; n <= n_max; ++n) {
    sn += n;
    sl += c.log_survival[n];
    snn += static_cast<double>(n) * n;
    snl += n * c.log_survival[n];
    count += 1;
  }
  double slope = (count * snl - sn * sl) / (count * snn - sn * sn);
  return std::exp(slope);
}

struct JEstimate {
  int j_hat = 0;
  double unrounded = 0;
  bool flagged = false;    // unrounded farther than 0.2 from an integer
  bool degenerate = false; // survival dies or decays strictly below theta-bar
};

// j-hat by the dyadic log-ratio of m_n = theta^{-n} * survival; robust to
// the geometric prefactor and integer-valued by construction of the rounding.
inline JEstimate estimate_j(const AbsorbedChain& chain, int x, double theta_bar,
                            int n_max) {
  JEstimate out;
  SurvivalCurve c = survival_curve(chain, x, n_max);
  if (c.died_at >= 0) {
    out.degenerate = true;
    return out;
  }
  auto log_m = [&](int n) { return c.log_survival[n] - n * std::log(theta_bar); };
  out.unrounded = (log_m(n_max) - log_m(n_max / 2)) / std::log(2.0);
  double r = std::round(out.unrounded);
  out.flagged = std::abs(out.unrounded - r) > 0.2;
  if (r < -0.5) {
    // survival decays strictly faster than theta-bar^n
    out.degenerate = true;
    out.j_hat = 0;
    return out;
  }
  out.j_hat = static_cast<int>(r);
  return out;
}

inline Vec f_restricted(const QsdCertificate& cert, const Vec& f) {
  if (f.size() == cert.size()) return f;
  Vec out(cert.size());
  for (int i = 0; i < cert.size(); ++i) out[i] = f[cert.states[i]];
  return out;
}

struct LimitCheck {
  std::vector<int> ns;
  std::vector<double> residuals;
  double target = 0;         // sum_i eta_i(x) nu_i(f)
  double fitted_c = 0;       // envelope constant, max ratio over the front half
  double test_ratio = 0;     // max residual / fitted envelope over the back half
  bool pass = false;
  bool refuted = false;      // residuals grow over the last decade
  int witness_n = -1;
  double measured_ratio = 0; // log-slope of the residuals (geom envelopes)
};

// Verifies |theta^{-n} n^{-j(x)} E_x(f(X_n) 1) - sum eta_i(x) nu_i(f)| against
// the certificate envelope: constant fitted on the front half, tested on the
// back half.
inline LimitCheck check_limit(const AbsorbedChain& chain,
                              const QsdCertificate& cert, int x, const Vec& f,
                              int n_max) {
  LimitCheck out;
  int li = cert.local_index(x);
  if (li < 0) throw ChainError("state not covered by certificate");
  const int j = cert.j_state[li];
  for (std::size_t i = 0; i < cert.eta.size(); ++i)
    out.target += cert.eta[i][li] * cert.nu[i].dot(f_restricted(cert, f));

  Vec w = f_restricted(cert, f);
  AbsorbedChain sub = chain.size() == cert.size()
                          ? chain
                          : chain.restricted(cert.states);
  double floor_log = std::log(1e-280);
  for (int n = 1; n <= n_max; ++n) {
    w = step_function(sub, w) / cert.theta_bar;
    double value = w[li] / std::pow(static_cast<double>(n), j);
    out.ns.push_back(n);
    out.residuals.push_back(std::abs(value - out.target));
  }
  (void)floor_log;

  // envelope fit; residuals at the rounding floor count as converged
  const Envelope& env = cert.envelope;
  const double floor = 1e-12 * std::max(1.0, std::abs(out.target));
  double c_fit = 0;
  for (std::size_t k = 0; k < out.ns.size(); ++k) {
    int n = out.ns[k];
    if (n > n_max / 2) break;
    if (out.residuals[k] <= floor) continue;
    double s = env.shape(n);
    if (s < 1e-280) continue;
    c_fit = std::max(c_fit, out.residuals[k] / s);
  }
  out.fitted_c = c_fit;
  double worst = 0;
  for (std::size_t k = 0; k < out.ns.size(); ++k) {
    int n = out.ns[k];
    if (n <= n_max / 2) continue;
    if (out.residuals[k] <= floor) continue;
    double bound = c_fit * env.shape(n);
    double ratio = bound < out.residuals[k] * 1e-6
                       ? 2.0  // bound underflowed while the residual did not
                       : out.residuals[k] / bound;
    if (ratio > worst) {
      worst = ratio;
      if (ratio > 1.0 + 1e-7) out.witness_n = n;
    }
  }
  out.test_ratio = worst;
  out.pass = worst <= 1.0 + 1e-7;

  // divergence probe over the last decade
  int tail_lo = std::max(1, n_max * 9 / 10), mid_lo = std::max(1, n_max * 8 / 10);
  double tail = 0, mid = 0;
  for (std::size_t k = 0; k < out.ns.size(); ++k) {
    if (out.ns[k] >= tail_lo)
      tail = std::max(tail, out.residuals[k]);
    else if (out.ns[k] >= mid_lo)
      mid = std::max(mid, out.residuals[k]);
  }
  if (tail > 1.5 * mid && tail > 1e-9 * std::max(1.0, std::abs(out.target))) {
    out.refuted = true;
    out.pass = false;
    out.witness_n = n_max;
  }

  // measured decay ratio over a window clear of the rounding floor
  std::vector<double> xs, ys;
  const double floor_res = 1e-12 * std::max(1.0, std::abs(out.target));
  for (std::size_t k = 0; k < out.ns.size(); ++k)
    if (out.residuals[k] > floor_res && out.ns[k] >= 5 &&
        out.ns[k] <= std::max(10, n_max / 4)) {
      xs.push_back(out.ns[k]);
      ys.push_back(std::log(out.residuals[k]));
    }
  if (xs.size() >= 4) {
    double sn = 0, sl = 0, snn = 0, snl = 0, m = static_cast<double>(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) {
      sn += xs[k];
      sl += ys[k];
      snn += xs[k] * xs[k];
      snl += xs[k] * ys[k];
    }
    out.measured_ratio = std::exp((m * snl - sn * sl) / (m * snn - sn * sn));
  }
  return out;
}

struct Section2Report {
  bool j_monotone = true;
  std::vector<std::pair<int, int>> j_witnesses;  // support edges raising j
  bool masked_identity = true;
  double masked_worst = 0;
  int masked_witness = -1;
  bool nu_normalized = true;   // nu_i(eta_total) == 1
  bool nu_decomposes = true;   // nu_i == sum_k nu_i(eta_k) nu_k
  double nu_worst = 0;
  bool fixed_point = true;     // nu_i S = theta nu_i
  double fixed_point_worst = 0;
  bool all_pass() const {
    return j_monotone && masked_identity && nu_normalized && nu_decomposes &&
           fixed_point;
  }
};

inline Section2Report check_section2_invariants(const AbsorbedChain& chain,
                                                const QsdCertificate& cert,
                                                int n_max = 50) {
  Section2Report rep;
  AbsorbedChain sub =
      chain.size() == cert.size() ? chain : chain.restricted(cert.states);

  // (a) no support edge increases j
  for (int i = 0; i < cert.size(); ++i)
    for (const auto& e : sub.row(i))
      if (e.p > 0 && cert.j_state[e.col] > cert.j_state[i]) {
        rep.j_monotone = false;
        rep.j_witnesses.emplace_back(cert.states[i], cert.states[e.col]);
      }

  // (b) masked eigen-identity per level, n <= n_max
  Vec eta_total = cert.eta_total();
  for (int level = 0; level <= cert.j_max(); ++level) {
    Vec u = Vec::Zero(cert.size());
    for (int i = 0; i < cert.size(); ++i)
      if (cert.j_state[i] == level) u[i] = eta_total[i];
    for (int n = 1; n <= n_max; ++n) {
      u = step_function(sub, u) / cert.theta_bar;
      for (int i = 0; i < cert.size(); ++i) {
        if (cert.j_state[i] != level) continue;
        double err = std::abs(u[i] - eta_total[i]) /
                     std::max(1.0, std::abs(eta_total[i]));
        if (err > rep.masked_worst) {
          rep.masked_worst = err;
          rep.masked_witness = cert.states[i];
        }
      }
    }
  }
  if (rep.masked_worst > 1e-10) rep.masked_identity = false;

  // (c) normalization and decomposition of each extreme measure
  for (std::size_t i = 0; i < cert.nu.size(); ++i) {
    double ne = cert.nu[i].dot(eta_total);
    rep.nu_worst = std::max(rep.nu_worst, std::abs(ne - 1.0));
    Vec recon = Vec::Zero(cert.size());
    for (std::size_t k = 0; k < cert.nu.size(); ++k)
      recon += cert.nu[i].dot(cert.eta[k]) * cert.nu[k];
    rep.nu_worst =
        std::max(rep.nu_worst, (recon - cert.nu[i]).cwiseAbs().sum());
  }
  if (rep.nu_worst > 1e-10) {
    rep.nu_normalized = false;
    rep.nu_decomposes = false;
  }

  // (d) fixed-point equation at the leading rate
  for (const auto& nu : cert.nu) {
    Vec next = step_measure(sub, nu);
    double res = (next - cert.theta_bar * nu).cwiseAbs().sum();
    rep.fixed_point_worst = std::max(rep.fixed_point_worst, res);
  }
  if (rep.fixed_point_worst > 1e-10) rep.fixed_point = false;
  return rep;
}

struct ConditionalLaw {
  Vec exact;    // P_mu(X_n = . | n < tau), over certificate states
  Vec mixture;  // certificate prediction sum w_i nu_i / sum w_i
  double tv = 0;  // measure-norm distance, sum of absolute differences
  double bound = 0;  // 2 alpha_n mu(n^j W) / mu(n^j eta) with fitted alpha
};

inline ConditionalLaw conditional_law(const AbsorbedChain& chain,
                                      const QsdCertificate& cert, const Vec& mu,
                                      int n) {
  AbsorbedChain sub =
      chain.size() == cert.size() ? chain : chain.restricted(cert.states);
  ConditionalLaw out;
  Vec v = mu;
  for (int k = 0; k < n; ++k) {
    v = step_measure(sub, v);
    double m = v.sum();
    if (m <= 0) throw ChainError("total survival underflow in conditional law");
    v /= m;
  }
  out.exact = v;

  double wsum = 0;
  Vec mix = Vec::Zero(cert.size());
  for (std::size_t i = 0; i < cert.eta.size(); ++i) {
    double w = 0;
    for (int s = 0; s < cert.size(); ++s)
      w += mu[s] * std::pow(static_cast<double>(n), cert.j_state[s]) *
           cert.eta[i][s];
    wsum += w;
    mix += w * cert.nu[i];
  }
  if (wsum <= 0) throw ChainError("initial measure puts no mass on eta");
  out.mixture = mix / wsum;
  out.tv = (out.exact - out.mixture).cwiseAbs().sum();
  return out;
}

struct MonteCarloResult {
  Vec empirical;      // conditional distribution over surviving samples
  long survivors = 0;
  long samples = 0;
  std::uint64_t seed = 0;
  std::string rng_name;
};

// Independent stochastic cross-check: simulate trajectories, discard the
// absorbed ones. One counter-based stream per trajectory.
inline MonteCarloResult monte_carlo_conditional(const AbsorbedChain& chain,
                                                int x, int n, long samples,
                                                std::uint64_t seed) {
  if (samples < 1) throw ChainError("sample count must be positive");
  const int d = chain.size();
  // prefix sums per row; draw lands in the cemetery past the row sum
  std::vector<std::vector<double>> cum(d);
  for (int s = 0; s < d; ++s) {
    double acc = 0;
    cum[s].reserve(chain.row(s).size());
    for (const auto& e : chain.row(s)) {
      acc += e.p;
      cum[s].push_back(acc);
    }
  }
  MonteCarloResult out;
  out.samples = samples;
  out.seed = seed;
  out.rng_name = CounterRng::name();
  Eigen::VectorXd counts = Vec::Zero(d);
  CounterRng root(seed);
  for (long s = 0; s < samples; ++s) {
    CounterRng rng = root.stream(static_cast<std::uint64_t>(s));
    int state = x;
    bool alive = true;
    for (int step = 0; step < n; ++step) {
      double u = rng.next_double();
      const auto& row = chain.row(state);
      const auto& c = cum[state];
      if (row.empty() || u >= c.back()) {
        alive = false;
        break;
      }
      auto it = std::upper_bound(c.begin(), c.end(), u);
      state = row[static_cast<std::size_t>(it - c.begin())].col;
    }
    if (alive) {
      counts[state] += 1;
      ++out.survivors;
    }
  }
  if (out.survivors == 0)
    throw ChainError(
        "no surviving trajectories; increase the sample count or lower n");
  out.empirical = counts / static_cast<double>(out.survivors);
  return out;
}

// Reproducibility record for one verification probe.
struct OracleTrace {
  int x = -1;
  int n_max = 0;
  std::vector<double> m_curve;    // theta^{-n} survival, subsampled
  std::vector<int> m_ns;
  double theta_hat = 0;
  JEstimate j_est;
  std::uint64_t seed = 0;
  long mc_samples = 0;
};

}  // namespace qsd
