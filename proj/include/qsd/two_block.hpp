#pragma once

#include <Eigen/LU>

#include "qsd/certificate.hpp"
#include "qsd/spectral.hpp"

namespace qsd {

// One-directional split of the state space: mass flows D1 -> D2 but never
// back. P and R are the restricted kernels, Q the one-step cross kernel.
struct TwoBlockDecomposition {
  std::vector<int> d1, d2;  // global ids, ascending
  Mat p, q, r;
  double gamma = 0;              // certified contraction rate of the off side
  int lstar = -1;
  char case_tag = '?';
};

inline TwoBlockDecomposition make_two_block(const AbsorbedChain& chain,
                                            std::vector<int> d1,
                                            std::vector<int> d2) {
  std::sort(d1.begin(), d1.end());
  std::sort(d2.begin(), d2.end());
  TwoBlockDecomposition dec;
  dec.q = chain.block(d1, d2);
  Mat back = chain.block(d2, d1);
  if (back.cwiseAbs().maxCoeff() > 0)
    throw HypothesisError("one-directional",
                          "mass flows from the downstream block back upstream");
  dec.p = chain.block(d1, d1);
  dec.r = chain.block(d2, d2);
  dec.d1 = std::move(d1);
  dec.d2 = std::move(d2);
  return dec;
}

namespace detail {

// States of D1 from which the support walk can reach `target_rows` of P
// (reflexive), i.e. supp(P)^* reachability.
inline std::vector<bool> p_reachable_mask(const Mat& p,
                                          const std::vector<bool>& target) {
  const int n = static_cast<int>(p.rows());
  std::vector<bool> can = target;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int x = 0; x < n; ++x) {
      if (can[x]) continue;
      for (int y = 0; y < n; ++y)
        if (p(x, y) > 0 && can[y]) {
          can[x] = true;
          changed = true;
          break;
        }
    }
  }
  return can;
}

// entry_sets[x] marks the D2 states reachable as first entry from x, i.e.
// the support of delta_x P^m Q over m >= 0.
inline std::vector<std::vector<bool>> entry_sets(const Mat& p, const Mat& q) {
  const int n1 = static_cast<int>(p.rows());
  const int n2 = static_cast<int>(q.cols());
  // reach within D1, reflexive
  std::vector<std::vector<bool>> reach(n1, std::vector<bool>(n1, false));
  for (int x = 0; x < n1; ++x) {
    std::vector<int> stack{x};
    reach[x][x] = true;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n1; ++v)
        if (p(u, v) > 0 && !reach[x][v]) {
          reach[x][v] = true;
          stack.push_back(v);
        }
    }
  }
  std::vector<std::vector<bool>> entry(n1, std::vector<bool>(n2, false));
  for (int x = 0; x < n1; ++x)
    for (int u = 0; u < n1; ++u)
      if (reach[x][u])
        for (int y = 0; y < n2; ++y)
          if (q(u, y) > 0) entry[x][y] = true;
  return entry;
}

inline Vec merge_d1_d2(const std::vector<int>& d1, const std::vector<int>& d2,
                       const std::vector<int>& merged, const Vec& on_d1,
                       const Vec& on_d2) {
  Vec out = Vec::Zero(static_cast<Eigen::Index>(merged.size()));
  for (std::size_t i = 0; i < d1.size(); ++i) {
    auto it = std::lower_bound(merged.begin(), merged.end(), d1[i]);
    out[it - merged.begin()] = on_d1[static_cast<Eigen::Index>(i)];
  }
  for (std::size_t i = 0; i < d2.size(); ++i) {
    auto it = std::lower_bound(merged.begin(), merged.end(), d2[i]);
    out[it - merged.begin()] = on_d2[static_cast<Eigen::Index>(i)];
  }
  return out;
}

inline std::vector<int> merge_states(const std::vector<int>& d1,
                                     const std::vector<int>& d2) {
  std::vector<int> merged;
  merged.reserve(d1.size() + d2.size());
  std::merge(d1.begin(), d1.end(), d2.begin(), d2.end(),
             std::back_inserter(merged));
  return merged;
}

inline void clamp_small_negatives(Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] < 0) {
      if (v[i] < -1e-12) throw InternalError("negative mass in composition");
      v[i] = 0;
    }
  }
}

}  // namespace detail

// Certificate for the smallest level dominated from D1: the minimal l such
// that every first entry into D2 lands where j_R <= l. Always well defined
// on finite spaces; bounded by max j_R.
struct LstarCertificate {
  int lstar = 0;
  bool vacuous = false;            // no entry states at all (Q == 0)
  bool positivity = true;          // entry mass at level lstar from every nu_P
  std::vector<double> entry_mass;  // per index of I_P
};

inline LstarCertificate lstar(const TwoBlockDecomposition& dec,
                              const QsdCertificate& cert_r,
                              const std::vector<Vec>* nu_p = nullptr,
                              const Vec* eta_r_total = nullptr) {
  LstarCertificate out;
  auto entry = detail::entry_sets(dec.p, dec.q);
  int best = -1;
  for (const auto& row : entry)
    for (std::size_t y = 0; y < row.size(); ++y)
      if (row[y]) best = std::max(best, cert_r.j_state[y]);
  if (best < 0) {
    out.vacuous = true;
    out.lstar = 0;
    return out;
  }
  out.lstar = best;
  if (nu_p != nullptr) {
    Vec eta_r = eta_r_total ? *eta_r_total : cert_r.eta_total();
    Vec mask = Vec::Zero(eta_r.size());
    for (Eigen::Index y = 0; y < mask.size(); ++y)
      mask[y] = (cert_r.j_state[y] == out.lstar) ? eta_r[y] : 0.0;
    for (const auto& nu : *nu_p) {
      double m = nu.transpose() * dec.q * mask;
      out.entry_mass.push_back(m);
      if (!(m > 0)) out.positivity = false;
    }
  }
  return out;
}

// Downstream block decays strictly faster: the leading structure lives on
// D1 and only the extreme measures pick up a tail in D2.
//   nu_S,i  ~ nu_P,i + theta^{-1} (nu_P,i Q)(I - theta^{-1} R)^{-1}
//   eta_S,i ~ eta_P,i extended by 0, inverse proportionality constants.
inline QsdCertificate compose_case_a1(const TwoBlockDecomposition& dec,
                                      const QsdCertificate& cert_p) {
  const double theta = cert_p.theta_bar;
  double rho_r = spectral_radius(dec.r);
  if (rho_r >= theta * (1.0 - kThetaTol))
    throw HypothesisError(
        "downstream-contraction",
        "case A1 inapplicable: downstream spectral radius " +
            std::to_string(rho_r) + " not below theta " + std::to_string(theta));

  const int n2 = static_cast<int>(dec.d2.size());
  QsdCertificate out;
  out.theta_bar = theta;
  out.states = detail::merge_states(dec.d1, dec.d2);
  out.index_set = cert_p.index_set;
  out.envelope = rate_envelope_fast_downstream(cert_p.envelope, cert_p.j_max(),
                                                rho_r / theta);
  out.j_optimal = cert_p.j_optimal;

  Mat solve_m = Mat::Identity(n2, n2) - dec.r.transpose() / theta;
  Eigen::PartialPivLU<Mat> lu(solve_m);
  for (std::size_t i = 0; i < cert_p.nu.size(); ++i) {
    Vec qn = (dec.q.transpose() * cert_p.nu[i]) / theta;
    Vec tail = (n2 > 0) ? Vec(lu.solve(qn)) : Vec::Zero(0);
    detail::clamp_small_negatives(tail);
    double m = 1.0 + tail.sum();
    Vec nu = detail::merge_d1_d2(dec.d1, dec.d2, out.states, cert_p.nu[i] / m,
                                 tail / m);
    Vec eta = detail::merge_d1_d2(dec.d1, dec.d2, out.states,
                                  cert_p.eta[i] * m, Vec::Zero(n2));
    out.nu.push_back(std::move(nu));
    out.eta.push_back(std::move(eta));
  }
  Vec zero2 = Vec::Zero(n2);
  Vec jd1(dec.d1.size()), jl1(dec.d1.size());
  for (std::size_t i = 0; i < dec.d1.size(); ++i) {
    jd1[static_cast<Eigen::Index>(i)] = cert_p.j_state[i];
    jl1[static_cast<Eigen::Index>(i)] =
        cert_p.j_optimal ? cert_p.j_state[i] : cert_p.j_lower[i];
  }
  Vec jv = detail::merge_d1_d2(dec.d1, dec.d2, out.states, jd1, zero2);
  Vec jlo = detail::merge_d1_d2(dec.d1, dec.d2, out.states, jl1, zero2);
  out.j_state.assign(out.states.size(), 0);
  out.j_lower.assign(out.states.size(), 0);
  for (int i = 0; i < out.size(); ++i) {
    out.j_state[i] = static_cast<int>(std::lround(jv[i]));
    out.j_lower[i] = static_cast<int>(std::lround(jlo[i]));
  }
  out.weight = detail::merge_d1_d2(dec.d1, dec.d2, out.states,
                                   cert_p.weight, Vec::Ones(n2));
  return out;
}

// Upstream block decays strictly faster: leading structure lives on D2.
// j on D1 is the largest downstream level reachable as a first entry, and
// eta solves h = theta^{-1} (P h + Q (eta_R restricted to that level)).
inline QsdCertificate compose_case_a2(const TwoBlockDecomposition& dec,
                                      const QsdCertificate& cert_r) {
  const double theta = cert_r.theta_bar;
  double rho_p = spectral_radius(dec.p);
  if (rho_p >= theta * (1.0 - kThetaTol))
    throw HypothesisError(
        "upstream-contraction",
        "case A2 inapplicable: upstream spectral radius " +
            std::to_string(rho_p) + " not below theta " + std::to_string(theta));

  const int n1 = static_cast<int>(dec.d1.size());
  const int n2 = static_cast<int>(dec.d2.size());
  QsdCertificate out;
  out.theta_bar = theta;
  out.states = detail::merge_states(dec.d1, dec.d2);
  out.index_set = cert_r.index_set;
  out.envelope = rate_envelope_fast_upstream(cert_r.envelope, cert_r.j_max(),
                                              rho_p / theta);
  out.j_optimal = cert_r.j_optimal;

  auto entry = detail::entry_sets(dec.p, dec.q);
  std::vector<int> j1(n1, 0);
  for (int x = 0; x < n1; ++x) {
    int best = 0;
    for (int y = 0; y < n2; ++y)
      if (entry[x][y]) best = std::max(best, cert_r.j_state[y]);
    j1[x] = best;
  }

  // Solve the h-systems per occurring level and per extreme index; states
  // that cannot reach the masked support keep exact zeros.
  Eigen::PartialPivLU<Mat> lu(Mat::Identity(n1, n1) - dec.p / theta);
  std::vector<std::vector<Vec>> h;  // h[level][i]
  int max_level = 0;
  for (int y = 0; y < n2; ++y) max_level = std::max(max_level, cert_r.j_state[y]);
  for (int l = 0; l <= max_level; ++l) {
    std::vector<Vec> per_index;
    std::vector<bool> level_states(n2, false);
    for (int y = 0; y < n2; ++y) level_states[y] = cert_r.j_state[y] == l;
    for (std::size_t i = 0; i < cert_r.eta.size(); ++i) {
      Vec g = Vec::Zero(n2);
      bool any = false;
      for (int y = 0; y < n2; ++y)
        if (level_states[y] && cert_r.eta[i][y] != 0) {
          g[y] = cert_r.eta[i][y];
          any = true;
        }
      if (!any || n1 == 0) {
        per_index.push_back(Vec::Zero(n1));
        continue;
      }
      Vec rhs = (dec.q * g) / theta;
      Vec sol = lu.solve(rhs);
      detail::clamp_small_negatives(sol);
      // structural zeros: x with no support walk into supp(g)
      std::vector<bool> target(n1, false);
      for (int x = 0; x < n1; ++x)
        for (int y = 0; y < n2; ++y)
          if (entry[x][y] && g[y] > 0) target[x] = true;
      for (int x = 0; x < n1; ++x)
        if (!target[x]) sol[x] = 0.0;
      per_index.push_back(std::move(sol));
    }
    h.push_back(std::move(per_index));
  }

  for (std::size_t i = 0; i < cert_r.nu.size(); ++i) {
    Vec eta1 = Vec::Zero(n1);
    for (int x = 0; x < n1; ++x) eta1[x] = h[j1[x]][i][x];
    Vec nu = detail::merge_d1_d2(dec.d1, dec.d2, out.states, Vec::Zero(n1),
                                 cert_r.nu[i]);
    Vec eta = detail::merge_d1_d2(dec.d1, dec.d2, out.states, eta1,
                                  cert_r.eta[i]);
    out.nu.push_back(std::move(nu));
    out.eta.push_back(std::move(eta));
  }

  out.j_state.assign(out.states.size(), 0);
  out.j_lower.assign(out.states.size(), 0);
  for (int x = 0; x < n1; ++x) {
    int li = out.local_index(dec.d1[x]);
    out.j_state[li] = j1[x];
    out.j_lower[li] = j1[x];
  }
  for (int y = 0; y < n2; ++y) {
    int li = out.local_index(dec.d2[y]);
    out.j_state[li] = cert_r.j_state[y];
    out.j_lower[li] = cert_r.j_optimal ? cert_r.j_state[y] : cert_r.j_lower[y];
  }
  out.weight = detail::merge_d1_d2(dec.d1, dec.d2, out.states, Vec::Ones(n1),
                                   cert_r.weight);
  return out;
}

// Equal rates on both blocks: j jumps to 1 + lstar on D1 and eta gains the
// one-step coupling through the upstream extreme measures. When the entry
// positivity certificate fails, the same expressions hold but j on D1 is
// only an upper bound (lower bound from the reachable-entry levels).
inline QsdCertificate compose_case_a3(const TwoBlockDecomposition& dec,
                                      const QsdCertificate& cert_p,
                                      const QsdCertificate& cert_r) {
  const double theta = cert_r.theta_bar;
  if (std::abs(cert_p.theta_bar - theta) > kThetaTol * std::max(theta, 1e-300))
    throw HypothesisError("equal-rates",
                          "case A3 inapplicable: block rates differ");
  if (cert_p.j_max() != 0)
    throw HypothesisError("upstream-j-zero",
                          "case A3 inapplicable: upstream polynomial parameter "
                          "not identically zero");
  Vec eta_p_total = cert_p.eta_total();
  for (Eigen::Index x = 0; x < eta_p_total.size(); ++x)
    if (!(eta_p_total[x] > 0))
      throw HypothesisError("upstream-eta-positive",
                            "case A3 inapplicable: upstream eta vanishes at a "
                            "state");

  LstarCertificate lc = lstar(dec, cert_r, &cert_p.nu);
  const int n1 = static_cast<int>(dec.d1.size());
  const int n2 = static_cast<int>(dec.d2.size());

  QsdCertificate out;
  out.theta_bar = theta;
  out.states = detail::merge_states(dec.d1, dec.d2);
  out.index_set = cert_r.index_set;
  out.envelope = rate_envelope_equal_rates(lc.lstar);
  out.j_optimal = cert_r.j_optimal && lc.positivity && !lc.vacuous;

  std::vector<std::vector<double>> coupling(cert_p.nu.size());
  for (std::size_t k = 0; k < cert_p.nu.size(); ++k) {
    coupling[k].resize(cert_r.eta.size());
    for (std::size_t i = 0; i < cert_r.eta.size(); ++i) {
      Vec gi = Vec::Zero(n2);
      for (int y = 0; y < n2; ++y)
        if (cert_r.j_state[y] == lc.lstar) gi[y] = cert_r.eta[i][y];
      coupling[k][i] = cert_p.nu[k].transpose() * dec.q * gi;
    }
  }

  const double pref = (1.0 / theta) / (1.0 + lc.lstar);
  for (std::size_t i = 0; i < cert_r.nu.size(); ++i) {
    Vec eta1 = Vec::Zero(n1);
    for (std::size_t k = 0; k < cert_p.nu.size(); ++k)
      eta1 += pref * coupling[k][i] * cert_p.eta[k];
    Vec nu = detail::merge_d1_d2(dec.d1, dec.d2, out.states, Vec::Zero(n1),
                                 cert_r.nu[i]);
    Vec eta = detail::merge_d1_d2(dec.d1, dec.d2, out.states, eta1,
                                  cert_r.eta[i]);
    out.nu.push_back(std::move(nu));
    out.eta.push_back(std::move(eta));
  }

  // lower bound on D1 from reachable entry levels, as in the fast-upstream case
  auto entry = detail::entry_sets(dec.p, dec.q);
  out.j_state.assign(out.states.size(), 0);
  out.j_lower.assign(out.states.size(), 0);
  for (int x = 0; x < n1; ++x) {
    int li = out.local_index(dec.d1[x]);
    out.j_state[li] = 1 + lc.lstar;
    int lo = 0;
    for (int y = 0; y < n2; ++y)
      if (entry[x][y]) lo = std::max(lo, cert_r.j_state[y]);
    out.j_lower[li] = out.j_optimal ? 1 + lc.lstar : lo;
  }
  for (int y = 0; y < n2; ++y) {
    int li = out.local_index(dec.d2[y]);
    out.j_state[li] = cert_r.j_state[y];
    out.j_lower[li] = cert_r.j_optimal ? cert_r.j_state[y] : cert_r.j_lower[y];
  }
  out.weight = detail::merge_d1_d2(dec.d1, dec.d2, out.states, Vec::Ones(n1),
                                   cert_r.weight);
  return out;
}

}  // namespace qsd
