#pragma once

#include <limits>

#include "qsd/chain.hpp"

namespace qsd {

// Convergence-rate envelope alpha_n: either C * ratio^n or C / n. The
// constant is existential in the underlying bounds; verification fits it.
struct Envelope {
  bool geometric = true;
  double ratio = 0;
  int poly_degree = 0;  // max polynomial parameter feeding the O(1/n) shape
  double fitted_c = std::numeric_limits<double>::quiet_NaN();

  double shape(double n) const { return geometric ? std::pow(ratio, n) : 1.0 / n; }
};

inline Envelope geometric_envelope(double ratio) {
  Envelope e;
  e.geometric = true;
  e.ratio = ratio;
  return e;
}

inline Envelope polynomial_envelope(int degree) {
  Envelope e;
  e.geometric = false;
  e.ratio = 0;
  e.poly_degree = degree;
  return e;
}

// Full quasi-stationary structure of a (sub)chain: the exponential rate, the
// per-state polynomial parameter, the extreme quasi-stationary measures and
// their paired weight functions, plus the rate envelope.
struct QsdCertificate {
  double theta_bar = 0;
  std::vector<int> states;     // global state ids, ascending
  std::vector<int> j_state;    // aligned with states
  std::vector<int> index_set;  // class ids of the extreme measures
  std::vector<Vec> nu;         // one probability vector per index, over states
  std::vector<Vec> eta;        // one nonnegative vector per index
  Vec weight;                  // W over states (identically 1 on finite spaces)
  Envelope envelope;

  // When the eta-positivity certificate of the equal-rate composition fails,
  // j on the upstream block is only bracketed.
  bool j_optimal = true;
  std::vector<int> j_lower;  // aligned with states; equals j_state when optimal

  int size() const { return static_cast<int>(states.size()); }

  int local_index(int global_state) const {
    auto it = std::lower_bound(states.begin(), states.end(), global_state);
    if (it == states.end() || *it != global_state) return -1;
    return static_cast<int>(it - states.begin());
  }

  Vec eta_total() const {
    Vec t = Vec::Zero(size());
    for (const auto& e : eta) t += e;
    return t;
  }

  int j_max() const {
    int m = 0;
    for (int j : j_state) m = std::max(m, j);
    return m;
  }
};

struct HypothesisError : std::runtime_error {
  std::string hypothesis;
  HypothesisError(const std::string& hyp, const std::string& msg)
      : std::runtime_error(msg), hypothesis(hyp) {}
};

// Envelope composition rules for the three two-block cases. A zero
// polynomial parameter keeps geometric decay at the worse of the component
// ratio and gamma/theta; any polynomial correction degrades to C/n.
inline Envelope rate_envelope_fast_downstream(const Envelope& upstream, int j0_up,
                                              double gamma_over_theta) {
  if (j0_up == 0 && upstream.geometric)
    return geometric_envelope(std::max(upstream.ratio, gamma_over_theta));
  return polynomial_envelope(j0_up);
}

inline Envelope rate_envelope_fast_upstream(const Envelope& downstream, int j0_down,
                                            double gamma_over_theta) {
  if (j0_down == 0 && downstream.geometric)
    return geometric_envelope(std::max(downstream.ratio, gamma_over_theta));
  return polynomial_envelope(j0_down);
}

inline Envelope rate_envelope_equal_rates(int lstar) {
  return polynomial_envelope(1 + lstar);
}

}  // namespace qsd
