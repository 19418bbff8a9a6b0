#pragma once

#include <Eigen/Eigenvalues>
#include <numeric>

#include "qsd/class_graph.hpp"
#include "qsd/rng.hpp"

namespace qsd {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kEigenResidualTol = 1e-10;

// Perron data of one communication class: the Assumption-(A) objects for an
// irreducible block with zero polynomial parameter.
struct ClassSpectrum {
  double theta = 0;
  Vec nu;                 // left vector, probability on the class
  Vec eta;                // right vector, nu . eta = 1
  int period = 1;
  double gap = 0;         // |lambda_2| / theta, 0 for 1x1 blocks
  bool eta_arbitrary = false;   // dead 1x1 class, theta == 0
  bool periodic_warning = false;
  bool slow = false;            // subdominant modulus within 1e-6 of theta
  double residual = 0;
};

// gcd of return-cycle lengths, via BFS levels; 1 for a no-self-loop
// singleton by convention.
inline int period(const AbsorbedChain& chain, const std::vector<int>& states) {
  const int s = static_cast<int>(states.size());
  std::vector<int> pos(chain.size(), -1);
  for (int i = 0; i < s; ++i) pos[states[i]] = i;
  std::vector<int> level(s, -1);
  std::vector<int> queue{0};
  level[0] = 0;
  int g = 0;
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    int u = queue[qi];
    for (const auto& e : chain.row(states[u])) {
      if (e.p <= 0) continue;
      int v = pos[e.col];
      if (v < 0) continue;
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      } else {
        g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
      }
    }
  }
  return g == 0 ? 1 : g;
}

namespace detail {

// Subdominant modulus by power iteration on the deflated block
// b - theta * eta nu^T, with sparse stepping through the restricted chain.
inline double subdominant_modulus(const AbsorbedChain& sub, double theta,
                                  const Vec& nu, const Vec& eta,
                                  std::uint64_t seed = 7) {
  const int s = sub.size();
  CounterRng rng(seed);
  Vec w(s);
  for (int i = 0; i < s; ++i) w[i] = rng.next_double(-1.0, 1.0);
  w -= (nu.dot(w)) * eta;  // remove the leading component
  double lognorm = 0;
  const int burn = 200, steps = 600;
  for (int it = 0; it < burn + steps; ++it) {
    w = step_function(sub, w) - (theta * nu.dot(w)) * eta;
    double n = w.cwiseAbs().maxCoeff();
    if (n == 0 || !std::isfinite(n)) return 0;
    w /= n;
    if (it >= burn) lognorm += std::log(n);
  }
  return std::exp(lognorm / steps);
}

}  // namespace detail

// Perron triple of the chain restricted to one class. Dense eigensolve
// supplies the subdominant modulus for small blocks; the vectors always come
// from shifted power iteration so they are nonnegative by construction.
inline ClassSpectrum perron(const AbsorbedChain& chain,
                            const std::vector<int>& states) {
  ClassSpectrum out;
  const int s = static_cast<int>(states.size());
  if (s == 0) throw SolverError("empty class");
  out.period = period(chain, states);
  out.periodic_warning = out.period > 1;

  if (s == 1) {
    out.theta = chain.at(states[0], states[0]);
    out.nu = Vec::Ones(1);
    out.eta = Vec::Ones(1);
    out.gap = 0;
    out.period = 1;
    out.periodic_warning = false;
    if (out.theta == 0) out.eta_arbitrary = true;
    return out;
  }

  // sparse restricted sub-chain; the shift keeps the leading eigenvalue
  // strictly dominant even for periodic blocks
  const AbsorbedChain sub = chain.restricted(states);
  double sigma = 0;
  for (int i = 0; i < s; ++i) sigma = std::max(sigma, sub.row_sum(i));
  if (sigma <= 0) throw SolverError("zero block in perron solve");

  Vec left = Vec::Constant(s, 1.0 / s), right = Vec::Constant(s, 1.0 / s);
  double theta = 0;
  const int max_iters = 500000;
  int it = 0;
  for (; it < max_iters; ++it) {
    Vec lstep = step_measure(sub, left);
    Vec rstep = step_function(sub, right);
    left = lstep + sigma * left;
    left /= left.sum();
    right = rstep + sigma * right;
    right /= right.sum();
    lstep = step_measure(sub, left);
    rstep = step_function(sub, right);
    theta = left.dot(rstep) / left.dot(right);
    double lres = (lstep - theta * left).cwiseAbs().sum() / left.sum();
    double rres = (rstep - theta * right).cwiseAbs().maxCoeff() / right.maxCoeff();
    out.residual = std::max(lres, rres);
    if (out.residual <= 1e-13 * std::max(theta, 1e-30)) break;
  }
  if (it == max_iters && out.residual > kEigenResidualTol)
    throw SolverError("perron iteration did not converge, residual " +
                      std::to_string(out.residual));
  out.theta = theta;
  out.nu = left.cwiseMax(0.0);
  out.nu /= out.nu.sum();
  out.eta = right.cwiseMax(0.0);
  double ne = out.nu.dot(out.eta);
  if (ne <= 0) throw SolverError("degenerate perron vectors");
  out.eta /= ne;

  double lam2;
  if (s <= kDenseLimit) {
    Eigen::EigenSolver<Mat> es(sub.dense(), /*computeEigenvectors=*/false);
    std::vector<double> moduli(s);
    for (int i = 0; i < s; ++i) moduli[i] = std::abs(es.eigenvalues()[i]);
    std::sort(moduli.rbegin(), moduli.rend());
    lam2 = moduli[1];
  } else {
    lam2 = detail::subdominant_modulus(sub, out.theta, out.nu, out.eta);
  }
  if (lam2 >= out.theta * (1.0 - 1e-6)) {
    out.gap = 1.0;
    out.slow = true;
  } else {
    out.gap = lam2 / out.theta;
  }
  return out;
}

// Spectral radius of an arbitrary nonnegative block (power iteration on the
// shifted matrix; 0 for the zero block).
inline double spectral_radius(const Mat& b) {
  const int s = static_cast<int>(b.rows());
  if (s == 0) return 0;
  if (s == 1) return std::abs(b(0, 0));
  if (s <= kDenseLimit) {
    Eigen::EigenSolver<Mat> es(b, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  double sigma = b.cwiseAbs().rowwise().sum().maxCoeff();
  if (sigma == 0) return 0;
  Vec v = Vec::Constant(s, 1.0 / s);
  double lam = 0;
  for (int it = 0; it < 200000; ++it) {
    Vec w = b.cwiseAbs() * v + sigma * v;
    double n = w.sum();
    w /= n;
    double nl = n - sigma;
    v = w;
    if (it > 10 && std::abs(nl - lam) <= 1e-14 * std::max(1.0, std::abs(nl))) {
      lam = nl;
      break;
    }
    lam = nl;
  }
  return std::max(lam, 0.0);
}

}  // namespace qsd
