#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace qsd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Row sums may exceed 1 by at most this much before a chain is rejected;
// rows inside the slack are renormalized to sum exactly 1.
inline constexpr double kRowSumTol = 1e-12;
// Relative tolerance for treating two Perron roots as tied.
inline constexpr double kThetaTol = 1e-9;
// Entries of rescaled iterates beyond this magnitude abort the iteration.
inline constexpr double kOverflowGuard = 1e300;
// Dense kernels are used at or below this state count.
inline constexpr int kDenseLimit = 64;

struct ChainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Entry {
  int col;
  double p;
};

// Sub-stochastic transition matrix on states 0..d-1. The cemetery is
// implicit: absorption(x) = 1 - row_sum(x). Immutable once built.
class AbsorbedChain {
 public:
  static AbsorbedChain from_triplets(
      int d, const std::vector<std::tuple<int, int, double>>& triplets) {
    if (d <= 0) throw ChainError("empty state space");
    AbsorbedChain c;
    c.d_ = d;
    std::vector<std::map<int, double>> acc(d);
    for (const auto& [x, y, p] : triplets) {
      if (x < 0 || x >= d || y < 0 || y >= d)
        throw ChainError("state index out of range: (" + std::to_string(x) +
                         ", " + std::to_string(y) + ")");
      auto [it, fresh] = acc[x].emplace(y, p);
      if (!fresh) {
        it->second += p;
        ++c.duplicate_entries_;
      }
    }
    c.rows_.resize(d);
    c.row_sums_.assign(d, 0.0);
    for (int x = 0; x < d; ++x) {
      double s = 0;
      for (auto& [y, p] : acc[x]) s += p;
      // Absorb file-format rounding; anything larger is a modeling error
      // left for validate() to report.
      double scale = 1.0;
      if (s > 1.0 && s <= 1.0 + kRowSumTol) {
        scale = 1.0 / s;
        s = 1.0;
      }
      c.rows_[x].reserve(acc[x].size());
      for (auto& [y, p] : acc[x]) c.rows_[x].push_back({y, p * scale});
      c.row_sums_[x] = s;
    }
    if (d <= kDenseLimit) {
      c.dense_ = Mat::Zero(d, d);
      for (int x = 0; x < d; ++x)
        for (const auto& e : c.rows_[x]) c.dense_(x, e.col) = e.p;
      c.has_dense_ = true;
    }
    return c;
  }

  static AbsorbedChain from_dense(const Mat& m) {
    std::vector<std::tuple<int, int, double>> t;
    for (int x = 0; x < m.rows(); ++x)
      for (int y = 0; y < m.cols(); ++y)
        if (m(x, y) != 0.0) t.emplace_back(x, y, m(x, y));
    return from_triplets(static_cast<int>(m.rows()), t);
  }

  int size() const { return d_; }
  const std::vector<Entry>& row(int x) const { return rows_[x]; }
  double row_sum(int x) const { return row_sums_[x]; }
  double absorption(int x) const { return 1.0 - row_sums_[x]; }
  int duplicate_entries() const { return duplicate_entries_; }
  bool has_dense() const { return has_dense_; }
  const Mat& dense_ref() const { return dense_; }

  double at(int x, int y) const {
    for (const auto& e : rows_[x])
      if (e.col == y) return e.p;
    return 0.0;
  }

  Mat dense() const {
    if (has_dense_) return dense_;
    Mat m = Mat::Zero(d_, d_);
    for (int x = 0; x < d_; ++x)
      for (const auto& e : rows_[x]) m(x, e.col) = e.p;
    return m;
  }

  // Sub-matrix with rows/cols taken from global state lists.
  Mat block(const std::vector<int>& rows, const std::vector<int>& cols) const {
    Mat m = Mat::Zero(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
    std::vector<int> pos(d_, -1);
    for (std::size_t j = 0; j < cols.size(); ++j) pos[cols[j]] = static_cast<int>(j);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (const auto& e : row(rows[i]))
        if (pos[e.col] >= 0) m(static_cast<Eigen::Index>(i), pos[e.col]) = e.p;
    return m;
  }

  // Chain killed outside `states` (transitions leaving the set go to the
  // cemetery). States are relabeled 0..|states|-1 in the given order.
  AbsorbedChain restricted(const std::vector<int>& states) const {
    std::vector<int> pos(d_, -1);
    for (std::size_t i = 0; i < states.size(); ++i) pos[states[i]] = static_cast<int>(i);
    std::vector<std::tuple<int, int, double>> t;
    for (std::size_t i = 0; i < states.size(); ++i)
      for (const auto& e : row(states[i]))
        if (pos[e.col] >= 0) t.emplace_back(static_cast<int>(i), pos[e.col], e.p);
    return from_triplets(static_cast<int>(states.size()), t);
  }

 private:
  int d_ = 0;
  std::vector<std::vector<Entry>> rows_;
  std::vector<double> row_sums_;
  Mat dense_;
  bool has_dense_ = false;
  int duplicate_entries_ = 0;
};

// Measure on the state space (row-vector side of the semigroup action).
struct MeasureVector {
  Vec v;
  bool allow_signed = false;
  std::string weight_tag;
};

// Function on the state space (column-vector side).
struct FunctionVector {
  Vec v;
};

// ||f||_W = max_x |f(x)| / W(x); requires W >= 1.
inline double weighted_norm(const Vec& f, const Vec& w) {
  double m = 0;
  for (Eigen::Index x = 0; x < f.size(); ++x) {
    if (!(w[x] >= 1.0)) throw ChainError("weight below 1 in weighted norm");
    m = std::max(m, std::abs(f[x]) / w[x]);
  }
  return m;
}

struct RowViolation {
  int row;
  int col;     // -1 for a row-sum violation
  double value;
  std::string what;
};

struct ValidationReport {
  bool ok = true;
  std::vector<RowViolation> violations;
  std::vector<std::string> warnings;
  Vec absorption;
};

inline ValidationReport validate(const AbsorbedChain& chain) {
  ValidationReport rep;
  const int d = chain.size();
  rep.absorption = Vec::Zero(d);
  std::vector<bool> touched(d, false);
  for (int x = 0; x < d; ++x) {
    double s = chain.row_sum(x);
    rep.absorption[x] = chain.absorption(x);
    for (const auto& e : chain.row(x)) {
      if (e.p < 0) {
        rep.violations.push_back({x, e.col, e.p, "negative entry"});
        rep.ok = false;
      }
      if (e.p != 0) touched[x] = touched[e.col] = true;
    }
    if (s > 1.0 + kRowSumTol) {
      rep.violations.push_back({x, -1, s, "row sum exceeds 1"});
      rep.ok = false;
    }
  }
  if (chain.duplicate_entries() > 0)
    rep.warnings.push_back(std::to_string(chain.duplicate_entries()) +
                           " duplicate entries were summed");
  for (int x = 0; x < d; ++x)
    if (!touched[x])
      rep.warnings.push_back("state " + std::to_string(x) +
                             " is isolated (absorbs in one step)");
  return rep;
}

// (mu S_1)(y) = sum_x mu(x) p(x, y). Dense kernel below the size cutoff.
inline Vec step_measure(const AbsorbedChain& chain, const Vec& mu) {
  if (mu.size() != chain.size()) throw ChainError("measure length mismatch");
  if (chain.has_dense()) return chain.dense_ref().transpose() * mu;
  Vec out = Vec::Zero(chain.size());
  for (int x = 0; x < chain.size(); ++x) {
    const double m = mu[x];
    if (m == 0.0) continue;
    for (const auto& e : chain.row(x)) out[e.col] += m * e.p;
  }
  return out;
}

// (S_1 f)(x) = sum_y p(x, y) f(y). Dense kernel below the size cutoff.
inline Vec step_function(const AbsorbedChain& chain, const Vec& f) {
  if (f.size() != chain.size()) throw ChainError("function length mismatch");
  if (chain.has_dense()) return chain.dense_ref() * f;
  Vec out = Vec::Zero(chain.size());
  for (int x = 0; x < chain.size(); ++x) {
    double s = 0;
    for (const auto& e : chain.row(x)) s += e.p * f[e.col];
    out[x] = s;
  }
  return out;
}

enum class Side { Measure, Function };

// v_k = theta^{-k} mu S_k for k = 0..n, by repeated stepping and division;
// matrix powers are never formed.
inline std::vector<Vec> iterate(const AbsorbedChain& chain, const Vec& start,
                                int n, double theta, Side side = Side::Measure) {
  if (!(theta > 0)) throw ChainError("rescale divisor must be positive");
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  out.push_back(start);
  Vec v = start;
  for (int k = 1; k <= n; ++k) {
    v = (side == Side::Measure) ? step_measure(chain, v) : step_function(chain, v);
    v /= theta;
    if (v.size() > 0 && v.cwiseAbs().maxCoeff() > kOverflowGuard)
      throw ChainError("iterate overflow at step " + std::to_string(k));
    out.push_back(v);
  }
  return out;
}

inline double mass(const Vec& v) { return v.sum(); }

}  // namespace qsd
