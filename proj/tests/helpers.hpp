#pragma once

#include <qsd/chain.hpp>
#include <qsd/rng.hpp>

namespace qsd::testing {

inline AbsorbedChain chain_from_rows(
    int d, const std::vector<std::tuple<int, int, double>>& t) {
  return AbsorbedChain::from_triplets(d, t);
}

// Two states: 0 holds with 0.5; 1 holds with 0.5 and passes to 0 with 0.3.
// Survival from 1 is exactly (1 + 0.6 n) 0.5^n.
inline AbsorbedChain chain_a() {
  return chain_from_rows(2, {{0, 0, 0.5}, {1, 0, 0.3}, {1, 1, 0.5}});
}

// Leading class upstream: 0 holds with 0.5 and leaks to the dying state 1.
inline AbsorbedChain chain_b() {
  return chain_from_rows(2, {{0, 0, 0.5}, {0, 1, 0.2}, {1, 1, 0.2}});
}

// Leading class downstream: dying state 0 drains into 1.
inline AbsorbedChain chain_c() {
  return chain_from_rows(2, {{0, 0, 0.2}, {0, 1, 0.5}, {1, 1, 0.5}});
}

// Three chained classes with equal rate 0.5 and pass probability 0.25.
inline AbsorbedChain chain_d() {
  return chain_from_rows(3, {{0, 0, 0.5},
                             {1, 1, 0.5},
                             {1, 0, 0.25},
                             {2, 2, 0.5},
                             {2, 1, 0.25}});
}

// Diamond of four singleton classes: 3 -> 2 -> 0 and 3 -> 1, rates
// (0.5, 0.3, 0.3, 0.5). Only class 3 carries a polynomial correction.
inline AbsorbedChain chain_fourclass() {
  return chain_from_rows(4, {{0, 0, 0.5},
                             {1, 1, 0.3},
                             {2, 2, 0.3},
                             {2, 0, 0.2},
                             {3, 3, 0.5},
                             {3, 2, 0.2},
                             {3, 1, 0.1}});
}

// Two weakly-connected components with one leading minimal class each:
// {0} fed by the dying state 3, and the symmetric block {1, 2}.
inline AbsorbedChain chain_twoleads() {
  return chain_from_rows(4, {{0, 0, 0.5},
                             {1, 1, 0.3},
                             {1, 2, 0.2},
                             {2, 1, 0.2},
                             {2, 2, 0.3},
                             {3, 3, 0.2},
                             {3, 0, 0.3}});
}

// Seeded reducible chain: 2-5 strictly positive class blocks scaled to exact
// Perron roots (some tied at 0.5), acyclic cross mass within row slack.
inline AbsorbedChain random_reducible_chain(std::uint64_t seed,
                                            int* class_count = nullptr) {
  CounterRng rng(seed);
  const int k = 2 + static_cast<int>(rng.next_below(4));
  std::vector<int> sizes(k);
  int d = 0;
  for (int c = 0; c < k; ++c) {
    sizes[c] = 1 + static_cast<int>(rng.next_below(6));
    d += sizes[c];
  }
  std::vector<int> offset(k);
  for (int c = 1; c < k; ++c) offset[c] = offset[c - 1] + sizes[c - 1];

  std::vector<double> theta(k);
  int leading = 0;
  for (int c = 0; c < k; ++c) {
    bool lead = rng.next_double() < 0.45;
    theta[c] = lead ? 0.5 : 0.15 + 0.15 * rng.next_double();
    if (lead) ++leading;
  }
  if (leading == 0) theta[0] = 0.5;

  std::vector<std::tuple<int, int, double>> t;
  std::vector<double> row_sum(d, 0.0);
  for (int c = 0; c < k; ++c) {
    const int s = sizes[c];
    if (s == 1) {
      t.emplace_back(offset[c], offset[c], theta[c]);
      row_sum[offset[c]] = theta[c];
      continue;
    }
    // strictly positive block, entries in [0.7, 1), scaled to the target root
    Eigen::MatrixXd b(s, s);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j) b(i, j) = rng.next_double(0.7, 1.0);
    Eigen::VectorXd v = Eigen::VectorXd::Constant(s, 1.0 / s);
    double rho = 0;
    for (int it = 0; it < 2000; ++it) {
      Eigen::VectorXd w = b * v;
      rho = w.sum() / v.sum();
      v = w / w.sum();
    }
    b *= theta[c] / rho;
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j) {
        t.emplace_back(offset[c] + i, offset[c] + j, b(i, j));
        row_sum[offset[c] + i] += b(i, j);
      }
  }

  // cross edges respect the class order (higher class id feeds lower)
  for (int a = 1; a < k; ++a)
    for (int b2 = 0; b2 < a; ++b2) {
      if (rng.next_double() > 0.45) continue;
      int edges = 1 + static_cast<int>(rng.next_below(2));
      for (int e = 0; e < edges; ++e) {
        int from = offset[a] + static_cast<int>(rng.next_below(sizes[a]));
        int to = offset[b2] + static_cast<int>(rng.next_below(sizes[b2]));
        double slack = 1.0 - row_sum[from] - 0.02;
        if (slack <= 0) continue;
        double amt = slack * rng.next_double(0.1, 0.4);
        t.emplace_back(from, to, amt);
        row_sum[from] += amt;
      }
    }
  if (class_count) *class_count = k;
  return AbsorbedChain::from_triplets(d, t);
}

}  // namespace qsd::testing
