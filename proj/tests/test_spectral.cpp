#include <catch2/catch_amalgamated.hpp>
#include <qsd/spectral.hpp>

#include "helpers.hpp"

using namespace qsd;
using namespace qsd::testing;

TEST_CASE("scalar block with a self-loop") {
  auto chain = chain_from_rows(1, {{0, 0, 0.5}});
  auto s = perron(chain, {0});
  CHECK(s.theta == 0.5);  // exact for 1x1 blocks
  CHECK(s.nu[0] == 1.0);
  CHECK(s.eta[0] == 1.0);
  CHECK(s.period == 1);
  CHECK(s.gap == 0.0);
}

TEST_CASE("dead singleton returns rate zero with arbitrary eta") {
  auto chain = chain_from_rows(2, {{0, 1, 1.0}, {1, 1, 0.2}});
  auto s = perron(chain, {0});
  CHECK(s.theta == 0.0);
  CHECK(s.eta_arbitrary);
  CHECK(s.period == 1);
}

TEST_CASE("symmetric two-state block") {
  auto chain =
      chain_from_rows(2, {{0, 0, 0.3}, {0, 1, 0.2}, {1, 0, 0.2}, {1, 1, 0.3}});
  auto s = perron(chain, {0, 1});
  CHECK(s.theta == Catch::Approx(0.5).margin(1e-13));
  CHECK(s.nu[0] == Catch::Approx(0.5).margin(1e-12));
  CHECK(s.nu[1] == Catch::Approx(0.5).margin(1e-12));
  CHECK(s.eta[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(s.eta[1] == Catch::Approx(1.0).margin(1e-12));
  CHECK(s.gap == Catch::Approx(0.2).margin(1e-10));  // |0.1| / 0.5
  CHECK(s.period == 1);
}

TEST_CASE("two-cycle block is periodic with a warning") {
  auto chain = chain_from_rows(2, {{0, 1, 0.5}, {1, 0, 0.5}});
  auto s = perron(chain, {0, 1});
  CHECK(s.theta == Catch::Approx(0.5).margin(1e-12));
  CHECK(s.period == 2);
  CHECK(s.periodic_warning);
}

TEST_CASE("period computation") {
  auto self_loop = chain_from_rows(1, {{0, 0, 0.5}});
  CHECK(period(self_loop, {0}) == 1);

  auto two_cycle = chain_from_rows(2, {{0, 1, 0.5}, {1, 0, 0.5}});
  CHECK(period(two_cycle, {0, 1}) == 2);

  // triangle plus one self-loop: gcd(3, 1) = 1
  auto tri = chain_from_rows(
      3, {{0, 1, 0.4}, {1, 2, 0.4}, {2, 0, 0.4}, {0, 0, 0.1}});
  CHECK(period(tri, {0, 1, 2}) == 1);

  auto tri_pure = chain_from_rows(3, {{0, 1, 0.4}, {1, 2, 0.4}, {2, 0, 0.4}});
  CHECK(period(tri_pure, {0, 1, 2}) == 3);
}

TEST_CASE("residuals hold on random irreducible blocks") {
  for (std::uint64_t seed = 200; seed < 215; ++seed) {
    CounterRng rng(seed);
    int s = 2 + static_cast<int>(rng.next_below(8));
    std::vector<std::tuple<int, int, double>> t;
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j)
        t.emplace_back(i, j, rng.next_double(0.05, 0.9) / s);
    auto chain = chain_from_rows(s, t);
    std::vector<int> states(s);
    for (int i = 0; i < s; ++i) states[i] = i;
    auto sp = perron(chain, states);
    Mat b = chain.dense();
    CHECK((sp.nu.transpose() * b - sp.theta * sp.nu.transpose())
              .cwiseAbs()
              .sum() <= 1e-10);
    CHECK((b * sp.eta - sp.theta * sp.eta).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(sp.nu.sum() == Catch::Approx(1.0).margin(1e-13));
    CHECK(sp.nu.dot(sp.eta) == Catch::Approx(1.0).margin(1e-13));
  }
}

TEST_CASE("rescaled iterates converge to eta at the spectral-gap rate") {
  auto chain =
      chain_from_rows(2, {{0, 0, 0.3}, {0, 1, 0.2}, {1, 0, 0.2}, {1, 1, 0.3}});
  auto s = perron(chain, {0, 1});
  const int n = 200;
  for (int x = 0; x < 2; ++x) {
    Vec f = Vec::Ones(2);
    auto seq = iterate(chain, f, n, s.theta, Side::Function);
    double bound = 10 * std::pow(s.gap, n) + 1e-8;
    CHECK(std::abs(seq[n][x] - s.eta[x]) <= bound);
  }
}

TEST_CASE("perron on a large sparse block via shifted power iteration") {
  // birth-death walk on 120 states: localized Perron mode, exact root 0.75
  std::vector<std::tuple<int, int, double>> t;
  const int n = 120;
  t.emplace_back(0, 0, 0.4);
  t.emplace_back(0, 1, 0.2);
  for (int x = 1; x < n; ++x) {
    t.emplace_back(x, x - 1, 0.7);
    if (x + 1 < n) t.emplace_back(x, x + 1, 0.2);
  }
  auto chain = chain_from_rows(n, t);
  std::vector<int> states(n);
  for (int i = 0; i < n; ++i) states[i] = i;
  auto sp = perron(chain, states);
  CHECK(sp.theta == Catch::Approx(0.75).margin(1e-9));
  // the left vector is geometric with ratio 1/2
  CHECK(sp.nu[1] / sp.nu[0] == Catch::Approx(0.5).margin(1e-7));
  CHECK(sp.nu[10] / sp.nu[9] == Catch::Approx(0.5).margin(1e-7));
}

TEST_CASE("spectral radius helper") {
  Mat m(2, 2);
  m << 0.3, 0.2, 0.2, 0.3;
  CHECK(spectral_radius(m) == Catch::Approx(0.5).margin(1e-12));
  Mat nil = Mat::Zero(3, 3);
  nil(0, 1) = 0.4;
  nil(1, 2) = 0.4;
  CHECK(spectral_radius(nil) == Catch::Approx(0.0).margin(1e-9));
}
