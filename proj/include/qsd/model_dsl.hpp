#pragma once

#include <cfenv>
#include <sstream>

#include "qsd/expr.hpp"
#include "qsd/synthesis.hpp"

namespace qsd {

// One transition rule of a denumerable chain on the nonnegative integers:
// from state x, move to `to(x)` with probability `p(x)`. Whatever the rules
// do not cover is absorption.
struct Rule {
  ExprPtr to;
  ExprPtr p;
  int line = 0;
};

struct RuleSet {
  std::vector<Rule> rules;
  ExprPtr weight;  // optional "V = <expr>" line
};

// One rule per line, "to = <expr> ; p = <expr>", '#' comments, plus an
// optional weight line "V = <expr>".
inline RuleSet parse_rules(const std::string& text) {
  RuleSet out;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));
    bool blank = true;
    for (char c : line)
      if (c != ' ' && c != '\t' && c != '\r') blank = false;
    if (blank) continue;

    detail::Lexer lex(line, line_no);
    auto expect_ident = [&](const char* what) {
      auto t = lex.take();
      if (t.type != detail::Token::Type::Ident)
        throw ParseError(t.line, t.col, std::string("expected '") + what + "'");
      return t;
    };
    auto expect_symbol = [&](const std::string& s) {
      auto t = lex.take();
      if (t.type != detail::Token::Type::Symbol || t.text != s)
        throw ParseError(t.line, t.col, "expected '" + s + "'");
    };
    auto head = expect_ident("to");
    if (head.text == "V") {
      expect_symbol("=");
      detail::ExprParser parser(lex);
      out.weight = parser.parse();
      if (lex.peek().type != detail::Token::Type::End)
        throw ParseError(lex.peek().line, lex.peek().col, "trailing input");
      continue;
    }
    if (head.text != "to")
      throw ParseError(head.line, head.col,
                       "rule lines start with 'to' (got '" + head.text + "')");
    expect_symbol("=");
    detail::ExprParser to_parser(lex);
    ExprPtr to = to_parser.parse();
    expect_symbol(";");
    auto p_kw = expect_ident("p");
    if (p_kw.text != "p")
      throw ParseError(p_kw.line, p_kw.col, "expected 'p'");
    expect_symbol("=");
    detail::ExprParser p_parser(lex);
    ExprPtr p = p_parser.parse();
    if (lex.peek().type != detail::Token::Type::End)
      throw ParseError(lex.peek().line, lex.peek().col,
                       "trailing input '" + lex.peek().text + "'");
    out.rules.push_back({std::move(to), std::move(p), line_no});
  }
  if (out.rules.empty()) throw ParseError(line_no, 1, "no rules found");
  return out;
}

inline std::string print_rules(const RuleSet& rs) {
  std::string out;
  for (const auto& r : rs.rules)
    out += "to = " + print_expr(*r.to) + " ; p = " + print_expr(*r.p) + "\n";
  if (rs.weight) out += "V = " + print_expr(*rs.weight) + "\n";
  return out;
}

// Finite window of a denumerable chain: states 0..n-1, mass aimed at or
// beyond the window boundary is killed. V is clipped below at 1.
struct TruncatedChain {
  int n = 0;
  AbsorbedChain chain;
  Vec v;
  std::vector<std::string> warnings;
};

inline TruncatedChain build_truncation(const RuleSet& rules, int n,
                                       ExprPtr weight_override = nullptr) {
  if (n <= 0) throw ChainError("truncation size must be positive");
  std::vector<std::tuple<int, int, double>> triplets;
  std::vector<std::string> warnings;
  for (int x = 0; x < n; ++x) {
    double row = 0;
    for (const auto& r : rules.rules) {
      double p = r.p->eval(x);
      if (p < 0)
        throw ChainError("negative probability at x = " + std::to_string(x) +
                         " (rule at line " + std::to_string(r.line) + ")");
      row += p;
      if (p == 0) continue;  // a silent rule does not constrain its target
      double traw = r.to->eval(x);
      double t = std::nearbyint(traw);  // half-to-even under default rounding
      if (std::abs(traw - t) > 1e-9)
        warnings.push_back("rule at line " + std::to_string(r.line) +
                           ": non-integer target " + std::to_string(traw) +
                           " at x = " + std::to_string(x) + ", rounded");
      if (t < 0)
        throw ChainError("negative target at x = " + std::to_string(x) +
                         " (rule at line " + std::to_string(r.line) + ")");
      if (t < n) triplets.emplace_back(x, static_cast<int>(t), p);
    }
    if (row > 1.0 + kRowSumTol)
      throw ChainError("row sum " + std::to_string(row) + " exceeds 1 at x = " +
                       std::to_string(x));
  }
  TruncatedChain out{n, AbsorbedChain::from_triplets(n, triplets), Vec(), warnings};
  ExprPtr w = weight_override ? weight_override : rules.weight;
  out.v = Vec::Ones(n);
  if (w)
    for (int x = 0; x < n; ++x) out.v[x] = std::max(1.0, w->eval(x));
  return out;
}

// Tail diagnosis of the drift criterion: the one-step weighted ratio
// E_x(V(X_1) 1) / V(x), evaluated exactly from the rules (no boundary
// truncation), compared against the reference rate and against raw
// survival. The weight separates when it contracts strictly better than
// survival alone.
struct LyapunovReport {
  double tail_ratio_sup = 0;
  int tail_argmax = -1;
  double theta_ref = 0;
  bool refined_ok = false;       // tail ratio below the reference rate
  double tail_survival_sup = 0;  // sup of raw one-step survival on the tail
  bool v_controls = false;       // tail ratio strictly below raw survival
  bool has_return_state = false;
  bool leading_aperiodic = false;
  bool pass = false;
  std::vector<std::string> notes;
};

inline LyapunovReport lyapunov_check(const RuleSet& rules, int n_small,
                                     int n_large, double theta_ref,
                                     ExprPtr weight_override = nullptr) {
  if (!(n_small < n_large))
    throw ChainError("tail check expects two increasing window sizes");
  ExprPtr w = weight_override ? weight_override : rules.weight;
  LyapunovReport rep;
  rep.theta_ref = theta_ref;
  for (int x = n_small / 2; x < n_large; ++x) {
    double vx = w ? std::max(1.0, w->eval(x)) : 1.0;
    double num = 0, surv = 0;
    for (const auto& r : rules.rules) {
      double p = r.p->eval(x);
      if (p <= 0) continue;
      double t = std::nearbyint(r.to->eval(x));
      double vt = w ? std::max(1.0, w->eval(t)) : 1.0;
      num += p * vt;
      surv += p;
    }
    double ratio = num / vx;
    if (ratio > rep.tail_ratio_sup) {
      rep.tail_ratio_sup = ratio;
      rep.tail_argmax = x;
    }
    rep.tail_survival_sup = std::max(rep.tail_survival_sup, surv);
  }
  rep.refined_ok = rep.tail_ratio_sup < theta_ref;
  rep.v_controls = rep.tail_ratio_sup < rep.tail_survival_sup - 1e-12;
  if (!rep.refined_ok)
    rep.notes.push_back(
        "tail ratio does not undercut the reference rate; the refined drift "
        "inequality is inconclusive for this weight");

  TruncatedChain tc = build_truncation(rules, n_large, weight_override);
  ClassGraph g = find_classes(tc.chain);
  double bar = 0;
  std::vector<double> theta(g.k);
  std::vector<int> periods(g.k);
  for (int c = 0; c < g.k; ++c) {
    if (g.classes[c].size() == 1) {
      int s = g.classes[c][0];
      theta[c] = tc.chain.at(s, s);
      periods[c] = 1;
    } else {
      auto sp = perron(tc.chain, g.classes[c]);
      theta[c] = sp.theta;
      periods[c] = sp.period;
    }
    bar = std::max(bar, theta[c]);
    if (theta[c] > 0 &&
        (g.classes[c].size() > 1 || tc.chain.at(g.classes[c][0], g.classes[c][0]) > 0))
      rep.has_return_state = true;
  }
  rep.leading_aperiodic = true;
  for (int c = 0; c < g.k; ++c)
    if (theta[c] >= bar * (1.0 - kThetaTol) && periods[c] > 1)
      rep.leading_aperiodic = false;
  if (!rep.has_return_state)
    rep.notes.push_back("no state has positive return probability; the "
                        "denumerable existence theorem does not apply");
  rep.pass = rep.v_controls && rep.has_return_state && rep.leading_aperiodic;
  return rep;
}

// Truncation-stability of the full structure: rerun the synthesis at each
// window size and compare consecutive certificates in the V-weighted norm.
struct StabilityReport {
  std::vector<int> ns;
  std::vector<double> theta;
  std::vector<int> lead_count;
  std::vector<int> j_max;
  std::vector<double> vtv_gap;      // per consecutive pair
  std::vector<double> theta_drift;  // per consecutive pair
  bool class_structure_stable = true;
  bool j_stable = true;
  bool stable = false;
  std::string diagnostic;
};

inline StabilityReport qsd_stability(const RuleSet& rules,
                                     const std::vector<int>& ns,
                                     ExprPtr weight_override = nullptr) {
  if (ns.size() < 2) throw ChainError("stability needs at least two windows");
  StabilityReport rep;
  std::vector<SynthesisResult> syn;
  std::vector<TruncatedChain> truncs;
  for (int n : ns) {
    truncs.push_back(build_truncation(rules, n, weight_override));
    syn.push_back(synthesize(truncs.back().chain));
    rep.ns.push_back(n);
    rep.theta.push_back(syn.back().cert.theta_bar);
    rep.lead_count.push_back(static_cast<int>(syn.back().cert.nu.size()));
    rep.j_max.push_back(syn.back().cert.j_max());
  }

  for (std::size_t k = 0; k + 1 < syn.size(); ++k) {
    const auto& a = syn[k].cert;
    const auto& b = syn[k + 1].cert;
    rep.theta_drift.push_back(std::abs(a.theta_bar - b.theta_bar));
    if (a.nu.size() != b.nu.size()) {
      rep.class_structure_stable = false;
      rep.diagnostic = "leading-class count changed between windows " +
                       std::to_string(ns[k]) + " and " + std::to_string(ns[k + 1]);
      continue;
    }
    // match extreme measures by the smallest state of their class
    std::vector<int> order_a(a.nu.size()), order_b(b.nu.size());
    for (std::size_t i = 0; i < a.nu.size(); ++i) order_a[i] = static_cast<int>(i);
    for (std::size_t i = 0; i < b.nu.size(); ++i) order_b[i] = static_cast<int>(i);
    auto min_state = [](const Vec& nu) {
      for (Eigen::Index s = 0; s < nu.size(); ++s)
        if (nu[s] > 0) return static_cast<int>(s);
      return -1;
    };
    std::sort(order_a.begin(), order_a.end(), [&](int i, int j) {
      return min_state(a.nu[i]) < min_state(a.nu[j]);
    });
    std::sort(order_b.begin(), order_b.end(), [&](int i, int j) {
      return min_state(b.nu[i]) < min_state(b.nu[j]);
    });
    double gap = 0;
    for (std::size_t i = 0; i < order_a.size(); ++i) {
      const Vec& na = a.nu[order_a[i]];
      const Vec& nb = b.nu[order_b[i]];
      if (min_state(na) != min_state(nb)) {
        rep.class_structure_stable = false;
        rep.diagnostic = "leading classes moved between windows";
      }
      for (int s = 0; s < ns[k + 1]; ++s) {
        double va = s < ns[k] ? na[s] : 0.0;
        gap += std::abs(va - nb[s]) * truncs[k + 1].v[s];
      }
    }
    rep.vtv_gap.push_back(gap);
    for (int s = 0; s < ns[k]; ++s)
      if (a.j_state[s] != b.j_state[s]) rep.j_stable = false;
  }

  bool decreasing = true;
  for (std::size_t k = 0; k + 1 < rep.vtv_gap.size(); ++k)
    if (rep.vtv_gap[k + 1] > rep.vtv_gap[k]) decreasing = false;
  rep.stable = rep.class_structure_stable && rep.j_stable && decreasing &&
               !rep.vtv_gap.empty() && rep.vtv_gap.back() <= 1e-8;
  if (!rep.stable && rep.diagnostic.empty())
    rep.diagnostic = rep.vtv_gap.empty()
                         ? "no comparable windows"
                         : "windows disagree; mass is not settling";
  return rep;
}

}  // namespace qsd
