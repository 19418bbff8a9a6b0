#pragma once

#include "qsd/chain_format.hpp"
#include "qsd/model_dsl.hpp"
#include "qsd/operator_lab.hpp"
#include "qsd/oracle.hpp"
#include "qsd/report.hpp"
#include "qsd/synthesis.hpp"

namespace qsd {

struct CommandResult {
  Json report;
  int exit_code = 0;  // 0 checks pass, 1 input error, 2 check failure
};

namespace detail {

inline Json provenance(const std::string& input_bytes,
                       const std::vector<std::uint64_t>& seeds) {
  Json p;
  p["version"] = kVersion;
  p["schema_version"] = kReportSchemaVersion;
  p["input_hash"] = "fnv1a64:" + fnv1a64_hex(input_bytes);
  p["rng"] = CounterRng::name();
  Json s = Json::array();
  for (auto x : seeds) s.push_back(x);
  p["seeds"] = s;
  return p;
}

inline Json validation_json(const ValidationReport& val) {
  Json v;
  v["ok"] = val.ok;
  Json viol = Json::array();
  for (const auto& x : val.violations) {
    Json e;
    e["row"] = x.row;
    e["col"] = x.col;
    e["value"] = x.value;
    e["what"] = x.what;
    viol.push_back(e);
  }
  v["violations"] = viol;
  v["warnings"] = to_json(val.warnings);
  v["absorption"] = to_json(val.absorption);
  return v;
}

inline Json classes_json(const ClassGraph& g,
                         const std::vector<ClassSpectrum>& spectra) {
  Json c;
  c["count"] = g.k;
  Json members = Json::array();
  for (const auto& m : g.classes) members.push_back(to_json(m));
  c["members"] = members;
  Json edges = Json::array();
  for (auto [a, b] : g.edges) edges.push_back(Json::array({a, b}));
  c["edges"] = edges;
  c["theta"] = to_json(g.theta);
  c["theta_bar"] = g.theta_bar;
  c["fbar"] = to_json(g.fbar);
  Json fl = Json::array();
  for (const auto& l : g.fbar_levels) fl.push_back(to_json(l));
  c["fbar_levels"] = fl;
  Json jl = Json::array();
  for (const auto& l : g.jbar_levels) jl.push_back(to_json(l));
  c["jbar_levels"] = jl;
  c["remainder_classes"] = to_json(g.g_classes);
  c["j_class"] = to_json(g.j_class);
  Json periods = Json::array(), gaps = Json::array(), slow = Json::array();
  for (const auto& s : spectra) {
    periods.push_back(s.period);
    gaps.push_back(s.gap);
    slow.push_back(s.slow);
  }
  c["periods"] = periods;
  c["gaps"] = gaps;
  c["slow"] = slow;
  c["fragile"] = g.fragile;
  c["warnings"] = to_json(g.warnings);
  return c;
}

inline Json certificate_json(const QsdCertificate& cert) {
  Json c;
  c["theta_bar"] = cert.theta_bar;
  c["j"] = to_json(cert.j_state);
  c["index_set"] = to_json(cert.index_set);
  Json nus = Json::array(), etas = Json::array();
  for (const auto& nu : cert.nu) nus.push_back(to_json(nu));
  for (const auto& eta : cert.eta) etas.push_back(to_json(eta));
  c["nu"] = nus;
  c["eta"] = etas;
  c["weight"] = to_json(cert.weight);
  Json env;
  env["kind"] = cert.envelope.geometric ? "geometric" : "polynomial";
  env["ratio"] = cert.envelope.ratio;
  env["poly_degree"] = cert.envelope.poly_degree;
  env["fitted_c"] = cert.envelope.fitted_c;  // null until verification
  c["envelope"] = env;
  c["j_optimal"] = cert.j_optimal;
  if (!cert.j_optimal) c["j_lower"] = to_json(cert.j_lower);
  return c;
}

inline Json check_entry(const std::string& name, const std::string& status,
                        const Json& detail = Json()) {
  Json e;
  e["name"] = name;
  e["status"] = status;
  if (!detail.is_null()) e["detail"] = detail;
  return e;
}

inline Json refusal_json(const HypothesisError& e) {
  Json r;
  r["hypothesis"] = e.hypothesis;
  r["message"] = e.what();
  return r;
}

}  // namespace detail

// classes + spectra only
inline CommandResult cmd_analyze(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  ChainFile cf = parse_chain_text(buf.str(), path);

  CommandResult res;
  res.report["command"] = "analyze";
  res.report["provenance"] = detail::provenance(buf.str(), {});
  ValidationReport val = validate(cf.chain);
  for (const auto& w : cf.warnings) val.warnings.push_back(w);
  res.report["validation"] = detail::validation_json(val);
  if (!val.ok) {
    res.exit_code = 1;
    return res;
  }
  ClassGraph g = find_classes(cf.chain);
  std::vector<ClassSpectrum> spectra;
  std::vector<double> theta;
  double bar = 0;
  for (int c = 0; c < g.k; ++c) {
    spectra.push_back(perron(cf.chain, g.classes[c]));
    theta.push_back(spectra.back().theta);
    bar = std::max(bar, theta.back());
  }
  if (bar > 0) {
    stratify(g, theta, bar);
    polynomial_parameter(g);
  } else {
    g.theta = theta;
  }
  res.report["classes"] = detail::classes_json(g, spectra);
  return res;
}

// full certificate, optionally with the recursive simplex
inline CommandResult cmd_qsd(const std::string& path,
                             bool simplex_recursion = false) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  ChainFile cf = parse_chain_text(buf.str(), path);

  CommandResult res;
  res.report["command"] = "qsd";
  res.report["provenance"] = detail::provenance(buf.str(), {});
  ValidationReport val = validate(cf.chain);
  for (const auto& w : cf.warnings) val.warnings.push_back(w);
  res.report["validation"] = detail::validation_json(val);
  if (!val.ok) {
    res.exit_code = 1;
    return res;
  }
  try {
    SynthesisResult syn = synthesize(cf.chain);
    res.report["classes"] = detail::classes_json(syn.graph, syn.spectra);
    res.report["certificate"] = detail::certificate_json(syn.cert);
    QsdSimplex simplex = qsd_simplex(cf.chain, syn, simplex_recursion);
    Json levels = Json::array();
    for (const auto& level : simplex.levels) {
      Json l;
      l["theta"] = level.theta;
      l["index_set"] = to_json(level.index_set);
      Json pts = Json::array();
      for (const auto& p : level.points) pts.push_back(to_json(p));
      l["points"] = pts;
      levels.push_back(l);
    }
    res.report["simplex"] = Json{{"levels", levels}};
  } catch (const HypothesisError& e) {
    res.report["refusal"] = detail::refusal_json(e);
    res.exit_code = 2;
  }
  return res;
}

// oracle and Monte Carlo sections on top of the certificate
inline CommandResult cmd_verify(const std::string& path, int n_max = 4000,
                                long samples = 100000, std::uint64_t seed = 0) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  ChainFile cf = parse_chain_text(buf.str(), path);

  CommandResult res;
  res.report["command"] = "verify";
  res.report["provenance"] = detail::provenance(buf.str(), {seed});
  ValidationReport val = validate(cf.chain);
  res.report["validation"] = detail::validation_json(val);
  if (!val.ok) {
    res.exit_code = 1;
    return res;
  }

  SynthesisResult syn;
  try {
    syn = synthesize(cf.chain);
  } catch (const HypothesisError& e) {
    res.report["refusal"] = detail::refusal_json(e);
    res.exit_code = 2;
    return res;
  }
  res.report["classes"] = detail::classes_json(syn.graph, syn.spectra);

  const auto& cert = syn.cert;
  const auto& g = syn.graph;
  const int d = cf.chain.size();
  Vec eta = cert.eta_total();
  Json checks = Json::array();
  bool all_pass = true;
  auto add_check = [&](const std::string& name, bool pass, const Json& det) {
    checks.push_back(detail::check_entry(name, pass ? "pass" : "fail", det));
    if (!pass) all_pass = false;
  };

  // exponential and polynomial estimates per state
  Json theta_hat = Json::array(), j_hat = Json::array(),
       j_unrounded = Json::array();
  bool theta_ok = true, j_ok = true;
  for (int x = 0; x < d; ++x) {
    double th = estimate_theta(cf.chain, x, n_max);
    theta_hat.push_back(th);
    double expected;
    if (eta[x] > 0) {
      expected = cert.theta_bar;
      auto je = estimate_j(cf.chain, x, cert.theta_bar, n_max);
      j_hat.push_back(je.j_hat);
      j_unrounded.push_back(je.unrounded);
      if (je.j_hat != cert.j_state[x] || je.flagged || je.degenerate)
        j_ok = false;
    } else {
      expected = 0;
      for (int c = 0; c < g.k; ++c)
        if (g.accessible(g.class_of[x], c)) expected = std::max(expected, g.theta[c]);
      j_hat.push_back(0);
      j_unrounded.push_back(0.0);
    }
    if (std::abs(th - expected) > 1e-3) theta_ok = false;
  }
  add_check("theta-estimates", theta_ok, Json());
  add_check("j-estimates", j_ok, Json());

  // limit residual curves against the envelope, one probe per state
  Json curves = Json::array();
  double fitted_c = 0;
  bool limits_ok = true;
  const int limit_n = std::min(n_max, 2000);
  for (int x = 0; x < d; ++x) {
    auto lc = check_limit(cf.chain, cert, x, Vec::Ones(d), limit_n);
    if (!lc.pass) limits_ok = false;
    fitted_c = std::max(fitted_c, lc.fitted_c);
    Json curve;
    curve["x"] = x;
    Json ns = Json::array(), rs = Json::array(), ms = Json::array();
    for (int n = 1; n <= limit_n; n *= 2) {
      ns.push_back(n);
      rs.push_back(lc.residuals[static_cast<std::size_t>(n - 1)]);
    }
    curve["ns"] = ns;
    curve["residuals"] = rs;
    curve["fitted_c"] = lc.fitted_c;
    curve["test_ratio"] = lc.test_ratio;
    curve["measured_ratio"] = lc.measured_ratio;
    curves.push_back(curve);
  }
  add_check("limit-envelopes", limits_ok, Json());

  // structural invariants of the certificate
  auto s2 = check_section2_invariants(cf.chain, cert);
  add_check("j-support-monotone", s2.j_monotone, Json());
  add_check("masked-eigen-identity", s2.masked_identity,
            Json{{"worst", s2.masked_worst}});
  add_check("extreme-measures-normalized", s2.nu_normalized && s2.nu_decomposes,
            Json{{"worst", s2.nu_worst}});
  add_check("fixed-point", s2.fixed_point, Json{{"worst", s2.fixed_point_worst}});

  // conditional law against the certificate mixture
  Vec mu = Vec::Constant(d, 1.0 / d);
  bool tv_ok = true;
  Json tv_curve = Json::array();
  double prev_tv = std::numeric_limits<double>::infinity();
  for (int n : {50, 200, 1000}) {
    auto cl = conditional_law(cf.chain, cert, mu, n);
    tv_curve.push_back(Json{{"n", n}, {"tv", cl.tv}});
    if (cl.tv > prev_tv + 1e-12) tv_ok = false;
    prev_tv = cl.tv;
  }
  add_check("conditional-law-convergence", tv_ok, tv_curve);

  // Monte Carlo cross-check at short horizon, one start per leading state
  const int mc_n = 20;
  int mc_x = 0;
  for (int x = 0; x < d; ++x)
    if (eta[x] > 0) mc_x = x;
  Json mc_json;
  bool mc_ok = true;
  try {
    auto mc = monte_carlo_conditional(cf.chain, mc_x, mc_n, samples, seed);
    Vec delta = Vec::Zero(d);
    delta[mc_x] = 1.0;
    auto cl = conditional_law(cf.chain, cert, delta, mc_n);
    double worst_sigma = 0;
    for (int s = 0; s < d; ++s) {
      double p = cl.exact[s];
      double se = std::sqrt(p * (1 - p) / static_cast<double>(mc.survivors));
      if (se == 0) {
        if (mc.empirical[s] != p) mc_ok = false;
        continue;
      }
      worst_sigma = std::max(worst_sigma, std::abs(mc.empirical[s] - p) / se);
    }
    if (worst_sigma > 3.0) mc_ok = false;
    mc_json["x"] = mc_x;
    mc_json["n"] = mc_n;
    mc_json["samples"] = samples;
    mc_json["seed"] = seed;
    mc_json["survivors"] = mc.survivors;
    mc_json["empirical"] = to_json(mc.empirical);
    mc_json["exact"] = to_json(cl.exact);
    mc_json["worst_sigma"] = worst_sigma;
  } catch (const ChainError& e) {
    mc_ok = false;
    mc_json["error"] = e.what();
  }
  add_check("monte-carlo", mc_ok, mc_json);

  Json cert_json = detail::certificate_json(cert);
  cert_json["envelope"]["fitted_c"] = fitted_c;
  res.report["certificate"] = cert_json;

  Json ver;
  ver["n_max"] = n_max;
  ver["theta_hat"] = theta_hat;
  ver["j_hat"] = j_hat;
  ver["j_unrounded"] = j_unrounded;
  ver["limit_curves"] = curves;
  ver["checks"] = checks;
  res.report["verification"] = ver;
  res.exit_code = all_pass ? 0 : 2;
  return res;
}

// appendix verification batch
inline CommandResult cmd_operator_lab(int case_id, std::uint64_t seed,
                                      int instances) {
  if (case_id < 1 || case_id > 3) throw IoError("case must be 1, 2 or 3");
  if (instances < 1) throw IoError("instance count must be positive");
  CommandResult res;
  res.report["command"] = "operator-lab";
  res.report["provenance"] = detail::provenance(
      "operator-lab case=" + std::to_string(case_id), {seed});

  Json results = Json::array();
  bool all_ok = true;
  double worst_mismatch = 0, worst_identity = 0;
  CounterRng root(seed);
  for (int i = 0; i < instances; ++i) {
    CounterRng rng = root.stream(static_cast<std::uint64_t>(i));
    int d1 = 2 + static_cast<int>(rng.next_below(5));
    int d2 = 2 + static_cast<int>(rng.next_below(5));
    double scale = rng.next_double(0.2, 0.6);
    ComposeResult cr;
    if (case_id == 1) {
      auto p_h = fit_h(random_perron_block(rng, d1), 400);
      cr = compose_case1(p_h, random_cross(rng, d1, d2),
                         random_perron_block(rng, d2, scale), 400);
    } else if (case_id == 2) {
      auto r_h = fit_h(random_perron_block(rng, d2), 400);
      cr = compose_case2(random_perron_block(rng, d1, scale),
                         random_cross(rng, d1, d2), r_h, 400);
    } else {
      auto p_h = fit_h(random_perron_block(rng, d1), 400);
      auto r_h = fit_h(random_perron_block(rng, d2), 400);
      cr = compose_case3(p_h, random_cross(rng, d1, d2), r_h, 400);
    }
    bool ok = cr.e_mismatch <= 1e-6 &&
              cr.fitted.identity_residual <= 1e-10 &&
              (case_id != 3 || cr.fitted.j == cr.predicted.j);
    all_ok = all_ok && ok;
    worst_mismatch = std::max(worst_mismatch, cr.e_mismatch);
    worst_identity = std::max(worst_identity, cr.fitted.identity_residual);
    Json r;
    r["instance"] = i;
    r["d1"] = d1;
    r["d2"] = d2;
    r["e_mismatch"] = cr.e_mismatch;
    r["fitted_j"] = cr.fitted.j;
    r["predicted_j"] = cr.predicted.j;
    r["identity_residual"] = cr.fitted.identity_residual;
    r["status"] = ok ? "pass" : "fail";
    results.push_back(r);
  }
  Json lab;
  lab["case"] = case_id;
  lab["instances"] = instances;
  lab["seed"] = seed;
  lab["worst_e_mismatch"] = worst_mismatch;
  lab["worst_identity_residual"] = worst_identity;
  lab["results"] = results;
  lab["status"] = all_ok ? "pass" : "fail";
  res.report["operator_lab"] = lab;
  res.exit_code = all_ok ? 0 : 2;
  return res;
}

// drift criterion plus window stability
inline CommandResult cmd_lyapunov(const std::string& rules_path,
                                  const std::string& v_override,
                                  std::vector<int> ns) {
  std::ifstream in(rules_path);
  if (!in) throw IoError(rules_path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  RuleSet rules = parse_rules(buf.str());
  ExprPtr v = v_override.empty() ? nullptr : parse_expr(v_override);
  if (ns.size() < 2) throw IoError("need at least two window sizes");
  std::sort(ns.begin(), ns.end());

  CommandResult res;
  res.report["command"] = "lyapunov";
  res.report["provenance"] = detail::provenance(buf.str(), {});

  StabilityReport stab = qsd_stability(rules, ns, v);
  LyapunovReport lyap = lyapunov_check(rules, ns[ns.size() - 2], ns.back(),
                                       stab.theta.back(), v);
  Json criterion;
  criterion["tail_ratio_sup"] = lyap.tail_ratio_sup;
  criterion["tail_argmax"] = lyap.tail_argmax;
  criterion["theta_ref"] = lyap.theta_ref;
  criterion["refined_ok"] = lyap.refined_ok ? "pass" : "fail";
  criterion["tail_survival_sup"] = lyap.tail_survival_sup;
  criterion["v_controls"] = lyap.v_controls;
  criterion["has_return_state"] = lyap.has_return_state;
  criterion["leading_aperiodic"] = lyap.leading_aperiodic;
  criterion["pass"] = lyap.pass;
  criterion["notes"] = to_json(lyap.notes);
  res.report["lyapunov"] = criterion;

  Json stability;
  stability["ns"] = to_json(stab.ns);
  stability["theta"] = to_json(stab.theta);
  stability["lead_count"] = to_json(stab.lead_count);
  stability["j_max"] = to_json(stab.j_max);
  stability["vtv_gap"] = to_json(stab.vtv_gap);
  stability["theta_drift"] = to_json(stab.theta_drift);
  stability["class_structure_stable"] = stab.class_structure_stable;
  stability["j_stable"] = stab.j_stable;
  stability["stable"] = stab.stable;
  stability["diagnostic"] = stab.diagnostic;
  res.report["stability"] = stability;

  res.exit_code = (lyap.pass && stab.stable) ? 0 : 2;
  return res;
}

}  // namespace qsd
