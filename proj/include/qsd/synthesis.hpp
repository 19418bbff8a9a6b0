#pragma once

#include "qsd/two_block.hpp"

namespace qsd {

struct SynthesisResult {
  QsdCertificate cert;
  ClassGraph graph;
  std::vector<ClassSpectrum> spectra;
  double gamma = 0;  // certified contraction rate of the sub-leading classes
  std::vector<std::string> notes;
};

namespace detail {

inline std::vector<int> class_union_states(const ClassGraph& g,
                                           const std::vector<int>& class_ids) {
  std::vector<int> out;
  for (int c : class_ids)
    out.insert(out.end(), g.classes[c].begin(), g.classes[c].end());
  std::sort(out.begin(), out.end());
  return out;
}

// Base certificate of one leading stratum: the extreme measures are the
// per-class Perron triples, side by side.
inline QsdCertificate stratum_base(const ClassGraph& g,
                                   const std::vector<ClassSpectrum>& spectra,
                                   const std::vector<int>& level_classes,
                                   double theta_bar) {
  QsdCertificate cert;
  cert.theta_bar = theta_bar;
  cert.states = class_union_states(g, level_classes);
  cert.index_set = level_classes;
  cert.j_state.assign(cert.states.size(), 0);
  cert.j_lower.assign(cert.states.size(), 0);
  cert.weight = Vec::Ones(cert.size());
  double worst_gap = 0;
  for (int f : level_classes) {
    Vec nu = Vec::Zero(cert.size()), eta = Vec::Zero(cert.size());
    const auto& st = g.classes[f];
    for (std::size_t i = 0; i < st.size(); ++i) {
      int li = cert.local_index(st[i]);
      nu[li] = spectra[f].nu[static_cast<Eigen::Index>(i)];
      eta[li] = spectra[f].eta[static_cast<Eigen::Index>(i)];
    }
    cert.nu.push_back(std::move(nu));
    cert.eta.push_back(std::move(eta));
    worst_gap = std::max(worst_gap, spectra[f].gap);
  }
  cert.envelope = geometric_envelope(worst_gap);
  return cert;
}

}  // namespace detail

// Full structure of a reducible chain, by induction over the condensation:
// each leading stratum is certified by fast-upstream folds of its
// sub-leading feeders, strata are chained by equal-rate folds (j increments
// by one per stratum), and the classes that never reach the leading set are
// attached last as a fast-downstream remainder.
inline SynthesisResult synthesize(const AbsorbedChain& chain) {
  SynthesisResult out;
  ValidationReport val = validate(chain);
  if (!val.ok)
    throw HypothesisError("valid-chain", "chain fails validation: " +
                                             val.violations.front().what);

  out.graph = find_classes(chain);
  ClassGraph& g = out.graph;
  out.spectra.reserve(g.k);
  std::vector<double> theta(g.k);
  for (int c = 0; c < g.k; ++c) {
    out.spectra.push_back(perron(chain, g.classes[c]));
    theta[c] = out.spectra.back().theta;
  }
  double theta_bar = *std::max_element(theta.begin(), theta.end());
  if (!(theta_bar > 0))
    throw HypothesisError("positive-rate",
                          "every class dies in finitely many steps; no "
                          "quasi-stationary structure at a positive rate");
  stratify(g, theta, theta_bar);
  polynomial_parameter(g);

  for (int f : g.fbar)
    if (out.spectra[f].period > 1)
      throw HypothesisError(
          "leading-aperiodicity",
          "leading class " + std::to_string(f) + " has period " +
              std::to_string(out.spectra[f].period) +
              "; the equal-rate theory does not apply");
  out.gamma = 0;
  for (int c = 0; c < g.k; ++c)
    if (!g.in_fbar[c]) out.gamma = std::max(out.gamma, theta[c] + 1e-12);

  const int lbar = static_cast<int>(g.fbar_levels.size()) - 1;

  // Step 1: certify each stratum restricted to its own classes.
  std::vector<QsdCertificate> level_cert(lbar + 1);
  for (int l = 0; l <= lbar; ++l) {
    QsdCertificate cert =
        detail::stratum_base(g, out.spectra, g.fbar_levels[l], theta_bar);
    std::vector<int> pending;
    for (int c : g.jbar_levels[l])
      if (!g.in_fbar[c]) pending.push_back(c);
    std::vector<bool> done(g.k, false);
    for (int f : g.fbar_levels[l]) done[f] = true;
    while (!pending.empty()) {
      int pick = -1;
      for (int c : pending) {
        bool ready = true;
        for (int o : g.jbar_levels[l])
          if (o != c && g.reach[c][o] && !done[o]) {
            ready = false;
            break;
          }
        if (ready) {
          pick = c;
          break;
        }
      }
      if (pick < 0) throw InternalError("stratum fold ordering stalled");
      TwoBlockDecomposition dec =
          make_two_block(chain, g.classes[pick], cert.states);
      cert = compose_case_a2(dec, cert);
      done[pick] = true;
      pending.erase(std::find(pending.begin(), pending.end(), pick));
    }
    level_cert[l] = std::move(cert);
  }

  // Step 2: chain the strata bottom-up; each fold bumps j on the new block.
  QsdCertificate cert = level_cert[0];
  for (int l = 1; l <= lbar; ++l) {
    TwoBlockDecomposition dec =
        make_two_block(chain, level_cert[l].states, cert.states);
    cert = compose_case_a3(dec, level_cert[l], cert);
    for (int s : level_cert[l].states)
      if (cert.j_state[cert.local_index(s)] != l)
        throw InternalError("stratum fold produced an unexpected level");
  }

  // Step 3: attach the remainder that never reaches the leading set.
  if (!g.g_classes.empty()) {
    std::vector<int> g_states = detail::class_union_states(g, g.g_classes);
    TwoBlockDecomposition dec = make_two_block(chain, cert.states, g_states);
    cert = compose_case_a1(dec, cert);
  }

  if (cert.size() != chain.size())
    throw InternalError("certificate does not cover the state space");
  for (int i = 0; i < cert.size(); ++i)
    if (cert.j_state[i] != g.j_class[g.class_of[cert.states[i]]])
      throw InternalError(
          "polynomial parameter mismatch between synthesis and the "
          "condensation count at state " + std::to_string(cert.states[i]));

  out.cert = std::move(cert);
  out.notes = g.warnings;
  return out;
}

// Predicted support of the weight function paired with lead class `lead`:
// positivity propagates freely inside the bottom stratum, but a class in a
// higher stratum contributes only through a leading class of its own stratum
// that steps directly into a supported class one stratum below. Routes that
// skip a stratum carry too few leading classes and vanish in the limit.
inline std::vector<bool> eta_support_classes(const ClassGraph& g, int lead) {
  std::vector<bool> pos(g.k, false);
  for (std::size_t l = 0; l < g.jbar_levels.size(); ++l) {
    for (int c : g.jbar_levels[l]) {
      if (l == 0) {
        pos[c] = g.accessible(c, lead);
        continue;
      }
      bool ok = false;
      for (int k : g.fbar_levels[l]) {
        if (!g.accessible(c, k)) continue;
        for (int m : g.dag[k])
          if (g.level_of[m] == static_cast<int>(l) - 1 && pos[m]) {
            ok = true;
            break;
          }
        if (ok) break;
      }
      pos[c] = ok;
    }
  }
  return pos;
}

// All quasi-stationary distributions with finite weight: the convex hull of
// the leading extreme measures, plus (optionally) the recursive families of
// the restriction to the classes that never reach the leading set.
struct SimplexLevel {
  double theta = 0;
  std::vector<int> states;      // global ids carrying this level
  std::vector<int> index_set;   // class ids within the restriction
  std::vector<Vec> points;      // extreme measures over the full state space
};

struct QsdSimplex {
  std::vector<SimplexLevel> levels;
};

inline QsdSimplex qsd_simplex(const AbsorbedChain& chain,
                              const SynthesisResult& syn, bool recurse) {
  QsdSimplex out;
  const int d = chain.size();
  std::vector<int> alive(d);
  for (int i = 0; i < d; ++i) alive[i] = i;

  const SynthesisResult* cur = &syn;
  SynthesisResult scratch;
  while (true) {
    SimplexLevel level;
    level.theta = cur->cert.theta_bar;
    level.states = cur->cert.states;
    level.index_set = cur->cert.index_set;
    for (const auto& nu_local : cur->cert.nu) {
      Vec nu = Vec::Zero(d);
      for (int i = 0; i < cur->cert.size(); ++i)
        nu[alive[cur->cert.states[i]]] = nu_local[i];
      level.points.push_back(std::move(nu));
    }
    // remap restriction-local ids back to global ids
    for (auto& s : level.states) s = alive[s];
    out.levels.push_back(std::move(level));
    if (!recurse) break;

    std::vector<int> rest_local =
        detail::class_union_states(cur->graph, cur->graph.g_classes);
    if (rest_local.empty()) break;
    std::vector<int> rest_global(rest_local.size());
    for (std::size_t i = 0; i < rest_local.size(); ++i)
      rest_global[i] = alive[rest_local[i]];
    AbsorbedChain sub = chain.restricted(rest_global);
    try {
      scratch = synthesize(sub);
    } catch (const HypothesisError&) {
      break;  // remainder dies at rate zero or is degenerate
    }
    alive = rest_global;
    cur = &scratch;
    // `alive` maps the restriction's local ids straight to original ids, so
    // the loop body above can keep using it unchanged.
  }
  return out;
}

}  // namespace qsd
