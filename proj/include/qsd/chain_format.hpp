#pragma once

#include <fstream>
#include <optional>
#include <sstream>

#include "qsd/chain.hpp"

namespace qsd {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sparse triplet text format:
//   qsd-chain v1 d=<states>
//   <from> <to> <prob>
//   weight <state> <value>     (optional lines)
// with '#' comments and 0-based indices.
struct ChainFile {
  AbsorbedChain chain;
  std::optional<Vec> weight;
  std::vector<std::string> warnings;
};

inline ChainFile parse_chain_text(const std::string& text,
                                  const std::string& origin = "<input>") {
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  auto fail = [&](const std::string& msg) -> IoError {
    return IoError(origin + ":" + std::to_string(line_no) + ": " + msg);
  };

  int d = -1;
  std::vector<std::tuple<int, int, double>> triplets;
  std::vector<std::pair<int, double>> weights;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (d < 0) {
      std::string version, dim;
      if (first != "qsd-chain" || !(ls >> version >> dim) || version != "v1" ||
          dim.rfind("d=", 0) != 0)
        throw fail("expected header 'qsd-chain v1 d=<states>'");
      try {
        d = std::stoi(dim.substr(2));
      } catch (...) {
        throw fail("bad state count '" + dim + "'");
      }
      if (d <= 0) throw fail("state count must be positive");
      continue;
    }
    if (first == "weight") {
      int s;
      double v;
      if (!(ls >> s >> v)) throw fail("expected 'weight <state> <value>'");
      if (s < 0 || s >= d) throw fail("weight state out of range");
      weights.emplace_back(s, v);
      continue;
    }
    int from, to;
    double p;
    try {
      from = std::stoi(first);
    } catch (...) {
      throw fail("expected a row index, got '" + first + "'");
    }
    if (!(ls >> to >> p)) throw fail("expected '<from> <to> <prob>'");
    std::string extra;
    if (ls >> extra) throw fail("trailing input '" + extra + "'");
    if (from < 0 || from >= d || to < 0 || to >= d)
      throw fail("state index out of range in '" + line + "'");
    triplets.emplace_back(from, to, p);
  }
  if (d < 0) throw IoError(origin + ": empty file, header missing");

  ChainFile out{AbsorbedChain::from_triplets(d, triplets), std::nullopt, {}};
  if (out.chain.duplicate_entries() > 0)
    out.warnings.push_back(std::to_string(out.chain.duplicate_entries()) +
                           " duplicate entries were summed");
  if (!weights.empty()) {
    Vec w = Vec::Ones(d);
    for (auto [s, v] : weights) w[s] = v;
    out.weight = w;
  }
  return out;
}

inline ChainFile read_chain_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_chain_text(buf.str(), path);
}

inline std::string write_chain_text(const AbsorbedChain& chain) {
  std::ostringstream out;
  out << "qsd-chain v1 d=" << chain.size() << "\n";
  char buf[48];
  for (int x = 0; x < chain.size(); ++x)
    for (const auto& e : chain.row(x)) {
      std::snprintf(buf, sizeof buf, "%d %d %.17g\n", x, e.col, e.p);
      out << buf;
    }
  return out.str();
}

}  // namespace qsd
