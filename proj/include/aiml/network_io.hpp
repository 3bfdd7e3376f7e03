#pragma once

// Line-oriented network file format:
//
//   network <name>
//   node <name> states <s1>,<s2>[,...]
//   parents <name> <p1>[,<p2>...]
//   cpt <name> [| <p1>=<v1>,<p2>=<v2>...] : <q1>,<q2>[,...]
//
// '#' starts a comment. One cpt line per parent configuration.

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aiml/errors.hpp"
#include "aiml/network.hpp"

namespace aiml {

inline constexpr double kParseRowTolerance = 1e-6;

namespace io_detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  if (s.empty()) throw FormatError(where + ": empty number");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw FormatError(where + ": bad number '" + s + "'");
  }
  return v;
}

// 17 significant digits: reads back as the same double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace io_detail

inline Network parse_network(std::istream& in) {
  using io_detail::split;
  using io_detail::trim;

  NetworkSpec spec;
  std::map<std::string, std::size_t> index;
  struct CptLine {
    std::size_t line;
    std::string node;
    std::string condition;
    std::string values;
  };
  std::vector<CptLine> cpt_lines;
  std::vector<std::pair<std::size_t, std::string>> parent_lines;

  std::string raw;
  std::size_t lineno = 0;
  bool named = false;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    std::string rest;
    std::getline(ls, rest);
    rest = trim(rest);
    if (keyword == "network") {
      if (named) throw FormatError(where + ": duplicate 'network' line");
      if (rest.empty()) throw FormatError(where + ": missing network name");
      spec.name = rest;
      named = true;
    } else if (keyword == "node") {
      std::istringstream rs(rest);
      std::string name, kw, states;
      rs >> name >> kw;
      std::getline(rs, states);
      if (name.empty() || kw != "states") {
        throw FormatError(where + ": expected 'node <name> states <s1>,<s2>,...'");
      }
      if (index.count(name)) throw FormatError(where + ": duplicate node '" + name + "'");
      index[name] = spec.nodes.size();
      spec.nodes.push_back({name, split(trim(states), ','), {}});
    } else if (keyword == "parents") {
      parent_lines.emplace_back(lineno, rest);
    } else if (keyword == "cpt") {
      const auto colon = rest.find(':');
      if (colon == std::string::npos) throw FormatError(where + ": cpt line needs ':'");
      std::string head = trim(rest.substr(0, colon));
      std::string values = trim(rest.substr(colon + 1));
      std::string node = head, condition;
      const auto bar = head.find('|');
      if (bar != std::string::npos) {
        node = trim(head.substr(0, bar));
        condition = trim(head.substr(bar + 1));
      }
      cpt_lines.push_back({lineno, node, condition, values});
    } else {
      throw FormatError(where + ": unknown keyword '" + keyword + "'");
    }
  }
  if (!named) throw FormatError("missing 'network <name>' line");

  for (const auto& [ln, rest] : parent_lines) {
    const std::string where = "line " + std::to_string(ln);
    std::istringstream rs(rest);
    std::string name, list;
    rs >> name;
    std::getline(rs, list);
    auto it = index.find(name);
    if (it == index.end()) throw FormatError(where + ": parents for unknown node '" + name + "'");
    auto& node = spec.nodes[it->second];
    if (!node.parents.empty()) throw FormatError(where + ": duplicate parents line for " + name);
    node.parents = split(trim(list), ',');
    if (node.parents.size() == 1 && node.parents[0].empty()) node.parents.clear();
  }

  // Structural problems (unknown parents, cycles) surface here before CPT rows
  // are located by parent configuration.
  {
    std::vector<Diagnostic> ds;
    if (!detail::check_structure(spec.nodes, ds)) throw NetworkError(std::move(ds));
  }

  std::vector<std::vector<bool>> seen(spec.nodes.size());
  spec.cpts.resize(spec.nodes.size());
  std::vector<std::size_t> rows(spec.nodes.size());
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    rows[i] = detail::config_count(spec.nodes, index, i);
    spec.cpts[i].assign(rows[i] * spec.nodes[i].states.size(), 0.0);
    seen[i].assign(rows[i], false);
  }

  for (const auto& c : cpt_lines) {
    const std::string where = "line " + std::to_string(c.line);
    auto it = index.find(c.node);
    if (it == index.end()) throw FormatError(where + ": cpt for unknown node '" + c.node + "'");
    const std::size_t i = it->second;
    const auto& node = spec.nodes[i];

    std::map<std::string, std::string> bound;
    if (!c.condition.empty()) {
      for (const auto& kv : split(c.condition, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw FormatError(where + ": expected parent=value");
        std::string p = trim(kv.substr(0, eq));
        if (!bound.emplace(p, trim(kv.substr(eq + 1))).second) {
          throw FormatError(where + ": parent '" + p + "' bound twice");
        }
      }
    }
    if (bound.size() != node.parents.size()) {
      throw FormatError(where + ": cpt for " + node.name + " must bind exactly its " +
                        std::to_string(node.parents.size()) + " parent(s)");
    }
    std::size_t config = 0;
    for (const auto& p : node.parents) {
      auto b = bound.find(p);
      if (b == bound.end()) throw FormatError(where + ": parent '" + p + "' not bound");
      const auto& pstates = spec.nodes[index.at(p)].states;
      auto s = std::find(pstates.begin(), pstates.end(), b->second);
      if (s == pstates.end()) {
        throw FormatError(where + ": '" + b->second + "' is not a state of " + p);
      }
      config = config * pstates.size() + static_cast<std::size_t>(s - pstates.begin());
    }
    if (seen[i][config]) throw FormatError(where + ": duplicate cpt row for " + node.name);
    seen[i][config] = true;

    const auto vals = split(c.values, ',');
    const std::size_t m = node.states.size();
    if (vals.size() != m) {
      throw FormatError(where + ": expected " + std::to_string(m) + " probabilities, found " +
                        std::to_string(vals.size()));
    }
    double sum = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
      const double v = io_detail::parse_double(vals[s], where);
      if (!(v >= 0.0 && v <= 1.0)) throw FormatError(where + ": probability outside [0,1]");
      spec.cpts[i][config * m + s] = v;
      sum += v;
    }
    if (std::abs(sum - 1.0) > kParseRowTolerance) {
      throw FormatError(where + ": row sums to " + io_detail::format_double(sum));
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      for (std::size_t s = 0; s < m; ++s) spec.cpts[i][config * m + s] /= sum;
    }
  }
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    for (std::size_t r = 0; r < rows[i]; ++r) {
      if (!seen[i][r]) {
        throw FormatError("cpt for " + spec.nodes[i].name + " is missing parent configuration #" +
                          std::to_string(r));
      }
    }
  }
  return Network::from_spec(std::move(spec));
}

inline Network parse_network_text(const std::string& text) {
  std::istringstream in(text);
  return parse_network(in);
}

inline Network read_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open network file '" + path + "'");
  return parse_network(in);
}

inline void write_network(std::ostream& out, const Network& net) {
  out << "network " << net.name() << "\n";
  for (const auto& n : net.nodes()) {
    out << "node " << n.name << " states ";
    for (std::size_t s = 0; s < n.states.size(); ++s) out << (s ? "," : "") << n.states[s];
    out << "\n";
  }
  for (const auto& n : net.nodes()) {
    if (n.parents.empty()) continue;
    out << "parents " << n.name << " ";
    for (std::size_t k = 0; k < n.parents.size(); ++k) out << (k ? "," : "") << n.parents[k];
    out << "\n";
  }
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& n = net.node(i);
    const auto ps = net.parents(i);
    for (std::size_t r = 0; r < net.num_configs(i); ++r) {
      out << "cpt " << n.name;
      if (!ps.empty()) {
        const auto states = net.config_states(i, r);
        out << " | ";
        for (std::size_t k = 0; k < ps.size(); ++k) {
          out << (k ? "," : "") << net.node(ps[k]).name << "="
              << net.node(ps[k]).states[static_cast<std::size_t>(states[k])];
        }
      }
      out << " : ";
      const auto row = net.row(i, r);
      for (std::size_t s = 0; s < row.size(); ++s) {
        out << (s ? "," : "") << io_detail::format_double(row[s]);
      }
      out << "\n";
    }
  }
}

inline std::string to_text(const Network& net) {
  std::ostringstream os;
  write_network(os, net);
  return os.str();
}

inline void write_network(const std::string& path, const Network& net) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write network file '" + path + "'");
  write_network(out, net);
}

}  // namespace aiml
