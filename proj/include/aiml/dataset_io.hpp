#pragma once

// Dataset CSV: a header of variable names, an optional trailing `__weight`
// column (default 1), state labels in the cells and `?` for a missing value.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "aiml/coarse_data.hpp"
#include "aiml/errors.hpp"
#include "aiml/network.hpp"
#include "aiml/network_io.hpp"

namespace aiml {

inline constexpr const char* kWeightColumn = "__weight";

// Columns may come in any order; the result follows the network's node order.
inline Dataset parse_dataset_csv(std::istream& in, const Network& net) {
  using io_detail::split;
  using io_detail::trim;

  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) {
      header = split(line, ',');
      break;
    }
  }
  if (header.empty()) throw FormatError("dataset is empty (no header row)");

  bool weighted = false;
  if (header.back() == kWeightColumn) {
    weighted = true;
    header.pop_back();
  }
  std::vector<std::size_t> column_node;
  std::vector<bool> bound(net.size(), false);
  for (const auto& name : header) {
    auto i = net.find(name);
    if (!i) throw FormatError("dataset column '" + name + "' is not a node of " + net.name());
    if (bound[*i]) throw FormatError("dataset column '" + name + "' appears twice");
    bound[*i] = true;
    column_node.push_back(*i);
  }
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!bound[i]) throw FormatError("dataset has no column for node '" + net.node(i).name + "'");
  }

  Dataset data = Dataset::for_network(net);
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = "dataset line " + std::to_string(lineno);
    const auto cells = split(line, ',');
    if (cells.size() != header.size() + (weighted ? 1 : 0)) {
      throw FormatError(where + ": expected " + std::to_string(header.size() + (weighted ? 1 : 0)) +
                        " cells, found " + std::to_string(cells.size()));
    }
    CoarseCase c{std::vector<int>(net.size(), kMissing)};
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (cells[k] == "?") continue;
      const std::size_t i = column_node[k];
      auto s = net.state_index(i, cells[k]);
      if (!s) throw FormatError(where + ": '" + cells[k] + "' is not a state of " + header[k]);
      c.values[i] = *s;
    }
    double w = 1.0;
    if (weighted) {
      w = io_detail::parse_double(cells.back(), where);
      if (!(w >= 0.0)) throw FormatError(where + ": negative weight");
    }
    data.add(std::move(c), w);
  }
  return data;
}

inline Dataset read_dataset_csv(const std::string& path, const Network& net) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset '" + path + "'");
  return parse_dataset_csv(in, net);
}

// The weight column is written only when some weight differs from 1.
inline void write_dataset_csv(std::ostream& out, const Dataset& data) {
  bool weighted = false;
  for (double w : data.weights()) weighted = weighted || w != 1.0;
  const auto& vars = data.variables();
  for (std::size_t k = 0; k < vars.size(); ++k) out << (k ? "," : "") << vars[k].name;
  if (weighted) out << "," << kWeightColumn;
  out << "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& c = data.at(i);
    for (std::size_t k = 0; k < vars.size(); ++k) {
      out << (k ? "," : "");
      if (c.values[k] == kMissing) {
        out << "?";
      } else {
        out << vars[k].states[static_cast<std::size_t>(c.values[k])];
      }
    }
    if (weighted) out << "," << io_detail::format_double(data.weight(i));
    out << "\n";
  }
}

inline void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write dataset '" + path + "'");
  write_dataset_csv(out, data);
}

}  // namespace aiml
