#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include "gridrl/core/mdp.hpp"

namespace gridrl {

struct QTable {
  StateActionTable values;
  double learning_rate = 0.1;

  QTable() = default;
  QTable(std::size_t states, std::size_t actions, double learning_rate_, double init = 0.0)
      : values(states, actions, init), learning_rate(learning_rate_) {
    if (!(learning_rate_ > 0.0)) throw ParameterError("QTable: learning rate must be positive");
  }

  double& operator()(std::size_t s, std::size_t a) { return values(s, a); }
  double operator()(std::size_t s, std::size_t a) const { return values(s, a); }
  std::size_t states() const { return values.states(); }
  std::size_t actions() const { return values.actions(); }
  double max_value(std::size_t s) const {
    double best = -std::numeric_limits<double>::infinity();
    for (double v : values.row(s)) best = std::max(best, v);
    return best;
  }
};

/// Rows are states, columns actions; values printed round-trip exact.
inline void write_q_csv(std::ostream& out, const StateActionTable& q) {
  out << "state";
  for (std::size_t a = 0; a < q.actions(); ++a) out << ",a" << a;
  out << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t s = 0; s < q.states(); ++s) {
    out << s;
    for (double v : q.row(s)) out << ',' << v;
    out << '\n';
  }
}

inline StateActionTable read_q_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("Q CSV: missing header");
  std::size_t actions = 0;
  for (char c : line) actions += (c == ',');
  if (actions == 0) throw IoError("Q CSV: header has no action columns");
  std::vector<double> values;
  std::size_t states = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    if (std::stoul(cell) != states) throw IoError("Q CSV: rows out of order");
    std::size_t count = 0;
    while (std::getline(row, cell, ',')) {
      values.push_back(std::stod(cell));
      ++count;
    }
    if (count != actions) throw IoError("Q CSV: row " + std::to_string(states) + " has the wrong column count");
    ++states;
  }
  StateActionTable q(states, actions);
  q.values() = std::move(values);
  return q;
}

inline void save_q_csv(const std::string& path, const StateActionTable& q) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_q_csv(out, q);
}

inline StateActionTable load_q_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_q_csv(in);
}

}  // namespace gridrl
