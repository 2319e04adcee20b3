#pragma once

#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "gridrl/core/mdp.hpp"

namespace gridrl {

// Plain-text MDP format:
//   S A gamma s0
//   s a reward p(s'=0) ... p(s'=S-1)      (S*A lines, any order)
//   t1 t2 ...                              (terminal states, possibly empty)

inline TabularMdp read_tabular_mdp(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw IoError("tabular MDP: missing header line");
  std::istringstream hs(header);
  std::size_t n_states = 0, n_actions = 0, initial = 0;
  double discount = 0.0;
  if (!(hs >> n_states >> n_actions >> discount >> initial)) {
    throw IoError("tabular MDP: header must be 'S A gamma s0'");
  }
  if (n_states == 0 || n_actions == 0) throw ValidationError("tabular MDP: empty state or action space");
  std::vector<double> probs(n_states * n_actions * n_states, 0.0);
  std::vector<double> rewards(n_states * n_actions, 0.0);
  std::vector<bool> seen(n_states * n_actions, false);
  for (std::size_t line_no = 0; line_no < n_states * n_actions; ++line_no) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("tabular MDP: expected " + std::to_string(n_states * n_actions) + " rows");
    std::istringstream ls(line);
    std::size_t s = 0, a = 0;
    double r = 0.0;
    if (!(ls >> s >> a >> r)) throw IoError("tabular MDP: malformed row " + std::to_string(line_no + 2));
    if (s >= n_states || a >= n_actions) throw ValidationError("tabular MDP: row index out of range");
    if (seen[s * n_actions + a]) throw ValidationError("tabular MDP: duplicate row for (" + std::to_string(s) + ", " +
                                                       std::to_string(a) + ")");
    seen[s * n_actions + a] = true;
    rewards[s * n_actions + a] = r;
    for (std::size_t s2 = 0; s2 < n_states; ++s2) {
      if (!(ls >> probs[(s * n_actions + a) * n_states + s2])) {
        throw IoError("tabular MDP: row " + std::to_string(line_no + 2) + " has too few probabilities");
      }
    }
  }
  std::set<std::size_t> terminals;
  std::string line;
  if (std::getline(in, line)) {
    std::istringstream ts(line);
    std::size_t t = 0;
    while (ts >> t) terminals.insert(t);
    if (!ts.eof()) throw IoError("tabular MDP: malformed terminal-state line");
  }
  return TabularMdp(n_states, n_actions, std::move(probs), std::move(rewards), initial, discount, std::move(terminals));
}

inline TabularMdp load_tabular_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_tabular_mdp(in);
}

inline void write_tabular_mdp(std::ostream& out, const TabularMdp& mdp) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << mdp.n_states() << ' ' << mdp.n_actions() << ' ' << mdp.discount() << ' ' << mdp.initial_state() << '\n';
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      out << s << ' ' << a << ' ' << mdp.reward(s, a);
      for (double p : mdp.next_state_probs(s, a)) out << ' ' << p;
      out << '\n';
    }
  }
  bool first = true;
  for (std::size_t t : mdp.terminal_states()) {
    out << (first ? "" : " ") << t;
    first = false;
  }
  out << '\n';
}

}  // namespace gridrl
