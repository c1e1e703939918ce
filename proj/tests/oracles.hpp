#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the library code paths they are checking.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// Every ordered full binary tree with v internal nodes in parenthesis form.
inline std::vector<std::string> all_ordered_trees(int v) {
  static std::map<int, std::vector<std::string>> memo;
  if (auto it = memo.find(v); it != memo.end()) return it->second;
  std::vector<std::string> out;
  if (v == 0) {
    out.push_back(".");
  } else {
    for (int a = 0; a < v; ++a) {
      for (const auto& left : all_ordered_trees(a)) {
        for (const auto& right : all_ordered_trees(v - 1 - a)) out.push_back("(" + left + right + ")");
      }
    }
  }
  memo[v] = out;
  return out;
}

// Leaf counts per depth (index q-1 holds depth q), read straight off the string.
inline std::vector<int> profile_of(const std::string& parens) {
  std::vector<int> counts;
  int depth = 0;
  for (char c : parens) {
    if (c == '(') {
      ++depth;
    } else if (c == ')') {
      --depth;
    } else if (depth > 0) {
      if (static_cast<int>(counts.size()) < depth) counts.resize(depth, 0);
      ++counts[depth - 1];
    }
  }
  return counts;
}

inline std::set<std::vector<int>> brute_force_profiles(int v) {
  std::set<std::vector<int>> out;
  for (const auto& t : all_ordered_trees(v)) out.insert(profile_of(t));
  return out;
}

// Number of leaf-depth profiles with `leaves` leaves: walk level by level,
// `open` nodes at the current level, each either a leaf or split in two.
inline std::uint64_t profile_count(int open, int leaves) {
  static std::map<std::pair<int, int>, std::uint64_t> memo;
  if (open > leaves) return 0;
  if (auto it = memo.find({open, leaves}); it != memo.end()) return it->second;
  std::uint64_t total = 0;
  for (int a = 0; a <= open; ++a) {
    if (a == open) {
      total += (leaves == a) ? 1 : 0;
    } else {
      total += profile_count(2 * (open - a), leaves - a);
    }
  }
  memo[{open, leaves}] = total;
  return total;
}

inline std::uint64_t reduced_tree_count(int v) { return profile_count(2, v + 1); }

inline std::uint64_t catalan(int v) {
  std::uint64_t c = 1;
  for (int i = 0; i < v; ++i) c = c * 2 * (2 * i + 1) / (i + 2);
  return c;
}

// Every exponent vector over {absent, 0, 1, ..., C-1} whose entries sum to
// one exactly. -1 marks an absent entry.
inline std::set<std::vector<int>> dyadic_compositions(int c) {
  std::set<std::vector<int>> out;
  std::vector<int> e(c, -1);
  const std::uint64_t one = std::uint64_t{1} << (c - 1);
  const int base = c + 1;
  std::uint64_t total_codes = 1;
  for (int i = 0; i < c; ++i) total_codes *= base;
  for (std::uint64_t code = 0; code < total_codes; ++code) {
    std::uint64_t rest = code;
    std::uint64_t sum = 0;
    for (int i = 0; i < c; ++i) {
      e[i] = static_cast<int>(rest % base) - 1;
      rest /= base;
      if (e[i] >= 0) sum += one >> e[i];
    }
    if (sum == one) out.insert(e);
  }
  return out;
}

// Water level by bisection.
inline std::vector<double> waterfill_bisection(const std::vector<double>& gains, double noise_var, double budget) {
  auto used = [&](double level) {
    double s = 0.0;
    for (double g : gains) {
      if (g > 0.0) s += std::max(0.0, level - noise_var / g);
    }
    return s;
  };
  double lo = 0.0;
  double hi = budget;
  for (double g : gains) {
    if (g > 0.0) hi = std::max(hi, budget + noise_var / g);
  }
  for (int it = 0; it < 400 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (used(mid) < budget ? lo : hi) = mid;
  }
  const double level = 0.5 * (lo + hi);
  std::vector<double> out(gains.size(), 0.0);
  for (std::size_t l = 0; l < gains.size(); ++l) {
    if (gains[l] > 0.0) out[l] = std::max(0.0, level - noise_var / gains[l]);
  }
  return out;
}

inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace oracle
