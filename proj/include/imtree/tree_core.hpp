#pragma once

// Reduced sets of full binary trees, their counting bounds, and the feasible
// set of dyadic SAP probability vectors.

#include <boost/multiprecision/cpp_int.hpp>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace imtree {

using BigInt = boost::multiprecision::cpp_int;

// Leaf-level profile of a full binary tree: leaf_counts[q - 1] is the number
// of leaves at depth q. The single-leaf tree (no internal nodes) has an empty
// profile.
struct TreeProfile {
  std::vector<int> leaf_counts;

  int leaves() const;
  int internal_nodes() const { return leaves() - 1; }
  int depth() const { return static_cast<int>(leaf_counts.size()); }

  // Exact check of sum_q n_q 2^-q == 1 (the single-leaf tree counts as 2^0).
  bool satisfies_kraft() const;

  // Comma separated leaf counts, e.g. "1,1,2". Empty string for the single leaf.
  std::string to_string() const;
  static TreeProfile parse(std::string_view text);

  auto operator<=>(const TreeProfile&) const = default;
};

// Ordered full binary tree stored as a node arena (node 0 is the root).
// Parenthesis form: a leaf is "." and an internal node is "(" left right ")".
class OrderedTree {
 public:
  static OrderedTree single_leaf();
  static OrderedTree protograph();
  // Left-packed canonical tree: at every level internal nodes precede leaves.
  static OrderedTree from_profile(const TreeProfile& profile);
  static OrderedTree parse(std::string_view parens);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int internal_nodes() const { return (node_count() - 1) / 2; }
  int leaf_count() const { return internal_nodes() + 1; }
  int max_depth() const;

  TreeProfile profile() const;
  // Leaf depths and root-to-leaf codewords (left edge '0', right edge '1'),
  // both in left-to-right leaf order.
  std::vector<int> leaf_depths() const;
  std::vector<std::string> leaf_codewords() const;
  std::string to_parens() const;

  // Attaches the protograph to the left-most leaf at `depth`. Returns false
  // (tree unchanged) when that level holds no leaf.
  bool grow_leftmost_leaf_at(int depth);

  bool operator==(const OrderedTree&) const = default;

 private:
  struct Node {
    int left = -1;
    int right = -1;
    bool operator==(const Node&) const = default;
    bool is_leaf() const { return left < 0; }
  };
  std::vector<Node> nodes_;

  void append_parens(int node, std::string& out) const;
};

struct ReducedTree {
  TreeProfile profile;
  OrderedTree tree;
};

struct ReducedTreeSet {
  int internal_nodes = 0;
  std::vector<ReducedTree> trees;  // sorted by profile

  std::size_t size() const { return trees.size(); }
  // JSON array of {"profile": "1,1,2", "tree": "(((..).).)"} objects.
  std::string to_json() const;
};

// Recursive protograph construction of the reduced set with v internal nodes.
ReducedTreeSet construct_reduced_set(int v);
// Every reduced set for v = 1..v_max, sharing the recursion. Element k holds
// the set for v = k + 1.
std::vector<ReducedTreeSet> construct_reduced_sets(int v_max);

BigInt catalan(int v);
BigInt loose_bound(int v);
// Element v holds B_v for v = 1..v_max; element 0 is unused and zero.
std::vector<BigInt> tight_bound_recurrence(int v_max);
// Multinomial (v+1)! / (n_1! ... n_d!) of probability-distinct leaf assignments.
BigInt assignment_count(const TreeProfile& profile, int num_saps);

// Probability vector with entries 0 or 2^-q, held as exponents.
class DyadicProbabilityVector {
 public:
  static constexpr std::int8_t kZero = -1;

  DyadicProbabilityVector() = default;
  // Throws std::invalid_argument unless the exponents describe a complete code.
  explicit DyadicProbabilityVector(std::vector<std::int8_t> exponents);
  static DyadicProbabilityVector from_depths(std::span<const int> depths);
  static DyadicProbabilityVector one_hot(int size, int index);

  int size() const { return static_cast<int>(exponents_.size()); }
  std::int8_t exponent(int i) const { return exponents_[i]; }
  const std::vector<std::int8_t>& exponents() const { return exponents_; }
  double probability(int i) const;
  std::vector<double> to_doubles() const;
  int support_size() const;
  TreeProfile profile() const;
  std::string to_string() const;  // e.g. "1/2,1/4,1/4,0"

  auto operator<=>(const DyadicProbabilityVector&) const = default;

 private:
  std::vector<std::int8_t> exponents_;
};

// Exact exponent check; also usable on unvalidated data.
bool is_complete_dyadic(std::span<const std::int8_t> exponents);

inline constexpr int kMaxFeasibleSaps = 28;
inline constexpr std::size_t kDefaultMaxFeasibleVectors = 4'000'000;

// |P_v| = C(C, v+1) * sum_t (v+1)! / prod n_tq!
BigInt feasible_layer_size(int num_saps, int v);
BigInt feasible_set_size(int num_saps);

// Every distinct vector of P_v (v = 0 gives the C one-hot vectors).
std::vector<DyadicProbabilityVector> build_feasible_layer(
    int num_saps, int v, std::size_t max_vectors = kDefaultMaxFeasibleVectors);
// P = union of P_v for v = 0..C-1. Rejects C outside [2, 28] and throws
// CapacityError when |P| exceeds max_vectors (each vector costs roughly
// C + 32 bytes).
std::vector<DyadicProbabilityVector> build_feasible_set(
    int num_saps, std::size_t max_vectors = kDefaultMaxFeasibleVectors);

}  // namespace imtree
