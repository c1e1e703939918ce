#include "imtree/tree_core.hpp"

#include "imtree/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace imtree {

namespace {

BigInt factorial(int n) {
  BigInt out = 1;
  for (int k = 2; k <= n; ++k) out *= k;
  return out;
}

BigInt binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt out = 1;
  for (int j = 1; j <= k; ++j) {
    out *= n - k + j;
    out /= j;
  }
  return out;
}

bool kraft_complete(std::span<const int> counts_by_depth) {
  // counts_by_depth[q] = number of leaves at depth q (q = 0 allowed).
  if (counts_by_depth.empty()) return false;
  const int d = static_cast<int>(counts_by_depth.size()) - 1;
  BigInt total = 0;
  for (int q = 0; q <= d; ++q) {
    if (counts_by_depth[q] < 0) return false;
    total += BigInt(counts_by_depth[q]) << (d - q);
  }
  return total == (BigInt(1) << d);
}

// Number of ordered depth sequences of `remaining` leaves that complete a
// code when `open` nodes are available at the current level. Equivalently the
// sum over leaf-level profiles of the multinomial assignment counts.
class OrderedDepthCounter {
 public:
  BigInt count(int open, int remaining) {
    if (remaining == 0) return open == 0 ? 1 : 0;
    if (open == 0 || open > remaining) return 0;
    const auto key = std::make_pair(open, remaining);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    BigInt total = 0;
    for (int here = 0; here <= open; ++here) {
      const int next_open = 2 * (open - here);
      total += binomial(remaining, here) * count(next_open, remaining - here);
    }
    memo_.emplace(key, total);
    return total;
  }

 private:
  std::map<std::pair<int, int>, BigInt> memo_;
};

void check_internal_nodes(int v) {
  if (v < 1) throw std::invalid_argument("reduced tree sets require at least one internal node");
}

}  // namespace

// ---------------------------------------------------------------------------
// TreeProfile

int TreeProfile::leaves() const {
  if (leaf_counts.empty()) return 1;
  return std::accumulate(leaf_counts.begin(), leaf_counts.end(), 0);
}

bool TreeProfile::satisfies_kraft() const {
  std::vector<int> by_depth{leaf_counts.empty() ? 1 : 0};
  by_depth.insert(by_depth.end(), leaf_counts.begin(), leaf_counts.end());
  return kraft_complete(by_depth);
}

std::string TreeProfile::to_string() const {
  std::string out;
  for (std::size_t q = 0; q < leaf_counts.size(); ++q) {
    if (q) out += ',';
    out += std::to_string(leaf_counts[q]);
  }
  return out;
}

TreeProfile TreeProfile::parse(std::string_view text) {
  TreeProfile profile;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto field = text.substr(0, comma);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size() || value < 0) {
      throw std::invalid_argument("malformed profile field '" + std::string(field) + "'");
    }
    profile.leaf_counts.push_back(value);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (!profile.leaf_counts.empty() && !profile.satisfies_kraft()) {
    throw std::invalid_argument("profile violates the Kraft equality: " + profile.to_string());
  }
  return profile;
}

// ---------------------------------------------------------------------------
// OrderedTree

OrderedTree OrderedTree::single_leaf() {
  OrderedTree t;
  t.nodes_.push_back({});
  return t;
}

OrderedTree OrderedTree::protograph() {
  OrderedTree t = single_leaf();
  t.grow_leftmost_leaf_at(0);
  return t;
}

OrderedTree OrderedTree::from_profile(const TreeProfile& profile) {
  if (!profile.satisfies_kraft()) {
    throw std::invalid_argument("profile violates the Kraft equality: " + profile.to_string());
  }
  OrderedTree t = single_leaf();
  std::vector<int> level{0};
  for (int q = 1; q <= profile.depth(); ++q) {
    const int leaves_above = q >= 2 ? profile.leaf_counts[q - 2] : 0;
    const int internals = static_cast<int>(level.size()) - leaves_above;
    std::vector<int> next;
    next.reserve(2 * internals);
    for (int j = 0; j < internals; ++j) {
      const int parent = level[j];
      const int left = t.node_count();
      t.nodes_.push_back({});
      t.nodes_.push_back({});
      t.nodes_[parent].left = left;
      t.nodes_[parent].right = left + 1;
      next.push_back(left);
      next.push_back(left + 1);
    }
    level = std::move(next);
  }
  return t;
}

OrderedTree OrderedTree::parse(std::string_view parens) {
  OrderedTree t;
  std::size_t pos = 0;
  // Recursive descent; returns the node index of the parsed subtree.
  auto parse_node = [&](auto&& self) -> int {
    if (pos >= parens.size()) throw std::invalid_argument("truncated tree string");
    const int index = static_cast<int>(t.nodes_.size());
    t.nodes_.push_back({});
    const char c = parens[pos++];
    if (c == '.') return index;
    if (c != '(') throw std::invalid_argument("unexpected character in tree string");
    const int left = self(self);
    const int right = self(self);
    if (pos >= parens.size() || parens[pos++] != ')') {
      throw std::invalid_argument("unbalanced tree string");
    }
    t.nodes_[index].left = left;
    t.nodes_[index].right = right;
    return index;
  };
  parse_node(parse_node);
  if (pos != parens.size()) throw std::invalid_argument("trailing characters in tree string");
  return t;
}

int OrderedTree::max_depth() const {
  const auto depths = leaf_depths();
  return *std::max_element(depths.begin(), depths.end());
}

TreeProfile OrderedTree::profile() const {
  TreeProfile profile;
  for (int d : leaf_depths()) {
    if (d == 0) continue;
    if (static_cast<int>(profile.leaf_counts.size()) < d) profile.leaf_counts.resize(d, 0);
    ++profile.leaf_counts[d - 1];
  }
  return profile;
}

std::vector<int> OrderedTree::leaf_depths() const {
  std::vector<int> out;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [node, depth] = stack.back();
    stack.pop_back();
    if (nodes_[node].is_leaf()) {
      out.push_back(depth);
    } else {
      stack.emplace_back(nodes_[node].right, depth + 1);
      stack.emplace_back(nodes_[node].left, depth + 1);
    }
  }
  return out;
}

std::vector<std::string> OrderedTree::leaf_codewords() const {
  std::vector<std::string> out;
  std::vector<std::pair<int, std::string>> stack{{0, std::string{}}};
  while (!stack.empty()) {
    auto [node, code] = std::move(stack.back());
    stack.pop_back();
    if (nodes_[node].is_leaf()) {
      out.push_back(std::move(code));
    } else {
      stack.emplace_back(nodes_[node].right, code + '1');
      stack.emplace_back(nodes_[node].left, code + '0');
    }
  }
  return out;
}

void OrderedTree::append_parens(int node, std::string& out) const {
  if (nodes_[node].is_leaf()) {
    out += '.';
    return;
  }
  out += '(';
  append_parens(nodes_[node].left, out);
  append_parens(nodes_[node].right, out);
  out += ')';
}

std::string OrderedTree::to_parens() const {
  std::string out;
  append_parens(0, out);
  return out;
}

bool OrderedTree::grow_leftmost_leaf_at(int depth) {
  // Breadth-first order visits each level left to right.
  std::deque<std::pair<int, int>> queue{{0, 0}};
  while (!queue.empty()) {
    const auto [node, d] = queue.front();
    queue.pop_front();
    if (d > depth) break;
    if (nodes_[node].is_leaf()) {
      if (d == depth) {
        const int left = node_count();
        nodes_.push_back({});
        nodes_.push_back({});
        nodes_[node].left = left;
        nodes_[node].right = left + 1;
        return true;
      }
      continue;
    }
    queue.emplace_back(nodes_[node].left, d + 1);
    queue.emplace_back(nodes_[node].right, d + 1);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Reduced sets

std::string ReducedTreeSet::to_json() const {
  std::string out = "[";
  for (std::size_t i = 0; i < trees.size(); ++i) {
    if (i) out += ',';
    out += "{\"profile\":\"" + trees[i].profile.to_string() + "\",\"tree\":\"" +
           trees[i].tree.to_parens() + "\"}";
  }
  out += ']';
  return out;
}

std::vector<ReducedTreeSet> construct_reduced_sets(int v_max) {
  check_internal_nodes(v_max);
  std::vector<ReducedTreeSet> sets;
  sets.reserve(v_max);

  ReducedTreeSet first;
  first.internal_nodes = 1;
  const auto proto = OrderedTree::protograph();
  first.trees.push_back({proto.profile(), proto});
  sets.push_back(std::move(first));

  for (int k = 2; k <= v_max; ++k) {
    ReducedTreeSet next;
    next.internal_nodes = k;
    for (const auto& [profile, tree] : sets.back().trees) {
      const int lowest = profile.depth();
      // Protograph on the left-most leaf of the lowest level.
      OrderedTree deeper = tree;
      deeper.grow_leftmost_leaf_at(lowest);
      next.trees.push_back({deeper.profile(), std::move(deeper)});
      // ... and on the left-most leaf of the next-to-lowest level, if any.
      OrderedTree wider = tree;
      if (wider.grow_leftmost_leaf_at(lowest - 1)) {
        next.trees.push_back({wider.profile(), std::move(wider)});
      }
    }
    std::sort(next.trees.begin(), next.trees.end(),
              [](const ReducedTree& a, const ReducedTree& b) { return a.profile < b.profile; });
    sets.push_back(std::move(next));
  }
  return sets;
}

ReducedTreeSet construct_reduced_set(int v) {
  check_internal_nodes(v);
  auto sets = construct_reduced_sets(v);
  return std::move(sets.back());
}

// ---------------------------------------------------------------------------
// Counting

BigInt catalan(int v) {
  if (v < 0) throw std::invalid_argument("catalan requires v >= 0");
  return binomial(2 * v, v) / (v + 1);
}

BigInt loose_bound(int v) {
  check_internal_nodes(v);
  return BigInt(1) << (v - 1);
}

std::vector<BigInt> tight_bound_recurrence(int v_max) {
  check_internal_nodes(v_max);
  std::vector<BigInt> bound(v_max + 1, 0);
  bound[1] = 1;
  for (int v = 2; v <= v_max; ++v) {
    const bool power_of_two = (v & (v - 1)) == 0;
    BigInt value = 2 * bound[v - 1] - (power_of_two ? 1 : 0);
    // floor(log2(v - 1)) via bit width.
    const int top = std::bit_width(static_cast<unsigned>(v - 1)) - 1;
    for (int q = 2; q <= top; ++q) value -= bound[v - (1 << q)];
    bound[v] = value;
  }
  return bound;
}

BigInt assignment_count(const TreeProfile& profile, int num_saps) {
  if (!profile.satisfies_kraft()) {
    throw std::invalid_argument("profile violates the Kraft equality: " + profile.to_string());
  }
  const int leaves = profile.leaves();
  if (num_saps < leaves) {
    throw std::invalid_argument("tree has more leaves than available SAPs");
  }
  BigInt out = factorial(leaves);
  for (int n : profile.leaf_counts) out /= factorial(n);
  return out;
}

// ---------------------------------------------------------------------------
// Dyadic vectors

bool is_complete_dyadic(std::span<const std::int8_t> exponents) {
  int top = -1;
  for (auto e : exponents) {
    if (e < DyadicProbabilityVector::kZero) return false;
    top = std::max<int>(top, e);
  }
  if (top < 0) return false;
  if (top <= 62) {
    std::uint64_t total = 0;
    for (auto e : exponents) {
      if (e != DyadicProbabilityVector::kZero) total += std::uint64_t{1} << (top - e);
      if (total > (std::uint64_t{1} << top)) return false;
    }
    return total == (std::uint64_t{1} << top);
  }
  BigInt total = 0;
  for (auto e : exponents) {
    if (e != DyadicProbabilityVector::kZero) total += BigInt(1) << (top - e);
  }
  return total == (BigInt(1) << top);
}

DyadicProbabilityVector::DyadicProbabilityVector(std::vector<std::int8_t> exponents)
    : exponents_(std::move(exponents)) {
  if (!is_complete_dyadic(exponents_)) {
    throw std::invalid_argument("dyadic exponents do not sum to one");
  }
}

DyadicProbabilityVector DyadicProbabilityVector::from_depths(std::span<const int> depths) {
  std::vector<std::int8_t> exps;
  exps.reserve(depths.size());
  for (int d : depths) {
    if (d < kZero || d > 127) throw std::invalid_argument("depth out of range");
    exps.push_back(static_cast<std::int8_t>(d));
  }
  return DyadicProbabilityVector(std::move(exps));
}

DyadicProbabilityVector DyadicProbabilityVector::one_hot(int size, int index) {
  if (index < 0 || index >= size) throw std::out_of_range("one-hot index out of range");
  std::vector<std::int8_t> exps(size, kZero);
  exps[index] = 0;
  return DyadicProbabilityVector(std::move(exps));
}

double DyadicProbabilityVector::probability(int i) const {
  const auto e = exponents_.at(i);
  return e == kZero ? 0.0 : std::ldexp(1.0, -e);
}

std::vector<double> DyadicProbabilityVector::to_doubles() const {
  std::vector<double> out(exponents_.size());
  for (int i = 0; i < size(); ++i) out[i] = probability(i);
  return out;
}

int DyadicProbabilityVector::support_size() const {
  return static_cast<int>(std::count_if(exponents_.begin(), exponents_.end(),
                                        [](std::int8_t e) { return e != kZero; }));
}

TreeProfile DyadicProbabilityVector::profile() const {
  TreeProfile profile;
  for (auto e : exponents_) {
    if (e <= 0) continue;
    if (static_cast<int>(profile.leaf_counts.size()) < e) profile.leaf_counts.resize(e, 0);
    ++profile.leaf_counts[e - 1];
  }
  return profile;
}

std::string DyadicProbabilityVector::to_string() const {
  std::string out;
  for (int i = 0; i < size(); ++i) {
    if (i) out += ',';
    const auto e = exponents_[i];
    if (e == kZero) {
      out += '0';
    } else if (e == 0) {
      out += '1';
    } else {
      out += "1/" + (BigInt(1) << e).str();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feasible set

BigInt feasible_layer_size(int num_saps, int v) {
  if (v < 0 || v >= num_saps) return 0;
  if (v == 0) return num_saps;
  OrderedDepthCounter counter;
  return binomial(num_saps, v + 1) * counter.count(2, v + 1);
}

BigInt feasible_set_size(int num_saps) {
  BigInt total = 0;
  for (int v = 0; v < num_saps; ++v) total += feasible_layer_size(num_saps, v);
  return total;
}

namespace {

void check_feasible_request(int num_saps, const BigInt& size, std::size_t max_vectors) {
  if (num_saps < 2 || num_saps > kMaxFeasibleSaps) {
    throw std::invalid_argument("feasible sets are supported for 2 <= C <= 28");
  }
  if (size > max_vectors) {
    throw CapacityError("feasible set for C=" + std::to_string(num_saps) + " holds " +
                        size.str() + " vectors, above the limit of " +
                        std::to_string(max_vectors));
  }
}

void append_layer(int num_saps, int v, std::vector<DyadicProbabilityVector>& out) {
  if (v == 0) {
    for (int i = 0; i < num_saps; ++i) out.push_back(DyadicProbabilityVector::one_hot(num_saps, i));
    return;
  }
  const int m = v + 1;
  const auto set = construct_reduced_set(v);
  for (const auto& tree : set.trees) {
    std::vector<int> base_depths;
    for (int q = 1; q <= tree.profile.depth(); ++q) {
      base_depths.insert(base_depths.end(), tree.profile.leaf_counts[q - 1], q);
    }
    // Active SAP subsets in lexicographic order via a selection mask.
    std::vector<char> mask(num_saps, 0);
    std::fill(mask.begin(), mask.begin() + m, 1);
    do {
      std::vector<int> depths = base_depths;
      do {
        std::vector<std::int8_t> exps(num_saps, DyadicProbabilityVector::kZero);
        int next = 0;
        for (int i = 0; i < num_saps; ++i) {
          if (mask[i]) exps[i] = static_cast<std::int8_t>(depths[next++]);
        }
        out.emplace_back(std::move(exps));
      } while (std::next_permutation(depths.begin(), depths.end()));
    } while (std::prev_permutation(mask.begin(), mask.end()));
  }
}

}  // namespace

std::vector<DyadicProbabilityVector> build_feasible_layer(int num_saps, int v,
                                                          std::size_t max_vectors) {
  if (v < 0 || v >= num_saps) throw std::invalid_argument("layer index must satisfy 0 <= v < C");
  const auto size = feasible_layer_size(num_saps, v);
  check_feasible_request(num_saps, size, max_vectors);
  std::vector<DyadicProbabilityVector> out;
  out.reserve(static_cast<std::size_t>(size));
  append_layer(num_saps, v, out);
  return out;
}

std::vector<DyadicProbabilityVector> build_feasible_set(int num_saps, std::size_t max_vectors) {
  if (num_saps < 2 || num_saps > kMaxFeasibleSaps) {
    throw std::invalid_argument("feasible sets are supported for 2 <= C <= 28");
  }
  const auto size = feasible_set_size(num_saps);
  check_feasible_request(num_saps, size, max_vectors);
  std::vector<DyadicProbabilityVector> out;
  out.reserve(static_cast<std::size_t>(size));
  for (int v = 0; v < num_saps; ++v) append_layer(num_saps, v, out);
  return out;
}

}  // namespace imtree
