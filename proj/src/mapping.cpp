#include "imtree/mapping.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <tuple>

namespace imtree {

// ---------------------------------------------------------------------------
// Codebook

Codebook::Codebook(int num_saps, std::vector<CodebookEntry> entries)
    : num_saps_(num_saps), entries_(std::move(entries)), code_index_(num_saps, -1) {
  if (num_saps < 1) throw std::invalid_argument("codebook needs at least one SAP");
  if (entries_.empty()) throw std::invalid_argument("codebook needs at least one entry");
  trie_.push_back({});
  for (std::size_t e = 0; e < entries_.size(); ++e) {
    const auto& [sap, code] = entries_[e];
    if (sap < 0 || sap >= num_saps) throw std::invalid_argument("codebook SAP index out of range");
    if (code_index_[sap] >= 0) throw std::invalid_argument("SAP assigned to more than one leaf");
    code_index_[sap] = static_cast<int>(e);
    int node = 0;
    for (char c : code) {
      if (c != '0' && c != '1') throw std::invalid_argument("codewords may contain only 0 and 1");
      if (trie_[node].sap >= 0) throw std::invalid_argument("codewords are not prefix-free");
      const int b = c - '0';
      if (trie_[node].child[b] < 0) {
        trie_[node].child[b] = static_cast<int>(trie_.size());
        trie_.push_back({});
      }
      node = trie_[node].child[b];
    }
    if (trie_[node].sap >= 0 || trie_[node].child[0] >= 0 || trie_[node].child[1] >= 0) {
      throw std::invalid_argument("codewords are not prefix-free");
    }
    trie_[node].sap = sap;
  }
  for (const auto& node : trie_) {
    const bool leaf = node.sap >= 0;
    const bool full = node.child[0] >= 0 && node.child[1] >= 0;
    if (!leaf && !full) throw std::invalid_argument("code is incomplete (Kraft sum below one)");
  }
}

std::vector<int> Codebook::dropped_saps() const {
  std::vector<int> out;
  for (int s = 0; s < num_saps_; ++s) {
    if (code_index_[s] < 0) out.push_back(s);
  }
  return out;
}

bool Codebook::is_active(int sap) const {
  return sap >= 0 && sap < num_saps_ && code_index_[sap] >= 0;
}

const std::string& Codebook::codeword(int sap) const {
  if (!is_active(sap)) throw std::invalid_argument("SAP " + std::to_string(sap) + " is not in the codebook");
  return entries_[code_index_[sap]].code;
}

DyadicProbabilityVector Codebook::probabilities() const {
  std::vector<std::int8_t> exps(num_saps_, DyadicProbabilityVector::kZero);
  for (const auto& [sap, code] : entries_) exps[sap] = static_cast<std::int8_t>(code.size());
  return DyadicProbabilityVector(std::move(exps));
}

int Codebook::step(int node, Bit bit) const {
  const int next = trie_[node].child[bit & 1];
  if (trie_[next].sap >= 0) return -(trie_[next].sap + 1);
  return next;
}

std::string Codebook::to_json() const {
  nlohmann::json doc;
  doc["num_saps"] = num_saps_;
  doc["entries"] = nlohmann::json::array();
  for (const auto& [sap, code] : entries_) doc["entries"].push_back({{"sap", sap + 1}, {"code", code}});
  doc["dropped"] = nlohmann::json::array();
  for (int s : dropped_saps()) doc["dropped"].push_back(s + 1);
  return doc.dump();
}

Codebook Codebook::from_json(std::string_view text) {
  const auto doc = nlohmann::json::parse(text);
  std::vector<CodebookEntry> entries;
  for (const auto& e : doc.at("entries")) {
    entries.push_back({e.at("sap").get<int>() - 1, e.at("code").get<std::string>()});
  }
  Codebook book(doc.at("num_saps").get<int>(), std::move(entries));
  std::vector<int> dropped;
  for (const auto& d : doc.value("dropped", nlohmann::json::array())) dropped.push_back(d.get<int>() - 1);
  if (dropped != book.dropped_saps()) throw std::invalid_argument("dropped list disagrees with the entries");
  return book;
}

Codebook codebook_from_tree(const OrderedTree& tree, std::span<const int> leaf_saps, int num_saps) {
  const auto codes = tree.leaf_codewords();
  if (codes.size() != leaf_saps.size()) {
    throw std::invalid_argument("assignment size does not match the number of leaves");
  }
  std::vector<CodebookEntry> entries;
  entries.reserve(codes.size());
  for (std::size_t j = 0; j < codes.size(); ++j) entries.push_back({leaf_saps[j], codes[j]});
  return Codebook(num_saps, std::move(entries));
}

Codebook codebook_from_probabilities(const DyadicProbabilityVector& probs) {
  const auto tree = OrderedTree::from_profile(probs.profile());
  std::vector<int> leaf_saps;
  std::vector<char> used(probs.size(), 0);
  for (int depth : tree.leaf_depths()) {
    int chosen = -1;
    for (int s = 0; s < probs.size(); ++s) {
      if (!used[s] && probs.exponent(s) == depth) {
        chosen = s;
        break;
      }
    }
    used[chosen] = 1;
    leaf_saps.push_back(chosen);
  }
  return codebook_from_tree(tree, leaf_saps, probs.size());
}

EncodeResult encode(std::span<const Bit> bits, const Codebook& codebook) {
  EncodeResult out;
  if (codebook.root_is_leaf()) {
    // A single-SAP code carries no index bits.
    out.residue.assign(bits.begin(), bits.end());
    return out;
  }
  int node = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const int next = codebook.step(node, bits[i]);
    if (next < 0) {
      out.saps.push_back(-next - 1);
      node = 0;
      start = i + 1;
    } else {
      node = next;
    }
  }
  out.residue.assign(bits.begin() + static_cast<std::ptrdiff_t>(start), bits.end());
  return out;
}

std::vector<Bit> decode(std::span<const int> saps, const Codebook& codebook) {
  std::vector<Bit> out;
  for (int sap : saps) {
    for (char c : codebook.codeword(sap)) out.push_back(static_cast<Bit>(c - '0'));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Huffman

namespace {

std::vector<int> huffman_depths(std::span<const double> weights) {
  const int n = static_cast<int>(weights.size());
  if (n == 1) return {0};
  using Item = std::tuple<double, int>;  // weight, creation index
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  std::vector<int> parent(2 * n - 1, -1);
  for (int i = 0; i < n; ++i) heap.emplace(weights[i], i);
  int next = n;
  while (heap.size() > 1) {
    const auto [wa, a] = heap.top();
    heap.pop();
    const auto [wb, b] = heap.top();
    heap.pop();
    parent[a] = next;
    parent[b] = next;
    heap.emplace(wa + wb, next++);
  }
  std::vector<int> depths(n, 0);
  for (int i = 0; i < n; ++i) {
    for (int node = i; parent[node] >= 0; node = parent[node]) ++depths[i];
  }
  return depths;
}

}  // namespace

HuffmanResult huffman(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("Huffman needs at least one symbol");
  double total = 0.0;
  for (double p : probs) {
    if (!(p > 0.0)) throw std::invalid_argument("Huffman probabilities must be positive");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("Huffman probabilities must sum to one");
  return {huffman_depths(probs)};
}

// ---------------------------------------------------------------------------
// Projection

DistanceMetric parse_metric(std::string_view name) {
  if (name == "euclidean") return DistanceMetric::euclidean;
  if (name == "kl") return DistanceMetric::kl;
  if (name == "tv") return DistanceMetric::tv;
  throw std::invalid_argument("unknown distance metric '" + std::string(name) + "'");
}

std::string_view metric_name(DistanceMetric metric) {
  switch (metric) {
    case DistanceMetric::euclidean: return "euclidean";
    case DistanceMetric::kl: return "kl";
    case DistanceMetric::tv: return "tv";
  }
  return "unknown";
}

double distance(std::span<const double> candidate, std::span<const double> reference,
                DistanceMetric metric) {
  if (candidate.size() != reference.size()) throw std::invalid_argument("distance needs equal lengths");
  double out = 0.0;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    const double a = candidate[i];
    const double b = reference[i];
    switch (metric) {
      case DistanceMetric::euclidean:
        out += (a - b) * (a - b);
        break;
      case DistanceMetric::kl:
        if (a > 0.0) {
          if (b <= 0.0) return std::numeric_limits<double>::infinity();
          out += a * std::log(a / b);
        }
        break;
      case DistanceMetric::tv:
        out = std::max(out, std::abs(a - b));
        break;
    }
  }
  return out;
}

ProjectionResult project_to_feasible(std::span<const double> relaxed, DistanceMetric metric) {
  const int c = static_cast<int>(relaxed.size());
  if (c < 1) throw std::invalid_argument("projection needs a nonempty vector");
  double total = 0.0;
  for (double p : relaxed) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("relaxed probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("relaxed probabilities must sum to one");

  std::vector<int> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return relaxed[a] > relaxed[b]; });

  ProjectionResult result;
  int best = -1;
  for (int k = 1; k <= c; ++k) {
    const int kept = c - k + 1;
    double mass = 0.0;
    for (int j = 0; j < kept; ++j) mass += relaxed[order[j]];
    std::vector<double> weights(kept);
    for (int j = 0; j < kept; ++j) weights[j] = relaxed[order[j]] / mass;
    // Zero relaxed entries are allowed here; they simply end up deepest.
    const auto depths = huffman_depths(weights);
    std::vector<std::int8_t> exps(c, DyadicProbabilityVector::kZero);
    for (int j = 0; j < kept; ++j) exps[order[j]] = static_cast<std::int8_t>(depths[j]);
    DyadicProbabilityVector vec(std::move(exps));
    const auto as_doubles = vec.to_doubles();
    const double d = distance(as_doubles, relaxed, metric);
    result.candidates.push_back({k, std::move(vec), d});

    if (best < 0) {
      best = 0;
      continue;
    }
    const auto& incumbent = result.candidates[best];
    const auto& challenger = result.candidates.back();
    if (challenger.distance < incumbent.distance ||
        (challenger.distance == incumbent.distance &&
         challenger.vector.support_size() > incumbent.vector.support_size())) {
      best = static_cast<int>(result.candidates.size()) - 1;
    }
  }
  result.best = result.candidates[best].vector;
  result.best_k = result.candidates[best].k;
  return result;
}

}  // namespace imtree
