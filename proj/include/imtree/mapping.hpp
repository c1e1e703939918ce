#pragma once

// Prefix-free bit-to-SAP codebooks, the Huffman depth algorithm, and the
// projection of relaxed SAP probabilities onto binary-tree-feasible ones.

#include "imtree/tree_core.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace imtree {

using Bit = std::uint8_t;

struct CodebookEntry {
  int sap = 0;       // 0-based
  std::string code;  // '0'/'1' characters, root to leaf
  bool operator==(const CodebookEntry&) const = default;
};

class Codebook {
 public:
  // Throws std::invalid_argument unless the codewords form a complete
  // prefix-free code and every SAP appears at most once.
  Codebook(int num_saps, std::vector<CodebookEntry> entries);

  int num_saps() const { return num_saps_; }
  const std::vector<CodebookEntry>& entries() const { return entries_; }
  std::vector<int> dropped_saps() const;
  bool is_active(int sap) const;
  const std::string& codeword(int sap) const;
  DyadicProbabilityVector probabilities() const;

  // Walks one edge of the code tree. Node 0 is the root; returns the next
  // node, or -(sap + 1) when a leaf is reached.
  int step(int node, Bit bit) const;
  bool root_is_leaf() const { return trie_.size() == 1; }

  // {"num_saps": C, "entries": [{"sap": i, "code": "01"}], "dropped": [...]}
  // with 1-based SAP indices.
  std::string to_json() const;
  static Codebook from_json(std::string_view text);

 private:
  struct TrieNode {
    int child[2] = {-1, -1};
    int sap = -1;
  };
  int num_saps_ = 0;
  std::vector<CodebookEntry> entries_;
  std::vector<int> code_index_;  // sap -> entry index or -1
  std::vector<TrieNode> trie_;
};

// leaf_saps[j] is the SAP placed on the j-th leaf in left-to-right order.
Codebook codebook_from_tree(const OrderedTree& tree, std::span<const int> leaf_saps, int num_saps);
// Canonical tree for the vector's profile; SAPs fill leaves of matching depth
// in ascending index order.
Codebook codebook_from_probabilities(const DyadicProbabilityVector& probs);

struct EncodeResult {
  std::vector<int> saps;
  std::vector<Bit> residue;  // trailing bits that did not reach a leaf
};

EncodeResult encode(std::span<const Bit> bits, const Codebook& codebook);
std::vector<Bit> decode(std::span<const int> saps, const Codebook& codebook);

struct HuffmanResult {
  std::vector<int> depths;  // aligned with the input order
};

// Deterministic Huffman: always merges the two lightest nodes, ties broken by
// creation order (inputs are created first, in input order).
HuffmanResult huffman(std::span<const double> probs);

enum class DistanceMetric { euclidean, kl, tv };

DistanceMetric parse_metric(std::string_view name);
std::string_view metric_name(DistanceMetric metric);

// dist(candidate, reference): squared Euclidean, KL(candidate || reference)
// with 0 ln 0 = 0 and +inf where the reference is zero, or max absolute gap.
double distance(std::span<const double> candidate, std::span<const double> reference,
                DistanceMetric metric);

struct ProjectionCandidate {
  int k = 0;  // candidate keeps the C - k + 1 largest relaxed probabilities
  DyadicProbabilityVector vector;
  double distance = 0.0;
};

struct ProjectionResult {
  DyadicProbabilityVector best;
  int best_k = 0;
  std::vector<ProjectionCandidate> candidates;
};

// Huffman-based projection: one candidate per truncation level k = 1..C,
// winner by the chosen distance. Ties go to the candidate with more nonzero
// entries, then to the lower k.
ProjectionResult project_to_feasible(std::span<const double> relaxed, DistanceMetric metric);

}  // namespace imtree
