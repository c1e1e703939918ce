#include "imtree/mapping.hpp"
#include "imtree/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

using namespace imtree;

namespace {

Codebook six_leaf_codebook() {
  const auto tree = OrderedTree::from_profile(TreeProfile::parse("0,2,4"));
  const std::vector<int> saps = {0, 1, 2, 3, 4, 5};
  return codebook_from_tree(tree, saps, 6);
}

std::vector<Bit> bits_of(const std::string& s) {
  std::vector<Bit> out;
  for (char c : s) out.push_back(static_cast<Bit>(c - '0'));
  return out;
}

}  // namespace

TEST_CASE("codebook from the six-leaf example tree") {
  const auto book = six_leaf_codebook();
  CHECK(book.codeword(1) == "001");
  CHECK(book.codeword(4) == "10");
  const std::vector<int> saps = {1, 4};
  CHECK(decode(saps, book) == bits_of("00110"));
  const auto enc = encode(bits_of("00110"), book);
  CHECK(enc.saps == saps);
  CHECK(enc.residue.empty());
  CHECK(book.probabilities().to_string() == "1/8,1/8,1/8,1/8,1/4,1/4");
}

TEST_CASE("encode keeps an incomplete tail as residue") {
  const auto book = six_leaf_codebook();
  const auto enc = encode(bits_of("1101"), book);
  CHECK(enc.saps == std::vector<int>{5});
  CHECK(enc.residue == bits_of("01"));
}

TEST_CASE("encode/decode round trip on random streams") {
  const auto book = codebook_from_probabilities(DyadicProbabilityVector({2, 1, DyadicProbabilityVector::kZero, 3, 3}));
  RngStream rng(7, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Bit> bits(rng.uniform_int(60));
    for (auto& b : bits) b = static_cast<Bit>(rng.bit());
    const auto enc = encode(bits, book);
    auto back = decode(enc.saps, book);
    back.insert(back.end(), enc.residue.begin(), enc.residue.end());
    CHECK(back == bits);
    for (int s : enc.saps) CHECK(s != 2);
  }
}

TEST_CASE("single-SAP codebook carries no index bits") {
  const auto book = codebook_from_probabilities(DyadicProbabilityVector::one_hot(3, 2));
  CHECK(book.root_is_leaf());
  CHECK(book.codeword(2).empty());
  CHECK(book.dropped_saps() == std::vector<int>{0, 1});
  const auto enc = encode(bits_of("101"), book);
  CHECK(enc.saps.empty());
  CHECK(enc.residue.size() == 3);
}

TEST_CASE("invalid codebooks are rejected") {
  CHECK_THROWS(Codebook(3, {{0, "0"}, {1, "01"}, {2, "1"}}));  // prefix
  CHECK_THROWS(Codebook(3, {{0, "00"}, {1, "1"}}));            // incomplete
  CHECK_THROWS(Codebook(3, {{0, "0"}, {0, "1"}}));             // SAP twice
  CHECK_THROWS(Codebook(2, {{0, "0"}, {2, "1"}}));             // out of range
  CHECK_THROWS(Codebook(2, {{0, "0"}, {1, "2"}}));             // bad symbol
}

TEST_CASE("codebook JSON round trip") {
  const auto book = codebook_from_probabilities(DyadicProbabilityVector({1, DyadicProbabilityVector::kZero, 2, 2}));
  const auto again = Codebook::from_json(book.to_json());
  CHECK(again.entries() == book.entries());
  CHECK(again.dropped_saps() == std::vector<int>{1});
}

TEST_CASE("Huffman depths") {
  const std::vector<double> p = {0.51, 0.26, 0.18, 0.05};
  CHECK(huffman(p).depths == std::vector<int>{1, 2, 3, 3});
  const std::vector<double> one = {1.0};
  CHECK(huffman(one).depths == std::vector<int>{0});
  const std::vector<double> with_zero = {0.5, 0.5, 0.0};
  CHECK_THROWS(huffman(with_zero));
  const std::vector<double> short_sum = {0.5, 0.4};
  CHECK_THROWS(huffman(short_sum));
}

TEST_CASE("Huffman attains the minimal expected length of full-support complete codes") {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 60; ++trial) {
    const int c = 2 + rng.uniform_int(4);
    std::vector<double> p(c);
    for (auto& v : p) v = 0.05 + rng.uniform();
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) v /= total;
    const auto depths = huffman(p).depths;
    double kraft = 0.0;
    double length = 0.0;
    for (int i = 0; i < c; ++i) {
      kraft += std::ldexp(1.0, -depths[i]);
      length += p[i] * depths[i];
    }
    CHECK(kraft == doctest::Approx(1.0).epsilon(1e-15));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : oracle::dyadic_compositions(c)) {
      if (std::count(e.begin(), e.end(), -1) > 0) continue;
      double len = 0.0;
      for (int i = 0; i < c; ++i) len += p[i] * e[i];
      best = std::min(best, len);
    }
    CHECK(length == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("projection golden values for (0.51, 0.26, 0.18, 0.05)") {
  const std::vector<double> p = {0.51, 0.26, 0.18, 0.05};
  const auto eu = project_to_feasible(p, DistanceMetric::euclidean);
  const auto tv = project_to_feasible(p, DistanceMetric::tv);
  const auto kl = project_to_feasible(p, DistanceMetric::kl);
  CHECK(eu.best.to_doubles() == std::vector<double>{0.5, 0.25, 0.25, 0.0});
  CHECK(tv.best.to_doubles() == std::vector<double>{0.5, 0.25, 0.25, 0.0});
  CHECK(kl.best.to_doubles() == std::vector<double>{0.5, 0.25, 0.125, 0.125});
  REQUIRE(eu.candidates.size() == 4);
  CHECK(eu.candidates[0].vector.to_string() == "1/2,1/4,1/8,1/8");
  CHECK(eu.candidates[1].vector.to_string() == "1/2,1/4,1/4,0");
  CHECK(eu.candidates[2].vector.to_string() == "1/2,1/2,0,0");
  CHECK(eu.candidates[3].vector.to_string() == "1,0,0,0");
  CHECK(eu.candidates[0].distance == doctest::Approx(0.00885));
  CHECK(eu.candidates[1].distance == doctest::Approx(0.0076));
  CHECK(tv.candidates[0].distance == doctest::Approx(0.075));
  CHECK(tv.candidates[1].distance == doctest::Approx(0.07));
  // Candidate with mass where the reference has none: infinite divergence.
  CHECK(std::isinf(distance(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}, DistanceMetric::kl)));
}

TEST_CASE("dyadic inputs project onto themselves") {
  for (auto metric : {DistanceMetric::euclidean, DistanceMetric::kl, DistanceMetric::tv}) {
    const std::vector<double> p = {0.25, 0.5, 0.0, 0.125, 0.125};
    const auto r = project_to_feasible(p, metric);
    CHECK(r.best.to_doubles() == p);
    CHECK(distance(r.best.to_doubles(), p, metric) == 0.0);
  }
}

TEST_CASE("uniform over six SAPs projects into the feasible set") {
  const std::vector<double> p(6, 1.0 / 6.0);
  const auto feasible = build_feasible_set(6);
  const std::set<DyadicProbabilityVector> members(feasible.begin(), feasible.end());
  for (auto metric : {DistanceMetric::euclidean, DistanceMetric::kl, DistanceMetric::tv}) {
    const auto r = project_to_feasible(p, metric);
    CHECK(members.count(r.best) == 1);
    for (const auto& cand : r.candidates) CHECK(members.count(cand.vector) == 1);
  }
}

TEST_CASE("projection input validation") {
  CHECK_THROWS(project_to_feasible(std::vector<double>{0.5, 0.4}, DistanceMetric::euclidean));
  CHECK_THROWS(project_to_feasible(std::vector<double>{1.5, -0.5}, DistanceMetric::euclidean));
  CHECK_THROWS(parse_metric("l1"));
}
