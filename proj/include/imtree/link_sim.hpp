#pragma once

// Link-level block error rate simulation: bits are mapped to SAPs through a
// prefix-free codebook, active subcarriers carry finite-constellation symbols,
// and the receiver runs exhaustive ML detection over (SAP, symbol tuple).

#include "imtree/channel_model.hpp"
#include "imtree/mapping.hpp"
#include "imtree/rate_opt.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace imtree {

struct Constellation {
  std::string name;
  std::vector<Complex> points;  // index = Gray-labelled bit pattern
  int bits_per_symbol = 1;

  static Constellation bpsk();
  static Constellation qpsk();
  static Constellation from_name(std::string_view name);
  int size() const { return static_cast<int>(points.size()); }
};

// y_l = sqrt(g_l) e^{j theta_l} sqrt(rho_l) s_l + z_l on active subcarriers and
// z_l elsewhere. `rng == nullptr` gives the noiseless observation.
std::vector<Complex> transmit_block(int sap, std::span<const Complex> symbols, const SapCatalog& catalog,
                                    const PowerMatrix& rho, const ChannelState& state,
                                    RngStream* rng);

// Every noiseless received vector G x for the given SAPs and all M^K symbol
// tuples, in enumeration order (SAP-major, then symbol tuple in base M).
class CandidateSet {
 public:
  CandidateSet(const SapCatalog& catalog, const PowerMatrix& rho, const ChannelState& state,
               const Constellation& constellation, std::span<const int> saps);

  std::size_t size() const { return saps_.size(); }
  int n() const { return n_; }
  int k() const { return k_; }
  int sap(std::size_t index) const { return saps_[index]; }
  std::span<const int> symbols(std::size_t index) const;
  std::span<const Complex> signal(std::size_t index) const;
  // Index of the candidate for (sap, symbol tuple); throws if absent.
  std::size_t index_of(int sap, std::span<const int> symbols) const;

 private:
  int n_ = 0;
  int k_ = 0;
  int m_ = 0;
  std::vector<int> saps_;
  std::vector<int> symbols_;
  std::vector<Complex> signals_;
  std::vector<int> first_of_sap_;  // sap -> first candidate index or -1
};

struct Detection {
  std::size_t index = 0;
  int sap = 0;
};

// argmin ||y - G x||^2 over the candidate set; the first minimizer wins.
Detection ml_detect(std::span<const Complex> y, const CandidateSet& candidates);

enum class CodebookMode { condition_one, condition_two, benchmark };
CodebookMode parse_codebook_mode(std::string_view name);
std::string_view codebook_mode_name(CodebookMode mode);

struct WilsonInterval {
  double low = 0.0;
  double high = 1.0;
};
WilsonInterval wilson_interval(std::int64_t successes, std::int64_t trials, double z = 1.959963984540054);

struct BlerOptions {
  std::int64_t target_errors = 1000;
  std::int64_t max_blocks = 10'000'000;
  std::uint64_t seed = 1;
  int threads = 1;
  // Rate optimization used to pick p for the two tree conditions.
  std::int64_t design_samples_per_sap = 4000;
  std::int64_t design_final_samples = 1000;
};

struct BlerPoint {
  double snr_db = 0.0;
  std::int64_t blocks = 0;
  std::int64_t block_errors = 0;
  double bler = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  std::uint64_t seed = 0;
  bool partial = false;  // block cap reached before the error target
  DyadicProbabilityVector design;
  std::int64_t index_bits = 0;
  std::int64_t symbol_bits = 0;
  std::int64_t recovered_bits = 0;  // bits decoded from error-free blocks
};

struct BlerExperiment {
  SystemConfig config;
  std::vector<double> gains;
  std::vector<double> phases;  // empty: drawn uniformly once from the seed
  Constellation constellation = Constellation::bpsk();
  CodebookMode mode = CodebookMode::condition_one;
};

// Uniform power, noise variance 1 and P = N * SNR per pattern.
ChannelState bler_channel_state(const BlerExperiment& experiment, double snr_db);

// Codebook used at one SNR point.
Codebook design_codebook(const BlerExperiment& experiment, const ChannelState& state,
                         const BlerOptions& options);

std::vector<BlerPoint> run_bler(const BlerExperiment& experiment, std::span<const double> snr_db,
                                const BlerOptions& options = {});

// Phases drawn for an experiment when none are given.
std::vector<double> draw_phases(int n, std::uint64_t seed);

}  // namespace imtree
