#include "imtree/link_sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace imtree {

Constellation Constellation::bpsk() {
  return {"bpsk", {Complex(1.0, 0.0), Complex(-1.0, 0.0)}, 1};
}

Constellation Constellation::qpsk() {
  // Bit 1 (MSB) picks the in-phase sign, bit 0 the quadrature sign.
  const double a = std::numbers::sqrt2 / 2.0;
  return {"qpsk", {Complex(a, a), Complex(a, -a), Complex(-a, a), Complex(-a, -a)}, 2};
}

Constellation Constellation::from_name(std::string_view name) {
  if (name == "bpsk") return bpsk();
  if (name == "qpsk") return qpsk();
  throw std::invalid_argument("unknown constellation '" + std::string(name) + "'");
}

std::vector<Complex> transmit_block(int sap, std::span<const Complex> symbols, const SapCatalog& catalog,
                                    const PowerMatrix& rho, const ChannelState& state,
                                    RngStream* rng) {
  const int n = catalog.config().n;
  const auto& pat = catalog.pattern(sap);
  if (symbols.size() != pat.size()) throw std::invalid_argument("one symbol per active subcarrier is required");
  std::vector<Complex> y(n, Complex(0.0, 0.0));
  for (std::size_t j = 0; j < pat.size(); ++j) {
    const int l = pat[j];
    y[l] = std::polar(std::sqrt(state.gains[l] * rho(sap, l)), state.phase(l)) * symbols[j];
  }
  if (rng) {
    for (int l = 0; l < n; ++l) y[l] += rng->complex_normal(state.noise_var);
  }
  return y;
}

CandidateSet::CandidateSet(const SapCatalog& catalog, const PowerMatrix& rho, const ChannelState& state,
                           const Constellation& constellation, std::span<const int> saps)
    : n_(catalog.config().n), k_(catalog.config().k), m_(constellation.size()),
      first_of_sap_(catalog.size(), -1) {
  if (saps.empty()) throw std::invalid_argument("candidate set needs at least one SAP");
  std::int64_t tuples = 1;
  for (int j = 0; j < k_; ++j) tuples *= m_;
  std::vector<int> digits(k_);
  std::vector<Complex> syms(k_);
  for (int sap : saps) {
    if (first_of_sap_.at(sap) >= 0) throw std::invalid_argument("SAP listed twice in the candidate set");
    first_of_sap_[sap] = static_cast<int>(saps_.size());
    for (std::int64_t t = 0; t < tuples; ++t) {
      std::int64_t rest = t;
      for (int j = k_ - 1; j >= 0; --j) {
        digits[j] = static_cast<int>(rest % m_);
        rest /= m_;
      }
      for (int j = 0; j < k_; ++j) syms[j] = constellation.points[digits[j]];
      const auto x = transmit_block(sap, syms, catalog, rho, state, nullptr);
      saps_.push_back(sap);
      symbols_.insert(symbols_.end(), digits.begin(), digits.end());
      signals_.insert(signals_.end(), x.begin(), x.end());
    }
  }
}

std::span<const int> CandidateSet::symbols(std::size_t index) const {
  return {symbols_.data() + index * k_, static_cast<std::size_t>(k_)};
}

std::span<const Complex> CandidateSet::signal(std::size_t index) const {
  return {signals_.data() + index * n_, static_cast<std::size_t>(n_)};
}

std::size_t CandidateSet::index_of(int sap, std::span<const int> symbols) const {
  if (sap < 0 || sap >= static_cast<int>(first_of_sap_.size()) || first_of_sap_[sap] < 0) {
    throw std::invalid_argument("SAP is not in the candidate set");
  }
  if (static_cast<int>(symbols.size()) != k_) throw std::invalid_argument("symbol tuple must have K entries");
  std::size_t offset = 0;
  for (int s : symbols) offset = offset * m_ + static_cast<std::size_t>(s);
  return static_cast<std::size_t>(first_of_sap_[sap]) + offset;
}

Detection ml_detect(std::span<const Complex> y, const CandidateSet& candidates) {
  if (candidates.size() == 0) throw std::invalid_argument("empty candidate set");
  if (static_cast<int>(y.size()) != candidates.n()) throw std::invalid_argument("observation length must equal N");
  Detection best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto x = candidates.signal(c);
    double dist = 0.0;
    for (std::size_t l = 0; l < y.size(); ++l) dist += std::norm(y[l] - x[l]);
    if (dist < best_dist) {
      best_dist = dist;
      best.index = c;
    }
  }
  best.sap = candidates.sap(best.index);
  return best;
}

CodebookMode parse_codebook_mode(std::string_view name) {
  if (name == "condition_one") return CodebookMode::condition_one;
  if (name == "condition_two") return CodebookMode::condition_two;
  if (name == "benchmark") return CodebookMode::benchmark;
  throw std::invalid_argument("unknown codebook mode '" + std::string(name) + "'");
}

std::string_view codebook_mode_name(CodebookMode mode) {
  switch (mode) {
    case CodebookMode::condition_one: return "condition_one";
    case CodebookMode::condition_two: return "condition_two";
    case CodebookMode::benchmark: return "benchmark";
  }
  return "unknown";
}

WilsonInterval wilson_interval(std::int64_t successes, std::int64_t trials, double z) {
  if (trials <= 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double center = (phat + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::vector<double> draw_phases(int n, std::uint64_t seed) {
  RngStream rng(seed, std::uint64_t{1} << 62);
  std::vector<double> out(n);
  for (double& theta : out) theta = 2.0 * std::numbers::pi * rng.uniform();
  return out;
}

ChannelState bler_channel_state(const BlerExperiment& experiment, double snr_db) {
  ChannelState state;
  const int n = experiment.config.n;
  state.gains = experiment.gains;
  state.phases = experiment.phases;
  state.noise_var = 1.0;
  state.power_budget = n * std::pow(10.0, snr_db / 10.0);
  state.validate(n);
  return state;
}

Codebook design_codebook(const BlerExperiment& experiment, const ChannelState& state,
                         const BlerOptions& options) {
  const SapCatalog catalog(experiment.config);
  const int c = catalog.size();
  if (c == 1) return codebook_from_probabilities(DyadicProbabilityVector::one_hot(1, 0));
  if (experiment.mode == CodebookMode::benchmark) {
    const int used = static_cast<int>(std::bit_floor(static_cast<unsigned>(c)));
    const int depth = std::countr_zero(static_cast<unsigned>(used));
    std::vector<std::int8_t> exps(c, DyadicProbabilityVector::kZero);
    for (int i = 0; i < used; ++i) exps[i] = static_cast<std::int8_t>(depth);
    return codebook_from_probabilities(DyadicProbabilityVector(std::move(exps)));
  }
  ConstrainedOptions opts;
  opts.mode = ObjectiveMode::monte_carlo;
  opts.leaves = experiment.mode == CodebookMode::condition_two ? LeafRestriction::all_saps : LeafRestriction::any;
  opts.screening_samples_per_sap = options.design_samples_per_sap;
  opts.final_samples = options.design_final_samples;
  opts.seed = options.seed;
  opts.threads = options.threads;
  opts.powers = uniform_powers(catalog, state.power_budget);
  return codebook_from_probabilities(solve_constrained_enumerative(state, experiment.config, opts).p);
}

namespace {

struct ChunkTally {
  std::int64_t blocks = 0;
  std::int64_t errors = 0;
  std::int64_t index_bits = 0;
  std::int64_t symbol_bits = 0;
  std::int64_t recovered_bits = 0;
};

}  // namespace

std::vector<BlerPoint> run_bler(const BlerExperiment& experiment, std::span<const double> snr_db,
                                const BlerOptions& options) {
  if (options.target_errors < 1) throw std::invalid_argument("target error count must be positive");
  if (options.max_blocks < 1) throw std::invalid_argument("block cap must be positive");
  BlerExperiment exp = experiment;
  if (exp.phases.empty()) exp.phases = draw_phases(exp.config.n, options.seed);
  const SapCatalog catalog(exp.config);
  const int k = exp.config.k;
  const int m = exp.constellation.size();
  const int bits_per_symbol = exp.constellation.bits_per_symbol;

  std::vector<BlerPoint> points;
  for (std::size_t s = 0; s < snr_db.size(); ++s) {
    const ChannelState state = bler_channel_state(exp, snr_db[s]);
    const PowerMatrix rho = uniform_powers(catalog, state.power_budget);
    const Codebook book = design_codebook(exp, state, options);
    std::vector<int> active;
    for (int i = 0; i < catalog.size(); ++i) {
      if (book.is_active(i)) active.push_back(i);
    }
    const CandidateSet candidates(catalog, rho, state, exp.constellation, active);
    const int single = book.root_is_leaf() ? active.front() : -1;

    auto simulate = [&](std::int64_t chunk, std::int64_t count) {
      RngStream rng(options.seed, (static_cast<std::uint64_t>(s + 1) << 32) | static_cast<std::uint64_t>(chunk));
      ChunkTally tally;
      std::vector<int> digits(k);
      std::vector<Complex> y(exp.config.n);
      for (std::int64_t b = 0; b < count; ++b) {
        int sap = single;
        std::int64_t bits = 0;
        if (sap < 0) {
          int node = 0;
          while (true) {
            const int next = book.step(node, static_cast<Bit>(rng.bit()));
            ++bits;
            if (next < 0) {
              sap = -next - 1;
              break;
            }
            node = next;
          }
        }
        for (int j = 0; j < k; ++j) digits[j] = rng.uniform_int(m);
        const std::size_t sent = candidates.index_of(sap, digits);
        const auto x = candidates.signal(sent);
        for (int l = 0; l < exp.config.n; ++l) y[l] = x[l] + rng.complex_normal(state.noise_var);
        const auto det = ml_detect(y, candidates);
        ++tally.blocks;
        tally.index_bits += bits;
        tally.symbol_bits += static_cast<std::int64_t>(k) * bits_per_symbol;
        if (det.index != sent) {
          ++tally.errors;
        } else {
          tally.recovered_bits += static_cast<std::int64_t>(book.codeword(det.sap).size()) +
                                  static_cast<std::int64_t>(k) * bits_per_symbol;
        }
      }
      return tally;
    };

    BlerPoint point;
    point.snr_db = snr_db[s];
    point.seed = options.seed;
    point.design = book.probabilities();
    const std::int64_t total_chunks = (options.max_blocks + kChunkSize - 1) / kChunkSize;
    const int batch = std::max(1, options.threads);
    bool done = false;
    for (std::int64_t first = 0; first < total_chunks && !done; first += batch) {
      const std::int64_t last = std::min(total_chunks, first + batch);
      std::vector<ChunkTally> tallies(last - first);
      const std::int64_t span_blocks = std::min(options.max_blocks, last * kChunkSize) - first * kChunkSize;
      for_each_chunk(span_blocks, options.threads, [&](std::int64_t local, std::int64_t begin, std::int64_t end) {
        tallies[local] = simulate(first + local, end - begin);
      });
      // Accumulate in chunk order and stop at the first chunk that meets the
      // target, so the result does not depend on the batch size.
      for (const auto& t : tallies) {
        point.blocks += t.blocks;
        point.block_errors += t.errors;
        point.index_bits += t.index_bits;
        point.symbol_bits += t.symbol_bits;
        point.recovered_bits += t.recovered_bits;
        if (point.block_errors >= options.target_errors) {
          done = true;
          break;
        }
      }
    }
    point.partial = point.block_errors < options.target_errors;
    point.bler = static_cast<double>(point.block_errors) / static_cast<double>(point.blocks);
    const auto ci = wilson_interval(point.block_errors, point.blocks);
    point.ci_low = ci.low;
    point.ci_high = ci.high;
    points.push_back(point);
  }
  return points;
}

}  // namespace imtree
