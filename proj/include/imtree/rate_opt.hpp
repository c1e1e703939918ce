#pragma once

// Mutual information estimation, closed-form bounds and asymptotic optima for
// SAP probabilities and powers, and solvers for the relaxed and the
// binary-tree-constrained rate maximization problems. All rates are in nats.

#include "imtree/channel_model.hpp"
#include "imtree/mapping.hpp"
#include "imtree/tree_core.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace imtree {

struct MiEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::int64_t kMinMonteCarloSamples = 100;

// I(p, rho, sigma^2) = h(Y) - h(Z) estimated from `samples` draws of the
// output. Deterministic in (seed, samples) regardless of `threads`.
MiEstimate mi_monte_carlo(std::span<const double> p, const MixtureModel& model, std::int64_t samples,
                          std::uint64_t seed, int threads = 1);

// -ln(sum_ij p_i p_j / det(Xi_i + Xi_j)) - N ln(e sigma^2).
double jensen_lower_bound(std::span<const double> p, const MixtureModel& model);

struct JensenMatrices {
  Eigen::MatrixXd a;         // a_ij = 1 / det(Xi_i + Xi_j)
  Eigen::MatrixXd b;         // inverse of a (empty when singular)
  double condition = 0.0;    // 2-norm condition estimate of a
  bool singular = false;
};

inline constexpr double kSingularCondition = 1e10;

JensenMatrices jensen_matrices(const MixtureModel& model);

struct JensenSolution {
  std::vector<double> p;
  double condition = 0.0;
  // True when the clipped closed form left an entry at zero and the support
  // was re-solved so that the result is the exact simplex minimizer of p'Ap.
  bool refined = false;
};

// p_i = (sum_j b_ij)^+ / sum_i (sum_j b_ij)^+. Throws SingularMatrixError when
// the condition estimate exceeds kSingularCondition.
JensenSolution jensen_optimal_probs(const MixtureModel& model);

// q_i proportional to prod_{l in S_i} (g_l rho_li + sigma^2).
std::vector<double> high_snr_probs(const MixtureModel& model);

// mu = ln sum_i prod_{l in S_i} (1 + g_l rho_li / sigma^2).
double upper_bound_mu(const MixtureModel& model);

struct LowSnrSolution {
  std::vector<double> p;  // one-hot
  int best_sap = 0;       // lowest index among ties
};
LowSnrSolution low_snr_probs(const MixtureModel& model);

// rho_l = (level - sigma^2 / g_l)^+ with the level set so powers sum to the
// budget. Zero-gain entries get zero power.
std::vector<double> waterfill(std::span<const double> gains, double noise_var, double budget);

// Independent waterfilling over each pattern's subcarriers.
PowerMatrix allocate_powers_per_sap(const ChannelState& state, const SapCatalog& catalog);

// Monte Carlo mutual information with one fixed sample set per SAP (stratified
// over U, common random numbers across every p and rho it is asked about).
// Only |y_l|^2 enters the densities, so samples are kept as unit exponential
// energies and rescaled by the current variances.
class StratifiedMi {
 public:
  StratifiedMi(const SapCatalog& catalog, const ChannelState& state, const PowerMatrix& rho,
               std::int64_t samples_per_sap, std::uint64_t seed);

  int num_saps() const { return c_; }
  std::int64_t samples_per_sap() const { return m_; }
  const PowerMatrix& powers() const { return rho_; }

  void set_powers(const PowerMatrix& rho);
  void set_sap_powers(int sap, std::span<const double> row);

  double value(std::span<const double> p) const;
  // Returns the value; `grad` receives the exact gradient of this estimator.
  double value_and_gradient(std::span<const double> p, std::span<double> grad) const;
  double std_error(std::span<const double> p) const;

 private:
  void refresh_row_block(int sap);
  void refresh_column(int sap);
  double row_log_density(std::int64_t row, int k) const;

  SapCatalog catalog_;
  ChannelState state_;
  PowerMatrix rho_;
  int n_;
  int c_;
  std::int64_t m_;
  Eigen::MatrixXd xi_;
  Eigen::MatrixXd inv_xi_;
  Eigen::VectorXd log_norm_;
  std::vector<double> energy_;    // (sap, sample, l) unit exponential draws
  std::vector<double> loglik_;    // (sap, sample) x k: ln f(y_{sap,sample} | k)
  double noise_entropy_;
};

// Projected gradient ascent of the stratified estimator over the simplex.
struct SimplexAscentOptions {
  int max_iterations = 500;
  double tolerance = 1e-7;
};
std::vector<double> maximize_over_simplex(const StratifiedMi& objective, std::vector<double> p0,
                                          const SimplexAscentOptions& options = {});

// Euclidean projection onto the probability simplex.
std::vector<double> project_onto_simplex(std::span<const double> x);

struct BcdOptions {
  std::int64_t samples_per_sap = 20000;
  std::int64_t final_samples = 100000;
  std::uint64_t seed = 1;
  double tolerance = 1e-3;  // nats per full cycle
  int max_cycles = 30;
  bool optimize_powers = true;
  std::optional<std::vector<double>> initial_p;   // default uniform
  std::optional<PowerMatrix> initial_powers;      // default per-SAP waterfilling
  int threads = 1;
};

struct BcdResult {
  std::vector<double> p;
  PowerMatrix rho;
  MiEstimate mi;             // fresh estimate of the final pair
  double objective = 0.0;    // stratified estimate the ascent maximized
  int cycles = 0;
  bool converged = false;
  std::vector<double> history;  // objective after each cycle
};

// Alternates probability ascent (concave in p) and a power pattern search
// seeded at per-SAP waterfilling. Limited to N <= 4.
BcdResult bcd_optimize(const ChannelState& state, const SystemConfig& config,
                       const BcdOptions& options = {});

enum class ObjectiveMode { automatic, high_snr, low_snr, monte_carlo };
ObjectiveMode parse_objective_mode(std::string_view name);
std::string_view objective_mode_name(ObjectiveMode mode);

enum class LeafRestriction { any, all_saps };

inline constexpr int kMaxEnumerativeSaps = 15;
inline constexpr double kHighSnrThresholdDb = 10.0;
// `automatic` screens by Monte Carlo when the candidate set is at most this
// large, otherwise it uses the closed form chosen by kHighSnrThresholdDb.
inline constexpr std::size_t kAutoMonteCarloVectors = 5000;

struct ConstrainedOptions {
  ObjectiveMode mode = ObjectiveMode::automatic;
  LeafRestriction leaves = LeafRestriction::any;
  std::int64_t screening_samples_per_sap = 10000;  // monte_carlo objective
  std::int64_t final_samples = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::optional<PowerMatrix> powers;  // default per-SAP waterfilling
  std::size_t max_vectors = 200'000;
};

struct ConstrainedSolution {
  DyadicProbabilityVector p;
  PowerMatrix rho;
  MiEstimate mi;
  ObjectiveMode mode_used = ObjectiveMode::automatic;
  double objective = 0.0;  // value of the selection objective at p
  std::size_t candidates_evaluated = 0;
  bool exhaustive = true;  // false when the rank-matched profile search was used
};

// Best member of the feasible set under per-SAP waterfilling powers.
ConstrainedSolution solve_constrained_enumerative(const ChannelState& state, const SystemConfig& config,
                                                  const ConstrainedOptions& options = {});

enum class RelaxedSource { high_snr, jensen };

struct ProjectedSolution {
  DyadicProbabilityVector p;
  PowerMatrix rho;
  MiEstimate mi;
  std::vector<double> relaxed;
  int best_k = 0;
  // Jensen matrix singular: the better projection of the high- and low-SNR
  // optima was used instead.
  bool fell_back = false;
};

ProjectedSolution solve_constrained_projected(const ChannelState& state, const SystemConfig& config,
                                              DistanceMetric metric,
                                              RelaxedSource source = RelaxedSource::high_snr,
                                              std::int64_t samples = 100000, std::uint64_t seed = 1,
                                              int threads = 1);

// Classic OFDM-IM: the first 2^floor(log2 C) SAPs in lexicographic order with
// equal probability and uniform power.
struct BenchmarkDesign {
  std::vector<double> p;
  PowerMatrix rho;
};
BenchmarkDesign benchmark_design(const SapCatalog& catalog, double power_budget);

}  // namespace imtree
