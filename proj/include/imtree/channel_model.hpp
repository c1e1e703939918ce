#pragma once

// Single-group OFDM-IM frequency-domain channel: N subcarriers, K active per
// subcarrier activation pattern (SAP), conditionally Gaussian inputs.
// SAP and subcarrier indices are 0-based in the C++ API; file formats use
// 1-based indices.

#include "imtree/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace imtree {

struct SystemConfig {
  int n = 0;  // subcarriers per group
  int k = 0;  // active subcarriers per pattern
  bool allow_full_activation = false;  // K == N (conventional OFDM)

  // Validates 1 <= K < N (or K == N with allow_full_activation).
  static SystemConfig make(int n, int k, bool allow_full_activation = false);
  int num_saps() const;
};

class SapCatalog {
 public:
  explicit SapCatalog(const SystemConfig& config);

  const SystemConfig& config() const { return config_; }
  int size() const { return static_cast<int>(patterns_.size()); }
  // Active subcarriers of pattern i, ascending.
  const std::vector<int>& pattern(int i) const { return patterns_.at(i); }
  bool is_active(int sap, int subcarrier) const;
  // "{1,2}" style label with 1-based subcarriers.
  std::string label(int sap) const;

 private:
  SystemConfig config_;
  std::vector<std::vector<int>> patterns_;
  std::vector<std::vector<char>> active_;
};

struct ChannelState {
  std::vector<double> gains;   // linear power gains g_l
  std::vector<double> phases;  // radians; empty means all zero
  double noise_var = 1.0;
  double power_budget = 1.0;   // per pattern

  void validate(int n) const;
  double phase(int l) const { return phases.empty() ? 0.0 : phases[l]; }
  // Average transmit SNR per subcarrier, P / (N sigma^2), in dB.
  double snr_db() const;
  static ChannelState from_snr_db(std::vector<double> gains, double snr_db,
                                  double power_budget = 1.0);
};

double noise_var_from_snr_db(double snr_db, int n, double power_budget);

std::vector<double> exp_decay_gains(int n, double eta);

// Loads {"gains": [...], "phases": [...], "noise_var": x | "snr_db": s,
// "power_budget": P} from JSON, or a CSV with a "gain[,phase]" header.
// For CSV input the noise variance comes from the fallback arguments.
ChannelState load_channel_state(const std::filesystem::path& path, double fallback_snr_db = 10.0,
                                double fallback_power_budget = 1.0);

class PowerMatrix {
 public:
  PowerMatrix() = default;
  PowerMatrix(int num_saps, int n) : rho_(Eigen::MatrixXd::Zero(num_saps, n)) {}
  explicit PowerMatrix(Eigen::MatrixXd rho) : rho_(std::move(rho)) {}

  int num_saps() const { return static_cast<int>(rho_.rows()); }
  int n() const { return static_cast<int>(rho_.cols()); }
  double operator()(int sap, int l) const { return rho_(sap, l); }
  double& operator()(int sap, int l) { return rho_(sap, l); }
  const Eigen::MatrixXd& matrix() const { return rho_; }

  // Zero power off-pattern, nonnegative, row sums within the budget (+1e-9).
  void validate(const SapCatalog& catalog, double power_budget) const;

 private:
  Eigen::MatrixXd rho_;
};

// Every active subcarrier of every pattern gets P / K.
PowerMatrix uniform_powers(const SapCatalog& catalog, double power_budget);

// Gaussian mixture output model with per-pattern diagonal covariances
// xi_li = g_l rho_li + sigma^2 on active subcarriers and sigma^2 elsewhere.
// Densities are in nats.
class MixtureModel {
 public:
  MixtureModel(const SapCatalog& catalog, const PowerMatrix& rho, const ChannelState& state);

  int n() const { return n_; }
  int num_saps() const { return static_cast<int>(xi_.rows()); }
  double noise_var() const { return noise_var_; }
  const Eigen::MatrixXd& variances() const { return xi_; }
  const SapCatalog& catalog() const { return catalog_; }
  const PowerMatrix& powers() const { return rho_; }
  const ChannelState& state() const { return state_; }

  double conditional_log_density(std::span<const Complex> y, int sap) const;
  // log sum_i p_i f(y | i) via log-sum-exp; p_i == 0 terms are skipped.
  double mixture_log_density(std::span<const Complex> y, std::span<const double> p) const;
  // Same as above but reuses a precomputed |y_l|^2 vector.
  double mixture_log_density_from_power(const Eigen::VectorXd& y_power,
                                        std::span<const double> log_p) const;

  // sum_{l in S_i} ln(1 + g_l rho_li / sigma^2): the capacity of pattern i alone.
  double pattern_capacity(int sap) const;
  // h(Z) = N ln(pi e sigma^2).
  double noise_entropy() const;

 private:
  SapCatalog catalog_;
  PowerMatrix rho_;
  ChannelState state_;
  int n_;
  double noise_var_;
  Eigen::MatrixXd xi_;
  Eigen::MatrixXd inv_xi_;
  Eigen::VectorXd log_norm_;  // -sum_l ln(pi xi_li)
};

// Free-function forms of the density evaluations.
double conditional_log_density(std::span<const Complex> y, int sap, const SapCatalog& catalog,
                               const PowerMatrix& rho, const ChannelState& state);
double mixture_log_density(std::span<const Complex> y, std::span<const double> p,
                           const SapCatalog& catalog, const PowerMatrix& rho,
                           const ChannelState& state);

struct OutputSample {
  int sap = 0;
  std::vector<Complex> y;
};

// U ~ p, then y_l = sqrt(g_l) e^{j theta_l} x_l + z_l with x_l ~ CN(0, rho_lU) on
// active subcarriers and y_l = z_l elsewhere.
OutputSample sample_output(std::span<const double> p, const MixtureModel& model, RngStream& rng);
void sample_output_into(std::span<const double> p, const MixtureModel& model, RngStream& rng,
                        OutputSample& out);

// Sum-to-one and sign checks shared by the optimization modules.
void validate_probability_vector(std::span<const double> p, int expected_size);

}  // namespace imtree
