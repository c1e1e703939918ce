#include "imtree/channel_model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace imtree {

SystemConfig SystemConfig::make(int n, int k, bool allow_full_activation) {
  if (n < 1 || k < 1 || k > n) throw std::invalid_argument("system requires 1 <= K <= N");
  if (k == n && !allow_full_activation) {
    throw std::invalid_argument("K == N is conventional OFDM; enable full activation explicitly");
  }
  if (n > 30) throw std::invalid_argument("at most 30 subcarriers per group are supported");
  return SystemConfig{n, k, allow_full_activation};
}

int SystemConfig::num_saps() const {
  std::int64_t c = 1;
  for (int j = 1; j <= k; ++j) c = c * (n - k + j) / j;
  return static_cast<int>(c);
}

SapCatalog::SapCatalog(const SystemConfig& config) : config_(config) {
  // Lexicographic K-subsets of {0..N-1}.
  std::vector<int> current(config.k);
  for (int j = 0; j < config.k; ++j) current[j] = j;
  while (true) {
    patterns_.push_back(current);
    int j = config.k - 1;
    while (j >= 0 && current[j] == config.n - config.k + j) --j;
    if (j < 0) break;
    ++current[j];
    for (int t = j + 1; t < config.k; ++t) current[t] = current[t - 1] + 1;
  }
  active_.assign(patterns_.size(), std::vector<char>(config.n, 0));
  for (std::size_t i = 0; i < patterns_.size(); ++i) {
    for (int l : patterns_[i]) active_[i][l] = 1;
  }
}

bool SapCatalog::is_active(int sap, int subcarrier) const {
  return active_.at(sap).at(subcarrier) != 0;
}

std::string SapCatalog::label(int sap) const {
  std::string out = "{";
  const auto& pat = pattern(sap);
  for (std::size_t j = 0; j < pat.size(); ++j) {
    if (j) out += ',';
    out += std::to_string(pat[j] + 1);
  }
  return out + "}";
}

void ChannelState::validate(int n) const {
  if (static_cast<int>(gains.size()) != n) throw std::invalid_argument("gain vector length must equal N");
  if (!phases.empty() && static_cast<int>(phases.size()) != n) {
    throw std::invalid_argument("phase vector length must equal N");
  }
  for (double g : gains) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw std::invalid_argument("gains must be finite and nonnegative");
  }
  if (!(noise_var > 0.0)) throw std::invalid_argument("noise variance must be positive");
  if (!(power_budget > 0.0)) throw std::invalid_argument("power budget must be positive");
}

double noise_var_from_snr_db(double snr_db, int n, double power_budget) {
  return power_budget / (n * std::pow(10.0, snr_db / 10.0));
}

double ChannelState::snr_db() const {
  return 10.0 * std::log10(power_budget / (static_cast<double>(gains.size()) * noise_var));
}

ChannelState ChannelState::from_snr_db(std::vector<double> gains, double snr_db, double power_budget) {
  ChannelState state;
  const int n = static_cast<int>(gains.size());
  state.gains = std::move(gains);
  state.power_budget = power_budget;
  state.noise_var = noise_var_from_snr_db(snr_db, n, power_budget);
  state.validate(n);
  return state;
}

std::vector<double> exp_decay_gains(int n, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in (0, 1]");
  std::vector<double> g(n);
  for (int l = 0; l < n; ++l) g[l] = std::pow(eta, l);
  return g;
}

ChannelState load_channel_state(const std::filesystem::path& path, double fallback_snr_db,
                                double fallback_power_budget) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open channel file " + path.string());
  ChannelState state;
  state.power_budget = fallback_power_budget;
  if (path.extension() == ".json") {
    const auto doc = nlohmann::json::parse(in);
    state.gains = doc.at("gains").get<std::vector<double>>();
    if (doc.contains("phases")) state.phases = doc["phases"].get<std::vector<double>>();
    if (doc.contains("power_budget")) state.power_budget = doc["power_budget"].get<double>();
    const int n = static_cast<int>(state.gains.size());
    if (doc.contains("noise_var")) {
      state.noise_var = doc["noise_var"].get<double>();
    } else {
      const double snr = doc.contains("snr_db") ? doc["snr_db"].get<double>() : fallback_snr_db;
      state.noise_var = noise_var_from_snr_db(snr, n, state.power_budget);
    }
  } else {
    std::string line;
    std::getline(in, line);
    const bool with_phase = line.find("phase") != std::string::npos;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream fields(line);
      double g = 0.0;
      if (!(fields >> g)) throw std::runtime_error("malformed channel CSV row: " + line);
      state.gains.push_back(g);
      if (with_phase) {
        double theta = 0.0;
        if (!(fields >> theta)) throw std::runtime_error("missing phase in channel CSV row: " + line);
        state.phases.push_back(theta);
      }
    }
    state.noise_var = noise_var_from_snr_db(fallback_snr_db, static_cast<int>(state.gains.size()),
                                            state.power_budget);
  }
  state.validate(static_cast<int>(state.gains.size()));
  return state;
}

void PowerMatrix::validate(const SapCatalog& catalog, double power_budget) const {
  if (num_saps() != catalog.size() || n() != catalog.config().n) {
    throw std::invalid_argument("power matrix shape does not match the SAP catalog");
  }
  for (int i = 0; i < num_saps(); ++i) {
    double total = 0.0;
    for (int l = 0; l < n(); ++l) {
      const double r = rho_(i, l);
      if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("powers must be finite and nonnegative");
      if (!catalog.is_active(i, l) && r != 0.0) {
        throw std::invalid_argument("power assigned to an inactive subcarrier");
      }
      total += r;
    }
    if (total > power_budget + 1e-9) throw std::invalid_argument("pattern power exceeds the budget");
  }
}

PowerMatrix uniform_powers(const SapCatalog& catalog, double power_budget) {
  PowerMatrix rho(catalog.size(), catalog.config().n);
  const double share = power_budget / catalog.config().k;
  for (int i = 0; i < catalog.size(); ++i) {
    for (int l : catalog.pattern(i)) rho(i, l) = share;
  }
  return rho;
}

MixtureModel::MixtureModel(const SapCatalog& catalog, const PowerMatrix& rho, const ChannelState& state)
    : catalog_(catalog), rho_(rho), state_(state), n_(catalog.config().n), noise_var_(state.noise_var) {
  state.validate(n_);
  rho.validate(catalog, state.power_budget);
  const int c = catalog.size();
  xi_ = Eigen::MatrixXd::Constant(c, n_, noise_var_);
  for (int i = 0; i < c; ++i) {
    for (int l : catalog.pattern(i)) xi_(i, l) = state.gains[l] * rho(i, l) + noise_var_;
  }
  inv_xi_ = xi_.cwiseInverse();
  log_norm_ = -(xi_.array() * std::numbers::pi).log().rowwise().sum();
}

double MixtureModel::conditional_log_density(std::span<const Complex> y, int sap) const {
  if (static_cast<int>(y.size()) != n_) throw std::invalid_argument("observation length must equal N");
  if (sap < 0 || sap >= num_saps()) throw std::out_of_range("SAP index out of range");
  double quad = 0.0;
  for (int l = 0; l < n_; ++l) quad += std::norm(y[l]) * inv_xi_(sap, l);
  return log_norm_(sap) - quad;
}

double MixtureModel::mixture_log_density_from_power(const Eigen::VectorXd& y_power,
                                                    std::span<const double> log_p) const {
  const int c = num_saps();
  double best = -std::numeric_limits<double>::infinity();
  // Two passes: find the max term, then accumulate exp(term - max).
  thread_local std::vector<double> terms;
  terms.resize(c);
  for (int i = 0; i < c; ++i) {
    if (log_p[i] == -std::numeric_limits<double>::infinity()) {
      terms[i] = log_p[i];
      continue;
    }
    terms[i] = log_p[i] + log_norm_(i) - inv_xi_.row(i).dot(y_power);
    best = std::max(best, terms[i]);
  }
  if (best == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("mixture weights are all zero");
  }
  double acc = 0.0;
  for (int i = 0; i < c; ++i) {
    if (terms[i] != -std::numeric_limits<double>::infinity()) acc += std::exp(terms[i] - best);
  }
  return best + std::log(acc);
}

double MixtureModel::mixture_log_density(std::span<const Complex> y, std::span<const double> p) const {
  if (static_cast<int>(y.size()) != n_) throw std::invalid_argument("observation length must equal N");
  if (static_cast<int>(p.size()) != num_saps()) throw std::invalid_argument("probability length must equal C");
  Eigen::VectorXd y_power(n_);
  for (int l = 0; l < n_; ++l) y_power(l) = std::norm(y[l]);
  std::vector<double> log_p(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0) throw std::invalid_argument("negative mixture weight");
    log_p[i] = p[i] > 0.0 ? std::log(p[i]) : -std::numeric_limits<double>::infinity();
  }
  return mixture_log_density_from_power(y_power, log_p);
}

double MixtureModel::pattern_capacity(int sap) const {
  double total = 0.0;
  for (int l : catalog_.pattern(sap)) total += std::log1p(state_.gains[l] * rho_(sap, l) / noise_var_);
  return total;
}

double MixtureModel::noise_entropy() const {
  return n_ * std::log(std::numbers::pi * std::numbers::e * noise_var_);
}

double conditional_log_density(std::span<const Complex> y, int sap, const SapCatalog& catalog,
                               const PowerMatrix& rho, const ChannelState& state) {
  return MixtureModel(catalog, rho, state).conditional_log_density(y, sap);
}

double mixture_log_density(std::span<const Complex> y, std::span<const double> p,
                           const SapCatalog& catalog, const PowerMatrix& rho,
                           const ChannelState& state) {
  return MixtureModel(catalog, rho, state).mixture_log_density(y, p);
}

void sample_output_into(std::span<const double> p, const MixtureModel& model, RngStream& rng,
                        OutputSample& out) {
  const int sap = rng.categorical(p);
  const auto& state = model.state();
  const int n = model.n();
  out.sap = sap;
  out.y.resize(n);
  for (int l = 0; l < n; ++l) {
    Complex y = rng.complex_normal(model.noise_var());
    if (model.catalog().is_active(sap, l)) {
      const Complex x = rng.complex_normal(model.powers()(sap, l));
      y += std::polar(std::sqrt(state.gains[l]), state.phase(l)) * x;
    }
    out.y[l] = y;
  }
}

OutputSample sample_output(std::span<const double> p, const MixtureModel& model, RngStream& rng) {
  validate_probability_vector(p, model.num_saps());
  OutputSample out;
  sample_output_into(p, model, rng, out);
  return out;
}

void validate_probability_vector(std::span<const double> p, int expected_size) {
  if (static_cast<int>(p.size()) != expected_size) {
    throw std::invalid_argument("probability vector has the wrong length");
  }
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("probabilities must be finite and nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("probabilities must sum to one");
}

}  // namespace imtree
