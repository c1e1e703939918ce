#include "imtree/rate_opt.hpp"

#include "imtree/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>

namespace imtree {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> v) {
  double best = kNegInf;
  for (double x : v) best = std::max(best, x);
  if (best == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : v) {
    if (x != kNegInf) acc += std::exp(x - best);
  }
  return best + std::log(acc);
}

std::vector<double> log_probs(std::span<const double> p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > 0.0 ? std::log(p[i]) : kNegInf;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double norm = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - norm);
  return out;
}

// ln a_ij = -sum_l ln(xi_li + xi_lj).
Eigen::MatrixXd jensen_log_matrix(const MixtureModel& model) {
  const auto& xi = model.variances();
  const int c = model.num_saps();
  Eigen::MatrixXd out(c, c);
  for (int i = 0; i < c; ++i) {
    for (int j = i; j < c; ++j) {
      const double v = -(xi.row(i) + xi.row(j)).array().log().sum();
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

struct Welford {
  std::int64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  void merge(const Welford& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double total = static_cast<double>(n + o.n);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.n) / total;
    m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / total;
    n += o.n;
  }
};

// Minimizes p'Ap on the simplex over a shrinking/growing support.
std::vector<double> simplex_qp_active_set(const Eigen::MatrixXd& a, std::vector<int> support) {
  const int c = static_cast<int>(a.rows());
  std::vector<double> best;
  for (int iter = 0; iter < 4 * c + 4; ++iter) {
    const int s = static_cast<int>(support.size());
    Eigen::MatrixXd sub(s, s);
    for (int r = 0; r < s; ++r) {
      for (int q = 0; q < s; ++q) sub(r, q) = a(support[r], support[q]);
    }
    const Eigen::VectorXd x = sub.completeOrthogonalDecomposition().solve(Eigen::VectorXd::Ones(s));
    std::vector<int> keep;
    for (int r = 0; r < s; ++r) {
      if (x(r) > 0.0) keep.push_back(support[r]);
    }
    if (keep.empty()) {
      // Degenerate: fall back to the best single vertex.
      int vertex = 0;
      for (int i = 1; i < c; ++i) {
        if (a(i, i) < a(vertex, vertex)) vertex = i;
      }
      keep = {vertex};
    }
    if (static_cast<int>(keep.size()) < s) {
      support = std::move(keep);
      continue;
    }
    std::vector<double> p(c, 0.0);
    const double total = x.sum();
    for (int r = 0; r < s; ++r) p[support[r]] = x(r) / total;
    best = p;
    Eigen::Map<const Eigen::VectorXd> pv(p.data(), c);
    const Eigen::VectorXd grad = a * pv;
    const double level = pv.dot(grad);
    int add = -1;
    double worst = 0.0;
    for (int i = 0; i < c; ++i) {
      if (p[i] > 0.0) continue;
      const double gap = level - grad(i);
      if (gap > 1e-12 * std::abs(level) && gap > worst) {
        worst = gap;
        add = i;
      }
    }
    if (add < 0) break;
    support.push_back(add);
    std::sort(support.begin(), support.end());
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// Monte Carlo and closed forms

MiEstimate mi_monte_carlo(std::span<const double> p, const MixtureModel& model, std::int64_t samples,
                          std::uint64_t seed, int threads) {
  if (samples < kMinMonteCarloSamples) {
    throw std::invalid_argument("Monte Carlo needs at least " + std::to_string(kMinMonteCarloSamples) +
                                " samples");
  }
  validate_probability_vector(p, model.num_saps());
  const auto log_p = log_probs(p);
  const std::int64_t chunks = (samples + kChunkSize - 1) / kChunkSize;
  std::vector<Welford> partial(chunks);
  for_each_chunk(samples, threads, [&](std::int64_t chunk, std::int64_t begin, std::int64_t end) {
    RngStream rng(seed, static_cast<std::uint64_t>(chunk));
    OutputSample sample;
    Eigen::VectorXd y_power(model.n());
    Welford acc;
    for (std::int64_t s = begin; s < end; ++s) {
      sample_output_into(p, model, rng, sample);
      for (int l = 0; l < model.n(); ++l) y_power(l) = std::norm(sample.y[l]);
      acc.add(model.mixture_log_density_from_power(y_power, log_p));
    }
    partial[chunk] = acc;
  });
  Welford total;
  for (const auto& w : partial) total.merge(w);
  MiEstimate out;
  out.value = -total.mean - model.noise_entropy();
  out.std_error = std::sqrt(total.m2 / static_cast<double>(total.n - 1) / static_cast<double>(total.n));
  out.samples = samples;
  out.seed = seed;
  return out;
}

double jensen_lower_bound(std::span<const double> p, const MixtureModel& model) {
  validate_probability_vector(p, model.num_saps());
  const auto log_a = jensen_log_matrix(model);
  const auto log_p = log_probs(p);
  const int c = model.num_saps();
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(c) * c);
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < c; ++j) terms.push_back(log_p[i] + log_p[j] + log_a(i, j));
  }
  return -log_sum_exp(terms) - model.n() * (1.0 + std::log(model.noise_var()));
}

JensenMatrices jensen_matrices(const MixtureModel& model) {
  const auto log_a = jensen_log_matrix(model);
  const double shift = log_a.maxCoeff();
  const Eigen::MatrixXd scaled = (log_a.array() - shift).exp().matrix();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  JensenMatrices out;
  out.a = log_a.array().exp().matrix();
  const double smallest = sv(sv.size() - 1);
  out.condition = smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
  out.singular = !(out.condition <= kSingularCondition);
  if (!out.singular) {
    const Eigen::MatrixXd inv_scaled =
        svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
    out.b = inv_scaled * std::exp(-shift);
  }
  return out;
}

JensenSolution jensen_optimal_probs(const MixtureModel& model) {
  const auto mats = jensen_matrices(model);
  if (mats.singular) {
    throw SingularMatrixError("Jensen matrix is numerically singular", mats.condition);
  }
  const int c = model.num_saps();
  const Eigen::VectorXd row_sums = mats.b.rowwise().sum();
  JensenSolution out;
  out.condition = mats.condition;
  out.p.assign(c, 0.0);
  std::vector<int> support;
  double total = 0.0;
  for (int i = 0; i < c; ++i) {
    if (row_sums(i) > 0.0) {
      out.p[i] = row_sums(i);
      total += row_sums(i);
      support.push_back(i);
    }
  }
  if (static_cast<int>(support.size()) == c) {
    for (double& v : out.p) v /= total;
    return out;
  }
  const double shift = mats.a.maxCoeff();
  out.p = simplex_qp_active_set(mats.a / shift, support.empty() ? std::vector<int>{0} : support);
  out.refined = true;
  return out;
}

std::vector<double> high_snr_probs(const MixtureModel& model) {
  const auto& xi = model.variances();
  const auto& catalog = model.catalog();
  std::vector<double> logits(model.num_saps(), 0.0);
  for (int i = 0; i < model.num_saps(); ++i) {
    for (int l : catalog.pattern(i)) logits[i] += std::log(xi(i, l));
  }
  return softmax(logits);
}

double upper_bound_mu(const MixtureModel& model) {
  std::vector<double> caps(model.num_saps());
  for (int i = 0; i < model.num_saps(); ++i) caps[i] = model.pattern_capacity(i);
  return log_sum_exp(caps);
}

LowSnrSolution low_snr_probs(const MixtureModel& model) {
  LowSnrSolution out;
  double best = kNegInf;
  for (int i = 0; i < model.num_saps(); ++i) {
    const double cap = model.pattern_capacity(i);
    if (cap > best) {
      best = cap;
      out.best_sap = i;
    }
  }
  out.p.assign(model.num_saps(), 0.0);
  out.p[out.best_sap] = 1.0;
  return out;
}

std::vector<double> waterfill(std::span<const double> gains, double noise_var, double budget) {
  if (!(budget > 0.0)) throw std::invalid_argument("power budget must be positive");
  if (!(noise_var > 0.0)) throw std::invalid_argument("noise variance must be positive");
  std::vector<int> order;
  for (std::size_t l = 0; l < gains.size(); ++l) {
    if (gains[l] < 0.0) throw std::invalid_argument("gains must be nonnegative");
    if (gains[l] > 0.0) order.push_back(static_cast<int>(l));
  }
  if (order.empty()) throw std::invalid_argument("waterfilling needs at least one positive gain");
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return gains[a] > gains[b]; });
  // Largest m whose level clears the m-th floor.
  double floors = 0.0;
  double level = 0.0;
  int used = 0;
  for (int m = 1; m <= static_cast<int>(order.size()); ++m) {
    const double floor_m = noise_var / gains[order[m - 1]];
    const double trial = (budget + floors + floor_m) / m;
    if (trial <= floor_m) break;
    floors += floor_m;
    level = trial;
    used = m;
  }
  std::vector<double> out(gains.size(), 0.0);
  for (int j = 0; j < used; ++j) out[order[j]] = level - noise_var / gains[order[j]];
  return out;
}

PowerMatrix allocate_powers_per_sap(const ChannelState& state, const SapCatalog& catalog) {
  state.validate(catalog.config().n);
  PowerMatrix rho(catalog.size(), catalog.config().n);
  std::vector<double> sub;
  for (int i = 0; i < catalog.size(); ++i) {
    const auto& pat = catalog.pattern(i);
    sub.clear();
    for (int l : pat) sub.push_back(state.gains[l]);
    const auto powers = waterfill(sub, state.noise_var, state.power_budget);
    for (std::size_t j = 0; j < pat.size(); ++j) rho(i, pat[j]) = powers[j];
  }
  return rho;
}

// ---------------------------------------------------------------------------
// Stratified estimator

StratifiedMi::StratifiedMi(const SapCatalog& catalog, const ChannelState& state, const PowerMatrix& rho,
                           std::int64_t samples_per_sap, std::uint64_t seed)
    : catalog_(catalog),
      state_(state),
      rho_(rho),
      n_(catalog.config().n),
      c_(catalog.size()),
      m_(samples_per_sap) {
  if (samples_per_sap < kMinMonteCarloSamples) {
    throw std::invalid_argument("stratified estimator needs at least 100 samples per SAP");
  }
  state.validate(n_);
  rho.validate(catalog, state.power_budget);
  energy_.resize(static_cast<std::size_t>(c_) * m_ * n_);
  for (int i = 0; i < c_; ++i) {
    // Streams above 2^63 never collide with the chunk streams of mi_monte_carlo.
    RngStream rng(seed, (std::uint64_t{1} << 63) | static_cast<std::uint64_t>(i));
    double* block = energy_.data() + static_cast<std::size_t>(i) * m_ * n_;
    for (std::int64_t j = 0; j < m_ * n_; ++j) block[j] = -std::log1p(-rng.uniform());
  }
  xi_ = Eigen::MatrixXd::Constant(c_, n_, state.noise_var);
  for (int i = 0; i < c_; ++i) {
    for (int l : catalog.pattern(i)) xi_(i, l) = state.gains[l] * rho(i, l) + state.noise_var;
  }
  inv_xi_ = xi_.cwiseInverse();
  log_norm_ = -(xi_.array() * std::numbers::pi).log().rowwise().sum();
  noise_entropy_ = n_ * std::log(std::numbers::pi * std::numbers::e * state.noise_var);
  loglik_.resize(static_cast<std::size_t>(c_) * m_ * c_);
  for (int i = 0; i < c_; ++i) refresh_row_block(i);
}

double StratifiedMi::row_log_density(std::int64_t row, int k) const {
  const int sap = static_cast<int>(row / m_);
  const double* e = energy_.data() + static_cast<std::size_t>(row) * n_;
  double quad = 0.0;
  for (int l = 0; l < n_; ++l) quad += xi_(sap, l) * e[l] * inv_xi_(k, l);
  return log_norm_(k) - quad;
}

void StratifiedMi::refresh_row_block(int sap) {
  for (std::int64_t m = 0; m < m_; ++m) {
    const std::int64_t row = static_cast<std::int64_t>(sap) * m_ + m;
    double* out = loglik_.data() + static_cast<std::size_t>(row) * c_;
    for (int k = 0; k < c_; ++k) out[k] = row_log_density(row, k);
  }
}

void StratifiedMi::refresh_column(int sap) {
  const std::int64_t rows = static_cast<std::int64_t>(c_) * m_;
  for (std::int64_t row = 0; row < rows; ++row) {
    loglik_[static_cast<std::size_t>(row) * c_ + sap] = row_log_density(row, sap);
  }
}

void StratifiedMi::set_powers(const PowerMatrix& rho) {
  rho.validate(catalog_, state_.power_budget);
  for (int i = 0; i < c_; ++i) {
    std::vector<double> row(n_);
    for (int l = 0; l < n_; ++l) row[l] = rho(i, l);
    set_sap_powers(i, row);
  }
}

void StratifiedMi::set_sap_powers(int sap, std::span<const double> row) {
  if (static_cast<int>(row.size()) != n_) throw std::invalid_argument("power row length must equal N");
  for (int l = 0; l < n_; ++l) {
    rho_(sap, l) = catalog_.is_active(sap, l) ? row[l] : 0.0;
    xi_(sap, l) = state_.gains[l] * rho_(sap, l) + state_.noise_var;
    inv_xi_(sap, l) = 1.0 / xi_(sap, l);
  }
  log_norm_(sap) = -(xi_.row(sap).array() * std::numbers::pi).log().sum();
  refresh_row_block(sap);
  refresh_column(sap);
}

double StratifiedMi::value(std::span<const double> p) const {
  const auto log_p = log_probs(p);
  std::vector<double> terms(c_);
  double entropy = 0.0;
  for (int i = 0; i < c_; ++i) {
    if (p[i] <= 0.0) continue;
    double acc = 0.0;
    for (std::int64_t m = 0; m < m_; ++m) {
      const double* ll = loglik_.data() + (static_cast<std::size_t>(i) * m_ + m) * c_;
      for (int k = 0; k < c_; ++k) terms[k] = log_p[k] + ll[k];
      acc += log_sum_exp(terms);
    }
    entropy -= p[i] * acc / static_cast<double>(m_);
  }
  return entropy - noise_entropy_;
}

double StratifiedMi::value_and_gradient(std::span<const double> p, std::span<double> grad) const {
  const auto log_p = log_probs(p);
  std::vector<double> terms(c_);
  std::vector<double> mean_log(c_, 0.0);
  std::vector<double> resp(c_, 0.0);  // sum_i p_i mean_i[f_k / f_p]
  for (int i = 0; i < c_; ++i) {
    std::vector<double> ratio(c_, 0.0);
    double acc = 0.0;
    for (std::int64_t m = 0; m < m_; ++m) {
      const double* ll = loglik_.data() + (static_cast<std::size_t>(i) * m_ + m) * c_;
      for (int k = 0; k < c_; ++k) terms[k] = log_p[k] + ll[k];
      const double lse = log_sum_exp(terms);
      acc += lse;
      if (p[i] > 0.0) {
        for (int k = 0; k < c_; ++k) ratio[k] += std::exp(ll[k] - lse);
      }
    }
    mean_log[i] = acc / static_cast<double>(m_);
    if (p[i] > 0.0) {
      for (int k = 0; k < c_; ++k) resp[k] += p[i] * ratio[k] / static_cast<double>(m_);
    }
  }
  double entropy = 0.0;
  for (int i = 0; i < c_; ++i) {
    entropy -= p[i] * mean_log[i];
    grad[i] = -mean_log[i] - resp[i];
  }
  return entropy - noise_entropy_;
}

double StratifiedMi::std_error(std::span<const double> p) const {
  const auto log_p = log_probs(p);
  std::vector<double> terms(c_);
  double var = 0.0;
  for (int i = 0; i < c_; ++i) {
    if (p[i] <= 0.0) continue;
    Welford w;
    for (std::int64_t m = 0; m < m_; ++m) {
      const double* ll = loglik_.data() + (static_cast<std::size_t>(i) * m_ + m) * c_;
      for (int k = 0; k < c_; ++k) terms[k] = log_p[k] + ll[k];
      w.add(log_sum_exp(terms));
    }
    var += p[i] * p[i] * w.m2 / static_cast<double>(m_ - 1);
  }
  return std::sqrt(var / static_cast<double>(m_));
}

std::vector<double> project_onto_simplex(std::span<const double> x) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - t > 0.0) theta = t;
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::max(x[i] - theta, 0.0);
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> maximize_over_simplex(const StratifiedMi& objective, std::vector<double> p0,
                                          const SimplexAscentOptions& options) {
  const int c = objective.num_saps();
  validate_probability_vector(p0, c);
  std::vector<double> p = std::move(p0);
  std::vector<double> grad(c);
  std::vector<double> trial(c);
  double f = objective.value_and_gradient(p, grad);
  double step = 1.0;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    std::vector<double> cand;
    double fc = f;
    bool accepted = false;
    while (step > 1e-12) {
      for (int i = 0; i < c; ++i) trial[i] = p[i] + step * grad[i];
      cand = project_onto_simplex(trial);
      double decrease = 0.0;
      for (int i = 0; i < c; ++i) decrease += grad[i] * (cand[i] - p[i]);
      fc = objective.value(cand);
      if (fc >= f + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    double move = 0.0;
    for (int i = 0; i < c; ++i) move = std::max(move, std::abs(cand[i] - p[i]));
    p = std::move(cand);
    if (move < options.tolerance) break;
    f = objective.value_and_gradient(p, grad);
    step = std::min(step * 2.0, 1e3);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Block coordinate descent

namespace {

// Pairwise power transfers inside each pattern, keeping row sums fixed.
void improve_powers(StratifiedMi& objective, std::span<const double> p, const SapCatalog& catalog,
                    double budget, double& f) {
  const int n = catalog.config().n;
  for (int s = 0; s < catalog.size(); ++s) {
    const auto& pat = catalog.pattern(s);
    if (pat.size() < 2 || p[s] <= 0.0) continue;
    std::vector<double> row(n);
    for (int l = 0; l < n; ++l) row[l] = objective.powers()(s, l);
    for (double delta = budget / 4.0; delta > budget * 1e-3; delta *= 0.5) {
      bool improved = true;
      while (improved) {
        improved = false;
        for (int from : pat) {
          for (int to : pat) {
            if (from == to) continue;
            const double amount = std::min(delta, row[from]);
            if (amount <= 0.0) continue;
            auto next = row;
            next[from] -= amount;
            next[to] += amount;
            objective.set_sap_powers(s, next);
            const double fn = objective.value(p);
            if (fn > f + 1e-12) {
              row = std::move(next);
              f = fn;
              improved = true;
            } else {
              objective.set_sap_powers(s, row);
            }
          }
        }
      }
    }
  }
}

}  // namespace

BcdResult bcd_optimize(const ChannelState& state, const SystemConfig& config, const BcdOptions& options) {
  if (config.n > 4) throw std::invalid_argument("BCD is limited to N <= 4 subcarriers");
  const SapCatalog catalog(config);
  const int c = catalog.size();
  const PowerMatrix rho0 = options.initial_powers ? *options.initial_powers : allocate_powers_per_sap(state, catalog);
  StratifiedMi objective(catalog, state, rho0, options.samples_per_sap, options.seed);
  std::vector<double> p = options.initial_p ? *options.initial_p : std::vector<double>(c, 1.0 / c);
  validate_probability_vector(p, c);

  BcdResult out;
  double f = objective.value(p);
  for (int cycle = 1; cycle <= options.max_cycles; ++cycle) {
    p = maximize_over_simplex(objective, p);
    double fn = objective.value(p);
    if (options.optimize_powers) improve_powers(objective, p, catalog, state.power_budget, fn);
    out.history.push_back(fn);
    out.cycles = cycle;
    const double gain = fn - f;
    f = std::max(f, fn);
    if (gain < options.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.p = p;
  out.rho = objective.powers();
  out.objective = objective.value(p);
  const MixtureModel model(catalog, out.rho, state);
  out.mi = mi_monte_carlo(out.p, model, options.final_samples, options.seed, options.threads);
  return out;
}

// ---------------------------------------------------------------------------
// Constrained solvers

ObjectiveMode parse_objective_mode(std::string_view name) {
  if (name == "auto") return ObjectiveMode::automatic;
  if (name == "high_snr") return ObjectiveMode::high_snr;
  if (name == "low_snr") return ObjectiveMode::low_snr;
  if (name == "mc") return ObjectiveMode::monte_carlo;
  throw std::invalid_argument("unknown objective mode '" + std::string(name) + "'");
}

std::string_view objective_mode_name(ObjectiveMode mode) {
  switch (mode) {
    case ObjectiveMode::automatic: return "auto";
    case ObjectiveMode::high_snr: return "high_snr";
    case ObjectiveMode::low_snr: return "low_snr";
    case ObjectiveMode::monte_carlo: return "mc";
  }
  return "unknown";
}

namespace {

// Closed-form surrogate scores. High SNR: mu - KL(p || q). Low SNR: the
// conditional rate sum_i p_i C_i, a lower bound that becomes tight as the index
// information vanishes.
struct ClosedForm {
  ObjectiveMode mode;
  std::vector<double> weight;  // ln q_i or C_i
  double offset = 0.0;

  double operator()(const DyadicProbabilityVector& p) const {
    double score = offset;
    for (int i = 0; i < p.size(); ++i) {
      const int e = p.exponent(i);
      if (e == DyadicProbabilityVector::kZero) continue;
      const double pi = std::ldexp(1.0, -e);
      if (mode == ObjectiveMode::high_snr) {
        score += pi * (weight[i] + e * std::numbers::ln2);
      } else {
        score += pi * weight[i];
      }
    }
    return score;
  }
};

ClosedForm make_closed_form(ObjectiveMode mode, const MixtureModel& model) {
  ClosedForm form{mode, {}, 0.0};
  const int c = model.num_saps();
  form.weight.resize(c);
  if (mode == ObjectiveMode::high_snr) {
    const auto q = high_snr_probs(model);
    for (int i = 0; i < c; ++i) form.weight[i] = std::log(q[i]);
    form.offset = upper_bound_mu(model);
  } else {
    for (int i = 0; i < c; ++i) form.weight[i] = model.pattern_capacity(i);
  }
  return form;
}

// For a linear-plus-entropy score the best assignment of a profile gives the
// shallowest leaves to the highest-weight SAPs.
DyadicProbabilityVector rank_matched_search(const ClosedForm& form, int c, LeafRestriction leaves,
                                            std::size_t& evaluated) {
  std::vector<int> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return form.weight[a] > form.weight[b]; });
  std::optional<DyadicProbabilityVector> best;
  double best_score = kNegInf;
  auto consider = [&](const TreeProfile& profile) {
    std::vector<std::int8_t> exps(c, DyadicProbabilityVector::kZero);
    if (profile.leaf_counts.empty()) exps[order[0]] = 0;
    int slot = 0;
    for (std::size_t d = 0; d < profile.leaf_counts.size(); ++d) {
      for (int j = 0; j < profile.leaf_counts[d]; ++j) exps[order[slot++]] = static_cast<std::int8_t>(d + 1);
    }
    DyadicProbabilityVector vec(std::move(exps));
    const double score = form(vec);
    ++evaluated;
    if (!best || score > best_score) {
      best_score = score;
      best = std::move(vec);
    }
  };
  if (leaves == LeafRestriction::any) {
    consider(TreeProfile{});
  }
  const auto sets = construct_reduced_sets(c - 1);
  for (std::size_t v = 0; v < sets.size(); ++v) {
    if (leaves == LeafRestriction::all_saps && static_cast<int>(v) + 1 != c - 1) continue;
    for (const auto& tree : sets[v].trees) consider(tree.profile);
  }
  return *best;
}

}  // namespace

ConstrainedSolution solve_constrained_enumerative(const ChannelState& state, const SystemConfig& config,
                                                  const ConstrainedOptions& options) {
  const SapCatalog catalog(config);
  const int c = catalog.size();
  if (c > kMaxEnumerativeSaps) {
    throw CapacityError("enumerative search is limited to C <= " + std::to_string(kMaxEnumerativeSaps) +
                        " SAPs (got " + std::to_string(c) + ")");
  }
  ConstrainedSolution out;
  out.rho = options.powers ? *options.powers : allocate_powers_per_sap(state, catalog);
  const MixtureModel model(catalog, out.rho, state);
  out.mode_used = options.mode;

  if (c == 1) {
    out.p = DyadicProbabilityVector::one_hot(1, 0);
    out.candidates_evaluated = 1;
  } else {
    const BigInt total = options.leaves == LeafRestriction::all_saps ? feasible_layer_size(c, c - 1)
                                                                     : feasible_set_size(c);
    const bool fits = total <= BigInt(options.max_vectors);
    if (out.mode_used == ObjectiveMode::automatic) {
      if (total <= BigInt(std::min(options.max_vectors, kAutoMonteCarloVectors))) {
        out.mode_used = ObjectiveMode::monte_carlo;
      } else {
        out.mode_used = state.snr_db() >= kHighSnrThresholdDb ? ObjectiveMode::high_snr : ObjectiveMode::low_snr;
      }
    }
    if (out.mode_used == ObjectiveMode::monte_carlo) {
      if (!fits) {
        throw CapacityError("feasible set has " + total.str() + " vectors, above the limit of " +
                            std::to_string(options.max_vectors));
      }
      const auto candidates = options.leaves == LeafRestriction::all_saps
                                  ? build_feasible_layer(c, c - 1, options.max_vectors)
                                  : build_feasible_set(c, options.max_vectors);
      const StratifiedMi objective(catalog, state, out.rho, options.screening_samples_per_sap, options.seed);
      double best = kNegInf;
      int best_index = -1;
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        const double score = objective.value(candidates[j].to_doubles());
        if (score > best) {
          best = score;
          best_index = static_cast<int>(j);
        }
      }
      out.p = candidates[best_index];
      out.objective = best;
      out.candidates_evaluated = candidates.size();
    } else {
      const auto form = make_closed_form(out.mode_used, model);
      if (fits) {
        const auto candidates = options.leaves == LeafRestriction::all_saps
                                    ? build_feasible_layer(c, c - 1, options.max_vectors)
                                    : build_feasible_set(c, options.max_vectors);
        double best = kNegInf;
        int best_index = -1;
        for (std::size_t j = 0; j < candidates.size(); ++j) {
          const double score = form(candidates[j]);
          if (score > best) {
            best = score;
            best_index = static_cast<int>(j);
          }
        }
        out.p = candidates[best_index];
        out.candidates_evaluated = candidates.size();
      } else {
        out.p = rank_matched_search(form, c, options.leaves, out.candidates_evaluated);
        out.exhaustive = false;
      }
      out.objective = form(out.p);
    }
  }
  out.mi = mi_monte_carlo(out.p.to_doubles(), model, options.final_samples, options.seed, options.threads);
  return out;
}

ProjectedSolution solve_constrained_projected(const ChannelState& state, const SystemConfig& config,
                                              DistanceMetric metric, RelaxedSource source,
                                              std::int64_t samples, std::uint64_t seed, int threads) {
  const SapCatalog catalog(config);
  ProjectedSolution out;
  out.rho = allocate_powers_per_sap(state, catalog);
  const MixtureModel model(catalog, out.rho, state);
  auto finish = [&](std::vector<double> relaxed) {
    ProjectedSolution r = out;
    r.relaxed = std::move(relaxed);
    const auto projection = project_to_feasible(r.relaxed, metric);
    r.p = projection.best;
    r.best_k = projection.best_k;
    r.mi = mi_monte_carlo(r.p.to_doubles(), model, samples, seed, threads);
    return r;
  };
  if (source == RelaxedSource::high_snr) return finish(high_snr_probs(model));
  try {
    return finish(jensen_optimal_probs(model).p);
  } catch (const SingularMatrixError&) {
    // Singular A: project both the high- and the low-SNR optimum, keep the better.
    auto high = finish(high_snr_probs(model));
    auto low = finish(low_snr_probs(model).p);
    auto& pick = low.mi.value > high.mi.value ? low : high;
    pick.fell_back = true;
    return pick;
  }
}

BenchmarkDesign benchmark_design(const SapCatalog& catalog, double power_budget) {
  const int c = catalog.size();
  const int used = static_cast<int>(std::bit_floor(static_cast<unsigned>(c)));
  BenchmarkDesign out;
  out.p.assign(c, 0.0);
  for (int i = 0; i < used; ++i) out.p[i] = 1.0 / used;
  out.rho = uniform_powers(catalog, power_budget);
  return out;
}

}  // namespace imtree
