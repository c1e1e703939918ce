#include "imtree/error.hpp"
#include "imtree/rate_opt.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

using namespace imtree;

namespace {

struct Setup {
  SapCatalog catalog;
  ChannelState state;
  PowerMatrix rho;
  MixtureModel model;

  Setup(int n, int k, std::vector<double> gains, double snr_db, bool waterfill = true, bool full = false)
      : catalog(SystemConfig::make(n, k, full)),
        state(ChannelState::from_snr_db(std::move(gains), snr_db)),
        rho(waterfill ? allocate_powers_per_sap(state, catalog) : uniform_powers(catalog, 1.0)),
        model(catalog, rho, state) {}
};

std::vector<double> random_simplex(RngStream& rng, int c) {
  std::vector<double> p(c);
  for (auto& v : p) v = -std::log1p(-rng.uniform());
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= total;
  return p;
}

double quad_form(const Eigen::MatrixXd& a, const std::vector<double>& p) {
  Eigen::Map<const Eigen::VectorXd> v(p.data(), static_cast<Eigen::Index>(p.size()));
  return v.dot(a * v);
}

}  // namespace

TEST_CASE("conventional OFDM: MC matches the Gaussian capacity") {
  Setup s(3, 3, {1.0, 0.4, 0.1}, 5.0, true, true);
  const std::vector<double> p = {1.0};
  const auto est = mi_monte_carlo(p, s.model, 20000, 5);
  const double closed = s.model.pattern_capacity(0);
  CHECK(std::abs(est.value - closed) <= 3.0 * est.std_error + 1e-12);
  CHECK(est.samples == 20000);
  CHECK(est.seed == 5);
}

TEST_CASE("one-hot p matches the single-pattern capacity") {
  Setup s(4, 2, exp_decay_gains(4, 0.5), 10.0);
  for (int i : {0, 3, 5}) {
    std::vector<double> p(6, 0.0);
    p[i] = 1.0;
    const auto est = mi_monte_carlo(p, s.model, 20000, 9);
    CHECK(std::abs(est.value - s.model.pattern_capacity(i)) <= 3.0 * est.std_error);
  }
}

TEST_CASE("Monte Carlo guards and determinism") {
  Setup s(4, 2, exp_decay_gains(4, 0.7), 0.0);
  const std::vector<double> p(6, 1.0 / 6);
  CHECK_THROWS(mi_monte_carlo(p, s.model, 99, 1));
  const auto a = mi_monte_carlo(p, s.model, 10000, 42, 1);
  const auto b = mi_monte_carlo(p, s.model, 10000, 42, 1);
  const auto c = mi_monte_carlo(p, s.model, 10000, 42, 3);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
  CHECK(a.value == c.value);
  CHECK(a.std_error == c.std_error);
  const auto d = mi_monte_carlo(p, s.model, 10000, 43, 1);
  CHECK(a.value != d.value);
}

TEST_CASE("Jensen bound: single subcarrier with zero gain") {
  const SapCatalog cat(SystemConfig::make(1, 1, true));
  ChannelState state{{0.0}, {}, 0.7, 1.0};
  const MixtureModel model(cat, uniform_powers(cat, 1.0), state);
  const std::vector<double> p = {1.0};
  CHECK(jensen_lower_bound(p, model) == doctest::Approx(std::log(2.0 / std::numbers::e)));
}

TEST_CASE("Jensen bound sits below Monte Carlo and is symmetric") {
  RngStream rng(21, 0);
  for (int trial = 0; trial < 12; ++trial) {
    const double eta = std::vector<double>{0.2, 0.7, 1.0}[trial % 3];
    Setup s(4, 2, exp_decay_gains(4, eta), -10.0 + 10.0 * (trial % 4));
    const auto p = random_simplex(rng, 6);
    const auto est = mi_monte_carlo(p, s.model, 20000, 100 + trial);
    CHECK(jensen_lower_bound(p, s.model) <= est.value + 3.0 * est.std_error);
  }
  Setup a(2, 1, {1.0, 0.3}, 5.0, false);
  Setup b(2, 1, {0.3, 1.0}, 5.0, false);
  const std::vector<double> pa = {0.7, 0.3};
  const std::vector<double> pb = {0.3, 0.7};
  CHECK(jensen_lower_bound(pa, a.model) == doctest::Approx(jensen_lower_bound(pb, b.model)).epsilon(1e-13));
}

TEST_CASE("Jensen optimum: symmetry, grid oracle and dominance") {
  Setup eq(4, 2, exp_decay_gains(4, 1.0), 10.0);
  const auto u = jensen_optimal_probs(eq.model);
  for (double v : u.p) CHECK(v == doctest::Approx(1.0 / 6).epsilon(1e-9));

  for (double eta : {0.3, 0.6, 0.9}) {
    for (double snr : {0.0, 10.0, 20.0}) {
      CAPTURE(eta);
      CAPTURE(snr);
      Setup s(3, 1, exp_decay_gains(3, eta), snr);
      const auto mats = jensen_matrices(s.model);
      const Eigen::MatrixXd a = mats.a / mats.a.maxCoeff();
      const auto sol = jensen_optimal_probs(s.model);
      const double ours = quad_form(a, sol.p);
      // Coarse grid, then a fine grid around the coarse winner.
      double best = std::numeric_limits<double>::infinity();
      double bx = 0.0, by = 0.0;
      for (int i = 0; i <= 200; ++i) {
        for (int j = 0; i + j <= 200; ++j) {
          const std::vector<double> p = {i / 200.0, j / 200.0, 1.0 - (i + j) / 200.0};
          const double f = quad_form(a, p);
          if (f < best) best = f, bx = p[0], by = p[1];
        }
      }
      for (int i = -200; i <= 200; ++i) {
        for (int j = -200; j <= 200; ++j) {
          const double x = bx + i * 5e-5;
          const double y = by + j * 5e-5;
          if (x < 0 || y < 0 || x + y > 1) continue;
          const double f = quad_form(a, {x, y, 1.0 - x - y});
          best = std::min(best, f);
        }
      }
      CHECK(ours <= best + 1e-12);
      CHECK(ours >= best - 1e-6 * best);
    }
  }

  RngStream rng(5, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const double eta = 0.1 + 0.9 * rng.uniform();
    Setup s(4, 2, exp_decay_gains(4, eta), -5.0 + 35.0 * rng.uniform());
    try {
      const auto sol = jensen_optimal_probs(s.model);
      const auto mats = jensen_matrices(s.model);
      const Eigen::MatrixXd a = mats.a / mats.a.maxCoeff();
      CHECK(std::accumulate(sol.p.begin(), sol.p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
      for (double v : sol.p) CHECK(v >= 0.0);
      const double ours = quad_form(a, sol.p);
      CHECK(ours <= quad_form(a, std::vector<double>(6, 1.0 / 6)) * (1 + 1e-9));
      for (int i = 0; i < 6; ++i) {
        std::vector<double> e(6, 0.0);
        e[i] = 1.0;
        CHECK(ours <= quad_form(a, e) * (1 + 1e-9));
      }
    } catch (const SingularMatrixError& err) {
      CHECK(err.condition() > kSingularCondition);
    }
  }
}

TEST_CASE("Jensen matrix is flagged singular at very low SNR with strong selectivity") {
  Setup s(4, 2, exp_decay_gains(4, 0.05), -30.0);
  const auto mats = jensen_matrices(s.model);
  CHECK(mats.singular);
  CHECK_THROWS_AS(jensen_optimal_probs(s.model), SingularMatrixError);
  const auto proj = solve_constrained_projected(s.state, SystemConfig::make(4, 2), DistanceMetric::euclidean,
                                                RelaxedSource::jensen, 2000, 1);
  CHECK(proj.fell_back);
}

TEST_CASE("high-SNR probabilities") {
  const SapCatalog cat(SystemConfig::make(2, 1));
  ChannelState state{{1.5, 1.0}, {}, 0.5, 1.0};
  const MixtureModel model(cat, uniform_powers(cat, 1.0), state);
  const auto q = high_snr_probs(model);
  CHECK(q[0] == doctest::Approx(4.0 / 7.0));
  CHECK(q[1] == doctest::Approx(3.0 / 7.0));

  Setup eq(4, 2, exp_decay_gains(4, 1.0), 20.0);
  for (double v : high_snr_probs(eq.model)) CHECK(v == doctest::Approx(1.0 / 6));

  Setup low(4, 2, exp_decay_gains(4, 0.3), -60.0);
  for (double v : high_snr_probs(low.model)) CHECK(v == doctest::Approx(1.0 / 6).epsilon(1e-4));

  // Scaling every variance by the same factor leaves q unchanged.
  ChannelState scaled = state;
  scaled.gains = {4.5, 3.0};
  scaled.noise_var = 1.5;
  const MixtureModel model2(cat, uniform_powers(cat, 1.0), scaled);
  const auto q2 = high_snr_probs(model2);
  CHECK(q2[0] == doctest::Approx(q[0]).epsilon(1e-14));

  // Huge products stay finite.
  Setup hi(8, 4, exp_decay_gains(8, 0.5), 200.0);
  const auto qh = high_snr_probs(hi.model);
  CHECK(std::accumulate(qh.begin(), qh.end(), 0.0) == doctest::Approx(1.0));
  CHECK(std::isfinite(upper_bound_mu(hi.model)));
}

TEST_CASE("upper bound mu") {
  const SapCatalog cat(SystemConfig::make(4, 2));
  ChannelState state = ChannelState::from_snr_db(exp_decay_gains(4, 0.5), 10.0);
  const MixtureModel zero(cat, PowerMatrix(6, 4), state);
  CHECK(upper_bound_mu(zero) == doctest::Approx(std::log(6.0)));

  RngStream rng(77, 0);
  for (int trial = 0; trial < 10; ++trial) {
    Setup s(4, 2, exp_decay_gains(4, 0.1 + 0.9 * rng.uniform()), -10.0 + 40.0 * rng.uniform());
    const auto q = high_snr_probs(s.model);
    const auto est = mi_monte_carlo(q, s.model, 20000, trial);
    CHECK(est.value <= upper_bound_mu(s.model) + 3.0 * est.std_error);
  }
}

TEST_CASE("low-SNR probabilities") {
  Setup s(4, 2, exp_decay_gains(4, 0.2), -20.0);
  const auto r = low_snr_probs(s.model);
  CHECK(r.best_sap == 0);
  CHECK(r.p == std::vector<double>{1, 0, 0, 0, 0, 0});
  Setup eq(4, 2, exp_decay_gains(4, 1.0), 0.0);
  CHECK(low_snr_probs(eq.model).best_sap == 0);

  const auto est = mi_monte_carlo(r.p, s.model, 50000, 3);
  CHECK(std::abs(est.value - s.model.pattern_capacity(0)) < 3.0 * est.std_error);

  // The winner is unchanged by a monotone transform of the scores: the one
  // with the largest sum of log(1 + snr) also has the largest product.
  double best = -1.0;
  int arg = -1;
  for (int i = 0; i < 6; ++i) {
    double prod = 1.0;
    for (int l : s.catalog.pattern(i)) prod *= 1.0 + s.state.gains[l] * s.rho(i, l) / s.state.noise_var;
    if (prod > best) best = prod, arg = i;
  }
  CHECK(arg == r.best_sap);
}

TEST_CASE("waterfilling") {
  CHECK(waterfill(std::vector<double>{1.0, 0.2}, 1.0, 2.0) == std::vector<double>{2.0, 0.0});
  const auto eq = waterfill(std::vector<double>{0.5, 0.5, 0.5}, 0.3, 1.2);
  for (double v : eq) CHECK(v == doctest::Approx(0.4));
  CHECK(waterfill(std::vector<double>{0.1}, 5.0, 3.0) == std::vector<double>{3.0});
  CHECK_THROWS(waterfill(std::vector<double>{0.0, 0.0}, 1.0, 1.0));
  const auto with_zero = waterfill(std::vector<double>{0.0, 1.0}, 1.0, 1.0);
  CHECK(with_zero[0] == 0.0);
  CHECK(with_zero[1] == doctest::Approx(1.0));

  RngStream rng(8, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + rng.uniform_int(6);
    std::vector<double> g(n);
    for (auto& v : g) v = std::pow(10.0, -2.0 + 2.5 * rng.uniform());
    const double noise = std::pow(10.0, -2.0 + 3.0 * rng.uniform());
    const double budget = 0.1 + 5.0 * rng.uniform();
    const auto got = waterfill(g, noise, budget);
    const auto want = oracle::waterfill_bisection(g, noise, budget);
    for (int l = 0; l < n; ++l) CHECK(got[l] == doctest::Approx(want[l]).epsilon(1e-9).scale(budget));
    CHECK(std::accumulate(got.begin(), got.end(), 0.0) == doctest::Approx(budget).epsilon(1e-12));
  }
}

TEST_CASE("per-pattern waterfilling") {
  const auto state = ChannelState::from_snr_db(exp_decay_gains(4, 0.2), 0.0, 1.0);
  const SapCatalog cat(SystemConfig::make(4, 2));
  const auto rho = allocate_powers_per_sap(state, cat);
  for (int i = 0; i < cat.size(); ++i) {
    double total = 0.0;
    std::vector<double> sub;
    for (int l : cat.pattern(i)) {
      total += rho(i, l);
      sub.push_back(state.gains[l]);
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
    const auto want = oracle::waterfill_bisection(sub, state.noise_var, 1.0);
    for (std::size_t j = 0; j < sub.size(); ++j) {
      CHECK(rho(i, cat.pattern(i)[j]) == doctest::Approx(want[j]).epsilon(1e-9).scale(1.0));
    }
  }
  const SapCatalog single(SystemConfig::make(4, 1));
  const auto r1 = allocate_powers_per_sap(state, single);
  for (int i = 0; i < 4; ++i) CHECK(r1(i, i) == 1.0);
}

TEST_CASE("stratified estimator: gradient and agreement with plain Monte Carlo") {
  Setup s(4, 2, exp_decay_gains(4, 0.4), 5.0);
  const StratifiedMi est(s.catalog, s.state, s.rho, 2000, 4);
  RngStream rng(2, 0);
  const auto p = random_simplex(rng, 6);
  std::vector<double> grad(6);
  const double f = est.value_and_gradient(p, grad);
  CHECK(f == doctest::Approx(est.value(p)).epsilon(1e-12));
  for (int j = 0; j < 6; ++j) {
    for (int k = 0; k < 6; ++k) {
      if (j == k) continue;
      // Directional derivative along e_j - e_k stays on the simplex.
      const double h = 1e-6;
      auto plus = p;
      auto minus = p;
      plus[j] += h, plus[k] -= h;
      minus[j] -= h, minus[k] += h;
      const double fd = (est.value(plus) - est.value(minus)) / (2 * h);
      CHECK(fd == doctest::Approx(grad[j] - grad[k]).epsilon(1e-5).scale(1.0));
    }
  }
  const auto plain = mi_monte_carlo(p, s.model, 40000, 11);
  const double se = std::hypot(plain.std_error, est.std_error(p));
  CHECK(std::abs(plain.value - f) < 4.0 * se);
}

TEST_CASE("simplex projection") {
  const auto a = project_onto_simplex(std::vector<double>{0.2, 0.3, 0.5});
  CHECK(a[2] == doctest::Approx(0.5));
  const auto b = project_onto_simplex(std::vector<double>{2.0, 0.0, -1.0});
  CHECK(b == std::vector<double>{1.0, 0.0, 0.0});
  const auto c = project_onto_simplex(std::vector<double>{1.0, 1.0});
  CHECK(c[0] == doctest::Approx(0.5));
}

TEST_CASE("BCD: equal gains with fixed uniform powers gives uniform p") {
  const auto config = SystemConfig::make(3, 1);
  const auto state = ChannelState::from_snr_db(exp_decay_gains(3, 1.0), 10.0);
  BcdOptions opts;
  opts.optimize_powers = false;
  opts.initial_powers = uniform_powers(SapCatalog(config), 1.0);
  opts.samples_per_sap = 20000;
  opts.final_samples = 20000;
  opts.initial_p = std::vector<double>{0.7, 0.2, 0.1};
  const auto res = bcd_optimize(state, config, opts);
  CHECK(res.converged);
  for (double v : res.p) CHECK(std::abs(v - 1.0 / 3) < 1e-2);
  CHECK_THROWS(bcd_optimize(state, SystemConfig::make(5, 2), opts));
}

TEST_CASE("BCD: N=3, K=1 toy against a simplex grid and across initializations") {
  const auto config = SystemConfig::make(3, 1);
  const auto state = ChannelState::from_snr_db(exp_decay_gains(3, 0.5), 5.0);
  const SapCatalog cat(config);
  const MixtureModel model(cat, allocate_powers_per_sap(state, cat), state);
  BcdOptions opts;
  opts.samples_per_sap = 20000;
  opts.final_samples = 40000;
  const auto from_uniform = bcd_optimize(state, config, opts);
  opts.initial_p = std::vector<double>{1.0, 0.0, 0.0};
  const auto from_vertex = bcd_optimize(state, config, opts);
  CHECK(from_uniform.converged);
  CHECK(std::abs(from_uniform.mi.value - from_vertex.mi.value) <=
        2.0 * std::hypot(from_uniform.mi.std_error, from_vertex.mi.std_error));

  // Screen the grid cheaply, then re-score the leaders and the BCD point with
  // one large common-seed estimate so the max is not inflated by noise.
  std::vector<std::pair<double, std::vector<double>>> grid;
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; i + j <= 20; ++j) {
      const std::vector<double> p = {i / 20.0, j / 20.0, 1.0 - (i + j) / 20.0};
      grid.emplace_back(mi_monte_carlo(p, model, 8000, 17).value, p);
    }
  }
  std::sort(grid.begin(), grid.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  double best = -1e9;
  for (int r = 0; r < 8; ++r) best = std::max(best, mi_monte_carlo(grid[r].second, model, 200000, 99).value);
  const double bcd = mi_monte_carlo(from_uniform.p, model, 200000, 99).value;
  CHECK(bcd > best - 0.01);
}

TEST_CASE("BCD power step keeps patterns on budget and does not lose rate") {
  const auto config = SystemConfig::make(3, 2);
  const auto state = ChannelState::from_snr_db(exp_decay_gains(3, 0.3), 5.0);
  BcdOptions opts;
  opts.samples_per_sap = 3000;
  opts.final_samples = 5000;
  const auto res = bcd_optimize(state, config, opts);
  const SapCatalog cat(config);
  CHECK_NOTHROW(res.rho.validate(cat, 1.0));
  for (int i = 0; i < cat.size(); ++i) CHECK(res.rho.matrix().row(i).sum() == doctest::Approx(1.0));
  for (std::size_t c = 1; c < res.history.size(); ++c) CHECK(res.history[c] >= res.history[c - 1] - 1e-12);
}

TEST_CASE("enumerative solver") {
  const auto config = SystemConfig::make(4, 2);
  {
    const auto state = ChannelState::from_snr_db(exp_decay_gains(4, 0.2), -20.0);
    ConstrainedOptions opts;
    opts.screening_samples_per_sap = 500;
    opts.final_samples = 2000;
    const auto sol = solve_constrained_enumerative(state, config, opts);
    CHECK(sol.mode_used == ObjectiveMode::monte_carlo);
    CHECK(sol.p.to_string() == "1,0,0,0,0,0");
  }
  {
    const auto state = ChannelState::from_snr_db(exp_decay_gains(4, 1.0), 10.0);
    ConstrainedOptions opts;
    opts.final_samples = 2000;
    opts.screening_samples_per_sap = 500;
    CHECK(solve_constrained_enumerative(state, config, opts).mode_used == ObjectiveMode::monte_carlo);
    opts.max_vectors = 1000;
    CHECK(solve_constrained_enumerative(state, config, opts).mode_used == ObjectiveMode::high_snr);
    opts.max_vectors = ConstrainedOptions{}.max_vectors;
    opts.mode = ObjectiveMode::high_snr;
    const auto sol = solve_constrained_enumerative(state, config, opts);
    CHECK(sol.p.profile().to_string() == "0,2,4");
    CHECK(sol.candidates_evaluated == build_feasible_set(6).size());
  }
  for (double snr : {-5.0, 12.0, 25.0}) {
    for (auto mode : {ObjectiveMode::high_snr, ObjectiveMode::low_snr}) {
      const auto state = ChannelState::from_snr_db(exp_decay_gains(4, 0.35), snr);
      ConstrainedOptions full;
      full.mode = mode;
      full.final_samples = 500;
      ConstrainedOptions reduced = full;
      reduced.max_vectors = 10;
      const auto a = solve_constrained_enumerative(state, config, full);
      const auto b = solve_constrained_enumerative(state, config, reduced);
      CHECK(a.exhaustive);
      CHECK_FALSE(b.exhaustive);
      CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-12));
      // The enumerated optimum dominates the projected heuristic under the same objective.
      const auto proj = solve_constrained_projected(state, config, DistanceMetric::euclidean);
      CHECK(a.objective >= [&] {
        const SapCatalog cat(config);
        const MixtureModel model(cat, allocate_powers_per_sap(state, cat), state);
        if (mode == ObjectiveMode::low_snr) {
          double v = 0.0;
          for (int i = 0; i < 6; ++i) v += proj.p.probability(i) * model.pattern_capacity(i);
          return v;
        }
        const auto q = high_snr_probs(model);
        double v = upper_bound_mu(model);
        for (int i = 0; i < 6; ++i) {
          const double pi = proj.p.probability(i);
          if (pi > 0) v -= pi * std::log(pi / q[i]);
        }
        return v;
      }() - 1e-12);
    }
  }
  const auto big = ChannelState::from_snr_db(exp_decay_gains(6, 0.5), 10.0);
  CHECK_THROWS_AS(solve_constrained_enumerative(big, SystemConfig::make(6, 3)), CapacityError);
}

TEST_CASE("projected solver") {
  const auto full = SystemConfig::make(2, 2, true);
  const auto state1 = ChannelState::from_snr_db({1.0, 0.5}, 10.0);
  const auto one = solve_constrained_projected(state1, full, DistanceMetric::kl, RelaxedSource::high_snr, 2000);
  CHECK(one.p.to_string() == "1");

  const auto config = SystemConfig::make(4, 2);
  const auto state = ChannelState::from_snr_db(exp_decay_gains(4, 1.0), 10.0);
  const auto proj = solve_constrained_projected(state, config, DistanceMetric::euclidean,
                                                RelaxedSource::high_snr, 40000, 3);
  const SapCatalog cat(config);
  const MixtureModel model(cat, allocate_powers_per_sap(state, cat), state);
  const auto relaxed = mi_monte_carlo(std::vector<double>(6, 1.0 / 6), model, 40000, 4);
  CHECK(std::abs(proj.mi.value - relaxed.value) < 0.05);
  for (double v : proj.relaxed) CHECK(v == doctest::Approx(1.0 / 6));
}

TEST_CASE("benchmark design") {
  const SapCatalog cat(SystemConfig::make(4, 2));
  const auto d = benchmark_design(cat, 2.0);
  CHECK(d.p == std::vector<double>{0.25, 0.25, 0.25, 0.25, 0.0, 0.0});
  CHECK(d.rho(0, 0) == 1.0);
  CHECK(d.rho(5, 3) == 1.0);
  CHECK(d.rho(5, 0) == 0.0);
  const SapCatalog cat3(SystemConfig::make(3, 1));
  CHECK(benchmark_design(cat3, 1.0).p == std::vector<double>{0.5, 0.5, 0.0});
}

TEST_CASE("objective mode names") {
  for (auto m : {ObjectiveMode::automatic, ObjectiveMode::high_snr, ObjectiveMode::low_snr, ObjectiveMode::monte_carlo}) {
    CHECK(parse_objective_mode(objective_mode_name(m)) == m);
  }
  CHECK_THROWS(parse_objective_mode("fast"));
}
