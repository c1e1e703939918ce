#include "imtree/channel_model.hpp"
#include "imtree/error.hpp"
#include "imtree/link_sim.hpp"
#include "imtree/mapping.hpp"
#include "imtree/rate_opt.hpp"
#include "imtree/tree_core.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <map>

namespace py = pybind11;
using namespace imtree;

namespace {

py::object to_py(const BigInt& value) { return py::module_::import("builtins").attr("int")(value.str()); }

ChannelState make_state(const std::vector<double>& gains, double snr_db, double power_budget) {
  return ChannelState::from_snr_db(gains, snr_db, power_budget);
}

py::dict mi_dict(const MiEstimate& mi) {
  py::dict d;
  d["mi"] = mi.value;
  d["std_error"] = mi.std_error;
  d["samples"] = mi.samples;
  d["seed"] = mi.seed;
  return d;
}

DyadicProbabilityVector dyadic_from(const std::vector<double>& p) {
  std::vector<std::int8_t> exps;
  for (double x : p) {
    exps.push_back(x > 0.0 ? static_cast<std::int8_t>(std::lround(-std::log2(x))) : DyadicProbabilityVector::kZero);
  }
  return DyadicProbabilityVector(std::move(exps));
}

MixtureModel waterfilled_model(const SapCatalog& catalog, const ChannelState& state) {
  return MixtureModel(catalog, allocate_powers_per_sap(state, catalog), state);
}

}  // namespace

PYBIND11_MODULE(_imtree, m) {
  m.doc() = "Binary-tree bit-to-pattern mapping and rate optimization for OFDM index modulation";

  py::register_exception<CapacityError>(m, "CapacityError", PyExc_RuntimeError);
  py::register_exception<SingularMatrixError>(m, "SingularMatrixError", PyExc_ArithmeticError);

  m.def(
      "reduced_tree_profiles",
      [](int v) {
        std::vector<std::vector<int>> out;
        for (const auto& t : construct_reduced_set(v).trees) out.push_back(t.profile.leaf_counts);
        return out;
      },
      py::arg("v"), "Leaf-count-per-depth profiles of the reduced tree set with v internal nodes.");
  m.def(
      "reduced_tree_counts",
      [](int v_max) {
        std::vector<std::size_t> out;
        for (const auto& s : construct_reduced_sets(v_max)) out.push_back(s.size());
        return out;
      },
      py::arg("v_max"));
  m.def("catalan", [](int v) { return to_py(catalan(v)); }, py::arg("v"));
  m.def("loose_bound", [](int v) { return to_py(loose_bound(v)); }, py::arg("v"));
  m.def(
      "tight_bound",
      [](int v_max) {
        py::list out;
        for (const auto& b : tight_bound_recurrence(v_max)) out.append(to_py(b));
        return out;
      },
      py::arg("v_max"), "Recurrence values indexed by v (entry 0 unused).");
  m.def(
      "feasible_set",
      [](int num_saps) {
        std::vector<std::vector<double>> out;
        for (const auto& p : build_feasible_set(num_saps)) out.push_back(p.to_doubles());
        return out;
      },
      py::arg("num_saps"));
  m.def("feasible_set_size", [](int num_saps) { return to_py(feasible_set_size(num_saps)); }, py::arg("num_saps"));

  m.def(
      "project",
      [](const std::vector<double>& p, const std::string& metric) {
        const auto r = project_to_feasible(p, parse_metric(metric));
        py::dict d;
        d["best"] = r.best.to_doubles();
        d["best_k"] = r.best_k;
        py::list cands;
        for (const auto& c : r.candidates) {
          py::dict e;
          e["k"] = c.k;
          e["vector"] = c.vector.to_doubles();
          e["distance"] = c.distance;
          cands.append(e);
        }
        d["candidates"] = cands;
        return d;
      },
      py::arg("p"), py::arg("metric") = "euclidean");
  m.def(
      "codebook",
      [](const std::vector<double>& p) {
        const auto book = codebook_from_probabilities(dyadic_from(p));
        std::map<int, std::string> out;
        for (const auto& e : book.entries()) out[e.sap] = e.code;
        return out;
      },
      py::arg("p"), "SAP -> codeword for a dyadic probability vector (zeros drop SAPs).");
  m.def(
      "encode",
      [](const std::vector<int>& bits, const std::vector<double>& p) {
        const auto book = codebook_from_probabilities(dyadic_from(p));
        std::vector<Bit> b(bits.begin(), bits.end());
        const auto r = encode(b, book);
        return py::make_tuple(r.saps, std::vector<int>(r.residue.begin(), r.residue.end()));
      },
      py::arg("bits"), py::arg("p"));

  m.def("exp_decay_gains", &exp_decay_gains, py::arg("n"), py::arg("eta"));
  m.def("waterfill",
        [](const std::vector<double>& gains, double noise_var, double budget) {
          return waterfill(gains, noise_var, budget);
        },
        py::arg("gains"), py::arg("noise_var"), py::arg("budget"));
  m.def(
      "sap_labels",
      [](int n, int k, bool full) {
        const SapCatalog cat(SystemConfig::make(n, k, full));
        std::vector<std::string> out;
        for (int i = 0; i < cat.size(); ++i) out.push_back(cat.label(i));
        return out;
      },
      py::arg("n"), py::arg("k"), py::arg("full_activation") = false);

  m.def(
      "mutual_information",
      [](int n, int k, const std::vector<double>& gains, double snr_db, std::optional<std::vector<double>> p,
         std::int64_t samples, std::uint64_t seed, int threads) {
        const SapCatalog cat(SystemConfig::make(n, k));
        const auto state = make_state(gains, snr_db, 1.0);
        const auto model = waterfilled_model(cat, state);
        const auto probs = p ? *p : std::vector<double>(cat.size(), 1.0 / cat.size());
        return mi_dict(mi_monte_carlo(probs, model, samples, seed, threads));
      },
      py::arg("n"), py::arg("k"), py::arg("gains"), py::arg("snr_db"), py::arg("p") = py::none(),
      py::arg("samples") = 100000, py::arg("seed") = 1, py::arg("threads") = 1,
      "Monte Carlo mutual information (nats) under per-pattern waterfilling; uniform p by default.");
  m.def(
      "bounds",
      [](int n, int k, const std::vector<double>& gains, double snr_db, std::optional<std::vector<double>> p) {
        const SapCatalog cat(SystemConfig::make(n, k));
        const auto state = make_state(gains, snr_db, 1.0);
        const auto model = waterfilled_model(cat, state);
        const auto probs = p ? *p : std::vector<double>(cat.size(), 1.0 / cat.size());
        py::dict d;
        d["jensen"] = jensen_lower_bound(probs, model);
        d["mu"] = upper_bound_mu(model);
        d["high_snr_probs"] = high_snr_probs(model);
        d["low_snr_probs"] = low_snr_probs(model).p;
        const auto mats = jensen_matrices(model);
        d["jensen_condition"] = mats.condition;
        d["jensen_singular"] = mats.singular;
        if (!mats.singular) d["jensen_probs"] = jensen_optimal_probs(model).p;
        return d;
      },
      py::arg("n"), py::arg("k"), py::arg("gains"), py::arg("snr_db"), py::arg("p") = py::none());
  m.def(
      "bcd",
      [](int n, int k, const std::vector<double>& gains, double snr_db, std::int64_t samples_per_sap,
         bool optimize_powers, std::uint64_t seed) {
        BcdOptions opts;
        opts.samples_per_sap = samples_per_sap;
        opts.final_samples = 4 * samples_per_sap;
        opts.optimize_powers = optimize_powers;
        opts.seed = seed;
        const auto r = bcd_optimize(make_state(gains, snr_db, 1.0), SystemConfig::make(n, k), opts);
        py::dict d = mi_dict(r.mi);
        d["p"] = r.p;
        d["rho"] = r.rho.matrix();
        d["cycles"] = r.cycles;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("n"), py::arg("k"), py::arg("gains"), py::arg("snr_db"), py::arg("samples_per_sap") = 20000,
      py::arg("optimize_powers") = true, py::arg("seed") = 1);
  m.def(
      "optimize",
      [](int n, int k, const std::vector<double>& gains, double snr_db, const std::string& method,
         const std::string& metric, const std::string& objective, std::int64_t samples, std::uint64_t seed) {
        const auto config = SystemConfig::make(n, k);
        const auto state = make_state(gains, snr_db, 1.0);
        py::dict d;
        if (method == "projected") {
          const auto r = solve_constrained_projected(state, config, parse_metric(metric), RelaxedSource::jensen,
                                                     samples, seed);
          d = mi_dict(r.mi);
          d["p"] = r.p.to_doubles();
          d["rho"] = r.rho.matrix();
          d["relaxed"] = r.relaxed;
          d["fell_back"] = r.fell_back;
        } else if (method == "enumerative") {
          ConstrainedOptions opts;
          opts.mode = parse_objective_mode(objective);
          opts.final_samples = samples;
          opts.seed = seed;
          const auto r = solve_constrained_enumerative(state, config, opts);
          d = mi_dict(r.mi);
          d["p"] = r.p.to_doubles();
          d["rho"] = r.rho.matrix();
          d["objective"] = std::string(objective_mode_name(r.mode_used));
        } else {
          throw std::invalid_argument("method must be projected or enumerative");
        }
        return d;
      },
      py::arg("n"), py::arg("k"), py::arg("gains"), py::arg("snr_db"), py::arg("method") = "projected",
      py::arg("metric") = "euclidean", py::arg("objective") = "auto", py::arg("samples") = 100000,
      py::arg("seed") = 1);
  m.def(
      "bler",
      [](int n, int k, const std::vector<double>& gains, const std::vector<double>& snr_db, const std::string& mode,
         const std::string& constellation, std::int64_t target_errors, std::int64_t max_blocks,
         std::uint64_t seed) {
        BlerExperiment ex{SystemConfig::make(n, k, n == k), gains, {}, Constellation::from_name(constellation),
                          parse_codebook_mode(mode)};
        BlerOptions opts;
        opts.target_errors = target_errors;
        opts.max_blocks = max_blocks;
        opts.seed = seed;
        py::list out;
        for (const auto& pt : run_bler(ex, snr_db, opts)) {
          py::dict d;
          d["snr_db"] = pt.snr_db;
          d["blocks"] = pt.blocks;
          d["block_errors"] = pt.block_errors;
          d["bler"] = pt.bler;
          d["ci"] = py::make_tuple(pt.ci_low, pt.ci_high);
          d["partial"] = pt.partial;
          d["design"] = pt.design.to_doubles();
          out.append(d);
        }
        return out;
      },
      py::arg("n"), py::arg("k"), py::arg("gains"), py::arg("snr_db"), py::arg("mode") = "condition_one",
      py::arg("constellation") = "bpsk", py::arg("target_errors") = 1000, py::arg("max_blocks") = 10'000'000,
      py::arg("seed") = 1);
}
