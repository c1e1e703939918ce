#include "imtree/cli_commands.hpp"

#include "imtree/error.hpp"
#include "imtree/tree_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace imtree {

namespace {

double parse_double(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::string metadata_line(std::string_view invocation, std::optional<std::uint64_t> seed,
                          std::optional<int> threads) {
  std::string line = "# imtree " + std::string(kVersion) + " | invocation: " + std::string(invocation);
  if (seed) line += " | seed=" + std::to_string(*seed);
  if (threads) line += " | threads=" + std::to_string(*threads);
  return line + "\n";
}

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out + "\n";
}

std::string quoted(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

ChannelState state_for(const ChannelSpec& spec, double snr_db) {
  if (!spec.channel_file.empty()) {
    auto state = load_channel_state(spec.channel_file, snr_db, 1.0);
    state.noise_var = noise_var_from_snr_db(snr_db, static_cast<int>(state.gains.size()), state.power_budget);
    return state;
  }
  return ChannelState::from_snr_db(resolve_gains(spec), snr_db, 1.0);
}

}  // namespace

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    out.push_back(parse_double(piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> parse_snr_grid(std::string_view text) {
  if (text.find(':') == std::string_view::npos) {
    auto values = parse_number_list(text);
    if (values.empty()) throw std::invalid_argument("empty SNR grid");
    return values;
  }
  const auto first = text.find(':');
  const auto second = text.find(':', first + 1);
  if (second == std::string_view::npos || text.find(':', second + 1) != std::string_view::npos) {
    throw std::invalid_argument("SNR grid must look like start:step:stop");
  }
  const double start = parse_double(text.substr(0, first));
  const double step = parse_double(text.substr(first + 1, second - first - 1));
  const double stop = parse_double(text.substr(second + 1));
  if (!(step > 0.0)) throw std::invalid_argument("SNR grid step must be positive");
  if (stop < start) throw std::invalid_argument("SNR grid stop is below start");
  std::vector<double> out;
  const auto count = static_cast<std::int64_t>(std::floor((stop - start) / step + 1e-9));
  if (count > 100000) throw std::invalid_argument("SNR grid is too long");
  for (std::int64_t j = 0; j <= count; ++j) out.push_back(start + static_cast<double>(j) * step);
  return out;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

SystemConfig make_config(const ChannelSpec& spec) {
  return SystemConfig::make(spec.n, spec.k, spec.full_activation);
}

std::vector<double> resolve_gains(const ChannelSpec& spec) {
  if (!spec.channel_file.empty()) return load_channel_state(spec.channel_file).gains;
  if (!spec.gains.empty()) {
    if (static_cast<int>(spec.gains.size()) != spec.n) throw std::invalid_argument("--gains needs exactly N values");
    return spec.gains;
  }
  return exp_decay_gains(spec.n, spec.eta);
}

// ---------------------------------------------------------------------------

CommandResult cmd_trees(const TreesSpec& spec) {
  if (spec.v_max < 1) throw std::invalid_argument("v_max must be at least 1");
  if (spec.v_max > kTreesGuard && !spec.force) {
    throw CapacityError("v_max above " + std::to_string(kTreesGuard) + " needs --force");
  }
  CommandResult result;
  if (spec.json) {
    result.output = construct_reduced_set(spec.v_max).to_json() + "\n";
    return result;
  }
  const auto sets = construct_reduced_sets(spec.v_max);
  const auto tight = tight_bound_recurrence(spec.v_max);
  std::ostringstream out;
  out << "v,T_v,loose_bound,tight_bound,catalan\n";
  for (int v = 1; v <= spec.v_max; ++v) {
    out << v << ',' << sets[v - 1].size() << ',' << loose_bound(v).str() << ',' << tight[v].str() << ','
        << catalan(v).str() << '\n';
  }
  out << metadata_line(spec.invocation, std::nullopt, std::nullopt);
  result.output = out.str();
  return result;
}

CommandResult cmd_project(const ProjectSpec& spec) {
  std::vector<DistanceMetric> metrics;
  if (spec.metric) {
    metrics.push_back(*spec.metric);
  } else {
    metrics = {DistanceMetric::euclidean, DistanceMetric::kl, DistanceMetric::tv};
  }
  std::ostringstream out;
  out << "metric,k,candidate,distance,winner\n";
  for (auto metric : metrics) {
    const auto result = project_to_feasible(spec.probs, metric);
    for (const auto& cand : result.candidates) {
      out << join({std::string(metric_name(metric)), std::to_string(cand.k), quoted(cand.vector.to_string()),
                   format_number(cand.distance), cand.k == result.best_k ? "1" : "0"});
    }
  }
  out << metadata_line(spec.invocation, std::nullopt, std::nullopt);
  return {out.str(), kExitOk};
}

CommandResult cmd_mi_curve(const MiCurveSpec& spec) {
  if (spec.snr_db.empty()) throw std::invalid_argument("SNR grid is empty");
  std::vector<std::string> methods;
  for (const auto& m : spec.methods) {
    if (m == "all") {
      methods.insert(methods.end(), kMiMethods.begin(), kMiMethods.end());
    } else if (std::find(kMiMethods.begin(), kMiMethods.end(), m) != kMiMethods.end()) {
      methods.push_back(m);
    } else {
      throw std::invalid_argument("unknown method tag '" + m + "'");
    }
  }
  if (methods.empty()) throw std::invalid_argument("no methods requested");
  const SystemConfig config = make_config(spec.channel);
  const SapCatalog catalog(config);

  CommandResult result;
  std::ostringstream out;
  out << "snr_db,method,mi_nats,std_err,samples,seed,flag\n";
  for (double snr : spec.snr_db) {
    const ChannelState state = state_for(spec.channel, snr);
    const PowerMatrix rho = allocate_powers_per_sap(state, catalog);
    const MixtureModel model(catalog, rho, state);
    const int c = catalog.size();
    for (const auto& method : methods) {
      double value = 0.0;
      double err = 0.0;
      std::int64_t samples = 0;
      std::string flag;
      auto estimate = [&](std::span<const double> p, const MixtureModel& m) {
        const auto est = mi_monte_carlo(p, m, spec.samples, spec.seed, spec.threads);
        value = est.value;
        err = est.std_error;
        samples = est.samples;
      };
      if (method == "mc") {
        estimate(std::vector<double>(c, 1.0 / c), model);
      } else if (method == "jensen" || method == "jensen_opt") {
        try {
          const auto sol = jensen_optimal_probs(model);
          if (method == "jensen") {
            value = jensen_lower_bound(sol.p, model);
          } else {
            estimate(sol.p, model);
          }
        } catch (const SingularMatrixError&) {
          value = std::nan("");
          flag = "singular";
          result.exit_code = kExitPartial;
        }
      } else if (method == "high_snr") {
        estimate(high_snr_probs(model), model);
      } else if (method == "low_snr") {
        estimate(low_snr_probs(model).p, model);
      } else if (method == "upper") {
        value = upper_bound_mu(model);
      } else if (method == "enumerative") {
        ConstrainedOptions opts;
        opts.mode = spec.enumerative_mode;
        opts.final_samples = spec.samples;
        opts.seed = spec.seed;
        opts.threads = spec.threads;
        const auto sol = solve_constrained_enumerative(state, config, opts);
        value = sol.mi.value;
        err = sol.mi.std_error;
        samples = sol.mi.samples;
      } else if (method.starts_with("projected_")) {
        const auto metric = parse_metric(std::string_view(method).substr(10));
        const auto sol = solve_constrained_projected(state, config, metric, RelaxedSource::high_snr, spec.samples,
                                                     spec.seed, spec.threads);
        value = sol.mi.value;
        err = sol.mi.std_error;
        samples = sol.mi.samples;
      } else if (method == "benchmark") {
        const auto design = benchmark_design(catalog, state.power_budget);
        estimate(design.p, MixtureModel(catalog, design.rho, state));
      }
      out << join({format_number(snr), method, format_number(value), format_number(err), std::to_string(samples),
                   std::to_string(spec.seed), flag});
    }
  }
  out << metadata_line(spec.invocation, spec.seed, spec.threads);
  result.output = out.str();
  return result;
}

CommandResult cmd_bler(const BlerSpec& spec) {
  if (spec.snr_db.empty()) throw std::invalid_argument("SNR grid is empty");
  BlerExperiment experiment{make_config(spec.channel), resolve_gains(spec.channel), spec.phases,
                            Constellation::from_name(spec.constellation), CodebookMode::condition_one};
  BlerOptions options;
  options.target_errors = spec.target_errors;
  options.max_blocks = spec.max_blocks;
  options.seed = spec.seed;
  options.threads = spec.threads;
  const auto modes = spec.modes.empty() ? std::vector<CodebookMode>{CodebookMode::condition_one,
                                                                    CodebookMode::condition_two,
                                                                    CodebookMode::benchmark}
                                        : spec.modes;
  CommandResult result;
  std::ostringstream out;
  out << "snr_db,mode,constellation,blocks,block_errors,bler,ci_low,ci_high,seed,flag\n";
  for (auto mode : modes) {
    experiment.mode = mode;
    for (const auto& pt : run_bler(experiment, spec.snr_db, options)) {
      if (pt.partial) result.exit_code = kExitPartial;
      out << join({format_number(pt.snr_db), std::string(codebook_mode_name(mode)), spec.constellation,
                   std::to_string(pt.blocks), std::to_string(pt.block_errors), format_number(pt.bler),
                   format_number(pt.ci_low), format_number(pt.ci_high), std::to_string(pt.seed),
                   pt.partial ? "partial" : ""});
    }
  }
  out << metadata_line(spec.invocation, spec.seed, spec.threads);
  result.output = out.str();
  return result;
}

CommandResult cmd_optimize(const OptimizeSpec& spec) {
  const SystemConfig config = make_config(spec.channel);
  const SapCatalog catalog(config);
  const ChannelState state = state_for(spec.channel, spec.snr_db);
  DyadicProbabilityVector p;
  PowerMatrix rho;
  MiEstimate mi;
  std::string detail;
  if (spec.method == "projected") {
    const auto sol = solve_constrained_projected(state, config, spec.metric, spec.source, spec.samples, spec.seed,
                                                 spec.threads);
    p = sol.p;
    rho = sol.rho;
    mi = sol.mi;
    detail = "metric=" + std::string(metric_name(spec.metric)) + " k=" + std::to_string(sol.best_k);
    if (sol.fell_back) detail += " relaxed=fallback (Jensen matrix singular)";
  } else if (spec.method == "enumerative") {
    ConstrainedOptions opts;
    opts.mode = spec.mode;
    opts.final_samples = spec.samples;
    opts.seed = spec.seed;
    opts.threads = spec.threads;
    const auto sol = solve_constrained_enumerative(state, config, opts);
    p = sol.p;
    rho = sol.rho;
    mi = sol.mi;
    detail = "objective=" + std::string(objective_mode_name(sol.mode_used)) +
             " candidates=" + std::to_string(sol.candidates_evaluated);
  } else {
    throw std::invalid_argument("unknown optimize method '" + spec.method + "'");
  }

  std::ostringstream out;
  std::vector<std::string> header = {"sap", "pattern", "probability"};
  for (int l = 1; l <= config.n; ++l) header.push_back("rho_" + std::to_string(l));
  out << join(header);
  for (int i = 0; i < catalog.size(); ++i) {
    const int e = p.exponent(i);
    std::vector<std::string> row = {std::to_string(i + 1), quoted(catalog.label(i)),
                                    e == DyadicProbabilityVector::kZero ? "0" : "1/" + std::to_string(1LL << e)};
    for (int l = 0; l < config.n; ++l) row.push_back(format_number(rho(i, l)));
    out << join(row);
  }
  out << "# method=" << spec.method << " snr_db=" << format_number(spec.snr_db) << ' ' << detail
      << " mi_nats=" << format_number(mi.value) << " std_err=" << format_number(mi.std_error)
      << " samples=" << mi.samples << '\n';
  out << metadata_line(spec.invocation, spec.seed, spec.threads);

  if (!spec.codebook_out.empty()) {
    std::ofstream file(spec.codebook_out);
    if (!file) throw std::runtime_error("cannot write " + spec.codebook_out);
    file << codebook_from_probabilities(p).to_json() << '\n';
  }
  return {out.str(), kExitOk};
}

}  // namespace imtree
