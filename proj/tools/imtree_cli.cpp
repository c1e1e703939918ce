// Command-line driver: trees, project, mi-curve, bler, optimize.

#include "imtree/cli_commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

std::string invocation_string(int argc, char** argv) {
  std::string out = "imtree";
  for (int i = 1; i < argc; ++i) {
    out += ' ';
    out += argv[i];
  }
  return out;
}

struct ChannelFlags {
  int n = 4;
  int k = 2;
  bool full = false;
  double eta = 1.0;
  std::string gains;
  std::string channel;

  void attach(CLI::App* app) {
    app->add_option("--n", n, "Subcarriers per group")->capture_default_str();
    app->add_option("--k", k, "Active subcarriers per pattern")->capture_default_str();
    app->add_flag("--full-activation", full, "Allow K == N (conventional OFDM)");
    app->add_option("--eta", eta, "Exponential gain decay, g_l = eta^(l-1)")->capture_default_str();
    app->add_option("--gains", gains, "Comma separated linear gains (overrides --eta)");
    app->add_option("--channel", channel, "Channel file (.json or .csv) with gains and phases");
  }

  imtree::ChannelSpec spec() const {
    imtree::ChannelSpec out;
    out.n = n;
    out.k = k;
    out.full_activation = full;
    out.eta = eta;
    if (!gains.empty()) out.gains = imtree::parse_number_list(gains);
    out.channel_file = channel;
    return out;
  }
};

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    out.push_back(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary-tree rate optimization for OFDM index modulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(imtree::kVersion));
  std::string out_path;
  app.add_option("--out", out_path, "Write output here instead of stdout");

  // trees
  auto* trees = app.add_subcommand("trees", "Reduced tree counts and bounds");
  imtree::TreesSpec trees_spec;
  trees->add_option("--v-max", trees_spec.v_max, "Largest number of internal nodes")->capture_default_str();
  trees->add_flag("--force", trees_spec.force, "Allow v_max above the guard");
  trees->add_flag("--json", trees_spec.json, "Print the reduced tree set for v_max as JSON");
  trees->add_option("--out", out_path, "Output file");

  // project
  auto* project = app.add_subcommand("project", "Project a probability vector onto the feasible set");
  std::string probs;
  std::string project_metric = "all";
  project->add_option("--probs", probs, "Comma separated probabilities")->required();
  project->add_option("--metric", project_metric, "euclidean, kl, tv or all")->capture_default_str();
  project->add_option("--out", out_path, "Output file");

  // mi-curve
  auto* mi = app.add_subcommand("mi-curve", "Mutual information versus SNR");
  ChannelFlags mi_channel;
  mi_channel.attach(mi);
  std::string mi_grid = "-10:10:30";
  std::string mi_methods = "all";
  std::string enum_mode = "auto";
  imtree::MiCurveSpec mi_spec;
  mi->add_option("--snr-db", mi_grid, "start:step:stop or list, dB")->capture_default_str();
  mi->add_option("--methods", mi_methods, "Comma separated method tags or all")->capture_default_str();
  mi->add_option("--samples", mi_spec.samples, "Monte Carlo samples per estimate")->capture_default_str();
  mi->add_option("--seed", mi_spec.seed, "Random seed")->capture_default_str();
  mi->add_option("--threads", mi_spec.threads, "Worker threads")->capture_default_str();
  mi->add_option("--objective", enum_mode, "Enumerative objective: auto, high_snr, low_snr, mc")
      ->capture_default_str();
  mi->add_option("--out", out_path, "Output file");

  // bler
  auto* bler = app.add_subcommand("bler", "Block error rate versus SNR");
  ChannelFlags bler_channel;
  bler_channel.eta = 0.2;
  bler_channel.attach(bler);
  std::string bler_grid = "0:5:25";
  std::string bler_modes = "condition_one,condition_two,benchmark";
  imtree::BlerSpec bler_spec;
  std::string phases;
  bler->add_option("--snr-db", bler_grid, "start:step:stop or list, dB")->capture_default_str();
  bler->add_option("--modes", bler_modes, "condition_one, condition_two, benchmark")->capture_default_str();
  bler->add_option("--constellation", bler_spec.constellation, "bpsk or qpsk")->capture_default_str();
  bler->add_option("--target-errors", bler_spec.target_errors, "Block errors per SNR point")->capture_default_str();
  bler->add_option("--max-blocks", bler_spec.max_blocks, "Block cap per SNR point")->capture_default_str();
  bler->add_option("--phases", phases, "Comma separated channel phases in radians");
  bler->add_option("--seed", bler_spec.seed, "Random seed")->capture_default_str();
  bler->add_option("--threads", bler_spec.threads, "Worker threads")->capture_default_str();
  bler->add_option("--out", out_path, "Output file");

  // optimize
  auto* optimize = app.add_subcommand("optimize", "Constrained SAP probabilities and powers at one SNR");
  ChannelFlags opt_channel;
  opt_channel.attach(optimize);
  imtree::OptimizeSpec opt_spec;
  std::string opt_metric = "euclidean";
  std::string relaxed = "high_snr";
  std::string opt_mode = "auto";
  optimize->add_option("--snr-db", opt_spec.snr_db, "SNR in dB")->capture_default_str();
  optimize->add_option("--method", opt_spec.method, "projected or enumerative")->capture_default_str();
  optimize->add_option("--metric", opt_metric, "Projection metric")->capture_default_str();
  optimize->add_option("--relaxed", relaxed, "Relaxed source for projection: high_snr or jensen")
      ->capture_default_str();
  optimize->add_option("--objective", opt_mode, "Enumerative objective: auto, high_snr, low_snr, mc")
      ->capture_default_str();
  optimize->add_option("--samples", opt_spec.samples, "Monte Carlo samples")->capture_default_str();
  optimize->add_option("--seed", opt_spec.seed, "Random seed")->capture_default_str();
  optimize->add_option("--threads", opt_spec.threads, "Worker threads")->capture_default_str();
  optimize->add_option("--codebook-out", opt_spec.codebook_out, "Write the bit-to-SAP codebook as JSON");
  optimize->add_option("--out", out_path, "Output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string invocation = invocation_string(argc, argv);
  imtree::CommandResult result;
  try {
    if (*trees) {
      trees_spec.invocation = invocation;
      result = imtree::cmd_trees(trees_spec);
    } else if (*project) {
      imtree::ProjectSpec spec;
      spec.probs = imtree::parse_number_list(probs);
      if (project_metric != "all") spec.metric = imtree::parse_metric(project_metric);
      spec.invocation = invocation;
      result = imtree::cmd_project(spec);
    } else if (*mi) {
      mi_spec.channel = mi_channel.spec();
      mi_spec.snr_db = imtree::parse_snr_grid(mi_grid);
      mi_spec.methods = split(mi_methods);
      mi_spec.enumerative_mode = imtree::parse_objective_mode(enum_mode);
      mi_spec.invocation = invocation;
      result = imtree::cmd_mi_curve(mi_spec);
    } else if (*bler) {
      bler_spec.channel = bler_channel.spec();
      bler_spec.snr_db = imtree::parse_snr_grid(bler_grid);
      for (const auto& m : split(bler_modes)) bler_spec.modes.push_back(imtree::parse_codebook_mode(m));
      if (!phases.empty()) bler_spec.phases = imtree::parse_number_list(phases);
      bler_spec.invocation = invocation;
      result = imtree::cmd_bler(bler_spec);
    } else if (*optimize) {
      opt_spec.channel = opt_channel.spec();
      opt_spec.metric = imtree::parse_metric(opt_metric);
      if (relaxed == "jensen") {
        opt_spec.source = imtree::RelaxedSource::jensen;
      } else if (relaxed != "high_snr") {
        throw std::invalid_argument("--relaxed must be high_snr or jensen");
      }
      opt_spec.mode = imtree::parse_objective_mode(opt_mode);
      opt_spec.invocation = invocation;
      result = imtree::cmd_optimize(opt_spec);
    }
  } catch (const std::exception& e) {
    std::cerr << "imtree: " << e.what() << '\n';
    return imtree::kExitError;
  }

  if (out_path.empty()) {
    std::cout << result.output;
  } else {
    std::ofstream file(out_path, std::ios::binary);
    if (!file) {
      std::cerr << "imtree: cannot write " << out_path << '\n';
      return imtree::kExitError;
    }
    file << result.output;
  }
  return result.exit_code;
}
