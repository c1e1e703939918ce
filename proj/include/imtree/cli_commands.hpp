#pragma once

// Subcommand implementations behind the `imtree` executable. Each returns the
// full CSV text (header, rows, trailing metadata comment) and an exit code so
// that tests can drive them without spawning processes.

#include "imtree/link_sim.hpp"
#include "imtree/mapping.hpp"
#include "imtree/rate_opt.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace imtree {

inline constexpr std::string_view kVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitPartial = 3;

struct CommandResult {
  std::string output;
  int exit_code = kExitOk;
};

// "start:step:stop" (stop included when it lands on the grid), a single value,
// or a comma separated list.
std::vector<double> parse_snr_grid(std::string_view text);
std::vector<double> parse_number_list(std::string_view text);

// Shortest round-trip decimal for doubles, "nan"/"inf" for non-finite values.
std::string format_number(double value);

struct ChannelSpec {
  int n = 4;
  int k = 2;
  bool full_activation = false;
  double eta = 1.0;
  std::vector<double> gains;  // overrides eta when nonempty
  std::string channel_file;   // overrides both when nonempty
};

SystemConfig make_config(const ChannelSpec& spec);
std::vector<double> resolve_gains(const ChannelSpec& spec);

struct TreesSpec {
  int v_max = 20;
  bool force = false;
  bool json = false;  // emit the reduced tree set for v_max instead of the table
  std::string invocation;
};

inline constexpr int kTreesGuard = 20;

struct ProjectSpec {
  std::vector<double> probs;
  std::optional<DistanceMetric> metric;  // all three when empty
  std::string invocation;
};

inline const std::vector<std::string> kMiMethods = {
    "mc",      "jensen",      "jensen_opt",          "high_snr",           "low_snr",           "upper",
    "enumerative", "projected_euclidean", "projected_kl", "projected_tv", "benchmark"};

struct MiCurveSpec {
  ChannelSpec channel;
  std::vector<double> snr_db;
  std::vector<std::string> methods;  // "all" expands to every tag
  std::int64_t samples = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
  ObjectiveMode enumerative_mode = ObjectiveMode::automatic;
  std::string invocation;
};

struct BlerSpec {
  ChannelSpec channel;
  std::vector<double> snr_db;
  std::vector<CodebookMode> modes;
  std::string constellation = "bpsk";
  std::int64_t target_errors = 1000;
  std::int64_t max_blocks = 10'000'000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::vector<double> phases;
  std::string invocation;
};

struct OptimizeSpec {
  ChannelSpec channel;
  double snr_db = 10.0;
  std::string method = "projected";  // projected | enumerative
  DistanceMetric metric = DistanceMetric::euclidean;
  RelaxedSource source = RelaxedSource::high_snr;
  ObjectiveMode mode = ObjectiveMode::automatic;
  std::int64_t samples = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string codebook_out;
  std::string invocation;
};

CommandResult cmd_trees(const TreesSpec& spec);
CommandResult cmd_project(const ProjectSpec& spec);
CommandResult cmd_mi_curve(const MiCurveSpec& spec);
CommandResult cmd_bler(const BlerSpec& spec);
CommandResult cmd_optimize(const OptimizeSpec& spec);

}  // namespace imtree
