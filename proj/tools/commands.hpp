#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vice/vice.hpp"

namespace vice::cli {

inline constexpr int kSchemaVersion = 1;

struct PriorGrid {
  std::vector<double> pi_spike{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> sigma_spike{0.125, 0.25, 0.5, 1.0, 2.0};
  std::vector<double> sigma_slab{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
};

/// Everything a run needs. Loaded from a versioned JSON file, then
/// overridden by command-line flags.
struct RunConfig {
  // data
  std::string train_path;
  std::string val_path;   // empty: carve val_fraction out of the training file
  std::string test_path;  // optional
  std::size_t num_objects = 0;  // 0: infer from the largest index in the data files
  double val_fraction = 0.1;
  std::uint64_t split_seed = 0;

  Method method = Method::kVice;
  std::vector<std::uint64_t> seeds;
  std::string output = "out";
  std::size_t jobs = 1;

  TrainConfig train;
  double spose_lambda = 0.008;
  PriorGrid grid;

  std::size_t samples = 50;
  KlDirection kl_direction = KlDirection::kHumanToModel;
  double bound_alpha = 0.05;
  std::vector<double> deltas = default_delta_grid();
};

/// Parses a config document. Unknown or mistyped fields raise ConfigError
/// naming the field.
RunConfig config_from_json(const json& j);
json config_to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

/// Checks cross-field constraints; throws ConfigError.
void validate(const RunConfig& c);

/// Seeds to run: the configured list, else VICE_SEED, else 1..20.
std::vector<std::uint64_t> resolve_seeds(const std::vector<std::uint64_t>& configured);

/// All (pi, sigma_spike, sigma_slab) with sigma_spike < sigma_slab, in
/// lexicographic order.
std::vector<SpikeSlabPrior> expand_grid(const PriorGrid& g);

struct LoadedData {
  TripletDataset train;
  TripletDataset val;
  TripletDataset test;
};

LoadedData load_data(const RunConfig& c);

struct SeedResult {
  std::uint64_t seed = 0;
  double val_xent = 0.0;
  std::size_t selected_dims = 0;
};

int cmd_train(const RunConfig& c);
int cmd_grid(const RunConfig& c);

struct EvaluateArgs {
  std::string checkpoint;
  std::string test_path;
  std::size_t samples = 50;
  std::uint64_t seed = 1;
  KlDirection kl_direction = KlDirection::kHumanToModel;
  std::string output = ".";
};
int cmd_evaluate(const EvaluateArgs& a);

struct PruneArgs {
  std::string checkpoint;
  PruningOptions pruning;
  double mass_threshold = 0.5;
  std::string output = ".";
};
int cmd_prune(const PruneArgs& a);

struct BoundArgs {
  std::string checkpoint;
  std::string data_path;
  double alpha = 0.05;
  std::vector<double> deltas = default_delta_grid();
  PruningOptions pruning;
  double mass_threshold = 0.5;
  std::string output = ".";
};
int cmd_bound(const BoundArgs& a);

struct SimulateArgs {
  std::size_t num_objects = 30;
  std::size_t dims = 5;
  double sparsity = 0.8;
  std::size_t triplets = 20000;
  std::size_t test_triplets = 0;
  std::uint64_t seed = 1;
  std::string output = ".";
};
int cmd_simulate(const SimulateArgs& a);

struct ReportArgs {
  std::vector<std::string> checkpoints;
  std::string labels_path;
  std::size_t topk = 6;
  PruningOptions pruning;
  double mass_threshold = 0.5;
  std::string output = ".";
};
int cmd_report(const ReportArgs& a);

}  // namespace vice::cli
