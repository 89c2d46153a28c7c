// vice: train, select, evaluate and bound sparse concept embeddings from
// triplet odd-one-out data.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// divergence.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "commands.hpp"

namespace {

using namespace vice;
using namespace vice::cli;

std::uint64_t default_seed() {
  const auto seeds = resolve_seeds({});
  return seeds.size() == 1 ? seeds.front() : 1;
}

/// Flags shared by `train` and `grid`; each overrides the config file only
/// when given.
struct RunFlags {
  std::string config;
  std::optional<std::string> train, val, test, output, method, kl_direction;
  std::optional<std::size_t> num_objects, jobs, epochs, batch_size, d_init, window, samples;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::optional<double> lambda, pi_spike, sigma_spike, sigma_slab, alpha, fdr_alpha, learning_rate, val_fraction;
  bool no_early_stop = false;
  bool bh_only = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "JSON run configuration");
    cmd->add_option("--train", train, "training triplets");
    cmd->add_option("--val", val, "validation triplets (default: split off the training file)");
    cmd->add_option("--val-fraction", val_fraction, "fraction held out when no validation file is given");
    cmd->add_option("--test", test, "test triplets, possibly with repeats");
    cmd->add_option("--num-objects", num_objects, "number of objects (default: inferred)");
    cmd->add_option("--method", method, "vice or spose");
    cmd->add_option("--seed", seed, "single seed");
    cmd->add_option("--seeds", seeds, "seed list")->delimiter(',');
    cmd->add_option("-o,--output", output, "output directory");
    cmd->add_option("-j,--jobs", jobs, "parallel workers");
    cmd->add_option("--epochs", epochs, "maximum epochs");
    cmd->add_option("--batch-size", batch_size, "triplets per batch");
    cmd->add_option("--d-init", d_init, "initial dimensionality");
    cmd->add_option("--window", window, "representational stability window L");
    cmd->add_flag("--no-early-stop", no_early_stop, "run all epochs even after convergence");
    cmd->add_option("--learning-rate", learning_rate, "Adam step size");
    cmd->add_option("--lambda", lambda, "SPoSE l1 strength");
    cmd->add_option("--pi-spike", pi_spike, "prior spike weight");
    cmd->add_option("--sigma-spike", sigma_spike, "prior spike scale");
    cmd->add_option("--sigma-slab", sigma_slab, "prior slab scale");
    cmd->add_option("--fdr-alpha", fdr_alpha, "FDR level for dimension selection");
    cmd->add_flag("--bh-only", bh_only, "count BH rejections without the posterior filter");
    cmd->add_option("--samples", samples, "Monte Carlo samples for evaluation");
    cmd->add_option("--kl-direction", kl_direction, "human-model or model-human");
    cmd->add_option("--alpha", alpha, "bound error rate");
  }

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    if (train) c.train_path = *train;
    if (val) c.val_path = *val;
    if (val_fraction) c.val_fraction = *val_fraction;
    if (test) c.test_path = *test;
    if (num_objects) c.num_objects = *num_objects;
    if (method) c.method = method_from_string(*method);
    if (seed) c.seeds = {*seed};
    if (!seeds.empty()) c.seeds = seeds;
    if (output) c.output = *output;
    if (jobs) c.jobs = *jobs;
    if (epochs) c.train.max_epochs = *epochs;
    if (batch_size) c.train.batch_size = *batch_size;
    if (d_init) c.train.d_init = *d_init;
    if (window) c.train.stability_window = *window;
    if (no_early_stop) c.train.stop_on_convergence = false;
    if (learning_rate) c.train.adam.eta = *learning_rate;
    if (lambda) c.spose_lambda = *lambda;
    if (pi_spike) c.train.prior.pi_spike = *pi_spike;
    if (sigma_spike) c.train.prior.sigma_spike = *sigma_spike;
    if (sigma_slab) c.train.prior.sigma_slab = *sigma_slab;
    if (fdr_alpha) c.train.pruning.alpha = *fdr_alpha;
    if (bh_only) c.train.pruning.bh_only = true;
    if (samples) c.samples = *samples;
    if (kl_direction) {
      if (*kl_direction == "human-model") c.kl_direction = KlDirection::kHumanToModel;
      else if (*kl_direction == "model-human") c.kl_direction = KlDirection::kModelToHuman;
      else throw ConfigError("--kl-direction must be human-model or model-human");
    }
    if (alpha) c.bound_alpha = *alpha;
    return c;
  }
};

struct SelectionFlags {
  PruningOptions pruning;
  double mass_threshold = 0.5;

  void attach(CLI::App* cmd) {
    cmd->add_option("--fdr-alpha", pruning.alpha, "FDR level")->capture_default_str();
    cmd->add_option("--reliability-threshold", pruning.reliability_threshold,
                    "keep dimensions with more significant objects than this")
        ->capture_default_str();
    cmd->add_flag("--bh-only", pruning.bh_only, "count BH rejections without the posterior filter");
    cmd->add_option("--mass-threshold", mass_threshold, "l1 mass cut-off for SPoSE checkpoints")->capture_default_str();
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Sparse concept embeddings from triplet odd-one-out judgments"};
  app.require_subcommand(1);

  RunFlags train_flags, grid_flags;
  auto* train = app.add_subcommand("train", "train one model per seed");
  train_flags.attach(train);
  auto* grid = app.add_subcommand("grid", "search the spike-and-slab prior by validation cross-entropy");
  grid_flags.attach(grid);

  EvaluateArgs eval_args;
  eval_args.seed = default_seed();
  std::string kl = "human-model";
  auto* evaluate = app.add_subcommand("evaluate", "accuracy, ceiling and KL on a test set");
  evaluate->add_option("--checkpoint", eval_args.checkpoint)->required();
  evaluate->add_option("--test", eval_args.test_path)->required();
  evaluate->add_option("--samples", eval_args.samples, "Monte Carlo samples")->capture_default_str();
  evaluate->add_option("--seed", eval_args.seed)->capture_default_str();
  evaluate->add_option("--kl-direction", kl, "human-model or model-human")->capture_default_str();
  evaluate->add_option("-o,--output", eval_args.output)->capture_default_str();

  PruneArgs prune_args;
  SelectionFlags prune_sel;
  auto* prune = app.add_subcommand("prune", "select dimensions and export the pruned embedding");
  prune->add_option("--checkpoint", prune_args.checkpoint)->required();
  prune->add_option("-o,--output", prune_args.output)->capture_default_str();
  prune_sel.attach(prune);

  BoundArgs bound_args;
  SelectionFlags bound_sel;
  auto* bound = app.add_subcommand("bound", "generalization bound of the pruned mean embedding");
  bound->add_option("--checkpoint", bound_args.checkpoint)->required();
  bound->add_option("--data", bound_args.data_path, "triplets the model was trained on")->required();
  bound->add_option("--alpha", bound_args.alpha, "probability that the bound fails")->capture_default_str();
  bound->add_option("--deltas", bound_args.deltas, "quantization scales")->delimiter(',');
  bound->add_option("-o,--output", bound_args.output)->capture_default_str();
  bound_sel.attach(bound);

  SimulateArgs sim_args;
  sim_args.seed = default_seed();
  auto* simulate = app.add_subcommand("simulate", "sample triplets from a sparse ground-truth embedding");
  simulate->add_option("--objects", sim_args.num_objects)->capture_default_str();
  simulate->add_option("--dims", sim_args.dims)->capture_default_str();
  simulate->add_option("--sparsity", sim_args.sparsity)->capture_default_str();
  simulate->add_option("--triplets", sim_args.triplets)->capture_default_str();
  simulate->add_option("--test-triplets", sim_args.test_triplets)->capture_default_str();
  simulate->add_option("--seed", sim_args.seed)->capture_default_str();
  simulate->add_option("-o,--output", sim_args.output)->capture_default_str();

  ReportArgs report_args;
  SelectionFlags report_sel;
  auto* report = app.add_subcommand("report", "top-k objects per dimension and cross-run reproducibility");
  report->add_option("--checkpoint", report_args.checkpoints, "one or more checkpoints")->required();
  report->add_option("--labels", report_args.labels_path, "one label per line");
  report->add_option("--topk", report_args.topk)->capture_default_str();
  report->add_option("-o,--output", report_args.output)->capture_default_str();
  report_sel.attach(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*train) return cmd_train(train_flags.resolve());
  if (*grid) return cmd_grid(grid_flags.resolve());
  if (*evaluate) {
    if (kl == "human-model") eval_args.kl_direction = KlDirection::kHumanToModel;
    else if (kl == "model-human") eval_args.kl_direction = KlDirection::kModelToHuman;
    else throw ConfigError("--kl-direction must be human-model or model-human");
    return cmd_evaluate(eval_args);
  }
  if (*prune) {
    prune_args.pruning = prune_sel.pruning;
    prune_args.mass_threshold = prune_sel.mass_threshold;
    return cmd_prune(prune_args);
  }
  if (*bound) {
    bound_args.pruning = bound_sel.pruning;
    bound_args.mass_threshold = bound_sel.mass_threshold;
    return cmd_bound(bound_args);
  }
  if (*simulate) return cmd_simulate(sim_args);
  report_args.pruning = report_sel.pruning;
  report_args.mass_threshold = report_sel.mass_threshold;
  return cmd_report(report_args);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const vice::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const vice::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const vice::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
