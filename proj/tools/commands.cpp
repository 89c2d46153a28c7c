#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <type_traits>

namespace vice::cli {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Strict JSON field reader

class Fields {
 public:
  Fields(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError("config field '" + label() + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_->find(key);
    if (it == j_->end()) return;
    const std::string name = qualified(key);
    if (!type_matches<T>(*it)) throw ConfigError("config field '" + name + "': expected " + type_name<T>());
    out = it->template get<T>();
  }

  Fields section(const char* key) {
    seen_.insert(key);
    const auto it = j_->find(key);
    static const json empty = json::object();
    return Fields(it == j_->end() ? empty : *it, qualified(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_->items())
      if (!seen_.count(k)) throw ConfigError("unknown config field '" + qualified(k) + "'");
  }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  static bool type_matches(const json& v) {
    if constexpr (std::is_same_v<T, bool>) {
      return v.is_boolean();
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      return v.is_number_unsigned();
    } else if constexpr (std::is_integral_v<T>) {
      return v.is_number_integer();
    } else if constexpr (std::is_floating_point_v<T>) {
      return v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
      return v.is_string();
    } else {
      if (!v.is_array()) return false;
      return std::all_of(v.begin(), v.end(), [](const json& e) { return type_matches<typename T::value_type>(e); });
    }
  }

  template <typename T>
  static std::string type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) return "a non-negative integer";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else if constexpr (std::is_floating_point_v<typename T::value_type>) return "an array of numbers";
    else return "an array of non-negative integers";
  }

  const json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string kl_to_string(KlDirection d) { return d == KlDirection::kHumanToModel ? "human-model" : "model-human"; }

KlDirection kl_from_string(const std::string& s) {
  if (s == "human-model") return KlDirection::kHumanToModel;
  if (s == "model-human") return KlDirection::kModelToHuman;
  throw ConfigError("unknown KL direction '" + s + "' (expected human-model or model-human)");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent generator seed for sub-stream `stream` of `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) { return splitmix64(seed ^ splitmix64(stream)); }

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void write_metadata(const fs::path& dir, const std::string& command) {
  write_text(dir / "metadata.json",
             json{{"command", command}, {"created", iso_timestamp()}, {"schema_version", kSchemaVersion}}.dump(1) + "\n");
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// Runs f(0..n-1) on up to `jobs` threads. The first failure by index is
/// rethrown after all workers finish.
template <typename F>
void parallel_for(std::size_t n, std::size_t jobs, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::mutex log_mutex;

void note(const std::string& line) {
  std::lock_guard lock(log_mutex);
  std::cerr << line << std::endl;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

TripletDataset with_objects(const TripletDataset& d, std::size_t m) { return TripletDataset(d.records(), m); }

std::size_t max_index(const TripletDataset& d) {
  std::size_t top = 0;
  for (const auto& r : d.records()) top = std::max<std::size_t>({top, r.first, r.second, r.odd});
  return top;
}

TripletDataset read_triplets(const std::string& path, std::size_t num_objects) {
  if (!fs::exists(path)) throw DataError("no such triplet file '" + path + "'");
  return parse_dataset(path, num_objects == 0 ? std::numeric_limits<ObjectIndex>::max() : num_objects);
}

struct Selection {
  PrunedEmbedding pruned;
  std::string csv;
};

Selection select_and_prune(const Checkpoint& ck, const PruningOptions& opt, double mass_threshold) {
  if (ck.method == Method::kVice) {
    const auto sel = select_dimensions(ck.vice, opt);
    return {prune(ck.vice, sel), selection_csv(sel)};
  }
  const auto sel = select_dimensions_by_mass(ck.spose.x, mass_threshold);
  return {prune_by_mass(ck.spose.x, sel), mass_selection_csv(sel)};
}

json evaluate_checkpoint(const Checkpoint& ck, const TripletDataset& test, std::size_t samples, std::uint64_t seed,
                         KlDirection direction) {
  const auto dists = aggregate_repeats(test);
  std::vector<PairSlot> preds;
  std::vector<PredictiveDistribution> model;
  std::size_t used_samples = 0;
  if (ck.method == Method::kVice) {
    const MonteCarloPredictor mc(ck.vice, samples, seed);
    used_samples = samples;
    preds = predict_all(mc, test);
    for (const auto& d : dists) model.push_back(mc.predict(d.triplet));
  } else {
    preds = predict_all(ck.spose.x, test);
    for (const auto& d : dists) model.push_back(predict_deterministic(ck.spose.x, d.triplet));
  }
  json out;
  out["accuracy"] = accuracy(preds, test);
  out["ceiling"] = accuracy_ceiling(dists);
  out["mean_kl"] = mean_kl(model, dists, direction);
  out["n_triplets"] = test.size();
  out["R"] = used_samples;
  out["seed"] = seed;
  return out;
}

std::string bound_csv_text(const BoundReport& rep) {
  std::ostringstream out;
  write_bound_csv(out, rep);
  return out.str();
}

json bound_json(const BoundReport& rep) {
  const auto row = [](const BoundRow& r) {
    return json{{"delta", r.delta}, {"k", r.k}, {"empirical_error", r.empirical_error},
                {"epsilon", r.epsilon}, {"upper_bound", r.upper_bound}};
  };
  return {{"best", row(rep.best)},   {"alpha", rep.alpha},         {"delta_confidence", rep.delta_confidence},
          {"max_value", rep.max_value}, {"num_objects", rep.num_objects}, {"dims", rep.dims},
          {"n", rep.n},              {"warnings", rep.warnings}};
}

BoundReport bound_for(const Checkpoint& ck, const TripletDataset& data, const std::vector<double>& deltas, double alpha,
                      const PruningOptions& opt, double mass_threshold) {
  const auto sel = select_and_prune(ck, opt, mass_threshold);
  const Matrix embedding = sel.pruned.mu_selected.cwiseMax(0.0);
  auto rep = retrospective_bound(embedding, data, deltas, alpha);
  if (sel.pruned.dims() == 0) rep.warnings.push_back("no dimension survived pruning");
  return rep;
}

std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

/// Trains one seed and writes its artifacts to `dir`.
SeedResult run_seed(const RunConfig& c, const LoadedData& data, const SpikeSlabPrior& prior, std::uint64_t seed,
                    const fs::path& dir, bool with_reports) {
  fs::create_directories(dir);
  TrainConfig cfg = c.train;
  cfg.seed = seed;
  cfg.prior = prior;

  Checkpoint ck;
  ck.method = c.method;
  ck.prior = prior;
  TrainLog log;
  try {
    if (c.method == Method::kVice) {
      auto [params, l] = train(data.train, data.val, cfg);
      ck.vice = std::move(params);
      log = std::move(l);
    } else {
      auto [params, l] = train_spose(data.train, data.val, c.spose_lambda, cfg);
      ck.spose = std::move(params);
      log = std::move(l);
    }
  } catch (const TrainingDiverged<VariationalParams>& e) {
    ck.vice = e.last_finite;
    ck.step = e.log.steps;
    ck.epochs = e.log.epochs.size();
    save_checkpoint(dir / "checkpoint.diverged.json", ck);
    write_text(dir / "trainlog.jsonl", trainlog_jsonl(e.log));
    throw;
  } catch (const TrainingDiverged<SpoSEParams>& e) {
    ck.spose = e.last_finite;
    ck.step = e.log.steps;
    ck.epochs = e.log.epochs.size();
    save_checkpoint(dir / "checkpoint.diverged.json", ck);
    write_text(dir / "trainlog.jsonl", trainlog_jsonl(e.log));
    throw;
  }
  ck.step = log.steps;
  ck.epochs = log.epochs.size();
  save_checkpoint(dir / "checkpoint.json", ck);
  write_text(dir / "trainlog.jsonl", trainlog_jsonl(log));

  const auto sel = select_and_prune(ck, c.train.pruning, c.train.spose_mass_threshold);
  write_text(dir / "selection.csv", sel.csv);

  SeedResult res;
  res.seed = seed;
  res.selected_dims = sel.pruned.dims();
  res.val_xent = data.val.empty() ? std::numeric_limits<double>::quiet_NaN()
                                  : cross_entropy(ck.point_embedding(), data.val.records());
  if (with_reports) {
    if (!data.test.empty())
      write_text(dir / "eval.json",
                 evaluate_checkpoint(ck, data.test, c.samples, seed, c.kl_direction).dump(1) + "\n");
    write_text(dir / "bound.csv", bound_csv_text(bound_for(ck, data.train, c.deltas, c.bound_alpha, c.train.pruning,
                                                           c.train.spose_mass_threshold)));
  }
  std::string conv = log.converged_epoch ? ", converged at epoch " + std::to_string(*log.converged_epoch) : "";
  note("seed " + std::to_string(seed) + ": " + std::to_string(ck.epochs) + " epochs, " +
       std::to_string(res.selected_dims) + " dims selected" + conv +
       (std::isfinite(res.val_xent) ? ", val xent " + fmt(res.val_xent) : ""));
  return res;
}

std::vector<std::string> read_labels(const std::string& path, std::size_t m) {
  std::vector<std::string> labels;
  if (path.empty()) {
    for (std::size_t i = 0; i < m; ++i) labels.push_back(std::to_string(i));
    return labels;
  }
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    labels.push_back(line);
  }
  while (!labels.empty() && labels.back().empty()) labels.pop_back();
  if (labels.size() != m)
    throw DataError("label file '" + path + "' has " + std::to_string(labels.size()) + " lines for " +
                    std::to_string(m) + " objects");
  return labels;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Fields root(j, "");
  int version = kSchemaVersion;
  root.read("schema_version", version);
  if (version != kSchemaVersion)
    throw ConfigError("unsupported config schema_version " + std::to_string(version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");

  auto data = root.section("data");
  data.read("train", c.train_path);
  data.read("val", c.val_path);
  data.read("test", c.test_path);
  data.read("num_objects", c.num_objects);
  data.read("val_fraction", c.val_fraction);
  data.read("split_seed", c.split_seed);
  data.finish();

  std::string method = to_string(c.method);
  root.read("method", method);
  c.method = method_from_string(method);
  root.read("seeds", c.seeds);
  root.read("output", c.output);
  root.read("jobs", c.jobs);

  auto t = root.section("train");
  t.read("batch_size", c.train.batch_size);
  t.read("max_epochs", c.train.max_epochs);
  t.read("d_init", c.train.d_init);
  t.read("stability_window", c.train.stability_window);
  t.read("stop_on_convergence", c.train.stop_on_convergence);
  t.read("eval_every", c.train.eval_every);
  t.read("learning_rate", c.train.adam.eta);
  t.read("beta1", c.train.adam.beta1);
  t.read("beta2", c.train.adam.beta2);
  t.read("epsilon", c.train.adam.eps_hat);
  t.finish();

  auto p = root.section("prior");
  p.read("pi_spike", c.train.prior.pi_spike);
  p.read("sigma_spike", c.train.prior.sigma_spike);
  p.read("sigma_slab", c.train.prior.sigma_slab);
  p.finish();

  auto s = root.section("spose");
  s.read("lambda", c.spose_lambda);
  s.read("mass_threshold", c.train.spose_mass_threshold);
  s.finish();

  auto g = root.section("grid");
  g.read("pi_spike", c.grid.pi_spike);
  g.read("sigma_spike", c.grid.sigma_spike);
  g.read("sigma_slab", c.grid.sigma_slab);
  g.finish();

  auto pr = root.section("pruning");
  pr.read("alpha", c.train.pruning.alpha);
  pr.read("reliability_threshold", c.train.pruning.reliability_threshold);
  pr.read("posterior_level", c.train.pruning.posterior_level);
  pr.read("bh_only", c.train.pruning.bh_only);
  pr.finish();

  auto e = root.section("eval");
  std::string kl = kl_to_string(c.kl_direction);
  e.read("samples", c.samples);
  e.read("kl_direction", kl);
  c.kl_direction = kl_from_string(kl);
  e.finish();

  auto b = root.section("bound");
  b.read("alpha", c.bound_alpha);
  b.read("deltas", c.deltas);
  b.finish();

  root.finish();
  return c;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["data"] = {{"train", c.train_path},       {"val", c.val_path},
               {"test", c.test_path},         {"num_objects", c.num_objects},
               {"val_fraction", c.val_fraction}, {"split_seed", c.split_seed}};
  j["method"] = to_string(c.method);
  j["seeds"] = c.seeds;
  j["output"] = c.output;
  j["jobs"] = c.jobs;
  const auto& t = c.train;
  j["train"] = {{"batch_size", t.batch_size},
                {"max_epochs", t.max_epochs},
                {"d_init", t.d_init},
                {"stability_window", t.stability_window},
                {"stop_on_convergence", t.stop_on_convergence},
                {"eval_every", t.eval_every},
                {"learning_rate", t.adam.eta},
                {"beta1", t.adam.beta1},
                {"beta2", t.adam.beta2},
                {"epsilon", t.adam.eps_hat}};
  j["prior"] = prior_to_json(t.prior);
  j["spose"] = {{"lambda", c.spose_lambda}, {"mass_threshold", t.spose_mass_threshold}};
  j["grid"] = {{"pi_spike", c.grid.pi_spike}, {"sigma_spike", c.grid.sigma_spike}, {"sigma_slab", c.grid.sigma_slab}};
  j["pruning"] = {{"alpha", t.pruning.alpha},
                  {"reliability_threshold", t.pruning.reliability_threshold},
                  {"posterior_level", t.pruning.posterior_level},
                  {"bh_only", t.pruning.bh_only}};
  j["eval"] = {{"samples", c.samples}, {"kl_direction", kl_to_string(c.kl_direction)}};
  j["bound"] = {{"alpha", c.bound_alpha}, {"deltas", c.deltas}};
  return j;
}

RunConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j);
}

void validate(const RunConfig& c) {
  c.train.validate();
  if (c.train_path.empty()) throw ConfigError("data.train: no training file given");
  if (!(c.val_fraction >= 0.0 && c.val_fraction < 1.0)) throw ConfigError("data.val_fraction must lie in [0, 1)");
  if (c.jobs < 1) throw ConfigError("jobs must be at least 1");
  if (c.samples < 1) throw ConfigError("eval.samples must be at least 1");
  if (!(c.spose_lambda >= 0.0)) throw ConfigError("spose.lambda must be non-negative");
  if (!(c.bound_alpha > 0.0 && c.bound_alpha < 1.0)) throw ConfigError("bound.alpha must lie in (0, 1)");
  if (c.deltas.empty()) throw ConfigError("bound.deltas must not be empty");
  for (double d : c.deltas)
    if (!(d > 0.0)) throw ConfigError("bound.deltas must be positive");
  const auto& p = c.train.pruning;
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) throw ConfigError("pruning.alpha must lie in (0, 1)");
  if (!(p.posterior_level > 0.0 && p.posterior_level < 1.0))
    throw ConfigError("pruning.posterior_level must lie in (0, 1)");
  if (p.reliability_threshold < 0) throw ConfigError("pruning.reliability_threshold must be non-negative");
}

std::vector<std::uint64_t> resolve_seeds(const std::vector<std::uint64_t>& configured) {
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv("VICE_SEED"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0' || env[0] == '-') throw ConfigError(std::string("VICE_SEED is not a seed: '") + env + "'");
    return {v};
  }
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 20; ++s) seeds.push_back(s);
  return seeds;
}

std::vector<SpikeSlabPrior> expand_grid(const PriorGrid& g) {
  std::vector<SpikeSlabPrior> out;
  for (double pi : g.pi_spike)
    for (double spike : g.sigma_spike)
      for (double slab : g.sigma_slab) {
        if (!(spike < slab)) continue;
        const SpikeSlabPrior p{pi, spike, slab};
        p.validate();
        out.push_back(p);
      }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.pi_spike, a.sigma_spike, a.sigma_slab) < std::tie(b.pi_spike, b.sigma_spike, b.sigma_slab);
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

LoadedData load_data(const RunConfig& c) {
  auto train = read_triplets(c.train_path, c.num_objects);
  auto val = c.val_path.empty() ? TripletDataset({}, train.num_objects()) : read_triplets(c.val_path, c.num_objects);
  auto test = c.test_path.empty() ? TripletDataset({}, train.num_objects()) : read_triplets(c.test_path, c.num_objects);
  std::size_t m = c.num_objects;
  if (m == 0) {
    m = max_index(train);
    if (!val.empty()) m = std::max(m, max_index(val));
    if (!test.empty()) m = std::max(m, max_index(test));
    m += 1;
    train = with_objects(train, m);
    val = with_objects(val, m);
    test = with_objects(test, m);
  }
  if (c.val_path.empty() && c.val_fraction > 0.0) {
    auto split = split_dataset(train, {1.0 - c.val_fraction, c.val_fraction, 0.0}, c.split_seed);
    train = std::move(split.train);
    val = std::move(split.val);
  }
  return {std::move(train), std::move(val), std::move(test)};
}

// ---------------------------------------------------------------------------
// Commands

int cmd_train(const RunConfig& config) {
  RunConfig c = config;
  c.seeds = resolve_seeds(c.seeds);
  validate(c);
  const auto data = load_data(c);
  const fs::path root(c.output);
  fs::create_directories(root);
  write_text(root / "resolved-config.json", config_to_json(c).dump(1) + "\n");
  write_metadata(root, "train");
  note("training " + to_string(c.method) + " on " + std::to_string(data.train.size()) + " triplets (" +
       std::to_string(data.train.num_objects()) + " objects), " + std::to_string(c.seeds.size()) + " seed(s)");

  std::vector<SeedResult> results(c.seeds.size());
  parallel_for(c.seeds.size(), c.jobs, [&](std::size_t i) {
    results[i] = run_seed(c, data, c.train.prior, c.seeds[i], root / seed_dir_name(c.seeds[i]), true);
  });

  json summary = json::array();
  for (const auto& r : results)
    summary.push_back({{"seed", r.seed}, {"val_xent", number_or_null(r.val_xent)}, {"selected_dims", r.selected_dims}});
  write_text(root / "summary.json", summary.dump(1) + "\n");
  return 0;
}

int cmd_grid(const RunConfig& config) {
  RunConfig c = config;
  c.seeds = resolve_seeds(c.seeds);
  validate(c);
  if (c.method != Method::kVice) throw ConfigError("grid searches the VICE prior; use method vice");
  const auto combos = expand_grid(c.grid);
  if (combos.empty()) throw ConfigError("grid: no combination satisfies sigma_spike < sigma_slab");
  const auto data = load_data(c);
  if (data.val.empty()) throw ConfigError("grid: selection needs validation data (data.val or data.val_fraction)");
  const fs::path root(c.output);
  fs::create_directories(root);
  write_text(root / "resolved-config.json", config_to_json(c).dump(1) + "\n");
  write_metadata(root, "grid");
  note("grid: " + std::to_string(combos.size()) + " prior combination(s) x " + std::to_string(c.seeds.size()) +
       " seed(s)");

  const auto combo_dir = [&](const SpikeSlabPrior& p) {
    std::ostringstream name;
    name << "pi" << p.pi_spike << "_spike" << p.sigma_spike << "_slab" << p.sigma_slab;
    return root / name.str();
  };
  const std::size_t ns = c.seeds.size();
  std::vector<SeedResult> results(combos.size() * ns);
  parallel_for(results.size(), c.jobs, [&](std::size_t task) {
    const auto& prior = combos[task / ns];
    const auto seed = c.seeds[task % ns];
    try {
      results[task] = run_seed(c, data, prior, seed, combo_dir(prior) / seed_dir_name(seed), false);
    } catch (const DivergenceError& e) {
      note("seed " + std::to_string(seed) + " diverged: " + e.what());
      results[task] = {seed, std::numeric_limits<double>::infinity(), 0};
    }
  });

  std::ostringstream csv;
  csv << "pi_spike,sigma_spike,sigma_slab,mean_val_xent,mean_selected_dims\n";
  std::size_t best = 0;
  std::vector<double> means(combos.size());
  for (std::size_t k = 0; k < combos.size(); ++k) {
    double xent = 0.0, dims = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      xent += results[k * ns + s].val_xent;
      dims += static_cast<double>(results[k * ns + s].selected_dims);
    }
    means[k] = xent / static_cast<double>(ns);
    csv << format_double(combos[k].pi_spike) << ',' << format_double(combos[k].sigma_spike) << ','
        << format_double(combos[k].sigma_slab) << ',' << format_double(means[k]) << ','
        << format_double(dims / static_cast<double>(ns)) << '\n';
    if (means[k] < means[best]) best = k;
  }
  write_text(root / "grid.csv", csv.str());
  if (!std::isfinite(means[best])) throw DivergenceError("grid: every combination diverged");

  std::vector<double> seed_xent;
  for (std::size_t s = 0; s < ns; ++s) seed_xent.push_back(results[best * ns + s].val_xent);
  const auto median_seed = c.seeds[median_index(seed_xent)];
  const json best_json = {
      {"prior", prior_to_json(combos[best])},
      {"mean_val_xent", means[best]},
      {"median_seed", median_seed},
      {"median_checkpoint",
       (fs::relative(combo_dir(combos[best]), root) / seed_dir_name(median_seed) / "checkpoint.json").string()}};
  write_text(root / "best.json", best_json.dump(1) + "\n");
  std::cout << "best prior: pi_spike=" << combos[best].pi_spike << " sigma_spike=" << combos[best].sigma_spike
            << " sigma_slab=" << combos[best].sigma_slab << " mean val xent " << fmt(means[best]) << ", median seed "
            << median_seed << "\n";
  return 0;
}

int cmd_evaluate(const EvaluateArgs& a) {
  if (a.samples < 1) throw ConfigError("samples must be at least 1");
  const auto ck = load_checkpoint(a.checkpoint);
  const auto test = read_triplets(a.test_path, ck.num_objects());
  const auto report = evaluate_checkpoint(ck, test, a.samples, a.seed, a.kl_direction);
  fs::create_directories(a.output);
  write_text(fs::path(a.output) / "eval.json", report.dump(1) + "\n");
  std::cout << "accuracy " << fmt(report["accuracy"].get<double>()) << " (ceiling "
            << fmt(report["ceiling"].get<double>()) << "), mean KL " << fmt(report["mean_kl"].get<double>()) << "\n";
  return 0;
}

int cmd_prune(const PruneArgs& a) {
  const auto ck = load_checkpoint(a.checkpoint);
  const auto sel = select_and_prune(ck, a.pruning, a.mass_threshold);
  const fs::path out(a.output);
  fs::create_directories(out);
  write_text(out / "selection.csv", sel.csv);
  write_text(out / "pruned.txt", matrix_text(sel.pruned.mu_selected));
  write_text(out / "pruned.json", pruned_sidecar(sel.pruned).dump(1) + "\n");
  if (sel.pruned.dims() == 0) std::cerr << "warning: no dimension survived pruning\n";
  std::cout << sel.pruned.dims() << " of " << ck.dims() << " dimensions kept\n";
  return 0;
}

int cmd_bound(const BoundArgs& a) {
  const auto ck = load_checkpoint(a.checkpoint);
  const auto data = read_triplets(a.data_path, ck.num_objects());
  const auto rep = bound_for(ck, data, a.deltas, a.alpha, a.pruning, a.mass_threshold);
  const fs::path out(a.output);
  fs::create_directories(out);
  write_text(out / "bound.csv", bound_csv_text(rep));
  write_text(out / "bound.json", bound_json(rep).dump(1) + "\n");
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "best delta " << rep.best.delta << ": empirical error " << fmt(rep.best.empirical_error) << " + epsilon "
            << fmt(rep.best.epsilon) << " = " << fmt(rep.best.upper_bound) << " (holds with probability >= "
            << 1.0 - a.alpha << ")\n";
  return 0;
}

int cmd_simulate(const SimulateArgs& a) {
  if (a.triplets < 1) throw ConfigError("triplets must be at least 1");
  const auto gt = generate_ground_truth(a.num_objects, a.dims, a.sparsity, a.seed);
  const fs::path out(a.output);
  fs::create_directories(out);
  write_dataset((out / "triplets.txt").string(), sample_triplets(gt, a.triplets, derive_seed(a.seed, 1)));
  if (a.test_triplets > 0)
    write_dataset((out / "test.txt").string(), sample_triplets(gt, a.test_triplets, derive_seed(a.seed, 2)));
  json side = ground_truth_to_json(gt);
  if (a.num_objects <= kMaxEnumerableObjects) side["bayes_accuracy"] = bayes_accuracy(gt);
  write_text(out / "ground_truth.json", side.dump(1) + "\n");
  std::cout << "wrote " << a.triplets << " triplets over " << a.num_objects << " objects with " << a.dims
            << " true dimensions\n";
  return 0;
}

int cmd_report(const ReportArgs& a) {
  if (a.checkpoints.empty()) throw ConfigError("report: no checkpoint given");
  std::vector<PrunedEmbedding> runs;
  for (const auto& path : a.checkpoints)
    runs.push_back(select_and_prune(load_checkpoint(path), a.pruning, a.mass_threshold).pruned);
  const auto m = static_cast<std::size_t>(runs.front().mu_selected.rows());
  const auto labels = read_labels(a.labels_path, m);
  const fs::path out(a.output);
  fs::create_directories(out);

  std::ostringstream csv, text;
  csv << "run,rank,dim,position,label\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (runs.size() > 1) text << "# " << a.checkpoints[r] << "\n";
    const auto top = topk_report(runs[r], labels, a.topk);
    for (std::size_t rank = 0; rank < top.size(); ++rank) {
      text << "dim " << top[rank].dim_index << ":";
      for (std::size_t i = 0; i < top[rank].labels.size(); ++i) {
        text << (i ? ", " : " ") << top[rank].labels[i];
        csv << r << ',' << rank << ',' << top[rank].dim_index << ',' << i << ',' << top[rank].labels[i] << '\n';
      }
      text << "\n";
    }
  }
  write_text(out / "topk.csv", csv.str());
  write_text(out / "topk.txt", text.str());
  std::cout << text.str();
  if (runs.size() > 1) {
    const auto rep = reproducibility(runs);
    write_text(out / "reproducibility.json", reproducibility_to_json(rep).dump(1) + "\n");
    std::cout << "reproducibility " << fmt(100.0 * rep.mean_score, 2) << "%, selected dims " << fmt(rep.mean_dims, 2)
              << " +/- " << fmt(rep.sd_dims, 2) << "\n";
  }
  return 0;
}

}  // namespace vice::cli
