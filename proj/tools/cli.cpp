#include "cli.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include <sgm/affinity.hpp>
#include <sgm/assignment.hpp>
#include <sgm/checkpoint.hpp>
#include <sgm/datagen.hpp>
#include <sgm/error.hpp>
#include <sgm/graph_io.hpp>
#include <sgm/parallel.hpp>
#include <sgm/sgmnet.hpp>
#include <sgm/statistics.hpp>

namespace sgm::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Everything a run needs besides its inputs. Stored in checkpoints so that
// inference rebuilds the same network.
struct Settings {
  NetworkConfig network;
  TrainConfig train;
  int gumbel_samples = 64;
  double lambda = 0.5;
  int samples = kDefaultSamples;
  bool has_seed = false;
};

json settings_to_json(const Settings& s) {
  return json{
      {"epochs", s.train.epochs},
      {"learning_rate", s.train.learning_rate},
      {"milestones", s.train.milestones},
      {"decay", s.train.decay},
      {"seed", s.train.seed},
      {"tau", s.network.tau},
      {"sinkhorn_iterations", s.network.sinkhorn_iterations},
      {"gumbel_samples", s.gumbel_samples},
      {"initial_width", s.network.initial_width},
      {"layer_widths", s.network.layer_widths},
      {"attention_slope", s.network.attention_slope},
      {"max_nodes", s.network.max_nodes},
      {"lambda", s.lambda},
      {"samples", s.samples},
  };
}

void read_settings(const json& j, Settings& s) {
  if (!j.is_object()) throw parse_error("configuration must be a JSON object");
  static const std::vector<std::string> known{
      "epochs", "learning_rate", "milestones", "decay", "seed", "tau", "sinkhorn_iterations",
      "gumbel_samples", "initial_width", "layer_widths", "attention_slope", "max_nodes", "lambda", "samples"};
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw parse_error("unknown configuration key '" + key + "'");
  try {
    s.train.epochs = j.value("epochs", s.train.epochs);
    s.train.learning_rate = j.value("learning_rate", s.train.learning_rate);
    s.train.milestones = j.value("milestones", s.train.milestones);
    s.train.decay = j.value("decay", s.train.decay);
    if (j.contains("seed")) {
      s.train.seed = j["seed"].get<std::uint64_t>();
      s.has_seed = true;
    }
    s.network.tau = j.value("tau", s.network.tau);
    s.network.sinkhorn_iterations = j.value("sinkhorn_iterations", s.network.sinkhorn_iterations);
    s.gumbel_samples = j.value("gumbel_samples", s.gumbel_samples);
    s.network.initial_width = j.value("initial_width", s.network.initial_width);
    s.network.layer_widths = j.value("layer_widths", s.network.layer_widths);
    s.network.attention_slope = j.value("attention_slope", s.network.attention_slope);
    s.network.max_nodes = j.value("max_nodes", s.network.max_nodes);
    s.lambda = j.value("lambda", s.lambda);
    s.samples = j.value("samples", s.samples);
  } catch (const json::exception& e) {
    throw parse_error(std::string("bad configuration value: ") + e.what());
  }
  if (s.train.epochs < 0) throw invalid_input("epochs must be non-negative");
  if (!(s.train.learning_rate > 0.0)) throw invalid_input("learning_rate must be positive");
  if (!(s.network.tau > 0.0)) throw invalid_input("tau must be positive");
  if (s.gumbel_samples < 1) throw invalid_input("gumbel_samples must be at least 1");
}

Settings load_settings(const std::string& path) {
  Settings s;
  try {
    read_settings(json::parse(read_text(path)), s);
  } catch (const json::exception& e) {
    throw parse_error(path + ": " + e.what());
  }
  return s;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse:
    case ErrorKind::kInvalidInput:
    case ErrorKind::kDegenerateInput: return kParseError;
    case ErrorKind::kResourceLimit: return kResourceLimit;
    case ErrorKind::kSolverFailure: return kSolverFailure;
  }
  return kFailure;
}

std::string format_double(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// Solver flags shared by register, geodesic and mean.
struct SolverFlags {
  std::string name = "sgmnet";
  std::string params;
  std::optional<double> tau;
  std::optional<int> gumbel_samples;
  std::optional<std::uint64_t> seed;
};

void add_solver_flags(CLI::App* cmd, SolverFlags& flags) {
  cmd->add_option("--solver", flags.name, "sgmnet, sinkhorn or brute")
      ->check(CLI::IsMember({"sgmnet", "sinkhorn", "brute"}))
      ->capture_default_str();
  cmd->add_option("--params", flags.params, "Checkpoint with network parameters (sgmnet)")->check(CLI::ExistingFile);
  cmd->add_option("--tau", flags.tau, "Sinkhorn temperature");
  cmd->add_option("--gumbel-samples", flags.gumbel_samples, "Gumbel-Sinkhorn samples (sgmnet)");
  cmd->add_option("--seed", flags.seed, "Random seed");
}

RegistrationSolver make_solver(const SolverFlags& flags) {
  if (flags.tau && !(*flags.tau > 0.0)) throw invalid_input("--tau must be positive");
  if (flags.name == "brute") {
    return [](const RegistrationProblem& p) { return brute_force_qap(p.affinity).perm; };
  }
  if (flags.name == "sinkhorn") {
    const double tau = flags.tau.value_or(0.05);
    return [tau](const RegistrationProblem& p) { return sinkhorn_baseline(p.affinity, tau).perm; };
  }
  if (flags.params.empty()) throw invalid_input("--params is required for the sgmnet solver");
  if (!flags.seed) throw invalid_input("--seed is required for the sgmnet solver");
  const Checkpoint checkpoint = load_checkpoint(flags.params);
  Settings settings;
  if (!checkpoint.config_json.empty()) read_settings(json::parse(checkpoint.config_json), settings);
  if (flags.tau) settings.network.tau = *flags.tau;
  if (flags.gumbel_samples) settings.gumbel_samples = *flags.gumbel_samples;
  if (settings.gumbel_samples < 1) throw invalid_input("--gumbel-samples must be at least 1");
  validate_params(settings.network, checkpoint.params);
  auto params = std::make_shared<const NetworkParams>(checkpoint.params);
  InferenceConfig inference{settings.gumbel_samples, *flags.seed};
  const NetworkConfig network = settings.network;
  return [params, inference, network](const RegistrationProblem& p) {
    return infer(p.affinity, *params, network, inference).perm;
  };
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty())
    out << text;
  else
    write_text_atomic(path, text);
}

double reduction_pct(double before, double after) {
  if (before > 0.0) return 100.0 * (before - after) / before;
  return after == 0.0 ? 100.0 : -std::numeric_limits<double>::infinity();
}

// ---- register ---------------------------------------------------------------

struct RegisterArgs {
  std::string graph_a;
  std::string graph_b;
  SolverFlags solver;
  double lambda = 0.5;
  int samples = kDefaultSamples;
  std::string truth;
  std::string out;
};

int cmd_register(const RegisterArgs& args, std::ostream& out) {
  const ShapeGraph a = load_graph(args.graph_a, args.samples);
  const ShapeGraph b = load_graph(args.graph_b, args.samples);
  AffinityOptions options;
  options.lambda = args.lambda;
  const RegistrationProblem problem = make_problem(a, b, options);
  const Permutation perm = make_solver(args.solver)(problem);

  const double before = problem.graph_distance(Permutation::identity(problem.node_count()));
  const double after = problem.graph_distance(perm);
  double node_score = 0.0;
  for (int i = 0; i < perm.size(); ++i) node_score += problem.affinity.node_affinity(i, perm[i]);

  json result{
      {"solver", args.solver.name},
      {"lambda", args.lambda},
      {"swapped", problem.swapped},
      {"n", problem.padded.n},
      {"n_prime", problem.padded.n_prime},
      {"perm", perm.map()},
      {"correspondence", correspondence(problem, perm)},
      {"objective", permutation_objective(problem.affinity, perm)},
      {"d_g_before", before},
      {"d_g_after", after},
      {"node_score", node_score},
  };
  const double reduction = reduction_pct(before, after);
  result["reduction_pct"] = std::isfinite(reduction) ? json(reduction) : json(nullptr);
  if (args.solver.seed) result["seed"] = *args.solver.seed;
  if (!args.truth.empty()) {
    // Truth maps graph_a nodes into graph_b; compare on the real nodes of a.
    const PairTruth truth = parse_truth(read_text(args.truth));
    const std::vector<int> found = correspondence(problem, perm);
    if (truth.true_perm.size() != std::max(a.node_count(), b.node_count()))
      throw invalid_input("truth permutation size does not match the graphs");
    int correct = 0;
    int real = 0;
    for (int i = 0; i < a.node_count(); ++i) {
      const int expected = truth.true_perm[i] < b.node_count() ? truth.true_perm[i] : -1;
      if (expected < 0) continue;
      ++real;
      correct += found[static_cast<std::size_t>(i)] == expected;
    }
    result["accuracy"] = real > 0 ? static_cast<double>(correct) / real : 1.0;
  }
  emit(result.dump(2) + "\n", args.out, out);
  return kOk;
}

// ---- train ------------------------------------------------------------------

struct CorpusPair {
  fs::path a;
  fs::path b;
};

std::vector<CorpusPair> list_pairs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw invalid_input(dir.string() + " is not a directory");
  std::vector<CorpusPair> pairs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    const std::string suffix = "_a.json";
    if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
      continue;
    const fs::path b = dir / (name.substr(0, name.size() - suffix.size()) + "_b.json");
    if (fs::exists(b)) pairs.push_back({entry.path(), b});
  }
  std::sort(pairs.begin(), pairs.end(), [](const CorpusPair& x, const CorpusPair& y) { return x.a < y.a; });
  if (pairs.empty()) throw invalid_input("no *_a.json / *_b.json pairs in " + dir.string());
  return pairs;
}

struct TrainArgs {
  std::string corpus;
  std::string config;
  std::string checkpoint_out;
  std::string resume;
  std::string loss_csv;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<double> learning_rate;
};

int cmd_train(const TrainArgs& args, std::ostream& out) {
  std::optional<Checkpoint> init;
  Settings settings;
  if (!args.resume.empty()) {
    init = load_checkpoint(args.resume);
    if (!init->config_json.empty()) read_settings(json::parse(init->config_json), settings);
  }
  if (!args.config.empty()) {
    const bool had_seed = settings.has_seed;
    const std::uint64_t old_seed = settings.train.seed;
    const Settings from_file = load_settings(args.config);
    settings.network = from_file.network;
    settings.train = from_file.train;
    settings.gumbel_samples = from_file.gumbel_samples;
    settings.lambda = from_file.lambda;
    settings.samples = from_file.samples;
    if (from_file.has_seed) settings.has_seed = true;
    else settings.train.seed = old_seed;
    if (init && had_seed && settings.train.seed != old_seed)
      throw invalid_input("configuration seed differs from the resumed checkpoint");
  }
  if (args.seed) {
    if (init && settings.has_seed && settings.train.seed != *args.seed)
      throw invalid_input("--seed differs from the resumed checkpoint");
    settings.train.seed = *args.seed;
    settings.has_seed = true;
  }
  if (!settings.has_seed) throw invalid_input("a seed is required: pass --seed or set \"seed\" in the configuration");
  if (args.epochs) settings.train.epochs = *args.epochs;
  if (args.learning_rate) settings.train.learning_rate = *args.learning_rate;
  if (settings.train.epochs < 0) throw invalid_input("epochs must be non-negative");

  const std::vector<CorpusPair> files = list_pairs(args.corpus);
  std::vector<AffinityPair> pairs(files.size());
  AffinityOptions options;
  options.lambda = settings.lambda;
  parallel_for(files.size(), [&](std::size_t i) {
    const ShapeGraph a = load_graph(files[i].a, settings.samples);
    const ShapeGraph b = load_graph(files[i].b, settings.samples);
    pairs[i] = make_problem(a, b, options).affinity;
  });

  const TrainResult result = train(pairs, settings.network, settings.train, init);

  Checkpoint checkpoint;
  checkpoint.params = result.params;
  checkpoint.optimizer = result.optimizer;
  checkpoint.epochs_completed = result.epochs_completed;
  checkpoint.loss_history = result.epoch_losses;
  checkpoint.config_json = settings_to_json(settings).dump();
  save_checkpoint(args.checkpoint_out, checkpoint);

  std::ostringstream csv;
  csv << "epoch,loss,learning_rate\n" << std::setprecision(17);
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e)
    csv << e << ',' << result.epoch_losses[e] << ',' << scheduled_learning_rate(settings.train, static_cast<int>(e))
        << '\n';
  const std::string csv_path = args.loss_csv.empty() ? args.checkpoint_out + ".loss.csv" : args.loss_csv;
  write_text_atomic(csv_path, csv.str());

  out << "trained " << result.epochs_completed << " epochs on " << pairs.size() << " pairs";
  if (!result.epoch_losses.empty()) out << ", final loss " << format_double(result.epoch_losses.back());
  out << "\n";
  return kOk;
}

// ---- geodesic ---------------------------------------------------------------

struct GeodesicArgs {
  std::string graph_a;
  std::string graph_b;
  SolverFlags solver;
  double lambda = 0.5;
  int steps = 10;
  double prune_threshold = 0.3;
  std::string out_dir;
};

int cmd_geodesic(const GeodesicArgs& args, std::ostream& out) {
  if (args.steps < 1) throw invalid_input("--steps must be at least 1");
  const ShapeGraph a = load_graph(args.graph_a);
  const ShapeGraph b = load_graph(args.graph_b);
  AffinityOptions options;
  options.lambda = args.lambda;
  const RegistrationProblem problem = make_problem(a, b, options);
  const Permutation perm = make_solver(args.solver)(problem);
  fs::create_directories(args.out_dir);
  for (int k = 0; k <= args.steps; ++k) {
    // Frames always run from graph_a to graph_b.
    double t = static_cast<double>(k) / args.steps;
    if (problem.swapped) t = 1.0 - t;
    const ShapeGraph frame = prune(graph_geodesic(problem.first, problem.second, perm, t), args.prune_threshold);
    std::ostringstream name;
    name << "frame_" << std::setw(3) << std::setfill('0') << k << ".json";
    save_graph(fs::path(args.out_dir) / name.str(), frame);
  }
  out << "wrote " << args.steps + 1 << " frames to " << args.out_dir << "\n";
  return kOk;
}

// ---- mean -------------------------------------------------------------------

struct MeanArgs {
  std::string corpus;
  SolverFlags solver;
  double lambda = 0.5;
  double tol = 1e-3;
  int max_iterations = 20;
  std::string out;
  std::string trajectory;
};

std::vector<fs::path> list_graphs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw invalid_input(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() != ".json") continue;
    if (name.size() >= 11 && name.compare(name.size() - 11, 11, "_truth.json") == 0) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_mean(const MeanArgs& args, std::ostream& out) {
  std::vector<ShapeGraph> graphs;
  for (const fs::path& file : list_graphs(args.corpus)) graphs.push_back(load_graph(file));
  KarcherConfig config;
  config.tol = args.tol;
  config.max_iterations = args.max_iterations;
  config.affinity.lambda = args.lambda;
  const KarcherResult result = karcher_mean(graphs, make_solver(args.solver), config);
  save_graph(args.out, result.mean);

  std::ostringstream csv;
  csv << "iteration,sum_sq_distance\n" << std::setprecision(17);
  for (std::size_t k = 0; k < result.trajectory.size(); ++k) csv << k << ',' << result.trajectory[k] << '\n';
  write_text_atomic(args.trajectory.empty() ? args.out + ".trajectory.csv" : args.trajectory, csv.str());
  out << "mean of " << graphs.size() << " graphs: " << result.iterations << " iterations, "
      << (result.converged ? "converged" : "not converged") << ", sum of squared distances "
      << format_double(result.trajectory.back()) << "\n";
  return kOk;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  int pairs = 10;
  std::string nodes = "8";
  std::string level = "low";
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

std::pair<int, int> parse_range(const std::string& text) {
  const auto dash = text.find('-');
  try {
    if (dash == std::string::npos) {
      const int n = std::stoi(text);
      return {n, n};
    }
    return {std::stoi(text.substr(0, dash)), std::stoi(text.substr(dash + 1))};
  } catch (const std::exception&) {
    throw parse_error("--nodes expects N or LO-HI, got '" + text + "'");
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint64_t out = 0;
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  out = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
  return out;
}

int cmd_synth(const SynthArgs& args, std::ostream& out) {
  if (!args.seed) throw invalid_input("--seed is required");
  if (args.pairs < 1) throw invalid_input("--n-pairs must be at least 1");
  const auto [lo, hi] = parse_range(args.nodes);
  if (lo < 3 || hi < lo) throw invalid_input("--nodes must be at least 3 and LO <= HI");
  const DistortionLevel level = parse_level(args.level);
  fs::create_directories(args.out_dir);
  parallel_for(static_cast<std::size_t>(args.pairs), [&](std::size_t k) {
    const std::uint64_t seed = derive_seed(*args.seed, k);
    const int n = lo + static_cast<int>(seed % static_cast<std::uint64_t>(hi - lo + 1));
    const SyntheticPair pair = generate_pair(random_base_graph(n, seed), level, seed + 1);
    std::ostringstream stem;
    stem << "pair_" << std::setw(4) << std::setfill('0') << k;
    const fs::path dir(args.out_dir);
    save_graph(dir / (stem.str() + "_a.json"), pair.first);
    save_graph(dir / (stem.str() + "_b.json"), pair.second);
    write_text_atomic(dir / (stem.str() + "_truth.json"), truth_to_json({pair.true_perm, args.level, seed}));
  });
  out << "wrote " << args.pairs << " " << args.level << " pairs to " << args.out_dir << "\n";
  return kOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string results;
  std::string out;
};

struct Column {
  double sum = 0.0;
  double sum_sq = 0.0;
  int count = 0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++count;
  }
  double mean() const { return count ? sum / count : std::nan(""); }
  double stddev() const {
    if (count < 2) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, (sum_sq - count * m * m) / (count - 1)));
  }
};

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  struct Group {
    Column reduction, node_score, objective, accuracy;
  };
  std::map<std::string, Group> groups;
  for (const fs::path& file : list_graphs(args.results)) {
    json j;
    try {
      j = json::parse(read_text(file));
    } catch (const json::exception& e) {
      throw parse_error(file.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("reduction_pct")) continue;
    Group& g = groups[j.value("solver", std::string("unknown"))];
    if (j["reduction_pct"].is_number()) g.reduction.add(j["reduction_pct"].get<double>());
    g.node_score.add(j.at("node_score").get<double>());
    g.objective.add(j.at("objective").get<double>());
    if (j.contains("accuracy")) g.accuracy.add(j["accuracy"].get<double>());
  }
  if (groups.empty()) throw invalid_input("no registration results in " + args.results);

  std::ostringstream csv;
  csv << "solver,pairs,reduction_pct_mean,reduction_pct_std,node_score_mean,node_score_std,objective_mean,"
         "accuracy_mean\n";
  out << std::left << std::setw(10) << "solver" << std::setw(7) << "pairs" << std::setw(22) << "reduction %"
      << std::setw(22) << "node score" << std::setw(12) << "objective" << "accuracy\n";
  for (const auto& [name, g] : groups) {
    csv << name << ',' << g.node_score.count << ',' << g.reduction.mean() << ',' << g.reduction.stddev() << ','
        << g.node_score.mean() << ',' << g.node_score.stddev() << ',' << g.objective.mean() << ','
        << (g.accuracy.count ? format_double(g.accuracy.mean()) : "") << '\n';
    out << std::setw(10) << name << std::setw(7) << g.node_score.count
        << std::setw(22) << (format_double(g.reduction.mean(), 4) + " +- " + format_double(g.reduction.stddev(), 3))
        << std::setw(22) << (format_double(g.node_score.mean(), 4) + " +- " + format_double(g.node_score.stddev(), 3))
        << std::setw(12) << format_double(g.objective.mean(), 5)
        << (g.accuracy.count ? format_double(g.accuracy.mean(), 4) : "-") << "\n";
  }
  if (!args.out.empty()) write_text_atomic(args.out, csv.str());
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shape-graph registration and statistics"};
  app.name(args.empty() ? "sgm" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);

  RegisterArgs reg;
  CLI::App* reg_cmd = app.add_subcommand("register", "Register two shape graphs");
  reg_cmd->add_option("graph_a", reg.graph_a)->required()->check(CLI::ExistingFile);
  reg_cmd->add_option("graph_b", reg.graph_b)->required()->check(CLI::ExistingFile);
  add_solver_flags(reg_cmd, reg.solver);
  reg_cmd->add_option("--lambda", reg.lambda, "Edge/node trade-off")->capture_default_str();
  reg_cmd->add_option("--samples", reg.samples, "Samples per edge curve")->capture_default_str();
  reg_cmd->add_option("--truth", reg.truth, "Ground-truth sidecar; adds an accuracy field")->check(CLI::ExistingFile);
  reg_cmd->add_option("--out", reg.out, "Result JSON (stdout when omitted)");

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the matching network on a corpus of pairs");
  train_cmd->add_option("corpus_dir", tr.corpus)->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--config", tr.config, "Training configuration JSON")->check(CLI::ExistingFile);
  train_cmd->add_option("--checkpoint-out", tr.checkpoint_out, "Checkpoint to write")->required();
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  train_cmd->add_option("--loss-csv", tr.loss_csv, "Loss trajectory CSV (default: <checkpoint>.loss.csv)");
  train_cmd->add_option("--seed", tr.seed, "Random seed");
  train_cmd->add_option("--epochs", tr.epochs, "Override the configured epoch count");
  train_cmd->add_option("--lr", tr.learning_rate, "Override the configured learning rate");

  GeodesicArgs geo;
  CLI::App* geo_cmd = app.add_subcommand("geodesic", "Write frames along the geodesic between two graphs");
  geo_cmd->add_option("graph_a", geo.graph_a)->required()->check(CLI::ExistingFile);
  geo_cmd->add_option("graph_b", geo.graph_b)->required()->check(CLI::ExistingFile);
  add_solver_flags(geo_cmd, geo.solver);
  geo_cmd->add_option("--lambda", geo.lambda)->capture_default_str();
  geo_cmd->add_option("--steps", geo.steps, "Number of intervals; N + 1 frames")->capture_default_str();
  geo_cmd->add_option("--prune", geo.prune_threshold, "Drop edges with presence weight below this")
      ->capture_default_str();
  geo_cmd->add_option("--out-dir", geo.out_dir)->required();

  MeanArgs mean;
  CLI::App* mean_cmd = app.add_subcommand("mean", "Karcher mean of a directory of graphs");
  mean_cmd->add_option("corpus_dir", mean.corpus)->required()->check(CLI::ExistingDirectory);
  add_solver_flags(mean_cmd, mean.solver);
  mean_cmd->add_option("--lambda", mean.lambda)->capture_default_str();
  mean_cmd->add_option("--tol", mean.tol)->capture_default_str();
  mean_cmd->add_option("--max-iters", mean.max_iterations)->capture_default_str();
  mean_cmd->add_option("--out", mean.out, "Mean graph JSON")->required();
  mean_cmd->add_option("--trajectory", mean.trajectory, "CSV of sum of squared distances");

  SynthArgs syn;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate synthetic pairs with ground truth");
  synth_cmd->add_option("--n-pairs", syn.pairs)->capture_default_str();
  synth_cmd->add_option("--nodes", syn.nodes, "Node count N or range LO-HI")->capture_default_str();
  synth_cmd->add_option("--level", syn.level, "low, medium or high")->capture_default_str();
  synth_cmd->add_option("--seed", syn.seed);
  synth_cmd->add_option("--out-dir", syn.out_dir)->required();

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Summarize registration results");
  eval_cmd->add_option("results_dir", ev.results)->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--out", ev.out, "Summary CSV");

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("sgm");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kParseError;
  }

  try {
    if (reg_cmd->parsed()) return cmd_register(reg, out);
    if (train_cmd->parsed()) return cmd_train(tr, out);
    if (geo_cmd->parsed()) return cmd_geodesic(geo, out);
    if (mean_cmd->parsed()) return cmd_mean(mean, out);
    if (synth_cmd->parsed()) return cmd_synth(syn, out);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    err << "error: malformed JSON: " << e.what() << "\n";
    return kParseError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace sgm::cli
