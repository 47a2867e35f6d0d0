#include <sgm/sgmnet.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <sgm/error.hpp>

namespace sgm {
namespace {

constexpr double kScoreVarianceFloor = 1e-12;

std::string layer_prefix(int k) { return "layer" + std::to_string(k) + "."; }

struct BlockShape {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index fan_in;
};

void add_mlp(std::vector<BlockShape>& blocks, const std::string& prefix, Eigen::Index in, Eigen::Index out) {
  blocks.push_back({prefix + "fc1.weight", in, out, in});
  blocks.push_back({prefix + "fc1.bias", 1, out, in});
  blocks.push_back({prefix + "fc2.weight", out, out, out});
  blocks.push_back({prefix + "fc2.bias", 1, out, out});
}

std::vector<BlockShape> parameter_layout(const NetworkConfig& config) {
  if (config.initial_width < 1 || config.layer_widths.empty())
    throw invalid_input("network needs a positive initial width and at least one layer");
  const Eigen::Index l0 = config.initial_width;
  std::vector<BlockShape> blocks{
      {"gat.lift.weight", 1, l0, 1},     {"gat.lift.bias", 1, l0, 1},
      {"gat.message.weight", l0, l0, l0}, {"gat.self.weight", l0, l0, l0},
      {"gat.attention.weight", 1, 1, 1}, {"gat.attention.bias", 1, 1, 1},
  };
  Eigen::Index prev = l0;
  for (std::size_t k = 0; k < config.layer_widths.size(); ++k) {
    const Eigen::Index width = config.layer_widths[k];
    if (width < 1) throw invalid_input("layer widths must be positive");
    const std::string prefix = layer_prefix(static_cast<int>(k) + 1);
    add_mlp(blocks, prefix + "fh.", 2 * prev, width);
    add_mlp(blocks, prefix + "fv.", prev, width);
    add_mlp(blocks, prefix + "fu.", 2 * width, width);
    prev = width;
  }
  blocks.push_back({"head.fc.weight", prev, 1, prev});
  blocks.push_back({"head.fc.bias", 1, 1, prev});
  blocks.push_back({"head.fe.weight", prev, 1, prev});
  blocks.push_back({"head.fe.bias", 1, 1, prev});
  return blocks;
}

const ad::Var& param(const ParamVars& vars, const std::string& name) {
  const auto it = vars.find(name);
  if (it == vars.end()) throw invalid_input("missing network parameter " + name);
  return it->second;
}

// Two affine maps, each followed by ReLU.
ad::Var mlp(ad::Var x, const ParamVars& vars, const std::string& prefix) {
  ad::Var h = ad::relu(ad::add(ad::matmul(x, param(vars, prefix + "fc1.weight")), param(vars, prefix + "fc1.bias")));
  return ad::relu(ad::add(ad::matmul(h, param(vars, prefix + "fc2.weight")), param(vars, prefix + "fc2.bias")));
}

// Sum of the two incidence matrices: each edge marks both endpoints, padding
// rows carry 2 xi.
Matrix undirected_incidence(const Matrix& sources, const Matrix& targets) { return sources + targets; }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

AssociationAdjacency build_association(const AffinityPair& aff) {
  const int n = aff.node_count();
  const std::vector<int> src = incidence_rows(aff.sources);
  const std::vector<int> dst = incidence_rows(aff.targets);
  const std::vector<int> src2 = incidence_rows(aff.sources_prime);
  const std::vector<int> dst2 = incidence_rows(aff.targets_prime);

  std::vector<Eigen::Triplet<double>> entries;
  std::vector<std::pair<long long, double>> features;  // (row-major key, Ke)
  entries.reserve(4 * src.size() * src2.size());
  features.reserve(entries.capacity());
  for (std::size_t s = 0; s < src.size(); ++s) {
    const std::array<std::array<int, 2>, 2> first{{{src[s], dst[s]}, {dst[s], src[s]}}};
    for (std::size_t t = 0; t < src2.size(); ++t) {
      const std::array<std::array<int, 2>, 2> second{{{src2[t], dst2[t]}, {dst2[t], src2[t]}}};
      const double ke = aff.edge_affinity(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
      for (const auto& [i, a] : first) {
        for (const auto& [j, b] : second) {
          const int row = i + n * j;
          const int col = a + n * b;
          entries.emplace_back(row, col, 1.0);
          features.emplace_back(static_cast<long long>(row) * n * n + col, ke);
        }
      }
    }
  }
  AssociationAdjacency assoc;
  assoc.node_count = n;
  assoc.adjacency.resize(n * n, n * n);
  assoc.adjacency.setFromTriplets(entries.begin(), entries.end());
  assoc.adjacency.makeCompressed();
  if (static_cast<std::size_t>(assoc.adjacency.nonZeros()) != features.size())
    throw invalid_input("association graph has duplicate edge pairs");

  // CSR stores each row's columns in increasing order, i.e. increasing key.
  std::sort(features.begin(), features.end());
  assoc.edge_features.resize(static_cast<Eigen::Index>(features.size()), 1);
  for (std::size_t k = 0; k < features.size(); ++k) assoc.edge_features(static_cast<Eigen::Index>(k), 0) = features[k].second;
  return assoc;
}

Matrix initial_edge_embedding(const AffinityPair& aff, int width, double floor) {
  const Matrix u = undirected_incidence(aff.sources, aff.targets);
  const Matrix u2 = undirected_incidence(aff.sources_prime, aff.targets_prime);
  const Matrix support = (u * aff.edge_affinity * u2.transpose()).cwiseMax(floor);
  const Matrix logs = (support.array() * support.array()).log();
  const Eigen::Map<const Vector> column(logs.data(), logs.size());
  return column.replicate(1, width);
}

NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NetworkParams params;
  for (const BlockShape& block : parameter_layout(config)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(block.fan_in));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    Matrix m(block.rows, block.cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = uniform(rng);
    params.emplace(block.name, std::move(m));
  }
  return params;
}

void validate_params(const NetworkConfig& config, const NetworkParams& params) {
  const std::vector<BlockShape> layout = parameter_layout(config);
  for (const BlockShape& block : layout) {
    const auto it = params.find(block.name);
    if (it == params.end()) throw invalid_input("missing network parameter " + block.name);
    if (it->second.rows() != block.rows || it->second.cols() != block.cols)
      throw invalid_input("network parameter " + block.name + " has the wrong shape");
    if (!it->second.allFinite()) throw invalid_input("network parameter " + block.name + " is not finite");
  }
  if (params.size() != layout.size()) throw invalid_input("unexpected extra network parameters");
}

ParamVars bind_params(ad::Tape& tape, const NetworkParams& params, bool trainable) {
  ParamVars vars;
  for (const auto& [name, value] : params) vars.emplace(name, trainable ? tape.leaf(value) : tape.constant(value));
  return vars;
}

ad::Var initial_node_embedding(ad::Tape& tape, const AffinityPair& aff, const AssociationAdjacency& assoc,
                               const ParamVars& vars, const NetworkConfig& config) {
  const Eigen::Map<const Vector> vec_nodes(aff.node_affinity.data(), aff.node_affinity.size());
  ad::Var node_affinity = tape.constant(Matrix(vec_nodes));
  ad::Var features = ad::add(ad::matmul(node_affinity, param(vars, "gat.lift.weight")), param(vars, "gat.lift.bias"));
  ad::Var self = ad::matmul(features, param(vars, "gat.self.weight"));
  if (assoc.adjacency.nonZeros() == 0) return self;

  ad::Var messages = ad::matmul(features, param(vars, "gat.message.weight"));
  ad::Var edge_features = tape.constant(assoc.edge_features);
  ad::Var logits = ad::leaky_relu(
      ad::add(ad::matmul(edge_features, param(vars, "gat.attention.weight")), param(vars, "gat.attention.bias")),
      config.attention_slope);
  ad::Var attention = ad::segment_softmax(assoc.adjacency, logits);
  return ad::add(ad::sparse_values_matmul(assoc.adjacency, attention, messages), self);
}

EmbeddingState conv_layer(const EmbeddingState& state, const AssociationAdjacency& assoc, const ParamVars& vars,
                          int k) {
  const std::string prefix = layer_prefix(k);
  const auto& weight = param(vars, prefix + "fh.fc1.weight");
  if (weight.rows() != state.edge.cols() + state.node.cols())
    throw invalid_input("embedding width does not match layer " + std::to_string(k));
  ad::Var neighbours = ad::sparse_matmul(assoc.adjacency, state.node);
  ad::Var edge = mlp(ad::concat_cols(state.edge, neighbours), vars, prefix + "fh.");
  ad::Var node = mlp(ad::concat_cols(edge, mlp(state.node, vars, prefix + "fv.")), vars, prefix + "fu.");
  return EmbeddingState{node, edge, k};
}

ad::Var classification_scores(const EmbeddingState& state, const ParamVars& vars, int node_count) {
  ad::Var x = ad::add(ad::matmul(state.node, param(vars, "head.fc.weight")), param(vars, "head.fc.bias"));
  ad::Var y = ad::add(ad::matmul(state.edge, param(vars, "head.fe.weight")), param(vars, "head.fe.bias"));
  // Standardized so that the loss cannot be improved by inflating the score
  // scale, which otherwise saturates Sinkhorn and stalls training.
  return ad::standardize(ad::reshape(ad::add(x, y), node_count, node_count), kScoreVarianceFloor);
}

ad::Var sinkhorn_layer(ad::Var scores, double tau, int iterations) {
  if (!(tau > 0.0)) throw invalid_input("tau must be positive");
  ad::Var logs = ad::scale(scores, 1.0 / (2.0 * tau));
  for (int it = 0; it < iterations; ++it) {
    logs = ad::transpose(ad::log_softmax_rows(ad::transpose(logs)));  // columns
    logs = ad::log_softmax_rows(logs);                                // rows
  }
  return ad::exp(logs);
}

ad::Var matching_loss(ad::Tape& tape, const AffinityPair& aff, ad::Var assignment) {
  ad::Var node_term = ad::trace_product(tape.constant(aff.node_affinity), assignment);
  if (aff.edge_affinity.size() == 0) return ad::negate(node_term);
  ad::Var src = ad::matmul(tape.constant(aff.sources.transpose()),
                           ad::matmul(assignment, tape.constant(aff.sources_prime)));
  ad::Var dst = ad::matmul(tape.constant(aff.targets.transpose()),
                           ad::matmul(assignment, tape.constant(aff.targets_prime)));
  ad::Var src_flip = ad::matmul(tape.constant(aff.sources.transpose()),
                                ad::matmul(assignment, tape.constant(aff.targets_prime)));
  ad::Var dst_flip = ad::matmul(tape.constant(aff.targets.transpose()),
                                ad::matmul(assignment, tape.constant(aff.sources_prime)));
  ad::Var edge_term =
      ad::trace_product(tape.constant(aff.edge_affinity), ad::add(ad::mul(src, dst), ad::mul(src_flip, dst_flip)));
  return ad::negate(ad::add(node_term, edge_term));
}

ForwardPass forward(ad::Tape& tape, const AffinityPair& aff, const AssociationAdjacency& assoc, const ParamVars& vars,
                    const NetworkConfig& config) {
  const int n = aff.node_count();
  if (n > config.max_nodes)
    throw resource_limit("padded node count " + std::to_string(n) + " exceeds the limit of " +
                         std::to_string(config.max_nodes));
  if (assoc.node_count != n) throw invalid_input("association graph does not match the affinity pair");
  EmbeddingState state;
  state.node = initial_node_embedding(tape, aff, assoc, vars, config);
  state.edge = tape.constant(initial_edge_embedding(aff, config.initial_width, config.log_floor));
  for (std::size_t k = 0; k < config.layer_widths.size(); ++k)
    state = conv_layer(state, assoc, vars, static_cast<int>(k) + 1);
  ForwardPass pass;
  pass.scores = classification_scores(state, vars, n);
  pass.assignment = sinkhorn_layer(pass.scores, config.tau, config.sinkhorn_iterations);
  return pass;
}

double scheduled_learning_rate(const TrainConfig& config, int epoch) {
  double lr = config.learning_rate;
  for (int milestone : config.milestones)
    if (epoch >= milestone) lr *= config.decay;
  return lr;
}

TrainResult train(const std::vector<AffinityPair>& pairs, const NetworkConfig& config, const TrainConfig& train,
                  const std::optional<Checkpoint>& init) {
  if (pairs.empty()) throw invalid_input("training corpus is empty");
  TrainResult result;
  if (init) {
    result.params = init->params;
    if (init->optimizer) result.optimizer = *init->optimizer;
    result.epochs_completed = init->epochs_completed;
    result.epoch_losses = init->loss_history;
  } else {
    result.params = init_params(config, train.seed);
  }
  validate_params(config, result.params);

  std::vector<AssociationAdjacency> graphs;
  graphs.reserve(pairs.size());
  for (const AffinityPair& aff : pairs) graphs.push_back(build_association(aff));

  std::vector<std::size_t> order(pairs.size());
  for (int epoch = result.epochs_completed; epoch < train.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(train.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = scheduled_learning_rate(train, epoch);

    double total = 0.0;
    for (std::size_t index : order) {
      ad::Tape tape;
      const ParamVars vars = bind_params(tape, result.params, true);
      const ForwardPass pass = forward(tape, pairs[index], graphs[index], vars, config);
      const ad::Var loss = matching_loss(tape, pairs[index], pass.assignment);
      const double value = loss.scalar();
      if (!std::isfinite(value)) {
        throw solver_failure("non-finite training loss at epoch " + std::to_string(epoch) + " on pair " +
                             std::to_string(index) + " (" + std::to_string(pairs[index].node_count()) +
                             " padded nodes, " + std::to_string(pairs[index].edge_count()) + "x" +
                             std::to_string(pairs[index].edge_count_prime()) + " edges, alpha " +
                             std::to_string(pairs[index].alpha) + ", eta " + std::to_string(pairs[index].eta) + ")");
      }
      tape.backward(loss);
      ad::ParameterMap grads;
      for (const auto& [name, var] : vars) grads.emplace(name, tape.grad(var));
      ad::adam_step(result.params, grads, lr, train.adam, result.optimizer);
      total += value;
    }
    result.epoch_losses.push_back(total / static_cast<double>(pairs.size()));
    result.epochs_completed = epoch + 1;
  }
  return result;
}

InferenceResult infer(const AffinityPair& aff, const NetworkParams& params, const NetworkConfig& config,
                      const InferenceConfig& inference) {
  if (aff.node_count() > config.max_nodes)
    throw resource_limit("padded node count " + std::to_string(aff.node_count()) + " exceeds the limit of " +
                         std::to_string(config.max_nodes));
  validate_params(config, params);
  const AssociationAdjacency assoc = build_association(aff);
  ad::Tape tape;
  const ParamVars vars = bind_params(tape, params, false);
  const ForwardPass pass = forward(tape, aff, assoc, vars, config);

  InferenceResult result;
  result.scores = pass.scores.value();
  result.assignment = pass.assignment.value();
  GumbelOptions gumbel;
  gumbel.tau = config.tau;
  gumbel.samples = inference.gumbel_samples;
  gumbel.sinkhorn_iterations = config.sinkhorn_iterations;
  gumbel.seed = inference.seed;
  const Selection selection = gumbel_sinkhorn_select(result.scores, aff, gumbel);
  result.perm = selection.perm;
  result.objective = selection.objective;
  result.sample = selection.sample;
  return result;
}

}  // namespace sgm
