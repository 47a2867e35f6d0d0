#pragma once

// Shape-graph matching network: a graph network on the association graph of
// two shape graphs that turns node and edge affinities into a soft
// assignment, trained without supervision on the negated factorized QAP
// objective.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <sgm/affinity.hpp>
#include <sgm/assignment.hpp>
#include <sgm/autodiff.hpp>
#include <sgm/checkpoint.hpp>

namespace sgm {

struct NetworkConfig {
  int initial_width = 60;                                 // l0
  std::vector<int> layer_widths{256, 256, 256, 256, 256};  // l1..lK
  double tau = 0.05;
  int sinkhorn_iterations = 20;
  double attention_slope = 0.2;
  double log_floor = 1e-12;
  /// Largest padded node count accepted by inference and training.
  int max_nodes = 300;
};

struct TrainConfig {
  int epochs = 120;
  double learning_rate = 1e-5;
  std::vector<int> milestones{40, 80};
  double decay = 0.5;
  std::uint64_t seed = 0;
  ad::AdamOptions adam;
};

struct InferenceConfig {
  int gumbel_samples = 64;
  std::uint64_t seed = 0;
};

using NetworkParams = ad::ParameterMap;

/// Sparse association-graph adjacency: vertex (i, j) = i + n' j is joined to
/// (a, b) iff the first graph has an edge {i, a} and the second an edge
/// {j, b}. `edge_features` holds, per stored nonzero in CSR order, the Ke
/// entry of that edge pair.
struct AssociationAdjacency {
  ad::SparseMatrix adjacency;
  Matrix edge_features;
  int node_count = 0;  // n'
};

AssociationAdjacency build_association(const AffinityPair& aff);

/// n'^2 x width matrix whose identical columns hold
/// vec(log(X o X)), X = (C~ + F~) Ke (C' + F')^T, factors floored before the
/// log.
Matrix initial_edge_embedding(const AffinityPair& aff, int width, double floor = 1e-12);

NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed);

/// Throws invalid_input when a block is missing or has the wrong shape.
void validate_params(const NetworkConfig& config, const NetworkParams& params);

using ParamVars = std::map<std::string, ad::Var>;

/// Puts every parameter on the tape, as leaves or as constants.
ParamVars bind_params(ad::Tape& tape, const NetworkParams& params, bool trainable);

struct EmbeddingState {
  ad::Var node;  // V, n'^2 x l_k
  ad::Var edge;  // E, n'^2 x l_k
  int layer = 0;
};

/// Attention-weighted aggregation of lifted node affinities over the
/// association graph, plus a self term.
ad::Var initial_node_embedding(ad::Tape& tape, const AffinityPair& aff, const AssociationAdjacency& assoc,
                               const ParamVars& vars, const NetworkConfig& config);

/// One message-passing layer k (1-based).
EmbeddingState conv_layer(const EmbeddingState& state, const AssociationAdjacency& assoc, const ParamVars& vars,
                          int k);

/// x + y reshaped to n' x n' and standardized over all entries (zero mean,
/// unit variance), x = f_c(V), y = f_e(E).
ad::Var classification_scores(const EmbeddingState& state, const ParamVars& vars, int node_count);

/// Sinkhorn layer on exp(scores / 2 tau), in the log domain.
ad::Var sinkhorn_layer(ad::Var scores, double tau, int iterations);

/// Negated factorized objective, including the flipped-orientation edge term.
ad::Var matching_loss(ad::Tape& tape, const AffinityPair& aff, ad::Var assignment);

struct ForwardPass {
  ad::Var scores;
  ad::Var assignment;
};

ForwardPass forward(ad::Tape& tape, const AffinityPair& aff, const AssociationAdjacency& assoc, const ParamVars& vars,
                    const NetworkConfig& config);

struct TrainResult {
  NetworkParams params;
  ad::AdamState optimizer;
  std::vector<double> epoch_losses;
  int epochs_completed = 0;
};

/// Learning rate in effect during `epoch` (0-based).
double scheduled_learning_rate(const TrainConfig& config, int epoch);

/// Unsupervised training, batch size one pair. Starts from `init` (parameters,
/// optimizer state and epoch count) when given, otherwise from
/// init_params(config, train.seed).
TrainResult train(const std::vector<AffinityPair>& pairs, const NetworkConfig& config, const TrainConfig& train,
                  const std::optional<Checkpoint>& init = std::nullopt);

struct InferenceResult {
  Permutation perm;
  Matrix assignment;  // noise-free soft assignment
  Matrix scores;      // x + y
  double objective = 0.0;
  int sample = 0;
};

InferenceResult infer(const AffinityPair& aff, const NetworkParams& params, const NetworkConfig& config,
                      const InferenceConfig& inference);

}  // namespace sgm
