#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include <sgm/error.hpp>
#include <sgm/sgmnet.hpp>

#include "support.hpp"

namespace sgm {
namespace {

using testing::random_graph;
using testing::random_matrix;
using testing::random_permutation;
using testing::segment_srvf;
using testing::vec2;

NetworkConfig small_config(int layers = 2) {
  NetworkConfig config;
  config.initial_width = 4;
  config.layer_widths.assign(static_cast<std::size_t>(layers), 5);
  return config;
}

// Path 0-1-2 on both sides with different bends.
AffinityPair three_node_pair() {
  std::mt19937_64 rng(3);
  Matrix a(3, 2), b(3, 2);
  a << 0, 0, 1, 0.2, 2, 0;
  b << 0.1, 0, 1.1, 0.5, 1.9, -0.2;
  const ShapeGraph g = testing::make_graph(rng, a, {{0, 1}, {1, 2}}, 16);
  const ShapeGraph h = testing::make_graph(rng, b, {{0, 1}, {1, 2}}, 16);
  return make_problem(g, h).affinity;
}

AffinityPair random_pair(std::uint64_t seed, int n, int n2) {
  std::mt19937_64 rng(seed);
  const ShapeGraph g = random_graph(rng, n, 1, 16);
  const ShapeGraph h = random_graph(rng, n2, 1, 16);
  return make_problem(g, h).affinity;
}

// Association adjacency straight from the edge lists.
Matrix naive_association(const AffinityPair& aff) {
  const int n = aff.node_count();
  auto edges = [](const Matrix& c, const Matrix& f) {
    std::set<std::pair<int, int>> out;
    const std::vector<int> s = incidence_rows(c), t = incidence_rows(f);
    for (std::size_t k = 0; k < s.size(); ++k) {
      out.emplace(s[k], t[k]);
      out.emplace(t[k], s[k]);
    }
    return out;
  };
  const auto e1 = edges(aff.sources, aff.targets);
  const auto e2 = edges(aff.sources_prime, aff.targets_prime);
  Matrix a = Matrix::Zero(n * n, n * n);
  for (const auto& [i, x] : e1)
    for (const auto& [j, y] : e2) a(i + n * j, x + n * y) = 1.0;
  return a;
}

double forward_loss(const AffinityPair& aff, const NetworkParams& params, const NetworkConfig& config) {
  ad::Tape tape;
  const ParamVars vars = bind_params(tape, params, false);
  const ForwardPass pass = forward(tape, aff, build_association(aff), vars, config);
  return matching_loss(tape, aff, pass.assignment).scalar();
}

TEST(Association, MatchesEdgeListDefinition) {
  const AffinityPair aff = random_pair(1, 4, 5);
  const AssociationAdjacency assoc = build_association(aff);
  EXPECT_EQ(assoc.node_count, 5);
  const Matrix dense = Matrix(assoc.adjacency);
  EXPECT_EQ(dense, naive_association(aff));
  EXPECT_EQ(dense, dense.transpose());
}

TEST(Association, EdgeFeaturesFollowCsrOrder) {
  const AffinityPair aff = random_pair(2, 4, 4);
  const AssociationAdjacency assoc = build_association(aff);
  const int n = aff.node_count();
  const std::vector<int> s1 = incidence_rows(aff.sources), t1 = incidence_rows(aff.targets);
  const std::vector<int> s2 = incidence_rows(aff.sources_prime), t2 = incidence_rows(aff.targets_prime);
  Eigen::Index k = 0;
  for (int row = 0; row < assoc.adjacency.outerSize(); ++row) {
    for (ad::SparseMatrix::InnerIterator it(assoc.adjacency, row); it; ++it, ++k) {
      const int i = row % n, j = row / n, a = static_cast<int>(it.col()) % n, b = static_cast<int>(it.col()) / n;
      double expected = -1.0;
      for (std::size_t s = 0; s < s1.size(); ++s)
        for (std::size_t t = 0; t < s2.size(); ++t) {
          const bool first = (s1[s] == i && t1[s] == a) || (s1[s] == a && t1[s] == i);
          const bool second = (s2[t] == j && t2[t] == b) || (s2[t] == b && t2[t] == j);
          if (first && second) expected = aff.edge_affinity(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
        }
      EXPECT_EQ(assoc.edge_features(k, 0), expected);
    }
  }
  EXPECT_EQ(k, assoc.edge_features.rows());
}

TEST(EdgeEmbedding, SingleEdgeGivesLogLambdaSquared) {
  Matrix nodes(2, 2);
  nodes << 0, 0, 1, 0;
  ShapeGraph g(nodes);
  g.add_edge(0, 1, segment_srvf(vec2(0, 0), vec2(1, 0), 16));
  const AffinityPair aff = make_problem(g, g).affinity;
  ASSERT_NEAR(aff.edge_affinity(0, 0), 0.5, 1e-12);
  const Matrix e = initial_edge_embedding(aff, 3);
  EXPECT_EQ(e.rows(), 4);
  EXPECT_TRUE((e.array() - std::log(0.25)).abs().maxCoeff() < 1e-12);
}

TEST(EdgeEmbedding, DefaultWidthHasIdenticalColumns) {
  const AffinityPair aff = random_pair(3, 4, 5);
  const NetworkConfig config;
  ASSERT_EQ(config.initial_width, 60);
  const Matrix e = initial_edge_embedding(aff, config.initial_width);
  EXPECT_EQ(e.cols(), 60);
  EXPECT_EQ(e.rows(), 25);
  for (int c = 1; c < 60; ++c) EXPECT_EQ(e.col(c), e.col(0));
  EXPECT_TRUE(e.allFinite());
}

TEST(EdgeEmbedding, ZeroAffinityUsesFloor) {
  AffinityPair aff = random_pair(4, 3, 3);
  aff.edge_affinity.setZero();
  const Matrix e = initial_edge_embedding(aff, 2, 1e-12);
  EXPECT_TRUE((e.array() - 2.0 * std::log(1e-12)).abs().maxCoeff() < 1e-9);
}

TEST(NodeEmbedding, ZeroAttentionAveragesNeighbours) {
  const AffinityPair aff = random_pair(5, 4, 4);
  const NetworkConfig config = small_config();
  NetworkParams params = init_params(config, 1);
  params["gat.attention.weight"].setZero();
  params["gat.attention.bias"].setZero();
  const AssociationAdjacency assoc = build_association(aff);

  ad::Tape tape;
  const ParamVars vars = bind_params(tape, params, false);
  const Matrix v0 = initial_node_embedding(tape, aff, assoc, vars, config).value();

  const int n = aff.node_count();
  const Matrix adj = naive_association(aff);
  Matrix features(n * n, config.initial_width);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      features.row(i + n * j) = aff.node_affinity(i, j) * params["gat.lift.weight"] + params["gat.lift.bias"];
  const Matrix messages = features * params["gat.message.weight"];
  for (int v = 0; v < n * n; ++v) {
    RowVector expected = features.row(v) * params["gat.self.weight"];
    const double degree = adj.row(v).sum();
    if (degree > 0) expected += adj.row(v) * messages / degree;
    EXPECT_LT((v0.row(v) - expected).norm(), 1e-12) << "vertex " << v;
  }
}

TEST(NodeEmbedding, IsolatedVertexKeepsSelfTerm) {
  AffinityPair aff;
  aff.node_affinity = (Matrix(1, 1) << 0.3).finished();
  aff.edge_affinity = Matrix::Zero(0, 0);
  aff.sources = aff.targets = aff.sources_prime = aff.targets_prime = Matrix::Zero(1, 0);
  const NetworkConfig config = small_config();
  const NetworkParams params = init_params(config, 2);
  const AssociationAdjacency assoc = build_association(aff);
  EXPECT_EQ(assoc.adjacency.nonZeros(), 0);
  ad::Tape tape;
  const ParamVars vars = bind_params(tape, params, false);
  const Matrix v0 = initial_node_embedding(tape, aff, assoc, vars, config).value();
  const RowVector feat = 0.3 * params.at("gat.lift.weight") + params.at("gat.lift.bias");
  EXPECT_LT((v0.row(0) - feat * params.at("gat.self.weight")).norm(), 1e-14);
}

TEST(ConvLayer, ZeroWeightsGiveConstantRows) {
  const AffinityPair aff = random_pair(6, 4, 4);
  const NetworkConfig config = small_config(1);
  NetworkParams params = init_params(config, 3);
  for (auto& [name, value] : params)
    if (name.rfind("layer1.", 0) == 0) value = name.find("bias") != std::string::npos ? Matrix::Constant(1, value.cols(), 0.7) : Matrix::Zero(value.rows(), value.cols());
  ad::Tape tape;
  const ParamVars vars = bind_params(tape, params, false);
  const AssociationAdjacency assoc = build_association(aff);
  EmbeddingState state;
  state.node = initial_node_embedding(tape, aff, assoc, vars, config);
  state.edge = tape.constant(initial_edge_embedding(aff, config.initial_width));
  const EmbeddingState next = conv_layer(state, assoc, vars, 1);
  // fc2 sees relu(0.7) inputs times zero weights, so every entry is relu(0.7).
  EXPECT_TRUE((next.node.value().array() == 0.7).all());
  EXPECT_TRUE((next.edge.value().array() == 0.7).all());
}

TEST(ConvLayer, WithoutAssociationEdgesDependsOnlyOnEdgeEmbedding) {
  AffinityPair aff = random_pair(7, 3, 3);
  const NetworkConfig config = small_config(1);
  const NetworkParams params = init_params(config, 4);
  AssociationAdjacency empty;
  empty.node_count = 3;
  empty.adjacency.resize(9, 9);
  empty.edge_features.resize(0, 1);
  auto run = [&](const Matrix& v) {
    ad::Tape tape;
    const ParamVars vars = bind_params(tape, params, false);
    EmbeddingState state;
    state.node = tape.constant(v);
    state.edge = tape.constant(initial_edge_embedding(aff, config.initial_width));
    return conv_layer(state, empty, vars, 1).edge.value();
  };
  std::mt19937_64 rng(8);
  EXPECT_EQ(run(random_matrix(rng, 9, 4)), run(random_matrix(rng, 9, 4)));
}

TEST(ConvLayer, WidthMismatch) {
  const AffinityPair aff = random_pair(9, 3, 3);
  const NetworkConfig config = small_config(2);
  const NetworkParams params = init_params(config, 5);
  ad::Tape tape;
  const ParamVars vars = bind_params(tape, params, false);
  const AssociationAdjacency assoc = build_association(aff);
  EmbeddingState state;
  state.node = tape.constant(Matrix::Zero(9, 4));
  state.edge = tape.constant(Matrix::Zero(9, 4));
  EXPECT_THROW(conv_layer(state, assoc, vars, 2), Error);
}

TEST(Head, ConstantScoresGiveUniformAssignment) {
  ad::Tape tape;
  const Matrix s = sinkhorn_layer(tape.constant(Matrix::Constant(4, 4, 1.7)), 0.05, 20).value();
  EXPECT_TRUE((s.array() - 0.25).abs().maxCoeff() < 1e-12);
}

TEST(Head, SmallTauConcentrates) {
  Matrix scores(3, 3);
  scores << 0.2, 0.9, 0.1, 0.8, 0.3, 0.2, 0.1, 0.2, 0.7;
  ad::Tape tape;
  const Matrix s = sinkhorn_layer(tape.constant(scores), 0.01, 20).value();
  EXPECT_GE(s(0, 1), 0.9);
  EXPECT_GE(s(1, 0), 0.9);
  EXPECT_GE(s(2, 2), 0.9);
  EXPECT_LT((s.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-6);
  EXPECT_LT((s.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-6);
}

TEST(Loss, IsNegatedObjective) {
  const AffinityPair aff = random_pair(10, 4, 5);
  std::mt19937_64 rng(11);
  ad::Tape tape;
  EXPECT_EQ(matching_loss(tape, aff, tape.constant(Matrix::Zero(5, 5))).scalar(), 0.0);
  for (int k = 0; k < 5; ++k) {
    const Matrix s = random_matrix(rng, 5, 5, 0.0, 1.0);
    ad::Tape t;
    EXPECT_NEAR(matching_loss(t, aff, t.constant(s)).scalar() + factorized_objective(aff, s), 0.0, 1e-12);
  }
}

TEST(Loss, IdentityBeatsUniformOnIdenticalGraphs) {
  std::mt19937_64 rng(12);
  const ShapeGraph g = random_graph(rng, 5, 2, 16);
  const AffinityPair aff = make_problem(g, g).affinity;
  ad::Tape tape;
  const double identity = matching_loss(tape, aff, tape.constant(Matrix::Identity(5, 5))).scalar();
  const double uniform = matching_loss(tape, aff, tape.constant(Matrix::Constant(5, 5, 0.2))).scalar();
  EXPECT_LT(identity, uniform);
}

TEST(Loss, EquivariantUnderRelabeling) {
  const AffinityPair aff = random_pair(13, 4, 5);
  std::mt19937_64 rng(14);
  const Permutation q = random_permutation(rng, 5);
  const Matrix qm = q.matrix();
  // Node j of the relabeled second graph is node q[j] of the original.
  AffinityPair relabeled = aff;
  relabeled.node_affinity = aff.node_affinity * qm.transpose();
  relabeled.sources_prime = qm * aff.sources_prime;
  relabeled.targets_prime = qm * aff.targets_prime;
  const Matrix s = random_matrix(rng, 5, 5, 0.0, 1.0);
  ad::Tape tape;
  const double before = matching_loss(tape, aff, tape.constant(s)).scalar();
  const double after = matching_loss(tape, relabeled, tape.constant(s * qm.transpose())).scalar();
  EXPECT_NEAR(before, after, 1e-10);
}

class NetworkGradient : public ::testing::TestWithParam<int> {};

// Every parameter block of the full network against central differences.
TEST_P(NetworkGradient, AllBlocksMatchFiniteDifferences) {
  const AffinityPair aff = three_node_pair();
  const NetworkConfig config = small_config(GetParam());
  const NetworkParams params = init_params(config, 7);

  ad::Tape tape;
  const ParamVars vars = bind_params(tape, params, true);
  const ForwardPass pass = forward(tape, aff, build_association(aff), vars, config);
  tape.backward(matching_loss(tape, aff, pass.assignment));

  constexpr double h = 1e-5;
  std::map<std::string, Matrix> numeric;
  double diff_sq = 0.0, norm_sq = 0.0;
  for (const auto& [name, value] : params) {
    Matrix block(value.rows(), value.cols());
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      NetworkParams plus = params, minus = params;
      plus[name].data()[i] += h;
      minus[name].data()[i] -= h;
      block.data()[i] = (forward_loss(aff, plus, config) - forward_loss(aff, minus, config)) / (2 * h);
    }
    diff_sq += (tape.grad(vars.at(name)) - block).squaredNorm();
    norm_sq += block.squaredNorm();
    numeric.emplace(name, std::move(block));
  }
  const double global = std::sqrt(norm_sq);
  ASSERT_GT(global, 1e-6);
  EXPECT_LT(std::sqrt(diff_sq) / global, 1e-4);
  // Blocks that only shift or rescale the scores have zero gradient (the head
  // standardizes them), and central differences there see only roundoff, so
  // per-block errors are measured against at least 1e-3 of the full gradient.
  for (const auto& [name, block] : numeric) {
    const Matrix analytic = tape.grad(vars.at(name));
    const double scale = std::max({analytic.norm(), block.norm(), 1e-3 * global});
    EXPECT_LT((analytic - block).norm() / scale, 1e-4) << name;
  }
}

INSTANTIATE_TEST_SUITE_P(Depths, NetworkGradient, ::testing::Values(1, 5));

TEST(Params, InitLayoutAndValidation) {
  const NetworkConfig config;
  const NetworkParams params = init_params(config, 0);
  EXPECT_NO_THROW(validate_params(config, params));
  EXPECT_EQ(params.at("gat.lift.weight").cols(), 60);
  EXPECT_EQ(params.at("layer1.fh.fc1.weight").rows(), 120);
  EXPECT_EQ(params.at("layer1.fv.fc1.weight").rows(), 60);
  EXPECT_EQ(params.at("layer1.fu.fc1.weight").rows(), 512);
  EXPECT_EQ(params.at("layer5.fu.fc2.weight").cols(), 256);
  EXPECT_EQ(params.at("head.fc.weight").rows(), 256);
  // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in = rows of the block's weight.
  for (const auto& [name, value] : params) {
    const std::string weight = name.substr(0, name.rfind('.')) + ".weight";
    const double bound = 1.0 / std::sqrt(static_cast<double>(params.at(weight).rows()));
    EXPECT_LE(value.cwiseAbs().maxCoeff(), bound) << name;
  }
  EXPECT_EQ(init_params(config, 0), params);
  EXPECT_NE(init_params(config, 1).at("head.fc.weight"), params.at("head.fc.weight"));

  NetworkParams missing = params;
  missing.erase("head.fe.bias");
  EXPECT_THROW(validate_params(config, missing), Error);
  NetworkParams wrong = params;
  wrong["head.fe.bias"] = Matrix::Zero(2, 1);
  EXPECT_THROW(validate_params(config, wrong), Error);
  NetworkParams extra = params;
  extra["bogus"] = Matrix::Zero(1, 1);
  EXPECT_THROW(validate_params(config, extra), Error);
  NetworkParams nan = params;
  nan["head.fe.bias"](0, 0) = std::nan("");
  EXPECT_THROW(validate_params(config, nan), Error);
}

TEST(Training, LearningRateSchedule) {
  TrainConfig config;
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(config, 0), 1e-5);
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(config, 39), 1e-5);
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(config, 40), 5e-6);
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(config, 80), 2.5e-6);
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(config, 119), 2.5e-6);
}

TEST(Training, ZeroEpochsReturnsInitialization) {
  const NetworkConfig config = small_config();
  TrainConfig train_config;
  train_config.epochs = 0;
  train_config.seed = 9;
  const TrainResult result = train({random_pair(15, 3, 4)}, config, train_config);
  EXPECT_EQ(result.params, init_params(config, 9));
  EXPECT_TRUE(result.epoch_losses.empty());
  EXPECT_EQ(result.epochs_completed, 0);
}

TEST(Training, DeterministicAndResumable) {
  const NetworkConfig config = small_config();
  const std::vector<AffinityPair> corpus{random_pair(16, 3, 4), random_pair(17, 4, 4), random_pair(18, 3, 3)};
  TrainConfig full;
  full.epochs = 4;
  full.learning_rate = 1e-3;
  full.milestones = {2};
  full.seed = 5;
  const TrainResult a = train(corpus, config, full);
  const TrainResult b = train(corpus, config, full);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  ASSERT_EQ(a.epoch_losses.size(), 4u);

  TrainConfig half = full;
  half.epochs = 2;
  const TrainResult first = train(corpus, config, half);
  Checkpoint checkpoint{first.params, first.optimizer, first.epochs_completed, first.epoch_losses, ""};
  const TrainResult resumed = train(corpus, config, full, checkpoint_from_json(checkpoint_to_json(checkpoint)));
  EXPECT_EQ(resumed.params, a.params);
  EXPECT_EQ(resumed.epoch_losses, a.epoch_losses);
  EXPECT_EQ(resumed.optimizer.step, a.optimizer.step);
}

TEST(Training, EmptyCorpusRejected) {
  EXPECT_THROW(train({}, small_config(), TrainConfig{}), Error);
}

TEST(Training, NonFiniteLossIsSolverFailure) {
  AffinityPair bad = random_pair(19, 3, 3);
  bad.node_affinity(0, 0) = std::numeric_limits<double>::infinity();
  TrainConfig config;
  config.epochs = 1;
  try {
    train({bad}, small_config(), config);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSolverFailure);
    EXPECT_NE(std::string(e.what()).find("pair 0"), std::string::npos);
  }
}

TEST(Training, LearnsIdentityOnIdenticalPair) {
  std::mt19937_64 rng(20);
  const ShapeGraph g = random_graph(rng, 5, 2, 16);
  const AffinityPair aff = make_problem(g, g).affinity;
  NetworkConfig config;
  config.initial_width = 8;
  config.layer_widths = {16, 16};
  TrainConfig train_config;
  train_config.epochs = 60;
  train_config.learning_rate = 1e-3;
  train_config.milestones = {};
  const TrainResult result = train({aff}, config, train_config);
  EXPECT_LT(result.epoch_losses.back(), result.epoch_losses.front());
  InferenceConfig inference;
  inference.gumbel_samples = 1;
  const InferenceResult out = infer(aff, result.params, config, inference);
  EXPECT_EQ(hungarian(out.assignment, true), Permutation::identity(5));
}

TEST(Inference, SingleSampleIsHungarianOfAssignment) {
  const AffinityPair aff = random_pair(21, 4, 5);
  const NetworkConfig config = small_config();
  InferenceConfig inference;
  inference.gumbel_samples = 1;
  const InferenceResult out = infer(aff, init_params(config, 1), config, inference);
  EXPECT_EQ(out.perm, hungarian(out.assignment, true));
  EXPECT_NEAR(out.objective, permutation_objective(aff, out.perm), 1e-12);
  EXPECT_EQ(out.sample, 0);
}

TEST(Inference, NeverBelowNoiseFreeSample) {
  const AffinityPair aff = random_pair(22, 5, 6);
  const NetworkConfig config = small_config();
  const NetworkParams params = init_params(config, 2);
  InferenceConfig one;
  one.gumbel_samples = 1;
  InferenceConfig many;
  many.gumbel_samples = 32;
  many.seed = 4;
  EXPECT_GE(infer(aff, params, config, many).objective, infer(aff, params, config, one).objective);
}

TEST(Inference, NodeCapIsResourceLimit) {
  const AffinityPair aff = random_pair(23, 4, 5);
  NetworkConfig config = small_config();
  config.max_nodes = 4;
  try {
    infer(aff, init_params(config, 0), config, {});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kResourceLimit);
  }
}

}  // namespace
}  // namespace sgm
