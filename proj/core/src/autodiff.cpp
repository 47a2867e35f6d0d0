#include <sgm/autodiff.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include <sgm/error.hpp>

namespace sgm::ad {
namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw invalid_input("use of an unbound Var");
  return *a.tape();
}

Tape& common_tape(Var a, Var b) {
  Tape& t = tape_of(a);
  if (&t != &tape_of(b)) throw invalid_input("Vars belong to different tapes");
  return t;
}

// exp() of strongly negative logits lands in the subnormal range, and
// arithmetic on subnormals is two orders of magnitude slower on x86. Such
// values are below any tolerance we use, so they are flushed to zero.
Matrix flushed_exp(const Matrix& x) {
  Matrix out = x.array().exp();
  out = (out.array() < std::numeric_limits<double>::min()).select(0.0, out);
  return out;
}

std::string shape_string(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw invalid_input(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

enum class Broadcast { kNone, kRow, kScalar };

Broadcast broadcast_kind(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kNone;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  throw invalid_input(std::string(op) + ": cannot broadcast " + shape_string(b) + " onto " + shape_string(a));
}

Matrix reduce_to(const Matrix& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::kRow:
      return g.colwise().sum();
    case Broadcast::kScalar:
      return Matrix::Constant(1, 1, g.sum());
    case Broadcast::kNone:
      break;
  }
  return g;
}

Var add_impl(Var a, Var b, double sign, const char* op) {
  Tape& t = common_tape(a, b);
  const Broadcast kind = broadcast_kind(a.value(), b.value(), op);
  Matrix out;
  switch (kind) {
    case Broadcast::kNone:
      out = a.value() + sign * b.value();
      break;
    case Broadcast::kRow:
      out = a.value().rowwise() + sign * b.value().row(0);
      break;
    case Broadcast::kScalar:
      out = a.value().array() + sign * b.value()(0, 0);
      break;
  }
  return t.record(std::move(out), {a, b}, [a, b, kind, sign](Tape& tape, const Matrix& g) {
    if (tape.requires_grad(a)) tape.accumulate(a, g);
    if (tape.requires_grad(b)) tape.accumulate(b, sign * reduce_to(g, kind));
  });
}

}  // namespace

const Matrix& Var::value() const {
  if (!valid()) throw invalid_input("use of an unbound Var");
  return tape_->value(id_);
}

double Var::scalar() const {
  if (rows() != 1 || cols() != 1) throw invalid_input("Var is not a scalar");
  return value()(0, 0);
}

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, true});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, const std::vector<Var>& parents, Backprop backprop) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw invalid_input("parent Var belongs to a different tape");
    needs = needs || requires_grad(p);
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs ? std::move(backprop) : nullptr, needs});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(Var v, const Matrix& contribution) {
  Node& node = nodes_.at(static_cast<std::size_t>(v.id()));
  if (!node.requires_grad) return;
  require_same_shape(node.value, contribution, "gradient accumulation");
  if (node.grad.size() == 0)
    node.grad = contribution;
  else
    node.grad += contribution;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw invalid_input("loss belongs to a different tape");
  if (loss.rows() != 1 || loss.cols() != 1) throw invalid_input("backward() needs a scalar loss");
  if (backward_done_) throw invalid_input("backward() already ran on this tape; build a new tape");
  backward_done_ = true;
  if (!requires_grad(loss)) return;
  nodes_[static_cast<std::size_t>(loss.id())].grad = Matrix::Ones(1, 1);
  for (int id = loss.id(); id >= 0; --id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.backprop || node.grad.size() == 0) continue;
    // Parents always have smaller ids, so this node's gradient is final.
    node.backprop(*this, node.grad);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& node = nodes_.at(static_cast<std::size_t>(v.id()));
  if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  if (a.cols() != b.rows())
    throw invalid_input("matmul: shape mismatch " + shape_string(a.value()) + " * " + shape_string(b.value()));
  return t.record(a.value() * b.value(), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    if (tape.requires_grad(a)) tape.accumulate(a, g * b.value().transpose());
    if (tape.requires_grad(b)) tape.accumulate(b, a.value().transpose() * g);
  });
}

Var add(Var a, Var b) { return add_impl(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_impl(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    if (tape.requires_grad(a)) tape.accumulate(a, g.cwiseProduct(b.value()));
    if (tape.requires_grad(b)) tape.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var div(Var a, Var b, double floor) {
  Tape& t = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "div");
  const Matrix denom = b.value().cwiseMax(floor);
  Matrix out = a.value().cwiseQuotient(denom);
  return t.record(std::move(out), {a, b}, [a, b, denom, floor](Tape& tape, const Matrix& g) {
    if (tape.requires_grad(a)) tape.accumulate(a, g.cwiseQuotient(denom));
    if (tape.requires_grad(b)) {
      Matrix gb = -g.cwiseProduct(a.value()).cwiseQuotient(denom.cwiseProduct(denom));
      gb = (b.value().array() > floor).select(gb, 0.0);
      tape.accumulate(b, gb);
    }
  });
}

Var exp(Var a) {
  Tape& t = tape_of(a);
  Matrix out = flushed_exp(a.value());
  const int id = static_cast<int>(t.size());
  return t.record(std::move(out), {a}, [a, id](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g.cwiseProduct(tape.value(id)));
  });
}

Var log(Var a, double floor) {
  Tape& t = tape_of(a);
  const Matrix clamped = a.value().cwiseMax(floor);
  Matrix out = clamped.array().log();
  return t.record(std::move(out), {a}, [a, clamped, floor](Tape& tape, const Matrix& g) {
    Matrix ga = g.cwiseQuotient(clamped);
    ga = (a.value().array() > floor).select(ga, 0.0);
    tape.accumulate(a, ga);
  });
}

Var relu(Var a) { return leaky_relu(a, 0.0); }

Var leaky_relu(Var a, double slope) {
  Tape& t = tape_of(a);
  Matrix out = (a.value().array() > 0.0).select(a.value(), slope * a.value());
  return t.record(std::move(out), {a}, [a, slope](Tape& tape, const Matrix& g) {
    // Subgradient at 0 is the negative-side slope (0 for plain relu).
    tape.accumulate(a, (a.value().array() > 0.0).select(g, slope * g));
  });
}

Var negate(Var a) { return scale(a, -1.0); }

Var scale(Var a, double factor) {
  Tape& t = tape_of(a);
  return t.record(factor * a.value(), {a}, [a, factor](Tape& tape, const Matrix& g) { tape.accumulate(a, factor * g); });
}

Var concat_cols(Var a, Var b) {
  Tape& t = common_tape(a, b);
  if (a.rows() != b.rows()) throw invalid_input("concat_cols: row counts differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index split = a.cols();
  return t.record(std::move(out), {a, b}, [a, b, split](Tape& tape, const Matrix& g) {
    if (tape.requires_grad(a)) tape.accumulate(a, g.leftCols(split));
    if (tape.requires_grad(b)) tape.accumulate(b, g.rightCols(g.cols() - split));
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  return t.record(a.value().transpose(), {a}, [a](Tape& tape, const Matrix& g) { tape.accumulate(a, g.transpose()); });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  Tape& t = tape_of(a);
  if (rows * cols != a.value().size()) throw invalid_input("reshape: element count mismatch");
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  return t.record(std::move(out), {a}, [a, r0, c0](Tape& tape, const Matrix& g) {
    tape.accumulate(a, Eigen::Map<const Matrix>(g.data(), r0, c0));
  });
}

Var row_softmax(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out.row(i) = flushed_exp(out.row(i).array() - out.row(i).maxCoeff());
    out.row(i) /= out.row(i).sum();
  }
  const int id = static_cast<int>(t.size());
  return t.record(std::move(out), {a}, [a, id](Tape& tape, const Matrix& g) {
    const Matrix& y = tape.value(id);
    const Vector dot = g.cwiseProduct(y).rowwise().sum();
    tape.accumulate(a, y.cwiseProduct(g.colwise() - dot));
  });
}

Var log_softmax_rows(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double m = out.row(i).maxCoeff();
    out.row(i).array() -= m + std::log((out.row(i).array() - m).exp().sum());
  }
  const int id = static_cast<int>(t.size());
  return t.record(std::move(out), {a}, [a, id](Tape& tape, const Matrix& g) {
    const Matrix soft = flushed_exp(tape.value(id));
    const Vector total = g.rowwise().sum();
    tape.accumulate(a, g - soft.cwiseProduct(total.replicate(1, g.cols())));
  });
}

Var reduce_sum(Var a) {
  Tape& t = tape_of(a);
  const Eigen::Index r = a.rows(), c = a.cols();
  return t.record(Matrix::Constant(1, 1, a.value().sum()), {a}, [a, r, c](Tape& tape, const Matrix& g) {
    tape.accumulate(a, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var standardize(Var a, double eps) {
  Tape& t = tape_of(a);
  const double count = static_cast<double>(a.value().size());
  const Matrix centered = a.value().array() - a.value().mean();
  const double inv_std = 1.0 / std::sqrt(centered.squaredNorm() / count + eps);
  Matrix out = centered * inv_std;
  const int id = static_cast<int>(t.size());
  return t.record(std::move(out), {a}, [a, id, inv_std, count](Tape& tape, const Matrix& g) {
    const Matrix& z = tape.value(id);
    const double g_mean = g.sum() / count;
    const double gz_mean = g.cwiseProduct(z).sum() / count;
    tape.accumulate(a, inv_std * ((g.array() - g_mean) - gz_mean * z.array()).matrix());
  });
}

Var trace_product(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "trace_product");
  return t.record(Matrix::Constant(1, 1, a.value().cwiseProduct(b.value()).sum()), {a, b},
                  [a, b](Tape& tape, const Matrix& g) {
                    if (tape.requires_grad(a)) tape.accumulate(a, g(0, 0) * b.value());
                    if (tape.requires_grad(b)) tape.accumulate(b, g(0, 0) * a.value());
                  });
}

Var sparse_matmul(const SparseMatrix& a, Var x) {
  Tape& t = tape_of(x);
  if (a.cols() != x.rows()) throw invalid_input("sparse_matmul: shape mismatch");
  // The closure owns a copy so callers may drop the pattern before backward().
  auto pattern = std::make_shared<const SparseMatrix>(a);
  Matrix out = a * x.value();
  return t.record(std::move(out), {x}, [pattern, x](Tape& tape, const Matrix& g) {
    tape.accumulate(x, pattern->transpose() * g);
  });
}

Var segment_softmax(const SparseMatrix& pattern, Var logits) {
  Tape& t = tape_of(logits);
  if (logits.rows() != pattern.nonZeros() || logits.cols() != 1)
    throw invalid_input("segment_softmax: logits must be nnz x 1");
  auto p = std::make_shared<const SparseMatrix>(pattern);
  Matrix out(logits.rows(), 1);
  const int* outer = pattern.outerIndexPtr();
  for (Eigen::Index r = 0; r < pattern.rows(); ++r) {
    const int begin = outer[r], end = outer[r + 1];
    if (begin == end) continue;
    double m = -std::numeric_limits<double>::infinity();
    for (int k = begin; k < end; ++k) m = std::max(m, logits.value()(k, 0));
    double total = 0.0;
    for (int k = begin; k < end; ++k) total += (out(k, 0) = std::exp(logits.value()(k, 0) - m));
    for (int k = begin; k < end; ++k) out(k, 0) /= total;
  }
  const int id = static_cast<int>(t.size());
  return t.record(std::move(out), {logits}, [p, logits, id](Tape& tape, const Matrix& g) {
    const Matrix& y = tape.value(id);
    Matrix gl(y.rows(), 1);
    const int* outer = p->outerIndexPtr();
    for (Eigen::Index r = 0; r < p->rows(); ++r) {
      double dot = 0.0;
      for (int k = outer[r]; k < outer[r + 1]; ++k) dot += g(k, 0) * y(k, 0);
      for (int k = outer[r]; k < outer[r + 1]; ++k) gl(k, 0) = y(k, 0) * (g(k, 0) - dot);
    }
    tape.accumulate(logits, gl);
  });
}

Var sparse_values_matmul(const SparseMatrix& pattern, Var values, Var x) {
  Tape& t = common_tape(values, x);
  if (values.rows() != pattern.nonZeros() || values.cols() != 1)
    throw invalid_input("sparse_values_matmul: values must be nnz x 1");
  if (pattern.cols() != x.rows()) throw invalid_input("sparse_values_matmul: shape mismatch");
  auto p = std::make_shared<const SparseMatrix>(pattern);
  const int* outer = pattern.outerIndexPtr();
  const int* inner = pattern.innerIndexPtr();
  Matrix out = Matrix::Zero(pattern.rows(), x.cols());
  for (Eigen::Index r = 0; r < pattern.rows(); ++r)
    for (int k = outer[r]; k < outer[r + 1]; ++k) out.row(r) += values.value()(k, 0) * x.value().row(inner[k]);
  return t.record(std::move(out), {values, x}, [p, values, x](Tape& tape, const Matrix& g) {
    const int* outer = p->outerIndexPtr();
    const int* inner = p->innerIndexPtr();
    const bool want_values = tape.requires_grad(values);
    const bool want_x = tape.requires_grad(x);
    Matrix gv = Matrix::Zero(values.rows(), 1);
    Matrix gx = want_x ? Matrix::Zero(x.rows(), x.cols()) : Matrix();
    for (Eigen::Index r = 0; r < p->rows(); ++r) {
      for (int k = outer[r]; k < outer[r + 1]; ++k) {
        if (want_values) gv(k, 0) = g.row(r).dot(x.value().row(inner[k]));
        if (want_x) gx.row(inner[k]) += values.value()(k, 0) * g.row(r);
      }
    }
    if (want_values) tape.accumulate(values, gv);
    if (want_x) tape.accumulate(x, gx);
  });
}

void adam_step(ParameterMap& params, const ParameterMap& grads, double learning_rate, const AdamOptions& options,
               AdamState& state) {
  ++state.step;
  const double correction1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
  for (auto& [name, value] : params) {
    const auto it = grads.find(name);
    if (it == grads.end()) continue;
    const Matrix& g = it->second;
    require_same_shape(value, g, "adam_step");
    Matrix& m = state.first_moment[name];
    Matrix& v = state.second_moment[name];
    if (m.size() == 0) m = Matrix::Zero(value.rows(), value.cols());
    if (v.size() == 0) v = Matrix::Zero(value.rows(), value.cols());
    m = options.beta1 * m + (1.0 - options.beta1) * g;
    v = options.beta2 * v + (1.0 - options.beta2) * g.cwiseProduct(g);
    const Matrix m_hat = m / correction1;
    const Matrix v_hat = v / correction2;
    value.array() -= learning_rate * m_hat.array() / (v_hat.array().sqrt() + options.eps);
  }
}

}  // namespace sgm::ad
