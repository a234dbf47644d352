// SPDX-License-Identifier: Apache-2.0
#include "lenctl/autodiff/ops.hpp"

#include "lenctl/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace lenctl::ad {

namespace {

using NodePtr = std::shared_ptr<detail::Node>;

Tape* recording_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = active_tape();
  if (tape == nullptr) {
    return nullptr;
  }
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) {
      return tape;
    }
  }
  return nullptr;
}

Tensor make_output(Matrix value, Tape* tape) {
  if (!value.allFinite()) {
    throw NumericError("operation produced a non-finite value");
  }
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = tape != nullptr;
  return Tensor(std::move(node));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) {
    throw ContractError(std::string(op) + ": undefined tensor");
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "gelu") return Activation::gelu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string to_string(Activation kind) {
  switch (kind) {
    case Activation::relu: return "relu";
    case Activation::gelu: return "gelu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "identity";
}

double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_derivative(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) +
         0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) +
                         " and " + std::to_string(b.rows()) + " disagree");
  }
  Tape* tape = recording_tape({&a, &b});
  Matrix value = a.value() * b.value();
  Tensor out = make_output(std::move(value), tape);
  if (tape != nullptr) {
    NodePtr an = a.node(), bn = b.node(), on = out.node();
    tape->record(on, [an, bn, on] {
      if (an->requires_grad) an->accumulate_expr(on->grad * bn->value.transpose());
      if (bn->requires_grad) bn->accumulate_expr(an->value.transpose() * on->grad);
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("add: shape mismatch");
  }
  Tape* tape = recording_tape({&a, &b});
  Tensor out = make_output(a.value() + b.value(), tape);
  if (tape != nullptr) {
    NodePtr an = a.node(), bn = b.node(), on = out.node();
    tape->record(on, [an, bn, on] {
      if (an->requires_grad) an->accumulate(on->grad);
      if (bn->requires_grad) bn->accumulate(on->grad);
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("mul: shape mismatch");
  }
  Tape* tape = recording_tape({&a, &b});
  Tensor out = make_output(a.value().cwiseProduct(b.value()), tape);
  if (tape != nullptr) {
    NodePtr an = a.node(), bn = b.node(), on = out.node();
    tape->record(on, [an, bn, on] {
      if (an->requires_grad) an->accumulate_expr(on->grad.cwiseProduct(bn->value));
      if (bn->requires_grad) bn->accumulate_expr(on->grad.cwiseProduct(an->value));
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  require_defined(a, "scale");
  Tape* tape = recording_tape({&a});
  Tensor out = make_output(a.value() * factor, tape);
  if (tape != nullptr) {
    NodePtr an = a.node(), on = out.node();
    tape->record(on, [an, on, factor] { an->accumulate_expr(on->grad * factor); });
  }
  return out;
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_defined(a, "add_row");
  require_defined(row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: row must be 1 x " + std::to_string(a.cols()));
  }
  Tape* tape = recording_tape({&a, &row});
  Matrix value = a.value().rowwise() + row.value().row(0);
  Tensor out = make_output(std::move(value), tape);
  if (tape != nullptr) {
    NodePtr an = a.node(), rn = row.node(), on = out.node();
    tape->record(on, [an, rn, on] {
      if (an->requires_grad) an->accumulate(on->grad);
      if (rn->requires_grad) rn->accumulate_expr(on->grad.colwise().sum());
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  Tape* tape = recording_tape({&a});
  Matrix value(1, 1);
  value(0, 0) = a.value().sum();
  Tensor out = make_output(std::move(value), tape);
  if (tape != nullptr) {
    NodePtr an = a.node(), on = out.node();
    tape->record(on, [an, on] {
      an->accumulate_expr(Matrix::Constant(an->value.rows(), an->value.cols(),
                                           on->grad(0, 0)));
    });
  }
  return out;
}

Tensor activation(const Tensor& x, Activation kind) {
  require_defined(x, "activation");
  Tape* tape = recording_tape({&x});
  Matrix value;
  // GELU slope saved from the forward pass, sharing its tanh evaluation.
  auto slope = std::make_shared<Matrix>();
  switch (kind) {
    case Activation::identity: value = x.value(); break;
    case Activation::relu: value = x.value().cwiseMax(0.0); break;
    case Activation::tanh: value = x.value().array().tanh().matrix(); break;
    case Activation::gelu:
      if (tape == nullptr) {
        value = x.value().unaryExpr(&gelu_value);
        break;
      }
      value.resize(x.rows(), x.cols());
      slope->resize(x.rows(), x.cols());
      for (Eigen::Index i = 0; i < value.size(); ++i) {
        const double v = x.value().data()[i];
        const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
        value.data()[i] = 0.5 * v * (1.0 + t);
        slope->data()[i] =
            0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      }
      break;
  }
  Tensor out = make_output(std::move(value), tape);
  if (tape != nullptr) {
    NodePtr xn = x.node(), on = out.node();
    tape->record(on, [xn, on, kind, slope] {
      switch (kind) {
        case Activation::identity:
          xn->accumulate(on->grad);
          break;
        case Activation::relu:
          xn->accumulate_expr(on->grad.cwiseProduct(
              (xn->value.array() > 0.0).cast<double>().matrix()));
          break;
        case Activation::tanh:
          xn->accumulate_expr(on->grad.cwiseProduct(
              (1.0 - on->value.array().square()).matrix()));
          break;
        case Activation::gelu:
          xn->accumulate_expr(on->grad.cwiseProduct(*slope));
          break;
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double epsilon) {
  require_defined(x, "layer_norm");
  const Eigen::Index d = x.cols();
  if (d == 0) {
    throw DimensionError("layer_norm: last dimension is zero");
  }
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw DimensionError("layer_norm: gain/bias must be 1 x " + std::to_string(d));
  }
  Tape* tape = recording_tape({&x, &gain, &bias});
  const Eigen::Index n = x.rows();
  Matrix normalized(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = x.value().row(i);
    const double mean = row.mean();
    const double var = (row.array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + epsilon);
    normalized.row(i) = (row.array() - mean) * inv_std(i);
  }
  Matrix value =
      (normalized.array().rowwise() * gain.value().row(0).array()).rowwise() +
      bias.value().row(0).array();
  Tensor out = make_output(std::move(value), tape);
  if (tape != nullptr) {
    NodePtr xn = x.node(), gn = gain.node(), bn = bias.node(), on = out.node();
    tape->record(on, [xn, gn, bn, on, normalized = std::move(normalized),
                      inv_std = std::move(inv_std)] {
      const Matrix& dy = on->grad;
      if (gn->requires_grad) gn->accumulate_expr(dy.cwiseProduct(normalized).colwise().sum());
      if (bn->requires_grad) bn->accumulate_expr(dy.colwise().sum());
      if (xn->requires_grad) {
        const Matrix dxhat = dy.array().rowwise() * gn->value.row(0).array();
        Matrix dx(dy.rows(), dy.cols());
        for (Eigen::Index i = 0; i < dy.rows(); ++i) {
          const double mean_dxhat = dxhat.row(i).mean();
          const double mean_dxhat_xhat = dxhat.row(i).cwiseProduct(normalized.row(i)).mean();
          dx.row(i) = inv_std(i) * (dxhat.row(i).array() - mean_dxhat -
                                    normalized.row(i).array() * mean_dxhat_xhat);
        }
        xn->accumulate(dx);
      }
    });
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets) {
  require_defined(logits, "softmax_cross_entropy");
  const Eigen::Index n = logits.rows();
  const Eigen::Index v = logits.cols();
  if (static_cast<Eigen::Index>(targets.size()) != n || n == 0) {
    throw DimensionError("softmax_cross_entropy: need one target per row");
  }
  for (int t : targets) {
    if (t < 0 || t >= v) {
      throw IndexError("softmax_cross_entropy: target " + std::to_string(t) +
                       " outside [0, " + std::to_string(v) + ")");
    }
  }
  Tape* tape = recording_tape({&logits});
  Matrix probs(n, v);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = logits.value().row(i);
    const double max = row.maxCoeff();
    const auto shifted = (row.array() - max).exp();
    const double z = shifted.sum();
    probs.row(i) = shifted / z;
    total += std::log(z) + max - row(targets[i]);
  }
  Matrix value(1, 1);
  value(0, 0) = total / static_cast<double>(n);
  Tensor out = make_output(std::move(value), tape);
  if (tape != nullptr) {
    NodePtr ln = logits.node(), on = out.node();
    std::vector<int> target_copy(targets.begin(), targets.end());
    tape->record(on, [ln, on, probs = std::move(probs), target_copy = std::move(target_copy)] {
      Matrix g = probs;
      for (std::size_t i = 0; i < target_copy.size(); ++i) {
        g(static_cast<Eigen::Index>(i), target_copy[i]) -= 1.0;
      }
      g *= on->grad(0, 0) / static_cast<double>(g.rows());
      ln->accumulate(g);
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  require_defined(table, "gather_rows");
  const Eigen::Index rows = table.rows();
  Matrix value(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= rows) {
      throw IndexError("gather_rows: row " + std::to_string(ids[i]) +
                       " outside [0, " + std::to_string(rows) + ")");
    }
    value.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  Tape* tape = recording_tape({&table});
  Tensor out = make_output(std::move(value), tape);
  if (tape != nullptr) {
    NodePtr tn = table.node(), on = out.node();
    std::vector<int> id_copy(ids.begin(), ids.end());
    tape->record(on, [tn, on, id_copy = std::move(id_copy)] {
      if (tn->grad.size() == 0) {
        tn->grad = Matrix::Zero(tn->value.rows(), tn->value.cols());
      }
      for (std::size_t i = 0; i < id_copy.size(); ++i) {
        tn->grad.row(id_copy[i]) += on->grad.row(static_cast<Eigen::Index>(i));
      }
    });
  }
  return out;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                 std::span<const AttentionBlock> blocks, bool causal) {
  require_defined(q, "attention");
  require_defined(k, "attention");
  require_defined(v, "attention");
  const Eigen::Index d = q.cols();
  if (heads <= 0 || d % heads != 0) {
    throw DimensionError("attention: width not divisible by head count");
  }
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows()) {
    throw DimensionError("attention: q/k/v shapes disagree");
  }
  for (const auto& b : blocks) {
    if (b.query_begin < 0 || b.query_begin + b.query_count > q.rows() ||
        b.key_begin < 0 || b.key_begin + b.key_count > k.rows() || b.key_count <= 0) {
      throw IndexError("attention: block outside packed rows");
    }
    if (causal && b.key_count < b.query_count) {
      throw DimensionError("attention: causal block with fewer keys than queries");
    }
  }
  const Eigen::Index hd = d / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(hd));
  Tape* tape = recording_tape({&q, &k, &v});

  Matrix value = Matrix::Zero(q.rows(), d);
  // Attention weights per (block, head), kept for the backward rule.
  std::vector<Matrix> weights;
  weights.reserve(blocks.size() * static_cast<std::size_t>(heads));
  for (const auto& b : blocks) {
    const Eigen::Index shift = b.key_count - b.query_count;
    for (int h = 0; h < heads; ++h) {
      const auto qh = q.value().block(b.query_begin, h * hd, b.query_count, hd);
      const auto kh = k.value().block(b.key_begin, h * hd, b.key_count, hd);
      const auto vh = v.value().block(b.key_begin, h * hd, b.key_count, hd);
      Matrix scores = (qh * kh.transpose()) * scale_factor;
      for (Eigen::Index t = 0; t < b.query_count; ++t) {
        const Eigen::Index visible = causal ? t + shift + 1 : b.key_count;
        const double max = scores.row(t).head(visible).maxCoeff();
        double z = 0.0;
        for (Eigen::Index j = 0; j < b.key_count; ++j) {
          const double e = j < visible ? std::exp(scores(t, j) - max) : 0.0;
          scores(t, j) = e;
          z += e;
        }
        scores.row(t) /= z;
      }
      value.block(b.query_begin, h * hd, b.query_count, hd).noalias() = scores * vh;
      if (tape != nullptr) {
        weights.push_back(std::move(scores));
      }
    }
  }
  Tensor out = make_output(std::move(value), tape);
  if (tape != nullptr) {
    NodePtr qn = q.node(), kn = k.node(), vn = v.node(), on = out.node();
    std::vector<AttentionBlock> block_copy(blocks.begin(), blocks.end());
    tape->record(on, [qn, kn, vn, on, heads, hd, scale_factor,
                      block_copy = std::move(block_copy), weights = std::move(weights)] {
      Matrix dq = Matrix::Zero(qn->value.rows(), qn->value.cols());
      Matrix dk = Matrix::Zero(kn->value.rows(), kn->value.cols());
      Matrix dv = Matrix::Zero(vn->value.rows(), vn->value.cols());
      std::size_t w = 0;
      for (const auto& b : block_copy) {
        for (int h = 0; h < heads; ++h, ++w) {
          const Matrix& p = weights[w];
          const auto qh = qn->value.block(b.query_begin, h * hd, b.query_count, hd);
          const auto kh = kn->value.block(b.key_begin, h * hd, b.key_count, hd);
          const auto vh = vn->value.block(b.key_begin, h * hd, b.key_count, hd);
          const auto dout = on->grad.block(b.query_begin, h * hd, b.query_count, hd);
          dv.block(b.key_begin, h * hd, b.key_count, hd) += p.transpose() * dout;
          const Matrix dp = dout * vh.transpose();
          const Eigen::VectorXd row_dot = dp.cwiseProduct(p).rowwise().sum();
          const Matrix ds = (p.array() * (dp.colwise() - row_dot).array()).matrix() * scale_factor;
          dq.block(b.query_begin, h * hd, b.query_count, hd) += ds * kh;
          dk.block(b.key_begin, h * hd, b.key_count, hd) += ds.transpose() * qh;
        }
      }
      if (qn->requires_grad) qn->accumulate(dq);
      if (kn->requires_grad) kn->accumulate(dk);
      if (vn->requires_grad) vn->accumulate(dv);
    });
  }
  return out;
}

}  // namespace lenctl::ad
