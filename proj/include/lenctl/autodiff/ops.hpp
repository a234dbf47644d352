// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/autodiff/tensor.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lenctl::ad {

enum class Activation { identity, relu, gelu, tanh };

/// Parses "relu" / "gelu" / "tanh" / "identity"; anything else is a
/// ConfigError.
Activation parse_activation(std::string_view name);
std::string to_string(Activation kind);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// a (m x n) + row (1 x n) added to every row.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor sum(const Tensor& a);

Tensor activation(const Tensor& x, Activation kind);
inline Tensor relu(const Tensor& x) { return activation(x, Activation::relu); }
inline Tensor gelu(const Tensor& x) { return activation(x, Activation::gelu); }
inline Tensor tanh(const Tensor& x) { return activation(x, Activation::tanh); }

/// Row-wise normalization over the last dimension followed by gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double epsilon = 1e-5);

/// Mean next-token negative log-likelihood over the rows of `logits`.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets);

/// Row lookup: out.row(i) = table.row(ids[i]). Backward scatters into table.
Tensor gather_rows(const Tensor& table, std::span<const int> ids);

/// One block of an attention call: queries [query_begin, +query_count) attend
/// keys [key_begin, +key_count). With causal masking, query offset t may see
/// key offsets <= t + (key_count - query_count), which covers both a full
/// teacher-forced sequence and a single incremental step over a cache.
struct AttentionBlock {
  Eigen::Index query_begin = 0;
  Eigen::Index query_count = 0;
  Eigen::Index key_begin = 0;
  Eigen::Index key_count = 0;
};

/// Multi-head scaled dot-product attention over packed rows. q is nq x d,
/// k and v are nk x d, d divisible by `heads`; output is nq x d.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                 std::span<const AttentionBlock> blocks, bool causal);

/// Scalar GELU (tanh approximation) and its derivative, shared with tests.
double gelu_value(double x);
double gelu_derivative(double x);

}  // namespace lenctl::ad
