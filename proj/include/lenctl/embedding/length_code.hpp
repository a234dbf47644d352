// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/autodiff/tensor.hpp"

#include <string>
#include <string_view>

namespace lenctl {

enum class LengthScheme { level, bit, ordinal };

LengthScheme parse_scheme(std::string_view name);
std::string to_string(LengthScheme scheme);

inline constexpr int kDefaultMaxLength = 256;

/// Binary-valued representation of a length (or duration bin) k in 1..K.
///
///  - level:   one-hot, a single 1 at position k (dimension K)
///  - bit:     binary expansion of k, most significant bit first
///             (dimension log2 K). k == K has no room in log2 K bits and is
///             written as the all-zero word, which no other k produces.
///  - ordinal: the first k entries are 1, the remaining K - k are 0
struct LengthCode {
  LengthScheme scheme = LengthScheme::ordinal;
  int k = 1;
  int max_length = kDefaultMaxLength;
  ad::RowVector vector;
};

/// Width of the code vector for a scheme.
int code_width(LengthScheme scheme, int max_length);

/// Throws RangeError when k is outside [1, max_length]; bit codes also need
/// a power-of-two max_length.
LengthCode encode_length(int k, int max_length, LengthScheme scheme);

/// Inverse of encode_length for every scheme.
int decode_length(const LengthCode& code);

/// Duration quantization: 0.1 s bins, ceil(seconds / 0.1) clamped to
/// [1, 256], so anything above 25.6 s lands in the last bin.
int discretize_duration(double seconds);

inline constexpr double kDurationBinSeconds = 0.1;

/// What the length code counts: tokens, or 0.1 s duration bins.
enum class ControlMode { tokens, duration };
ControlMode parse_control_mode(std::string_view name);
std::string to_string(ControlMode mode);

}  // namespace lenctl
