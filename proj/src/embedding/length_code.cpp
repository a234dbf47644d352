// SPDX-License-Identifier: Apache-2.0
#include "lenctl/embedding/length_code.hpp"

#include "lenctl/error.hpp"

#include <bit>
#include <cmath>

namespace lenctl {

LengthScheme parse_scheme(std::string_view name) {
  if (name == "level") return LengthScheme::level;
  if (name == "bit") return LengthScheme::bit;
  if (name == "ordinal") return LengthScheme::ordinal;
  throw ConfigError("unknown length scheme '" + std::string(name) + "'");
}

std::string to_string(LengthScheme scheme) {
  switch (scheme) {
    case LengthScheme::level: return "level";
    case LengthScheme::bit: return "bit";
    case LengthScheme::ordinal: return "ordinal";
  }
  return "ordinal";
}

int code_width(LengthScheme scheme, int max_length) {
  if (max_length < 1) {
    throw RangeError("max length must be positive");
  }
  if (scheme == LengthScheme::bit) {
    const auto k = static_cast<unsigned>(max_length);
    if (!std::has_single_bit(k) || max_length < 2) {
      throw RangeError("bit codes need a power-of-two max length >= 2, got " +
                       std::to_string(max_length));
    }
    return std::countr_zero(k);
  }
  return max_length;
}

LengthCode encode_length(int k, int max_length, LengthScheme scheme) {
  const int width = code_width(scheme, max_length);
  if (k < 1 || k > max_length) {
    throw RangeError("length " + std::to_string(k) + " outside [1, " +
                     std::to_string(max_length) + "]");
  }
  LengthCode code{scheme, k, max_length, ad::RowVector::Zero(width)};
  switch (scheme) {
    case LengthScheme::level:
      code.vector(k - 1) = 1.0;
      break;
    case LengthScheme::ordinal:
      code.vector.head(k).setOnes();
      break;
    case LengthScheme::bit: {
      const unsigned value = static_cast<unsigned>(k % max_length);
      for (int i = 0; i < width; ++i) {
        code.vector(width - 1 - i) = (value >> i) & 1U ? 1.0 : 0.0;
      }
      break;
    }
  }
  return code;
}

int decode_length(const LengthCode& code) {
  const int width = code_width(code.scheme, code.max_length);
  if (code.vector.size() != width) {
    throw DimensionError("length code has width " +
                         std::to_string(code.vector.size()) + ", expected " +
                         std::to_string(width));
  }
  switch (code.scheme) {
    case LengthScheme::level: {
      Eigen::Index pos = 0;
      code.vector.maxCoeff(&pos);
      return static_cast<int>(pos) + 1;
    }
    case LengthScheme::ordinal:
      return static_cast<int>(std::lround(code.vector.sum()));
    case LengthScheme::bit: {
      int value = 0;
      for (int i = 0; i < width; ++i) {
        value = (value << 1) | (code.vector(i) > 0.5 ? 1 : 0);
      }
      return value == 0 ? code.max_length : value;
    }
  }
  return 0;
}

int discretize_duration(double seconds) {
  if (!(seconds >= 0.0)) {
    throw RangeError("duration must be non-negative");
  }
  // Round away representation noise before ceil so 2.0 s is bin 20, not 21.
  const double bins = std::round(seconds / kDurationBinSeconds * 1e9) / 1e9;
  const double bin = std::ceil(bins);
  if (bin > kDefaultMaxLength) return kDefaultMaxLength;
  return std::max(1, static_cast<int>(bin));
}

ControlMode parse_control_mode(std::string_view name) {
  if (name == "tokens") return ControlMode::tokens;
  if (name == "duration") return ControlMode::duration;
  throw ConfigError("unknown control mode '" + std::string(name) + "'");
}

std::string to_string(ControlMode mode) {
  return mode == ControlMode::tokens ? "tokens" : "duration";
}

}  // namespace lenctl
