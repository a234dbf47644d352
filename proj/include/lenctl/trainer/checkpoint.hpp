// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/trainer/model.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace lenctl {

inline constexpr int kCheckpointVersion = 1;

/// Directory layout: manifest.txt (key=value lines ending in a checksum over
/// the preceding lines), vocab.txt, and params/<name>.f64 holding each
/// parameter as raw little-endian doubles in row-major order.
///
/// `extra` entries are stored in the manifest under "meta." keys.
void save_checkpoint(const std::filesystem::path& dir, const Model& model,
                     const std::map<std::string, std::string>& extra = {});

/// Throws LoadError on a missing file, version or checksum mismatch,
/// vocabulary hash mismatch, or parameter shape mismatch.
Model load_checkpoint(const std::filesystem::path& dir);

/// Manifest key/value pairs (checksum verified).
std::map<std::string, std::string> read_manifest(const std::filesystem::path& dir);

/// Throws LoadError when the model does not match the requested scheme or
/// control mode.
void require_compatible(const Model& model, std::optional<LengthScheme> scheme,
                        std::optional<ControlMode> control);

}  // namespace lenctl
