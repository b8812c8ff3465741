// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>

#include "prodsearch/model.hpp"

namespace prodsearch {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint: magic "PSCKPT01", u32 version, the model config, then
/// every tensor in declaration order as u32 rows, u32 cols and row-major
/// little-endian float32 values.
void write_checkpoint(std::ostream& out, const Model<float>& model);
Model<float> read_checkpoint(std::istream& in);

/// Tab-separated `name rows cols` per tensor.
void write_manifest(std::ostream& out, const Model<float>& model);

/// Writes `path` and `path.manifest`.
void save_checkpoint(const std::filesystem::path& path, const Model<float>& model);
/// Throws InputError when the file is missing or malformed.
Model<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace prodsearch
