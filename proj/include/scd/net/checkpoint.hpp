// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "scd/net/model.hpp"

namespace scd::net {

/// Checkpoint layout (little-endian):
///   8 bytes  magic "SCDCKPT\0"
///   8 bytes  uint64 header length L
///   L bytes  JSON header: format_version, dtype, backbone, decoder_widths,
///            weight_tying, trainable_tail_k, tensors [{name, shape}]
///   payload  raw scalars of each tensor in header order, row-major
inline constexpr int kCheckpointVersion = 1;

template <typename Scalar>
void save_checkpoint(const ChangeModel<Scalar>& model, const std::filesystem::path& path);

/// Throws LoadError on missing/truncated/corrupt files and VersionError on
/// an unsupported format_version. Stored parameters are cast to Scalar.
template <typename Scalar>
ChangeModel<Scalar> load_checkpoint(const std::filesystem::path& path);

/// Copies pretrained encoder weights into both encoders. The manifest is
/// JSON: {"format_version": 1, "layers": [{"name", "weight", "bias"}]} with
/// file paths relative to the manifest holding raw little-endian float32
/// arrays (weight: out x in*3*3 in (c, ky, kx) order, bias: out).
/// Layers past the tap are ignored. Returns the number of layers imported.
template <typename Scalar>
int import_pretrained(ChangeModel<Scalar>& model, const std::filesystem::path& manifest_path);

} // namespace scd::net
