#pragma once

#include <string>

#include "beex/frozen.hpp"
#include "beex/model.hpp"

namespace beex {

// Single-file container: magic "BEEX", little-endian u32 header length, a
// JSON header (format, model config, tensor manifest), then raw payloads.
// Latent/full-precision tensors are stored as float32; frozen binarized
// tensors as packed bits with word-padded rows.

void save_latent(const Model& model, const std::string& path);
Model load_latent(const std::string& path);

void save_frozen(const FrozenModel& model, const std::string& path);
FrozenModel load_frozen(const std::string& path);

// Returns "latent" or "frozen" plus the embedded config.
struct CheckpointInfo {
    std::string format;
    ModelConfig config;
};
CheckpointInfo peek_checkpoint(const std::string& path);

// Bit accounting for a checkpoint on disk. The ratio compares the frozen
// encoding (1 bit per binarized weight, 32 per full-precision scalar)
// against storing every parameter at 32 bits.
struct SizeLedger {
    std::uint64_t binary_params = 0;
    std::uint64_t fp_params = 0;
    std::uint64_t file_bytes = 0;

    double frozen_bits() const { return static_cast<double>(binary_params) + 32.0 * fp_params; }
    double full_precision_bits() const { return 32.0 * (binary_params + fp_params); }
    double ratio() const { return full_precision_bits() / frozen_bits(); }
};

SizeLedger measure_size(const std::string& path);

// JSON <-> config, shared with the CLI config file.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace beex
