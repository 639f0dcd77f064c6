#pragma once

#include <string>

#include <json.hpp>

#include "dslab/adam.hpp"

namespace dslab {

using Json = nlohmann::json;

// FNV-1a 64 over the canonical (sorted-key) JSON dump; stable across runs.
std::string config_hash(const Json& config);

struct Checkpoint {
  ParamStore params;
  AdamState adam;
  Json manifest;  // seed, config hash, step, anything the trainer wants kept
};

// Versioned binary layout: magic, JSON header (names, shapes, optimizer
// hyperparameters, manifest), then raw little-endian doubles for every
// parameter followed by its Adam moments. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ParamStore& params, const AdamState& adam,
                     const Json& manifest);
Checkpoint load_checkpoint(const std::string& path);

// sha-free content hash of a file, for "eval never mutates checkpoints" checks
std::uint64_t file_fingerprint(const std::string& path);

}  // namespace dslab
