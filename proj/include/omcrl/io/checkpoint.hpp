#pragma once

// Binary checkpoint container. Layout (little-endian):
//   "OMCK" | u32 version | u8 component | u64 config hash | u64 step
//   | str rng state | u32 n_meta {str key, str value} | u32 n_blobs
//   {str name, u32 rank, u64 dims[rank], f32 values[]} | u64 FNV-1a of all
//   preceding bytes.
// str = u32 length + bytes.

#include "omcrl/nn/layers.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace omcrl::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class Component : std::uint8_t { encoder, projection, transformer, oracle, student };

std::string to_string(Component c);
Component component_from_string(const std::string& name);

struct Blob {
  std::string name;
  ad::Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  Component component = Component::encoder;
  std::uint64_t config_hash = 0;
  std::uint64_t step = 0;
  std::string rng_state;
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<Blob> blobs;

  const std::string* meta(const std::string& key) const;
  void set_meta(const std::string& key, const std::string& value);
};

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t hash = 0xcbf29ce484222325ULL);

// Hash of names, shapes and the float32 images of the values.
std::uint64_t parameter_hash(const nn::ParameterRefs& params);
std::string hex(std::uint64_t v);

// Rounds every value to the nearest float32, the precision checkpoints keep.
void round_to_float(const nn::ParameterRefs& params);

std::string rng_state(const std::mt19937_64& rng);
void restore_rng(std::mt19937_64& rng, const std::string& state);

Checkpoint make_checkpoint(Component component, const nn::ParameterRefs& params, std::uint64_t config_hash,
                           std::uint64_t step, const std::mt19937_64* rng = nullptr);
// Copies blobs into the parameters by name. Every parameter must be present
// with a matching shape; nothing is modified unless all checks pass.
void load_parameters(const Checkpoint& ckpt, const nn::ParameterRefs& params);

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes, const std::string& origin);

// Writes to `path`.tmp then renames.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// ConfigError on a mismatch unless `force`, in which case it only warns.
void check_config_hash(const Checkpoint& ckpt, std::uint64_t expected, bool force, const std::string& path);
// ConfigError when the checkpoint holds a different component.
void expect_component(const Checkpoint& ckpt, Component expected, const std::string& path);

}  // namespace omcrl::io
