#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssvae/adamax.hpp"
#include "ssvae/tensor.hpp"

namespace ssvae {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[] = "SSVAE1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<double> data;
  bool operator==(const TensorRecord&) const = default;
};

/// Layout (little-endian): magic[6], u32 version, u32 config length, config
/// text, u64 step, u32 record count, then per record: u32 name length, name,
/// u32 rank, u64 dims[rank], f64 data[numel].
struct Checkpoint {
  std::string config_text;
  std::uint64_t step = 0;
  std::vector<TensorRecord> records;
  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint);
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

/// Parameters as records, optimizer moments as "opt.m.<name>" / "opt.u.<name>".
Checkpoint make_checkpoint(const std::string& config_text, const ParameterList& params,
                           Adamax* optimizer);
/// Copies records into same-named parameters (and optimizer state when given).
/// Every parameter must be present with a matching shape.
void restore_checkpoint(const Checkpoint& checkpoint, ParameterList& params, Adamax* optimizer);

}  // namespace ssvae
