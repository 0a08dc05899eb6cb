#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "ssvae/model.hpp"

namespace ssvae {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimizerConfig {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
};

struct DataConfig {
  std::string dir;                 // PNG directory; empty -> synthetic sprites
  double split_fraction = 0.15;
  bool crop = false;               // 148x148 face crop before resizing
  std::size_t synthetic_count = 1000;
  bool augment = false;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::size_t eval_samples = 1;         // IW samples for the per-epoch test bpd
  std::size_t eval_train_images = 256;  // fixed training subset for train bpd
  std::size_t checkpoint_every = 1;     // epochs; 0 = only at the end
};

struct RunConfig {
  ModelConfig model;
  OptimizerConfig optimizer;
  DataConfig data;
  TrainConfig train;
  std::uint64_t seed = 0;
};

/// Transform chain used when a config names a model kind but no transforms.
std::vector<TransformSpec> default_transforms(ModelKind kind);

/// Parses `key = value` lines grouped under [section] headers. '#' starts a
/// comment. Unknown sections or keys are errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const RunConfig& config);

}  // namespace ssvae
