#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssvae/adamax.hpp"
#include "ssvae/checkpoint.hpp"
#include "ssvae/config.hpp"
#include "ssvae/dataset.hpp"
#include "ssvae/objectives.hpp"

namespace ssvae {

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochMetrics {
  std::size_t epoch = 0;       // 0 = after initialization, before any step
  TermSummary terms;           // training-objective means over the epoch's batches
  double train_bpd = 0.0;      // ELBO bpd on the fixed training subset
  double test_bpd = 0.0;       // IWAE bpd on the test split
};

inline constexpr char kMetricsHeader[] = "epoch,re_x,re_y,kl_z,kl_u,elbo,test_bpd";
std::string metrics_csv_row(const EpochMetrics& m);

/// Builds the dataset a config describes: PNG directory or synthetic sprites.
Dataset load_run_dataset(const RunConfig& config);

/// Owns model and optimizer state for one run.
class Trainer {
 public:
  Trainer(RunConfig config, Dataset data);

  /// Data-dependent init on the first training batch; returns the epoch-0 metrics.
  EpochMetrics initialize();
  EpochMetrics run_epoch();
  /// Training-objective bpd on a fixed training subset, seeded.
  double train_bpd();
  double test_bpd();

  LatentHierarchy& model() { return model_; }
  Adamax& optimizer() { return optimizer_; }
  const RunConfig& config() const { return config_; }
  const Dataset& data() const { return data_; }
  std::size_t epoch() const { return epoch_; }
  Checkpoint checkpoint();
  void restore(const Checkpoint& checkpoint);

 private:
  RunConfig config_;
  Dataset data_;
  LatentHierarchy model_;
  ParameterList params_;
  Adamax optimizer_;
  Rng rng_;
  std::size_t epoch_ = 0;
  bool initialized_ = false;
};

struct TrainOptions {
  std::string out_dir;  // metrics.csv, checkpoint.bin, checkpoint_epochN.bin; empty = none
  /// Called after every epoch (including epoch 0); returning true stops training.
  std::function<bool(const EpochMetrics&)> on_epoch;
  bool verbose = false;
};

struct TrainResult {
  std::vector<EpochMetrics> history;  // history[0] is the post-init evaluation
  Checkpoint final_checkpoint;
};

/// Initialization followed by config.train.epochs epochs. A non-finite loss
/// writes the last good state to <out_dir>/checkpoint.bin and throws NonFiniteLoss.
TrainResult train(const RunConfig& config, const Dataset& data, const TrainOptions& options = {});

struct AblationRow {
  PriorKind prior;
  std::uint64_t seed;
  double test_bpd;
};

/// Trains one model per (prior, seed) at equal budget; test bpd per run.
std::vector<AblationRow> ablate_prior(const RunConfig& base, const Dataset& data,
                                      const std::vector<PriorKind>& priors,
                                      const std::vector<std::uint64_t>& seeds,
                                      const TrainOptions& options = {});
/// Median test bpd of a prior across seeds.
double median_bpd(const std::vector<AblationRow>& rows, PriorKind prior);

}  // namespace ssvae
