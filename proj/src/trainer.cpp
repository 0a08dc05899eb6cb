#include "ssvae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "ssvae/pipelines.hpp"

namespace ssvae {

namespace fs = std::filesystem;

std::string metrics_csv_row(const EpochMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", m.epoch, m.terms.re_x,
                m.terms.re_y, m.terms.kl_z, m.terms.kl_u, m.terms.elbo, m.test_bpd);
  return buf;
}

Dataset load_run_dataset(const RunConfig& config) {
  const auto& g = config.model.image;
  if (config.data.dir.empty()) {
    if (g.channels != 3 || g.height != g.width) {
      throw ConfigError("synthetic sprites are square RGB; set model.image = 3xNxN");
    }
    return split_dataset(generate_sprites(config.data.synthetic_count, g.height, config.seed),
                         config.data.split_fraction, config.seed);
  }
  IngestOptions ingest;
  ingest.crop = config.data.crop;
  if (config.data.crop) ingest.resize = g.height;
  Dataset d = ingest_dataset(config.data.dir, config.data.split_fraction, config.seed, ingest);
  const ImageU8& first = d.train.empty() ? d.test.front() : d.train.front();
  if (first.channels != g.channels || first.height != g.height || first.width != g.width) {
    throw DatasetError("dataset images do not match model.image");
  }
  return d;
}

namespace {

constexpr std::uint64_t kTrainStream = 0x5eedULL;
constexpr std::uint64_t kEvalStream = 0xe7a1ULL;

Tensor batch_tensor(const std::vector<ImageU8>& images, const std::vector<std::size_t>& order,
                    std::size_t begin, std::size_t end) {
  std::vector<ImageU8> batch;
  batch.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) batch.push_back(images[order[i]]);
  return images_to_tensor(batch);
}

}  // namespace

Trainer::Trainer(RunConfig config, Dataset data)
    : config_(std::move(config)),
      data_(std::move(data)),
      model_(config_.model, config_.seed),
      params_(model_.parameters()),
      optimizer_(params_, config_.optimizer),
      rng_(config_.seed ^ kTrainStream) {
  if (data_.train.empty()) throw DatasetError("training split is empty");
}

EpochMetrics Trainer::initialize() {
  const std::size_t n = std::min(config_.train.batch_size, data_.train.size());
  std::vector<std::size_t> first(n);
  std::iota(first.begin(), first.end(), 0);
  data_init(model_, batch_tensor(data_.train, first, 0, n), rng_);
  initialized_ = true;

  EpochMetrics m;
  m.epoch = 0;
  m.train_bpd = train_bpd();
  m.test_bpd = test_bpd();
  // Epoch-0 terms come from the fixed training subset.
  NoGradScope no_grad;
  Rng eval(config_.seed ^ kEvalStream);
  const std::size_t count = std::min(config_.train.eval_train_images, data_.train.size());
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  TermSummary acc;
  for (std::size_t b = 0; b < count; b += config_.train.batch_size) {
    const std::size_t e = std::min(count, b + config_.train.batch_size);
    const TermSummary s = summarize(model_elbo(model_, batch_tensor(data_.train, idx, b, e), eval));
    const double w = static_cast<double>(e - b) / static_cast<double>(count);
    acc.re_x += w * s.re_x;
    acc.re_y += w * s.re_y;
    acc.kl_z += w * s.kl_z;
    acc.kl_u += w * s.kl_u;
    acc.elbo += w * s.elbo;
  }
  m.terms = acc;
  return m;
}

EpochMetrics Trainer::run_epoch() {
  if (!initialized_) throw ContractError("Trainer::initialize must run before training");
  const std::size_t n = data_.train.size(), bs = config_.train.batch_size;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng_.index(i)]);

  TermSummary acc;
  for (std::size_t b = 0; b < n; b += bs) {
    const std::size_t e = std::min(n, b + bs);
    Tensor x;
    if (config_.data.augment) {
      std::vector<ImageU8> batch;
      for (std::size_t i = b; i < e; ++i) batch.push_back(data_.train[order[i]]);
      x = images_to_tensor(augment(batch, rng_));
    } else {
      x = batch_tensor(data_.train, order, b, e);
    }
    optimizer_.zero_grad();
    Tape tape;
    TermSummary s;
    {
      TapeScope scope(tape);
      const ElboTerms terms = model_elbo(model_, x, rng_);
      const Tensor loss = loss_for_optimizer(terms);
      if (!std::isfinite(loss.item())) {
        throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch_ + 1) + ", step " +
                            std::to_string(optimizer_.steps() + 1));
      }
      s = summarize(terms);
      tape.backward(loss);
    }
    optimizer_.step();
    const double w = static_cast<double>(e - b) / static_cast<double>(n);
    acc.re_x += w * s.re_x;
    acc.re_y += w * s.re_y;
    acc.kl_z += w * s.kl_z;
    acc.kl_u += w * s.kl_u;
    acc.elbo += w * s.elbo;
  }
  ++epoch_;
  EpochMetrics m;
  m.epoch = epoch_;
  m.terms = acc;
  m.train_bpd = train_bpd();
  m.test_bpd = test_bpd();
  return m;
}

double Trainer::train_bpd() {
  NoGradScope no_grad;
  Rng eval(config_.seed ^ kEvalStream);
  const std::size_t count = std::min(config_.train.eval_train_images, data_.train.size());
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  double total = 0.0;
  for (std::size_t b = 0; b < count; b += config_.train.batch_size) {
    const std::size_t e = std::min(count, b + config_.train.batch_size);
    const ElboTerms t = model_elbo(model_, batch_tensor(data_.train, idx, b, e), eval);
    for (double v : t.total.data()) total += v;
  }
  return nats_to_bpd(-total / static_cast<double>(count), data_dimension(model_));
}

double Trainer::test_bpd() {
  if (data_.test.empty()) return std::nan("");
  return iwae_dataset(model_, data_.test, config_.train.eval_samples, config_.train.batch_size,
                      config_.seed ^ kEvalStream)
      .bpd;
}

Checkpoint Trainer::checkpoint() { return make_checkpoint(format_config(config_), params_, &optimizer_); }

void Trainer::restore(const Checkpoint& checkpoint) {
  restore_checkpoint(checkpoint, params_, &optimizer_);
  initialized_ = true;
}

TrainResult train(const RunConfig& config, const Dataset& data, const TrainOptions& options) {
  Trainer trainer(config, data);
  TrainResult result;
  std::ofstream csv;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    csv.open(fs::path(options.out_dir) / "metrics.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write metrics.csv in " + options.out_dir);
    csv << kMetricsHeader << '\n';
  }
  auto save = [&](const Checkpoint& c, std::size_t epoch, bool periodic) {
    if (options.out_dir.empty()) return;
    save_checkpoint((fs::path(options.out_dir) / "checkpoint.bin").string(), c);
    if (periodic) {
      save_checkpoint((fs::path(options.out_dir) / ("checkpoint_epoch" + std::to_string(epoch) + ".bin")).string(), c);
    }
  };
  auto record = [&](const EpochMetrics& m) {
    result.history.push_back(m);
    if (csv.is_open()) csv << metrics_csv_row(m) << '\n' << std::flush;
    if (options.verbose) {
      std::printf("epoch %zu  elbo %.4f  re_x %.4f  re_y %.4f  kl_z %.4f  kl_u %.4f  train_bpd %.4f  test_bpd %.4f\n",
                  m.epoch, m.terms.elbo, m.terms.re_x, m.terms.re_y, m.terms.kl_z, m.terms.kl_u, m.train_bpd,
                  m.test_bpd);
      std::fflush(stdout);
    }
    return options.on_epoch && options.on_epoch(m);
  };

  bool stop = record(trainer.initialize());
  Checkpoint last_good = trainer.checkpoint();
  for (std::size_t e = 1; e <= config.train.epochs && !stop; ++e) {
    try {
      const EpochMetrics m = trainer.run_epoch();
      last_good = trainer.checkpoint();
      const bool periodic = config.train.checkpoint_every != 0 && e % config.train.checkpoint_every == 0;
      save(last_good, e, periodic);
      stop = record(m);
    } catch (const NonFiniteLoss& err) {
      save(last_good, 0, false);
      throw NonFiniteLoss(std::string(err.what()) +
                          (options.out_dir.empty() ? "" : "; last good state kept in checkpoint.bin"));
    }
  }
  result.final_checkpoint = last_good;
  save(last_good, 0, false);
  return result;
}

std::vector<AblationRow> ablate_prior(const RunConfig& base, const Dataset& data,
                                      const std::vector<PriorKind>& priors,
                                      const std::vector<std::uint64_t>& seeds, const TrainOptions& options) {
  std::vector<AblationRow> rows;
  for (const PriorKind prior : priors) {
    for (const std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.model.prior = prior;
      cfg.seed = seed;
      TrainOptions run = options;
      if (!options.out_dir.empty()) {
        run.out_dir = (fs::path(options.out_dir) / (to_string(prior) + "_seed" + std::to_string(seed))).string();
      }
      const TrainResult r = train(cfg, data, run);
      rows.push_back({prior, seed, r.history.back().test_bpd});
    }
  }
  return rows;
}

double median_bpd(const std::vector<AblationRow>& rows, PriorKind prior) {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.prior == prior) v.push_back(r.test_bpd);
  }
  if (v.empty()) throw DomainError("no runs for prior " + to_string(prior));
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace ssvae
