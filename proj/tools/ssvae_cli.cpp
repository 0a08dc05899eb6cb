#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ssvae/checkpoint.hpp"
#include "ssvae/config.hpp"
#include "ssvae/pipelines.hpp"
#include "ssvae/png_io.hpp"
#include "ssvae/trainer.hpp"

namespace fs = std::filesystem;
using namespace ssvae;

namespace {

struct Common {
  std::string config_path;
  std::string checkpoint_path;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? parse_config("") : load_config(c.config_path);
  if (c.seed_given) cfg.seed = c.seed;
  return cfg;
}

/// Model and config restored from a checkpoint file.
struct Loaded {
  RunConfig config;
  std::unique_ptr<LatentHierarchy> model;
};

Loaded load_model(const std::string& path) {
  if (path.empty()) throw std::runtime_error("--checkpoint is required");
  const Checkpoint ck = load_checkpoint(path);
  Loaded l;
  l.config = parse_config(ck.config_text);
  l.model = std::make_unique<LatentHierarchy>(l.config.model, l.config.seed);
  ParameterList params = l.model->parameters();
  restore_checkpoint(ck, params, nullptr);
  return l;
}

std::vector<ImageU8> read_inputs(const std::vector<std::string>& paths) {
  std::vector<ImageU8> out;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      for (const auto& f : list_pngs(p)) out.push_back(read_png(f));
    } else {
      out.push_back(read_png(p));
    }
  }
  if (out.empty()) throw std::runtime_error("no input images");
  return out;
}

void write_grid(const std::string& path, const std::vector<ImageU8>& images, std::size_t cols) {
  if (path.empty()) throw std::runtime_error("--out is required");
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_png(path, make_grid(images, std::max<std::size_t>(1, std::min(cols, images.size()))));
}

std::vector<PriorKind> parse_priors(const std::string& text) {
  std::vector<PriorKind> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_prior_kind(part));
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(std::stoull(part));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised hierarchical VAE toolkit"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool needs_checkpoint) {
    sub->add_option("--config", common.config_path, "Run configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Random seed (overrides the config)")
        ->each([&](const std::string&) { common.seed_given = true; });
    sub->add_option("--out", common.out, "Output path");
    if (needs_checkpoint) {
      sub->add_option("--checkpoint", common.checkpoint_path, "Checkpoint file")
          ->required()
          ->check(CLI::ExistingFile);
    }
  };

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model; writes metrics.csv and checkpoints to --out");
  add_common(train_cmd, false);
  std::size_t epochs_override = 0;
  train_cmd->add_option("--epochs", epochs_override, "Override train.epochs");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Importance-weighted test bpd of a checkpoint");
  add_common(eval_cmd, true);
  std::size_t iw_samples = 512;
  std::size_t eval_limit = 0;
  eval_cmd->add_option("--iw-samples", iw_samples, "Importance samples per image")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--limit", eval_limit, "Evaluate only the first N test images");

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Sample images from the model");
  add_common(gen_cmd, true);
  std::size_t count = 16;
  bool mode_pixels = false;
  gen_cmd->add_option("-n,--count", count, "Number of samples")->check(CLI::PositiveNumber);
  gen_cmd->add_flag("--mode-pixels", mode_pixels, "Decode pixels with the mixture mode");

  // reconstruct
  auto* rec_cmd = app.add_subcommand("reconstruct", "Reconstruct images with one of the sampling schemes");
  add_common(rec_cmd, true);
  std::string mode_text = "recon1";
  std::vector<std::string> inputs;
  bool mean_latents = false;
  rec_cmd->add_option("--mode", mode_text, "gen, cond-gen, cond-recon, recon1 or recon2")
      ->check(CLI::IsMember({"gen", "cond-gen", "cond-recon", "recon1", "recon2"}));
  rec_cmd->add_option("--input", inputs, "PNG files or directories")->required();
  rec_cmd->add_flag("--mode-pixels", mode_pixels, "Decode pixels with the mixture mode");
  rec_cmd->add_flag("--mean-latents", mean_latents, "Use Gaussian means instead of samples");

  // transform
  auto* tr_cmd = app.add_subcommand("transform", "Apply a deterministic transform to PNG images");
  add_common(tr_cmd, false);
  std::string kind = "downscale:2";
  tr_cmd->add_option("--kind", kind, "downscale[:f], grayscale or sketch[:sigma]");
  tr_cmd->add_option("--input", inputs, "PNG file")->required();

  // interpolate
  auto* int_cmd = app.add_subcommand("interpolate", "Interpolate between two images through u");
  add_common(int_cmd, true);
  std::string image_a, image_b;
  std::size_t steps = 8;
  int_cmd->add_option("--a", image_a, "First image")->required()->check(CLI::ExistingFile);
  int_cmd->add_option("--b", image_b, "Second image")->required()->check(CLI::ExistingFile);
  int_cmd->add_option("--steps", steps, "Frames including endpoints")->check(CLI::Range(2, 1000));
  int_cmd->add_flag("--mode-pixels", mode_pixels, "Decode pixels with the mixture mode");
  int_cmd->add_flag("--mean-latents", mean_latents, "Use Gaussian means instead of samples");

  // ablate-prior
  auto* abl_cmd = app.add_subcommand("ablate-prior", "Train one model per prior and seed; compare test bpd");
  add_common(abl_cmd, false);
  std::string priors_text = "fixed,mog,realnvp";
  std::string seeds_text = "1,2,3";
  abl_cmd->add_option("--priors", priors_text, "Comma-separated prior kinds");
  abl_cmd->add_option("--seeds", seeds_text, "Comma-separated seeds");
  abl_cmd->add_option("--epochs", epochs_override, "Override train.epochs");

  // sprites
  auto* spr_cmd = app.add_subcommand("sprites", "Write a synthetic sprite dataset as PNGs");
  add_common(spr_cmd, false);
  std::size_t sprite_size = 16;
  std::size_t sprite_count = 1000;
  spr_cmd->add_option("-n,--count", sprite_count, "Number of sprites");
  spr_cmd->add_option("--size", sprite_size, "Side length in pixels");

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineOptions popts;
    popts.mode_pixels = mode_pixels;
    popts.mean_latents = mean_latents;

    if (*train_cmd) {
      RunConfig cfg = resolve_config(common);
      if (epochs_override) cfg.train.epochs = epochs_override;
      if (common.out.empty()) throw std::runtime_error("--out is required");
      TrainOptions opts;
      opts.out_dir = common.out;
      opts.verbose = true;
      const Dataset data = load_run_dataset(cfg);
      std::printf("train_images=%zu test_images=%zu\n", data.train.size(), data.test.size());
      train(cfg, data, opts);
      std::printf("checkpoint=%s\n", (fs::path(common.out) / "checkpoint.bin").c_str());
    } else if (*eval_cmd) {
      Loaded l = load_model(common.checkpoint_path);
      const std::uint64_t seed = common.seed_given ? common.seed : l.config.seed;
      Dataset data = load_run_dataset(l.config);
      if (eval_limit && data.test.size() > eval_limit) data.test.resize(eval_limit);
      const std::size_t bs = l.config.train.batch_size;
      // Single-sample bound with the same random stream as the IW estimate.
      Rng master(seed);
      double elbo_sum = 0.0;
      for (std::size_t b = 0; b < data.test.size(); b += bs) {
        const std::size_t e = std::min(data.test.size(), b + bs);
        Rng rng = master.split();
        NoGradScope no_grad;
        const Tensor x = images_to_tensor(std::span<const ImageU8>(data.test.data() + b, e - b));
        const ElboTerms t = model_elbo(*l.model, x, rng, KlMode::Sampled);
        for (double v : t.total.data()) elbo_sum += v;
      }
      const double elbo_bpd =
          nats_to_bpd(-elbo_sum / static_cast<double>(data.test.size()), data_dimension(*l.model));
      const IwaeResult r = iwae_dataset(*l.model, data.test, iw_samples, bs, seed);
      std::printf("test_images=%zu\niw_samples=%zu\nelbo_bpd=%.17g\niwae_bpd=%.17g\nnll_nats=%.17g\n",
                  data.test.size(), iw_samples, elbo_bpd, r.bpd, r.nll);
    } else if (*gen_cmd) {
      Loaded l = load_model(common.checkpoint_path);
      Rng rng(common.seed_given ? common.seed : l.config.seed);
      const auto images = generate(*l.model, rng, count, popts);
      write_grid(common.out, images, static_cast<std::size_t>(std::ceil(std::sqrt(count))));
      std::printf("images=%zu\nout=%s\n", images.size(), common.out.c_str());
    } else if (*rec_cmd) {
      Loaded l = load_model(common.checkpoint_path);
      Rng rng(common.seed_given ? common.seed : l.config.seed);
      const auto x = read_inputs(inputs);
      const ReconResult r = reconstruct(*l.model, x, parse_recon_mode(mode_text), rng, popts);
      write_grid(common.out, r.images, static_cast<std::size_t>(std::ceil(std::sqrt(r.images.size()))));
      std::printf("mode=%s\nimages=%zu\nsent_bytes=%zu\nout=%s\n", mode_text.c_str(), r.images.size(),
                  r.sent_bytes, common.out.c_str());
    } else if (*tr_cmd) {
      const TransformSpec spec = parse_transform(kind);
      if (inputs.size() != 1) throw std::runtime_error("transform takes exactly one --input");
      if (common.out.empty()) throw std::runtime_error("--out is required");
      const ImageU8 out = apply_transform(read_png(inputs.front()), spec);
      write_png(common.out, out);
      std::printf("kind=%s\nsize=%zux%zux%zu\nout=%s\n", to_string(spec).c_str(), out.width, out.height,
                  out.channels, common.out.c_str());
    } else if (*int_cmd) {
      Loaded l = load_model(common.checkpoint_path);
      const auto r = interpolate_u(*l.model, read_png(image_a), read_png(image_b), steps,
                                   common.seed_given ? common.seed : l.config.seed, popts);
      write_grid(common.out, r.frames, r.frames.size());
      std::printf("frames=%zu\nout=%s\n", r.frames.size(), common.out.c_str());
    } else if (*abl_cmd) {
      RunConfig cfg = resolve_config(common);
      if (epochs_override) cfg.train.epochs = epochs_override;
      const Dataset data = load_run_dataset(cfg);
      TrainOptions opts;
      opts.out_dir = common.out;
      const auto priors = parse_priors(priors_text);
      const auto rows = ablate_prior(cfg, data, priors, parse_seeds(seeds_text), opts);
      std::ostringstream csv;
      csv << "prior,seed,test_bpd\n";
      for (const auto& r : rows) {
        csv << to_string(r.prior) << ',' << r.seed << ',' << r.test_bpd << '\n';
        std::printf("prior=%s seed=%llu test_bpd=%.6f\n", to_string(r.prior).c_str(),
                    static_cast<unsigned long long>(r.seed), r.test_bpd);
      }
      for (const PriorKind p : priors) {
        std::printf("median prior=%s test_bpd=%.6f\n", to_string(p).c_str(), median_bpd(rows, p));
      }
      if (!common.out.empty()) {
        fs::create_directories(common.out);
        std::ofstream(fs::path(common.out) / "ablation.csv") << csv.str();
      }
    } else if (*spr_cmd) {
      if (common.out.empty()) throw std::runtime_error("--out is required");
      fs::create_directories(common.out);
      const auto sprites = generate_sprites(sprite_count, sprite_size, common.seed);
      char name[32];
      for (std::size_t i = 0; i < sprites.size(); ++i) {
        std::snprintf(name, sizeof name, "sprite_%06zu.png", i);
        write_png(fs::path(common.out) / name, sprites[i]);
      }
      std::printf("sprites=%zu\nout=%s\n", sprites.size(), common.out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
