// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>

#include "ssvae/checkpoint.hpp"
#include "ssvae/grad_check.hpp"
#include "ssvae/pipelines.hpp"
#include "ssvae/trainer.hpp"
#include "ssvae/transforms.hpp"
#include "objective_oracles.hpp"
#include "oracles.hpp"
#include "stats.hpp"
#include "support.hpp"

using namespace ssvae;
using namespace ssvae::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int n, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("criterion %d: %s  %s  (%.1f s)\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Tensor pixels(std::size_t n, std::uint64_t seed) { return images_to_tensor(random_images(n, 4, 4, 3, seed)); }

void init_toy(LatentHierarchy& m) {
  Rng r(3);
  data_init(m, pixels(64, 9), r);
}

std::vector<std::uint8_t> bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome gradient_correctness() {
  double worst = 0.0;
  std::string detail;
  const auto t0 = std::chrono::steady_clock::now();
  for (ModelKind kind : {ModelKind::Vae, ModelKind::SelfVae, ModelKind::SelfVae3Level}) {
    LatentHierarchy m(gradcheck_config(kind), 21);
    init_toy(m);
    const Tensor x = pixels(2, 22);
    auto f = [&] {
      Rng r(23);
      return loss_for_optimizer(model_elbo(m, x, r));
    };
    std::vector<Tensor> params;
    for (const auto& p : m.parameters()) params.push_back(p.tensor);
    const GradCheckResult g = grad_check(f, params, 2e-5);
    worst = std::max(worst, g.max_relative_error);
    detail += to_string(kind) + " " + fmt("%.2e", g.max_relative_error) + " over " +
              std::to_string(g.coordinates_checked) + " coords; ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst < 1e-3 && secs < 120.0, detail + fmt("max %.2e < 1e-3, %.0f s < 120 s", worst, secs)};
}

Outcome flow_exactness() {
  Rng rng(4);
  FlowStack flow({4, 2, 2}, {6, 32}, rng, false);
  const Tensor v = rng.normal_tensor({1000, 4, 2, 2});
  const Tensor back = flow.inverse(flow.forward(v).value).value;
  const double round_trip = max_abs_diff(back.data(), v.data());
  double jac = 0.0;
  for (std::size_t d = 2; d <= 8; ++d) {
    FlowStack f({d, 1, 1}, {4, 16}, rng, false);
    for (int t = 0; t < 3; ++t) {
      std::vector<double> p(d);
      for (auto& x : p) x = rng.normal();
      const double analytic = f.forward(Tensor::from_data({1, d}, p)).log_det.item();
      jac = std::max(jac, std::abs(analytic - dense_jacobian_log_det(f, p)));
    }
  }
  return {round_trip < 1e-6 && jac < 1e-6,
          fmt("round trip %.2e < 1e-6; log-det vs dense Jacobian (d=2..8) %.2e < 1e-6", round_trip, jac)};
}

Outcome likelihood_normalization() {
  Rng rng(5);
  const std::size_t draws = 1000, comps = 5;
  std::vector<double> lp(draws * comps), mu(draws * comps), ls(draws * comps);
  for (std::size_t i = 0; i < lp.size(); ++i) {
    lp[i] = 4 * rng.uniform() - 2;
    mu[i] = 2.4 * rng.uniform() - 1.2;
    ls[i] = -7 + 7.5 * rng.uniform();
  }
  const MixtureLogisticParams p{Tensor::from_data({draws, comps}, lp), Tensor::from_data({draws, comps}, mu),
                                Tensor::from_data({draws, comps}, ls)};
  std::vector<double> total(draws, 0.0);
  for (int value = 0; value < 256; ++value) {
    const Tensor lv = dlogistic_log_prob_values(p, Tensor::full({draws}, value));
    for (std::size_t i = 0; i < draws; ++i) total[i] += std::exp(lv.at(i));
  }
  double worst = 0.0;
  for (double t : total) worst = std::max(worst, std::abs(t - 1.0));
  Rng frng(6);
  FlowStack flow({2, 1, 1}, {4, 16}, frng, false);
  const double mass = flow_grid_mass(flow, 10.0, 400);
  return {worst < 1e-6 && std::abs(mass - 1.0) < 1e-2,
          fmt("mixture mass error %.2e < 1e-6; 2-d flow mass %.5f within 1e-2", worst, mass)};
}

Outcome bound_identities() {
  LatentHierarchy m(tiny_config(ModelKind::SelfVae), 11);
  init_toy(m);
  const Tensor x = pixels(8, 12);
  double iw = 0.0, k1 = 0.0, ab = 0.0, dec = 0.0;
  {
    Rng a(16), b(16);
    const IwaeResult r = iwae_nll(m, x, 1, a);
    const ElboTerms t = model_elbo(m, x, b, KlMode::Sampled);
    for (std::size_t i = 0; i < 8; ++i) iw = std::max(iw, std::abs(r.log_likelihood[i] - t.total.at(i)));
  }
  for (KlMode mode : {KlMode::Analytic, KlMode::Sampled}) {
    Rng a(13), b(13);
    const ElboTerms s = selfvae_elbo(m, x, a, mode);
    const ElboTerms h = hierarchical_elbo(m, x, b, mode);
    k1 = std::max(k1, max_abs_diff(s.total.data(), h.total.data()));
  }
  {
    Rng a(14), b(14);
    const ElboTerms t = selfvae_elbo(m, x, a);
    const auto oracle = selfvae_ab_total(m, x, b);
    for (std::size_t i = 0; i < oracle.size(); ++i) ab = std::max(ab, std::abs(t.total.at(i) - oracle[i]));
  }
  for (ModelKind kind : {ModelKind::Vae, ModelKind::SelfVae, ModelKind::SelfVae3Level}) {
    LatentHierarchy mk(tiny_config(kind), 15);
    init_toy(mk);
    for (KlMode mode : {KlMode::Analytic, KlMode::Sampled}) {
      Rng r(17);
      dec = std::max(dec, decomposition_gap(model_elbo(mk, x, r, mode)));
    }
  }
  return {iw < 1e-10 && k1 < 1e-10 && ab < 1e-8 && dec < 1e-10,
          fmt("IWAE-1 vs ELBO %.1e; K=1 hierarchy vs two-level %.1e; A+B form %.1e", iw, k1, ab) +
              fmt("; term decomposition %.1e", dec)};
}

Outcome bound_ordering() {
  LatentHierarchy m(tiny_config(ModelKind::SelfVae), 30);
  init_toy(m);
  const Tensor x = pixels(16, 31);
  std::vector<double> margins;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng a(1000 + s), b(2000 + s);
    margins.push_back(iwae_nll(m, x, 1, a).bpd - iwae_nll(m, x, 64, b).bpd);
  }
  const MeanSe ms = mean_se(margins);
  return {ms.mean >= -3.0 * ms.se,
          fmt("mean bpd(S=1) - bpd(S=64) = %.4f, SE %.4f; margin >= -3 SE", ms.mean, ms.se)};
}

Outcome training_progress() {
  RunConfig cfg = parse_config(
      "[model]\nkind = selfvae\nimage = 3x16x16\n"
      "[net]\nlatent = 8x4x4\nmixture_components = 5\n"
      "[data]\nsynthetic = 5000\n"
      "[train]\nbatch_size = 32\nepochs = 20\neval_samples = 1\n");
  cfg.seed = 1;
  const Dataset data = load_run_dataset(cfg);
  double start = 0.0, last = 0.0;
  std::size_t epochs = 0;
  bool finite = true;
  TrainOptions opt;
  opt.on_epoch = [&](const EpochMetrics& m) {
    finite = finite && std::isfinite(m.train_bpd) && std::isfinite(m.terms.elbo);
    if (m.epoch == 0) start = m.train_bpd;
    last = m.train_bpd;
    epochs = m.epoch;
    return last <= 0.8 * start;
  };
  train(cfg, data, opt);
  const bool pass = finite && last <= 0.8 * start;
  return {pass, fmt("train bpd %.4f -> %.4f (%.1f%% lower) after ", start, last, 100.0 * (1.0 - last / start)) +
                    std::to_string(epochs) + " epoch(s) of 20, finite"};
}

Outcome prior_ablation() {
  RunConfig cfg = parse_config(
      "[model]\nkind = vae\nimage = 3x16x16\n"
      "[net]\nlatent = 8x4x4\nmixture_components = 5\n"
      "[data]\nsynthetic = 2000\n"
      "[train]\nbatch_size = 32\nepochs = 6\neval_samples = 8\neval_train_images = 64\ncheckpoint_every = 0\n");
  cfg.seed = 7;
  const Dataset data = load_run_dataset(cfg);
  const auto rows = ablate_prior(cfg, data, {PriorKind::Fixed, PriorKind::RealNVP}, {1, 2, 3});
  std::string detail;
  for (const auto& r : rows) detail += to_string(r.prior) + "/" + std::to_string(r.seed) + fmt(" %.4f; ", r.test_bpd);
  const double fixed = median_bpd(rows, PriorKind::Fixed), flow = median_bpd(rows, PriorKind::RealNVP);
  return {flow <= fixed + 0.05, detail + fmt("median realnvp %.4f vs fixed %.4f (+0.05 allowed)", flow, fixed)};
}

Outcome term_equivalence() {
  double worst = 0.0;
  for (std::uint64_t seed : {40, 41, 42}) {
    LatentHierarchy m(tiny_config(ModelKind::SelfVae), seed);
    init_toy(m);
    const Tensor x = pixels(8, seed + 1);
    Rng a(seed + 2), b(seed + 2);
    const ElboTerms t = selfvae_elbo(m, x, a);
    const Tensor y = apply_transform(x, m.config().transforms[0]);
    const ElboTerms v = vae_elbo(y, m.posterior_u(), m.likelihood_y1(), m.prior(), b);
    for (std::size_t i = 0; i < 8; ++i) {
      worst = std::max(worst, std::abs((t.re_y[0].at(i) - t.kl_u.at(i)) - v.total.at(i)));
    }
  }
  return {worst < 1e-10, fmt("|RE_y - KL_u - VAE bound on y| = %.2e < 1e-10", worst)};
}

Outcome transform_contracts() {
  std::size_t checked = 0, bad = 0;
  Rng rng(50);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t f = 2 + rng.index(3), h = f * (1 + rng.index(6)), w = f * (1 + rng.index(6));
    const std::size_t c = rng.uniform() < 0.5 ? 1 : 3;
    const ImageU8 img = random_images(1, h, w, c, 100 + trial)[0];
    const ImageU8 d = downscale(img, static_cast<int>(f));
    bad += !(d == downscale(img, static_cast<int>(f)));
    for (std::size_t y = 0; y < h / f; ++y)
      for (std::size_t x = 0; x < w / f; ++x)
        for (std::size_t k = 0; k < c; ++k) {
          unsigned sum = 0, lo = 255, hi = 0;
          for (std::size_t dy = 0; dy < f; ++dy)
            for (std::size_t dx = 0; dx < f; ++dx) {
              const unsigned v = img.at(y * f + dy, x * f + dx, k);
              sum += v;
              lo = std::min(lo, v);
              hi = std::max(hi, v);
            }
          const unsigned n = static_cast<unsigned>(f * f);
          const unsigned expect = (2 * sum + n) / (2 * n);  // round half up
          const unsigned got = d.at(y, x, k);
          bad += got != expect || got < lo || got > hi;
          ++checked;
        }
    if (c == 3) {
      const ImageU8 g = grayscale(img);
      bad += !(g == grayscale(img));
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const unsigned v = 299u * img.at(y, x, 0) + 587u * img.at(y, x, 1) + 114u * img.at(y, x, 2);
          bad += g.at(y, x, 0) != (v + 500) / 1000;
          ++checked;
        }
      const ImageU8 s = sketch(img, 1.5);
      bad += !(s == sketch(img, 1.5)) || s.channels != 1;
    }
  }
  for (int value = 0; value < 256; ++value) {
    for (std::size_t c : {1, 3}) {
      const ImageU8 s = sketch(ImageU8(7, 9, c, static_cast<std::uint8_t>(value)), 3.0);
      for (auto p : s.pixels) bad += p != 255;
      ++checked;
    }
  }
  // Tensor path stays on the integer grid.
  const Tensor t = apply_transform(pixels(4, 60), TransformSpec::sketch(1.0));
  for (double v : t.data()) bad += v != std::round(v) || v < 0 || v > 255;
  return {bad == 0, std::to_string(checked) + " oracle checks, " + std::to_string(bad) + " mismatches"};
}

Outcome reproducibility() {
  RunConfig cfg;
  cfg.model = tiny_config(ModelKind::SelfVae);
  cfg.data.synthetic_count = 96;
  cfg.train.batch_size = 16;
  cfg.train.epochs = 2;
  cfg.train.eval_samples = 4;
  cfg.train.eval_train_images = 32;
  cfg.seed = 77;
  const Dataset data = load_run_dataset(cfg);
  const fs::path root = fs::temp_directory_path() / "ssvae_acceptance_repro";
  fs::remove_all(root);
  TrainResult first;
  for (const char* run : {"a", "b"}) {
    TrainOptions opt;
    opt.out_dir = (root / run).string();
    const TrainResult r = train(cfg, data, opt);
    if (std::string(run) == "a") first = r;
  }
  const bool csv = bytes_of(root / "a" / "metrics.csv") == bytes_of(root / "b" / "metrics.csv");
  const bool ckpt = bytes_of(root / "a" / "checkpoint.bin") == bytes_of(root / "b" / "checkpoint.bin") &&
                    bytes_of(root / "a" / "checkpoint_epoch1.bin") == bytes_of(root / "b" / "checkpoint_epoch1.bin");
  const Checkpoint loaded = load_checkpoint((root / "a" / "checkpoint.bin").string());
  const bool bytes_round_trip = serialize(deserialize(serialize(loaded))) == serialize(loaded);
  Trainer restored(parse_config(loaded.config_text), data);
  restored.restore(loaded);
  const double before = first.history.back().test_bpd, after = restored.test_bpd();
  const bool same_bpd = before == after;
  fs::remove_all(root);
  return {csv && ckpt && bytes_round_trip && same_bpd,
          std::string("metrics.csv ") + (csv ? "identical" : "DIFFER") + ", checkpoints " +
              (ckpt ? "identical" : "DIFFER") + fmt(", eval bpd %.17g -> %.17g", before, after)};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments pick a subset of criteria by number; none runs all.
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::pair<int, Outcome (*)()> all[] = {
      {1, gradient_correctness}, {2, flow_exactness},      {3, likelihood_normalization},
      {4, bound_identities},     {5, bound_ordering},      {6, training_progress},
      {7, prior_ablation},       {8, term_equivalence},    {9, transform_contracts},
      {10, reproducibility}};
  for (const auto& [n, body] : all)
    if (only.empty() || only.count(n)) criterion(n, body);
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
