#include "ssvae/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace ssvae {

std::vector<TransformSpec> default_transforms(ModelKind kind) {
  return std::vector<TransformSpec>(levels_of(kind), TransformSpec::downscale(2));
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(trim(part));
  return out;
}

std::size_t to_size(const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("not an unsigned integer: '" + v + "'");
  return out;
}

double to_double(const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw ConfigError("");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + v + "'");
  }
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("not a boolean: '" + v + "'");
}

/// "8x4x4" -> {8, 4, 4}
std::vector<std::size_t> to_dims(const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& p : split(v, 'x')) out.push_back(to_size(p));
  return out;
}

std::string dims_str(const std::vector<std::size_t>& d) {
  std::string s;
  for (std::size_t i = 0; i < d.size(); ++i) s += (i ? "x" : "") + std::to_string(d[i]);
  return s;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"model.kind", [](RunConfig& c, const std::string& v) { c.model.kind = parse_model_kind(v); }},
      {"model.prior", [](RunConfig& c, const std::string& v) { c.model.prior = parse_prior_kind(v); }},
      {"model.transforms",
       [](RunConfig& c, const std::string& v) {
         c.model.transforms.clear();
         if (v.empty() || v == "none") return;
         for (const auto& t : split(v, ',')) c.model.transforms.push_back(parse_transform(t));
       }},
      {"model.image",
       [](RunConfig& c, const std::string& v) {
         const auto d = to_dims(v);
         if (d.size() != 3) throw ConfigError("image must be CxHxW");
         c.model.image = {d[0], d[1], d[2]};
       }},
      {"model.mog_components", [](RunConfig& c, const std::string& v) { c.model.mog_components = to_size(v); }},
      {"net.growth_rate", [](RunConfig& c, const std::string& v) { c.model.net.growth_rate = to_size(v); }},
      {"net.dense_layers", [](RunConfig& c, const std::string& v) { c.model.net.dense_layers = to_size(v); }},
      {"net.blocks_per_stage", [](RunConfig& c, const std::string& v) { c.model.net.blocks_per_stage = to_size(v); }},
      {"net.stages", [](RunConfig& c, const std::string& v) { c.model.net.stages = to_size(v); }},
      {"net.width", [](RunConfig& c, const std::string& v) { c.model.net.width = to_size(v); }},
      {"net.attention_reduction",
       [](RunConfig& c, const std::string& v) { c.model.net.attention_reduction = to_size(v); }},
      {"net.latent",
       [](RunConfig& c, const std::string& v) {
         const auto d = to_dims(v);
         if (d.size() != 3) throw ConfigError("latent must be CxHxW");
         c.model.net.latent_shape = Shape(d.begin(), d.end());
       }},
      {"net.mixture_components",
       [](RunConfig& c, const std::string& v) { c.model.net.mixture_components = to_size(v); }},
      {"flow.layers", [](RunConfig& c, const std::string& v) { c.model.flow.num_layers = to_size(v); }},
      {"flow.hidden", [](RunConfig& c, const std::string& v) { c.model.flow.hidden = to_size(v); }},
      {"optim.lr", [](RunConfig& c, const std::string& v) { c.optimizer.lr = to_double(v); }},
      {"optim.beta1", [](RunConfig& c, const std::string& v) { c.optimizer.beta1 = to_double(v); }},
      {"optim.beta2", [](RunConfig& c, const std::string& v) { c.optimizer.beta2 = to_double(v); }},
      {"data.dir", [](RunConfig& c, const std::string& v) { c.data.dir = v; }},
      {"data.split", [](RunConfig& c, const std::string& v) { c.data.split_fraction = to_double(v); }},
      {"data.crop", [](RunConfig& c, const std::string& v) { c.data.crop = to_bool(v); }},
      {"data.synthetic", [](RunConfig& c, const std::string& v) { c.data.synthetic_count = to_size(v); }},
      {"data.augment", [](RunConfig& c, const std::string& v) { c.data.augment = to_bool(v); }},
      {"train.batch_size", [](RunConfig& c, const std::string& v) { c.train.batch_size = to_size(v); }},
      {"train.epochs", [](RunConfig& c, const std::string& v) { c.train.epochs = to_size(v); }},
      {"train.eval_samples", [](RunConfig& c, const std::string& v) { c.train.eval_samples = to_size(v); }},
      {"train.eval_train_images",
       [](RunConfig& c, const std::string& v) { c.train.eval_train_images = to_size(v); }},
      {"train.checkpoint_every",
       [](RunConfig& c, const std::string& v) { c.train.checkpoint_every = to_size(v); }},
      {"run.seed", [](RunConfig& c, const std::string& v) { c.seed = to_size(v); }},
  };
  return table;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  bool transforms_given = false;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + "unknown key '" + key + "'");
    try {
      it->second(config, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    } catch (const std::exception& e) {
      throw ConfigError(where + e.what());
    }
    if (key == "model.transforms") transforms_given = true;
  }
  if (!transforms_given) config.model.transforms = default_transforms(config.model.kind);
  if (config.data.split_fraction < 0.0 || config.data.split_fraction >= 1.0) {
    throw ConfigError("data.split must lie in [0, 1)");
  }
  if (config.train.batch_size == 0) throw ConfigError("train.batch_size must be positive");
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const RunConfig& c) {
  std::ostringstream os;
  std::string transforms;
  for (std::size_t i = 0; i < c.model.transforms.size(); ++i) {
    transforms += (i ? "," : "") + to_string(c.model.transforms[i]);
  }
  const auto& n = c.model.net;
  os << "[run]\nseed = " << c.seed << "\n\n"
     << "[model]\nkind = " << to_string(c.model.kind) << "\nprior = " << to_string(c.model.prior)
     << "\ntransforms = " << (transforms.empty() ? "none" : transforms)
     << "\nimage = " << dims_str({c.model.image.channels, c.model.image.height, c.model.image.width})
     << "\nmog_components = " << c.model.mog_components << "\n\n"
     << "[net]\ngrowth_rate = " << n.growth_rate << "\ndense_layers = " << n.dense_layers
     << "\nblocks_per_stage = " << n.blocks_per_stage << "\nstages = " << n.stages
     << "\nwidth = " << n.width << "\nattention_reduction = " << n.attention_reduction
     << "\nlatent = " << dims_str({n.latent_shape.begin(), n.latent_shape.end()})
     << "\nmixture_components = " << n.mixture_components << "\n\n"
     << "[flow]\nlayers = " << c.model.flow.num_layers << "\nhidden = " << c.model.flow.hidden
     << "\n\n"
     << "[optim]\nlr = " << num(c.optimizer.lr) << "\nbeta1 = " << num(c.optimizer.beta1)
     << "\nbeta2 = " << num(c.optimizer.beta2) << "\n\n"
     << "[data]\ndir = " << c.data.dir << "\nsplit = " << num(c.data.split_fraction)
     << "\ncrop = " << (c.data.crop ? "true" : "false") << "\nsynthetic = " << c.data.synthetic_count
     << "\naugment = " << (c.data.augment ? "true" : "false") << "\n\n"
     << "[train]\nbatch_size = " << c.train.batch_size << "\nepochs = " << c.train.epochs
     << "\neval_samples = " << c.train.eval_samples
     << "\neval_train_images = " << c.train.eval_train_images
     << "\ncheckpoint_every = " << c.train.checkpoint_every << "\n";
  return os.str();
}

}  // namespace ssvae
