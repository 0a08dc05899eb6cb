#include "ssvae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace ssvae {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes(b) {}
  template <class T>
  T get() {
    T v;
    get_bytes(&v, sizeof(T));
    return v;
  }
  void get_bytes(void* dst, std::size_t n) {
    if (n > bytes.size() - pos) throw CheckpointError("checkpoint is truncated");
    std::memcpy(dst, bytes.data() + pos, n);
    pos += n;
  }
  std::string get_string(std::size_t n) {
    std::string s(n, '\0');
    get_bytes(s.data(), n);
    return s;
  }
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;
};

constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;

}  // namespace

std::vector<std::uint8_t> serialize(const Checkpoint& c) {
  Writer w;
  w.put_bytes(kCheckpointMagic, kMagicLen);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.config_text.size()));
  w.put_bytes(c.config_text.data(), c.config_text.size());
  w.put<std::uint64_t>(c.step);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.records.size()));
  for (const auto& r : c.records) {
    if (shape_numel(r.shape) != r.data.size()) throw CheckpointError("record " + r.name + " has inconsistent size");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(r.name.size()));
    w.put_bytes(r.name.data(), r.name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) w.put<std::uint64_t>(d);
    w.put_bytes(r.data.data(), r.data.size() * sizeof(double));
  }
  return std::move(w.out);
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.get_string(kMagicLen) != std::string(kCheckpointMagic)) throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.config_text = r.get_string(r.get<std::uint32_t>());
  c.step = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord rec;
    rec.name = r.get_string(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d) rec.shape.push_back(r.get<std::uint64_t>());
    const std::size_t n = shape_numel(rec.shape);
    if (n > (bytes.size() - r.pos) / sizeof(double)) throw CheckpointError("checkpoint is truncated");
    rec.data.resize(n);
    r.get_bytes(rec.data.data(), n * sizeof(double));
    c.records.push_back(std::move(rec));
  }
  if (r.pos != bytes.size()) throw CheckpointError("trailing bytes after checkpoint records");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  const auto bytes = serialize(checkpoint);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw CheckpointError("cannot move checkpoint to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

Checkpoint make_checkpoint(const std::string& config_text, const ParameterList& params,
                           Adamax* optimizer) {
  Checkpoint c;
  c.config_text = config_text;
  for (const auto& p : params) {
    const auto d = p.tensor.data();
    c.records.push_back({p.name, p.tensor.shape(), {d.begin(), d.end()}});
  }
  if (optimizer) {
    c.step = optimizer->steps();
    for (std::size_t i = 0; i < params.size(); ++i) {
      c.records.push_back({"opt.m." + params[i].name, params[i].tensor.shape(), optimizer->first_moments()[i]});
      c.records.push_back({"opt.u." + params[i].name, params[i].tensor.shape(), optimizer->infinity_norms()[i]});
    }
  }
  return c;
}

void restore_checkpoint(const Checkpoint& checkpoint, ParameterList& params, Adamax* optimizer) {
  std::map<std::string, const TensorRecord*> by_name;
  for (const auto& r : checkpoint.records) by_name[r.name] = &r;
  auto find = [&](const std::string& name, const Shape& shape) -> const TensorRecord& {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint lacks " + name);
    if (it->second->shape != shape) {
      throw CheckpointError(name + ": checkpoint shape " + shape_str(it->second->shape) +
                            " != model shape " + shape_str(shape));
    }
    return *it->second;
  };
  for (auto& p : params) {
    const auto& rec = find(p.name, p.tensor.shape());
    std::copy(rec.data.begin(), rec.data.end(), p.tensor.mutable_data().begin());
  }
  if (optimizer) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      optimizer->first_moments()[i] = find("opt.m." + params[i].name, params[i].tensor.shape()).data;
      optimizer->infinity_norms()[i] = find("opt.u." + params[i].name, params[i].tensor.shape()).data;
    }
    optimizer->set_steps(checkpoint.step);
  }
}

}  // namespace ssvae
