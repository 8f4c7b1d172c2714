#include "omcrl/io/checkpoint.hpp"

#include "omcrl/error.hpp"
#include "omcrl/log.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

namespace omcrl::io {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

constexpr char kMagic[4] = {'O', 'M', 'C', 'K'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
  }
  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::size_t end, const std::string& origin)
      : bytes(b), limit(end), origin(origin) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
  void need(std::size_t n) const {
    if (pos + n > limit) throw IntegrityError(origin + ": checkpoint truncated");
  }

  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;
  std::size_t limit;
  std::string origin;
};

}  // namespace

std::string to_string(Component c) {
  switch (c) {
    case Component::encoder: return "encoder";
    case Component::projection: return "projection";
    case Component::transformer: return "transformer";
    case Component::oracle: return "oracle";
    case Component::student: return "student";
  }
  return "?";
}

Component component_from_string(const std::string& name) {
  for (auto c : {Component::encoder, Component::projection, Component::transformer, Component::oracle,
                 Component::student})
    if (to_string(c) == name) return c;
  throw ConfigError("unknown checkpoint component '" + name + "'");
}

const std::string* Checkpoint::meta(const std::string& key) const {
  for (const auto& [k, v] : metadata)
    if (k == key) return &v;
  return nullptr;
}

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
  for (auto& [k, v] : metadata)
    if (k == key) {
      v = value;
      return;
    }
  metadata.emplace_back(key, value);
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t parameter_hash(const nn::ParameterRefs& params) {
  std::uint64_t h = fnv1a(nullptr, 0);
  for (const auto* p : params) {
    h = fnv1a(p->name.data(), p->name.size(), h);
    for (auto d : p->shape) {
      const auto v = static_cast<std::uint64_t>(d);
      h = fnv1a(&v, sizeof v, h);
    }
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const float f = static_cast<float>(p->value[i]);
      h = fnv1a(&f, sizeof f, h);
    }
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

void round_to_float(const nn::ParameterRefs& params) {
  for (auto* p : params)
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value[i] = static_cast<float>(p->value[i]);
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void restore_rng(std::mt19937_64& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw IntegrityError("checkpoint: unreadable RNG state");
}

Checkpoint make_checkpoint(Component component, const nn::ParameterRefs& params, std::uint64_t config_hash,
                           std::uint64_t step, const std::mt19937_64* rng) {
  Checkpoint c;
  c.component = component;
  c.config_hash = config_hash;
  c.step = step;
  if (rng) c.rng_state = rng_state(*rng);
  for (const auto* p : params) {
    Blob b{p->name, p->shape, std::vector<float>(static_cast<std::size_t>(p->value.size()))};
    for (Eigen::Index i = 0; i < p->value.size(); ++i) b.values[static_cast<std::size_t>(i)] = static_cast<float>(p->value[i]);
    c.blobs.push_back(std::move(b));
  }
  return c;
}

void load_parameters(const Checkpoint& ckpt, const nn::ParameterRefs& params) {
  std::vector<const Blob*> found;
  for (const auto* p : params) {
    const Blob* hit = nullptr;
    for (const auto& b : ckpt.blobs)
      if (b.name == p->name) hit = &b;
    if (!hit)
      throw ConfigError(to_string(ckpt.component) + " checkpoint has no parameter '" + p->name + "'");
    if (hit->shape != p->shape)
      throw DimensionError("checkpoint parameter '" + p->name + "' has shape " + ad::shape_string(hit->shape) +
                           ", model expects " + ad::shape_string(p->shape));
    found.push_back(hit);
  }
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < found[k]->values.size(); ++i)
      params[k]->value[static_cast<Eigen::Index>(i)] = found[k]->values[i];
}

std::vector<std::uint8_t> serialize(const Checkpoint& c) {
  Writer w;
  w.out.insert(w.out.end(), kMagic, kMagic + 4);
  w.put<std::uint32_t>(c.version);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.component));
  w.put<std::uint64_t>(c.config_hash);
  w.put<std::uint64_t>(c.step);
  w.str(c.rng_state);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.metadata.size()));
  for (const auto& [k, v] : c.metadata) {
    w.str(k);
    w.str(v);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.blobs.size()));
  for (const auto& b : c.blobs) {
    w.str(b.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(b.shape.size()));
    for (auto d : b.shape) w.put<std::uint64_t>(static_cast<std::uint64_t>(d));
    for (float f : b.values) w.put<float>(f);
  }
  w.put<std::uint64_t>(fnv1a(w.out.data(), w.out.size()));
  return std::move(w.out);
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < 4 + 4 + 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IntegrityError(origin + ": not an omcrl checkpoint (bad magic or truncated)");
  const std::size_t body = bytes.size() - 8;
  Reader r(bytes, body, origin);
  r.pos = 4;
  Checkpoint c;
  c.version = r.get<std::uint32_t>();
  if (c.version != kCheckpointVersion)
    throw VersionError(origin + ": checkpoint format version " + std::to_string(c.version) +
                       ", this binary reads version " + std::to_string(kCheckpointVersion));
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (stored != fnv1a(bytes.data(), body)) throw IntegrityError(origin + ": checksum mismatch (truncated or corrupt)");
  const auto tag = r.get<std::uint8_t>();
  if (tag > static_cast<std::uint8_t>(Component::student))
    throw IntegrityError(origin + ": unknown component tag " + std::to_string(tag));
  c.component = static_cast<Component>(tag);
  c.config_hash = r.get<std::uint64_t>();
  c.step = r.get<std::uint64_t>();
  c.rng_state = r.str();
  const auto n_meta = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    c.metadata.emplace_back(std::move(k), r.str());
  }
  const auto n_blobs = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_blobs; ++i) {
    Blob b;
    b.name = r.str();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw IntegrityError(origin + ": implausible rank for '" + b.name + "'");
    std::uint64_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = r.get<std::uint64_t>();
      b.shape.push_back(static_cast<ad::Index>(dim));
      count *= dim;
    }
    r.need(count * sizeof(float));
    b.values.resize(count);
    std::memcpy(b.values.data(), bytes.data() + r.pos, count * sizeof(float));
    r.pos += count * sizeof(float);
    c.blobs.push_back(std::move(b));
  }
  if (r.pos != body) throw IntegrityError(origin + ": trailing bytes after the last blob");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto bytes = serialize(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + tmp);
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw ConfigError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("checkpoint not found: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return deserialize(bytes, path);
}

void check_config_hash(const Checkpoint& ckpt, std::uint64_t expected, bool force, const std::string& path) {
  if (ckpt.config_hash == expected) return;
  const std::string msg = path + ": config hash " + hex(ckpt.config_hash) + " does not match the current " +
                          hex(expected);
  if (!force) throw ConfigError(msg + " (pass --force to load anyway)");
  log_warn(msg + "; loading because of --force");
}

void expect_component(const Checkpoint& ckpt, Component expected, const std::string& path) {
  if (ckpt.component != expected)
    throw ConfigError(path + " holds a " + to_string(ckpt.component) + " checkpoint, expected " +
                      to_string(expected));
}

}  // namespace omcrl::io
