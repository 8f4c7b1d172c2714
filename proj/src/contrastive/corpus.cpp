#include "omcrl/contrastive/corpus.hpp"

#include "omcrl/error.hpp"
#include "omcrl/log.hpp"
#include "omcrl/sim/scripted.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace omcrl::contrastive {

namespace {

constexpr char kEpisodeMagic[4] = {'O', 'M', 'C', 'E'};
constexpr std::uint32_t kEpisodeVersion = 1;

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

template <class T>
void put(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::string& file) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw IntegrityError(file + ": truncated header");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return static_cast<T>(v);
}

std::string episode_file(int id) {
  std::ostringstream os;
  os << "episode_" << std::setw(5) << std::setfill('0') << id << ".bin";
  return os.str();
}

void append_frame(Episode& e, const sim::Image& img) {
  for (double v : img.data) e.pixels.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  ++e.frames;
}

}  // namespace

std::string to_string(PolicyKind kind) { return kind == PolicyKind::random ? "random" : "scripted"; }

PolicyKind policy_from_string(const std::string& s) {
  if (s == "random") return PolicyKind::random;
  if (s == "scripted") return PolicyKind::scripted;
  throw ConfigError("unknown policy kind '" + s + "'");
}

void SequenceCorpus::build_offsets() const {
  offsets_.assign(1, 0);
  for (std::size_t e = 0; e < episodes.size(); ++e)
    offsets_.push_back(offsets_.back() + stacks_in(static_cast<int>(e)));
}

int SequenceCorpus::stacks_in(int e) const {
  return std::max(0, episodes.at(static_cast<std::size_t>(e)).frames - frames_per_stack + 1);
}

long SequenceCorpus::stack_count() const {
  if (offsets_.size() != episodes.size() + 1) build_offsets();
  return offsets_.back();
}

StackRef SequenceCorpus::stack_at(long index) const {
  if (index < 0 || index >= stack_count()) throw ContractError("stack index out of range");
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
  const int e = static_cast<int>(it - offsets_.begin()) - 1;
  return {e, static_cast<int>(index - offsets_[static_cast<std::size_t>(e)]) + frames_per_stack - 1};
}

long SequenceCorpus::index_of(const StackRef& ref) const {
  stack_count();
  return offsets_.at(static_cast<std::size_t>(ref.episode)) + ref.t - (frames_per_stack - 1);
}

sim::FrameStack SequenceCorpus::stack(const StackRef& ref) const {
  const Episode& e = episodes.at(static_cast<std::size_t>(ref.episode));
  if (ref.t < frames_per_stack - 1 || ref.t >= e.frames) throw ContractError("stack reference out of range");
  sim::FrameStack s;
  s.episode = e.id;
  s.timestep = ref.t;
  for (int k = ref.t - frames_per_stack + 1; k <= ref.t; ++k) {
    sim::Image img{3, height, width, std::vector<double>(frame_size())};
    const std::uint8_t* src = e.frame(k, frame_size());
    for (std::size_t i = 0; i < frame_size(); ++i) img.data[i] = src[i] / 255.0;
    s.frames.push_back(std::move(img));
  }
  return s;
}

SequenceCorpus collect_corpus(const sim::ArenaConfig& arena, const CorpusConfig& config, std::uint64_t seed) {
  if (config.episodes < 1) throw ConfigError("corpus.episodes must be positive");
  if (config.random_fraction < 0 || config.random_fraction > 1)
    throw ConfigError("corpus.random_fraction must lie in [0, 1]");
  if (config.max_frames < config.min_frames) throw ConfigError("corpus.max_frames below the minimum episode length");

  SequenceCorpus corpus;
  corpus.height = arena.image_height;
  corpus.width = arena.image_width;
  corpus.frames_per_stack = arena.frames;

  sim::NavEnv env(arena, seed);
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const long max_attempts = 50L * config.episodes;
  long attempts = 0;
  while (static_cast<int>(corpus.episodes.size()) < config.episodes) {
    if (++attempts > max_attempts)
      throw ConfigError("corpus: too many episodes shorter than " + std::to_string(config.min_frames) + " frames");
    Episode e;
    e.policy = unit(rng) < config.random_fraction ? PolicyKind::random : PolicyKind::scripted;
    env.reset();
    append_frame(e, env.last_rgb());
    sim::RandomWalk walk;
    while (e.frames < config.max_frames && !env.done()) {
      const Eigen::Vector3d u =
          e.policy == PolicyKind::random ? walk.act(arena, rng) : sim::scripted_action(env);
      env.step(u);
      append_frame(e, env.last_rgb());
    }
    if (e.frames < config.min_frames) {
      log_warn("corpus: discarded " + to_string(e.policy) + " episode with " + std::to_string(e.frames) +
               " frames (< " + std::to_string(config.min_frames) + ")");
      continue;
    }
    e.id = static_cast<int>(corpus.episodes.size());
    corpus.episodes.push_back(std::move(e));
  }
  return corpus;
}

void save_corpus(const SequenceCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "omcrl-corpus";
  manifest["version"] = kEpisodeVersion;
  manifest["height"] = corpus.height;
  manifest["width"] = corpus.width;
  manifest["frames_per_stack"] = corpus.frames_per_stack;
  manifest["episodes"] = nlohmann::json::array();
  for (const auto& e : corpus.episodes) {
    const std::string name = episode_file(e.id);
    const auto tmp = dir / (name + ".tmp");
    {
      std::ofstream os(tmp, std::ios::binary);
      if (!os) throw std::runtime_error("cannot write " + tmp.string());
      os.write(kEpisodeMagic, 4);
      put<std::uint32_t>(os, kEpisodeVersion);
      put<std::uint32_t>(os, static_cast<std::uint32_t>(e.frames));
      put<std::uint32_t>(os, 3);
      put<std::uint32_t>(os, static_cast<std::uint32_t>(corpus.height));
      put<std::uint32_t>(os, static_cast<std::uint32_t>(corpus.width));
      put<std::uint8_t>(os, e.policy == PolicyKind::random ? 0 : 1);
      os.write(reinterpret_cast<const char*>(e.pixels.data()), static_cast<std::streamsize>(e.pixels.size()));
      put<std::uint64_t>(os, fnv1a(e.pixels.data(), e.pixels.size()));
      if (!os) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, dir / name);
    manifest["episodes"].push_back({{"id", e.id}, {"file", name}, {"frames", e.frames}, {"policy", to_string(e.policy)}});
  }
  const auto tmp = dir / "manifest.json.tmp";
  {
    std::ofstream os(tmp);
    os << manifest.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, dir / "manifest.json");
}

SequenceCorpus load_corpus(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream ms(manifest_path);
  if (!ms) throw ConfigError("corpus manifest not found: " + manifest_path.string() + " (run `omcrl collect` first)");
  nlohmann::json manifest;
  try {
    ms >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "omcrl-corpus") throw IntegrityError(manifest_path.string() + ": not a corpus manifest");
  if (manifest.value("version", 0u) != kEpisodeVersion)
    throw VersionError(manifest_path.string() + ": corpus version " + std::to_string(manifest.value("version", 0u)) +
                       ", expected " + std::to_string(kEpisodeVersion));
  SequenceCorpus corpus;
  corpus.height = manifest.at("height");
  corpus.width = manifest.at("width");
  corpus.frames_per_stack = manifest.at("frames_per_stack");
  for (const auto& entry : manifest.at("episodes")) {
    const auto path = dir / entry.at("file").get<std::string>();
    const std::string file = path.string();
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IntegrityError("missing episode file " + file);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kEpisodeMagic, 4) != 0) throw IntegrityError(file + ": bad magic");
    const auto version = get<std::uint32_t>(is, file);
    if (version != kEpisodeVersion) throw VersionError(file + ": episode version " + std::to_string(version));
    Episode e;
    e.id = entry.at("id");
    e.frames = static_cast<int>(get<std::uint32_t>(is, file));
    const auto channels = get<std::uint32_t>(is, file);
    const auto h = get<std::uint32_t>(is, file);
    const auto w = get<std::uint32_t>(is, file);
    if (channels != 3 || static_cast<int>(h) != corpus.height || static_cast<int>(w) != corpus.width)
      throw IntegrityError(file + ": frame geometry disagrees with the manifest");
    e.policy = get<std::uint8_t>(is, file) == 0 ? PolicyKind::random : PolicyKind::scripted;
    e.pixels.resize(static_cast<std::size_t>(e.frames) * corpus.frame_size());
    if (!is.read(reinterpret_cast<char*>(e.pixels.data()), static_cast<std::streamsize>(e.pixels.size())))
      throw IntegrityError(file + ": truncated pixel data");
    if (get<std::uint64_t>(is, file) != fnv1a(e.pixels.data(), e.pixels.size()))
      throw IntegrityError(file + ": checksum mismatch");
    corpus.episodes.push_back(std::move(e));
  }
  return corpus;
}

}  // namespace omcrl::contrastive
