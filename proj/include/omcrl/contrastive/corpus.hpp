#pragma once

#include "omcrl/sim/env.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace omcrl::contrastive {

enum class PolicyKind { random, scripted };
std::string to_string(PolicyKind kind);
PolicyKind policy_from_string(const std::string& s);

// One recorded episode: frames x 3 x H x W bytes, chronological.
struct Episode {
  int id = 0;
  PolicyKind policy = PolicyKind::random;
  int frames = 0;
  std::vector<std::uint8_t> pixels;

  const std::uint8_t* frame(int t, std::size_t frame_size) const {
    return pixels.data() + static_cast<std::size_t>(t) * frame_size;
  }
};

// Frame stack identified by its episode and the index of its last frame.
struct StackRef {
  int episode = 0;
  int t = 0;
  bool operator==(const StackRef&) const = default;
};

class SequenceCorpus {
 public:
  int height = 0;
  int width = 0;
  int frames_per_stack = 3;  // L
  std::vector<Episode> episodes;

  std::size_t frame_size() const { return static_cast<std::size_t>(3 * height * width); }
  // Frame stacks in corpus order; stack k of episode e ends at frame L-1+k.
  long stack_count() const;
  StackRef stack_at(long index) const;
  long index_of(const StackRef& ref) const;
  // Number of stacks of episode e.
  int stacks_in(int episode) const;
  sim::FrameStack stack(const StackRef& ref) const;

 private:
  mutable std::vector<long> offsets_;
  void build_offsets() const;
};

struct CorpusConfig {
  int episodes = 500;
  double random_fraction = 0.5;
  int max_frames = 100;
  int min_frames = 10;  // T + L - 1 at the default T = 8, L = 3
};

// Rolls out random and scripted policies and records every rendered frame.
// Episodes shorter than min_frames are discarded with a warning.
SequenceCorpus collect_corpus(const sim::ArenaConfig& arena, const CorpusConfig& config, std::uint64_t seed);

// Directory of episode_NNNNN.bin files plus manifest.json.
void save_corpus(const SequenceCorpus& corpus, const std::filesystem::path& dir);
SequenceCorpus load_corpus(const std::filesystem::path& dir);

}  // namespace omcrl::contrastive
