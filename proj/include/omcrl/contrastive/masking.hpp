#pragma once

#include "omcrl/contrastive/corpus.hpp"

#include <random>

namespace omcrl::contrastive {

// i.i.d. Bernoulli(rho) entries; DomainError unless 0 <= rho <= 1.
std::vector<std::uint8_t> sample_mask(int T, double rho, std::mt19937_64& rng);

enum class Corruption { none, zeroed, swapped, kept };

struct MaskedSequence {
  std::vector<StackRef> originals;
  std::vector<std::uint8_t> mask;
  std::vector<Corruption> kinds;
  // Stack actually shown at each position (the swap source when swapped).
  std::vector<StackRef> sources;

  int length() const { return static_cast<int>(originals.size()); }
  sim::FrameStack corrupted(const SequenceCorpus& corpus, int i) const;
};

// Masked positions become zeroed / swapped / kept with probability
// 0.8 / 0.1 / 0.1. Swap sources are uniform over every other stack in the
// corpus; a corpus with fewer than two stacks falls back to zeroing.
MaskedSequence corrupt(const std::vector<StackRef>& sequence, const std::vector<std::uint8_t>& mask,
                       const SequenceCorpus& corpus, std::mt19937_64& rng);

}  // namespace omcrl::contrastive
