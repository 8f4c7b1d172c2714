#include "omcrl/contrastive/masking.hpp"

#include "omcrl/error.hpp"
#include "omcrl/log.hpp"

namespace omcrl::contrastive {

std::vector<std::uint8_t> sample_mask(int T, double rho, std::mt19937_64& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw DomainError("sample_mask: probability " + std::to_string(rho) + " outside [0, 1]");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> m(static_cast<std::size_t>(T));
  for (auto& v : m) v = u(rng) < rho ? 1 : 0;
  return m;
}

MaskedSequence corrupt(const std::vector<StackRef>& sequence, const std::vector<std::uint8_t>& mask,
                       const SequenceCorpus& corpus, std::mt19937_64& rng) {
  if (mask.size() != sequence.size())
    throw DimensionError("corrupt: mask length " + std::to_string(mask.size()) + " vs sequence length " +
                         std::to_string(sequence.size()));
  MaskedSequence out;
  out.originals = sequence;
  out.mask = mask;
  out.sources = sequence;
  out.kinds.assign(sequence.size(), Corruption::none);
  const long stacks = corpus.stack_count();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    if (!mask[i]) continue;
    const double r = u(rng);
    if (r < 0.8) {
      out.kinds[i] = Corruption::zeroed;
    } else if (r < 0.9) {
      if (stacks < 2) {
        log_warn("corrupt: corpus holds fewer than two stacks; swap replaced by zeroing");
        out.kinds[i] = Corruption::zeroed;
        continue;
      }
      // Uniform over the other stacks: draw from stacks - 1 and skip self.
      const long self = corpus.index_of(sequence[i]);
      long j = std::uniform_int_distribution<long>(0, stacks - 2)(rng);
      if (j >= self) ++j;
      out.kinds[i] = Corruption::swapped;
      out.sources[i] = corpus.stack_at(j);
    } else {
      out.kinds[i] = Corruption::kept;
    }
  }
  return out;
}

sim::FrameStack MaskedSequence::corrupted(const SequenceCorpus& corpus, int i) const {
  const auto k = static_cast<std::size_t>(i);
  sim::FrameStack s = corpus.stack(sources.at(k));
  if (kinds[k] == Corruption::zeroed)
    for (auto& f : s.frames) std::fill(f.data.begin(), f.data.end(), 0.0);
  s.timestep = originals[k].t;
  return s;
}

}  // namespace omcrl::contrastive
