#include "omcrl/contrastive/pretrain.hpp"

#include "omcrl/error.hpp"
#include "omcrl/nn/schedule.hpp"

#include <algorithm>
#include <sstream>

namespace omcrl::contrastive {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("upstream." + what);
}

}  // namespace

void validate(const PretrainConfig& c) {
  require(c.batch >= 1, "batch must be positive");
  require(c.seq_len >= 1, "seq_len must be positive");
  require(c.mask_prob >= 0 && c.mask_prob <= 1, "mask_prob must lie in [0, 1]");
  require(c.tau > 0, "tau must be positive");
  require(c.momentum >= 0 && c.momentum <= 1, "momentum must lie in [0, 1]");
  require(c.latent_dim >= 2 && c.latent_dim % 2 == 0, "latent_dim must be even and >= 2");
  require(c.conv_channels >= 1 && c.projection_hidden >= 1, "layer widths must be positive");
  require(c.crop >= 0, "crop must be non-negative");
  require(c.blocks >= 0 && c.ffn_dim >= 1, "transformer sizes must be positive");
  require(c.lr_encoder > 0 && c.lr_transformer > 0, "learning rates must be positive");
  require(c.warmup >= 1, "warmup must be positive");
  require(c.steps >= 0, "steps must be non-negative");
  require(!c.curl || c.batch >= 2, "batch must be >= 2 in curl mode");
}

void write_cropped(const sim::FrameStack& stack, Crop crop, int side, double* dst) {
  for (const auto& f : stack.frames) {
    if (crop.y < 0 || crop.x < 0 || crop.y + side > f.height || crop.x + side > f.width)
      throw DimensionError("crop window outside the frame");
    for (int c = 0; c < f.channels; ++c)
      for (int y = 0; y < side; ++y) {
        const double* row = &f.data[static_cast<std::size_t>((c * f.height + crop.y + y) * f.width + crop.x)];
        std::copy(row, row + side, dst);
        dst += side;
      }
  }
}

Pretrainer::Pretrainer(const PretrainConfig& config, const SequenceCorpus& corpus, std::uint64_t seed)
    : config_(config), corpus_(&corpus), rng_(seed) {
  validate(config_);
  if (config_.crop > corpus.height || config_.crop > corpus.width)
    throw ConfigError("upstream.crop " + std::to_string(config_.crop) + " exceeds the corpus frame size");
  nn::EncoderConfig ec;
  ec.in_channels = 3 * corpus.frames_per_stack;
  ec.height = side();
  ec.width = side();
  ec.latent_dim = config_.latent_dim;
  ec.conv_channels = config_.conv_channels;
  encoder_ = nn::Encoder(ec, rng_);
  projection_ = nn::Projection(config_.latent_dim, config_.projection_hidden, config_.projection, rng_);
  key_encoder_ = encoder_;
  key_projection_ = projection_;
  nn::TransformerConfig tc;
  tc.dim = config_.latent_dim;
  tc.ffn_dim = config_.ffn_dim;
  tc.blocks = config_.blocks;
  tc.positional = config_.positional;
  if (!config_.curl) transformer_ = nn::Transformer(tc, rng_);
  bilinear_ = ad::Parameter("similarity.bilinear", {config_.latent_dim, config_.latent_dim});
  bilinear_.value = Eigen::Map<const Eigen::VectorXd>(
      ad::RowMatrix::Identity(config_.latent_dim, config_.latent_dim).eval().data(),
      config_.latent_dim * config_.latent_dim);

  opt_encoder_ = nn::Adam(query_parameters());
  opt_transformer_ = nn::Adam(transformer_parameters());

  const int L = corpus.frames_per_stack;
  sequence_offsets_.assign(1, 0);
  for (int e = 0; e < static_cast<int>(corpus.episodes.size()); ++e) {
    const int starts = config_.curl ? corpus.stacks_in(e) : std::max(0, corpus.stacks_in(e) - config_.seq_len + 1);
    sequence_offsets_.push_back(sequence_offsets_.back() + starts);
  }
  (void)L;
  if (sequence_offsets_.back() == 0)
    throw ConfigError("corpus holds no sequence of " + std::to_string(config_.seq_len) + " stacks");
}

int Pretrainer::side() const { return config_.crop > 0 ? config_.crop : corpus_->height; }

nn::ParameterRefs Pretrainer::query_parameters() {
  nn::ParameterRefs p;
  encoder_.collect(p);
  projection_.collect(p);
  if (config_.similarity == Similarity::bilinear) p.push_back(&bilinear_);
  return p;
}

nn::ParameterRefs Pretrainer::key_parameters() {
  nn::ParameterRefs p;
  key_encoder_.collect(p);
  key_projection_.collect(p);
  return p;
}

nn::ParameterRefs Pretrainer::transformer_parameters() {
  nn::ParameterRefs p;
  transformer_.collect(p);
  return p;
}

PretrainBatch Pretrainer::sample_batch(std::mt19937_64& rng) const {
  const SequenceCorpus& corpus = *corpus_;
  const int T = config_.curl ? 1 : config_.seq_len;
  PretrainBatch b;
  std::uniform_int_distribution<long> pick(0, sequence_offsets_.back() - 1);
  std::uniform_int_distribution<int> cy(0, corpus.height - side());
  std::uniform_int_distribution<int> cx(0, corpus.width - side());
  for (int s = 0; s < config_.batch; ++s) {
    const long k = pick(rng);
    const auto it = std::upper_bound(sequence_offsets_.begin(), sequence_offsets_.end(), k);
    const int e = static_cast<int>(it - sequence_offsets_.begin()) - 1;
    const int first = static_cast<int>(k - sequence_offsets_[static_cast<std::size_t>(e)]) + corpus.frames_per_stack - 1;
    std::vector<StackRef> refs;
    for (int i = 0; i < T; ++i) refs.push_back({e, first + i});
    if (config_.curl) {
      b.sequences.push_back(corrupt(refs, std::vector<std::uint8_t>(1, 0), corpus, rng));
    } else {
      auto mask = sample_mask(T, config_.mask_prob, rng);
      b.sequences.push_back(corrupt(refs, mask, corpus, rng));
    }
    const int qy = cy(rng), qx = cx(rng);
    const int ky = cy(rng), kx = cx(rng);
    b.query_crop.push_back({qy, qx});
    if (!config_.curl && config_.shared_crop)
      b.key_crop.push_back({qy, qx});
    else
      b.key_crop.push_back({ky, kx});
  }
  return b;
}

std::vector<PretrainBatch> Pretrainer::make_eval_batches(int count, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::vector<PretrainBatch> out;
  for (int i = 0; i < count; ++i) out.push_back(sample_batch(rng));
  return out;
}

Eigen::VectorXd Pretrainer::images(const PretrainBatch& b, bool keys, std::vector<ad::Index>* gather) const {
  // Query images skip zeroed stacks; all of them share one trailing zero
  // stack, and `gather` maps every position to its row.
  const int s = side();
  const std::size_t per_stack = static_cast<std::size_t>(3 * corpus_->frames_per_stack * s * s);
  std::size_t stacks = 0;
  bool any_zero = false;
  for (const auto& seq : b.sequences)
    for (auto k : seq.kinds) {
      const bool zero = !keys && k == Corruption::zeroed;
      any_zero = any_zero || zero;
      stacks += zero ? 0 : 1;
    }
  const ad::Index zero_row = static_cast<ad::Index>(stacks);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>((stacks + (any_zero ? 1 : 0)) * per_stack));
  double* dst = x.data();
  ad::Index row = 0;
  if (gather) gather->clear();
  for (std::size_t q = 0; q < b.sequences.size(); ++q) {
    const auto& seq = b.sequences[q];
    for (int i = 0; i < seq.length(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (!keys && seq.kinds[k] == Corruption::zeroed) {
        if (gather) gather->push_back(zero_row);
        continue;
      }
      const sim::FrameStack stack = corpus_->stack(keys ? seq.originals[k] : seq.sources[k]);
      write_cropped(stack, keys ? b.key_crop[q] : b.query_crop[q], s, dst);
      dst += per_stack;
      if (gather) gather->push_back(row);
      ++row;
    }
  }
  return x;
}

Pretrainer::Forward Pretrainer::forward(ad::Tape& tape, const PretrainBatch& b, bool trainable) {
  const ad::Index n = [&] {
    ad::Index k = 0;
    for (const auto& seq : b.sequences) k += seq.length();
    return k;
  }();
  const ad::Index C = 3 * corpus_->frames_per_stack, S = side();

  Forward f;
  f.batch.tau = config_.tau;
  {
    // Momentum branch: constants only, evaluated on a throwaway tape.
    ad::Tape key_tape;
    ad::Var xk = key_tape.constant({n, C, S, S}, images(b, true, nullptr));
    ad::Var k = key_projection_.forward(key_tape, key_encoder_.forward(key_tape, xk, false), false);
    f.batch.keys = k.matrix();
  }
  std::vector<ad::Index> gather;
  Eigen::VectorXd pixels = images(b, false, &gather);
  const ad::Index unique = pixels.size() / (C * S * S);
  ad::Var xq = tape.constant({unique, C, S, S}, std::move(pixels));
  ad::Var z = projection_.forward(tape, encoder_.forward(tape, xq, trainable), trainable);
  if (unique != n) z = ad::gather_rows(z, gather);
  if (config_.curl) {
    f.queries = z;
    f.batch.length = static_cast<int>(n);
    f.batch.mask.assign(static_cast<std::size_t>(n), 1);
  } else {
    f.queries = transformer_.forward(tape, z, static_cast<ad::Index>(b.sequences.size()), trainable);
    f.batch.length = config_.seq_len;
    for (const auto& seq : b.sequences) f.batch.mask.insert(f.batch.mask.end(), seq.mask.begin(), seq.mask.end());
  }
  ad::Var w;
  if (config_.similarity == Similarity::bilinear) w = nn::bind(tape, bilinear_, trainable);
  f.loss = masked_infonce(tape, f.queries, f.batch, config_.similarity,
                          config_.similarity == Similarity::bilinear ? &w : nullptr);
  return f;
}

StepLog Pretrainer::step() {
  PretrainBatch b = sample_batch(rng_);
  ad::Tape tape;
  Forward f = forward(tape, b, true);

  StepLog log;
  log.step = step_;
  log.loss = f.loss.item();
  for (auto m : f.batch.mask) log.masked += m;
  nn::LrSchedule xi{nn::LrKind::warmup_inv_sqrt, config_.lr_transformer, config_.warmup, config_.steps};
  log.lr_encoder = config_.lr_encoder;
  log.lr_transformer = nn::learning_rate(xi, step_ + 1);

  if (!std::isfinite(log.loss)) {
    std::ostringstream os;
    os << "pretrain: non-finite loss at step " << step_ << "; batch stacks (episode:t):";
    for (const auto& seq : b.sequences)
      for (const auto& r : seq.originals) os << ' ' << r.episode << ':' << r.t;
    throw NumericError(os.str());
  }
  for (const ad::Parameter* p : key_parameters())
    if (tape.binds_trainable(*p)) throw ContractError("key parameter '" + p->name + "' bound to the gradient tape");

  const RowMatrix w = Eigen::Map<const RowMatrix>(bilinear_.value.data(), config_.latent_dim, config_.latent_dim);
  log.retrieval = retrieval_accuracy(f.queries.matrix(), f.batch, config_.similarity, &w);
  if (log.masked > 0) {
    tape.backward(f.loss);
    opt_encoder_.step(log.lr_encoder);
    if (!config_.curl) opt_transformer_.step(log.lr_transformer);
    auto q = query_parameters();
    if (config_.similarity == Similarity::bilinear) q.pop_back();
    momentum_update(q, key_parameters(), config_.momentum);
    log.updated = true;
  }
  ++step_;
  return log;
}

EvalLog Pretrainer::evaluate(const std::vector<PretrainBatch>& batches) {
  EvalLog out;
  double loss = 0, drift = 0, hits = 0;
  long masked = 0, drift_n = 0;
  const RowMatrix w = Eigen::Map<const RowMatrix>(bilinear_.value.data(), config_.latent_dim, config_.latent_dim);
  for (const auto& b : batches) {
    ad::Tape tape;
    Forward f = forward(tape, b, false);
    long m = 0;
    for (auto v : f.batch.mask) m += v;
    if (m == 0) continue;
    loss += f.loss.item() * static_cast<double>(m);
    hits += *retrieval_accuracy(f.queries.matrix(), f.batch, config_.similarity, &w) * static_cast<double>(m);
    drift += *representation_drift(f.queries.matrix(), f.batch.keys, f.batch.mask) * static_cast<double>(m);
    masked += m;
    drift_n += m;
  }
  if (masked > 0) {
    out.loss = loss / static_cast<double>(masked);
    out.retrieval = hits / static_cast<double>(masked);
    out.drift = drift / static_cast<double>(drift_n);
  }
  return out;
}

}  // namespace omcrl::contrastive
