#pragma once

#include "omcrl/contrastive/infonce.hpp"
#include "omcrl/contrastive/masking.hpp"
#include "omcrl/nn/encoder.hpp"
#include "omcrl/nn/optim.hpp"
#include "omcrl/nn/transformer.hpp"

#include <optional>

namespace omcrl::contrastive {

struct PretrainConfig {
  int batch = 8;     // sequences per step (stacks per step in CURL mode)
  int seq_len = 8;   // T
  double mask_prob = 0.5;
  double tau = 0.07;
  double momentum = 0.05;
  int latent_dim = 64;
  int conv_channels = 32;
  int projection_hidden = 128;
  bool projection = true;
  int crop = 32;  // square crop side; 0 uses the full frame
  // Masked mode: one crop offset per sequence for both branches. CURL mode
  // always crops its two views independently.
  bool shared_crop = true;
  int blocks = 2;
  int ffn_dim = 256;
  bool positional = true;
  Similarity similarity = Similarity::cosine;
  double lr_encoder = 1e-3;      // encoder and projection
  double lr_transformer = 2e-3;  // peak of the warmup / inverse-sqrt schedule
  long warmup = 6000;
  long steps = 20000;
  bool curl = false;
};

void validate(const PretrainConfig& config);

struct Crop {
  int y = 0;
  int x = 0;
};

struct PretrainBatch {
  std::vector<MaskedSequence> sequences;  // CURL mode: one length-1 entry per stack
  std::vector<Crop> query_crop;           // one per sequence
  std::vector<Crop> key_crop;
};

struct StepLog {
  long step = 0;
  double loss = 0.0;
  std::optional<double> retrieval;
  int masked = 0;
  double lr_encoder = 0.0;
  double lr_transformer = 0.0;
  bool updated = false;
};

struct EvalLog {
  double loss = 0.0;
  std::optional<double> retrieval;
  std::optional<double> drift;
};

// Writes crops of every frame of `stack` (channel-major) into dst.
void write_cropped(const sim::FrameStack& stack, Crop crop, int side, double* dst);

// Upstream stage: query encoder f, projection g and Transformer xi trained on
// masked sequences against momentum keys; or, in CURL mode, single stacks
// under two independent crops without Transformer or mask.
class Pretrainer {
 public:
  Pretrainer(const PretrainConfig& config, const SequenceCorpus& corpus, std::uint64_t seed);

  StepLog step();
  PretrainBatch sample_batch(std::mt19937_64& rng) const;
  std::vector<PretrainBatch> make_eval_batches(int count, std::uint64_t seed) const;
  EvalLog evaluate(const std::vector<PretrainBatch>& batches);

  const PretrainConfig& config() const { return config_; }
  long steps_done() const { return step_; }
  nn::Encoder& encoder() { return encoder_; }
  nn::Projection& projection() { return projection_; }
  nn::Transformer& transformer() { return transformer_; }
  nn::Encoder& key_encoder() { return key_encoder_; }
  nn::Projection& key_projection() { return key_projection_; }
  ad::Parameter& bilinear() { return bilinear_; }
  nn::ParameterRefs query_parameters();
  nn::ParameterRefs key_parameters();
  nn::ParameterRefs transformer_parameters();
  std::mt19937_64& rng() { return rng_; }
  nn::Adam& encoder_optimizer() { return opt_encoder_; }
  nn::Adam& transformer_optimizer() { return opt_transformer_; }
  void set_step(long step) { step_ = step; }

 private:
  struct Forward {
    ad::Var queries;  // Transformer outputs (projection outputs in CURL mode)
    ContrastiveBatch batch;
    ad::Var loss;
  };
  Forward forward(ad::Tape& tape, const PretrainBatch& b, bool trainable);
  Eigen::VectorXd images(const PretrainBatch& b, bool keys, std::vector<ad::Index>* gather) const;
  int side() const;

  PretrainConfig config_;
  const SequenceCorpus* corpus_;
  std::mt19937_64 rng_;
  nn::Encoder encoder_, key_encoder_;
  nn::Projection projection_, key_projection_;
  nn::Transformer transformer_;
  ad::Parameter bilinear_;
  nn::Adam opt_encoder_, opt_transformer_;
  std::vector<long> sequence_offsets_;
  long step_ = 0;
};

}  // namespace omcrl::contrastive
