#include "omcrl/train/policies.hpp"

#include "omcrl/contrastive/pretrain.hpp"
#include "omcrl/error.hpp"

namespace omcrl::train {

namespace {

constexpr Index kFeatures = 12;

void check_rows(const RowMatrix& obs, Index width, const char* who) {
  if (obs.cols() != width)
    throw DimensionError(std::string(who) + ": observation width " + std::to_string(obs.cols()) + ", expected " +
                         std::to_string(width));
}

}  // namespace

OraclePolicy::OraclePolicy(const sim::ArenaConfig& arena, const OracleNetConfig& config, std::mt19937_64& rng)
    : config_(config), frames_(arena.frames), height_(arena.depth_height), width_(arena.depth_width) {
  depth_size_ = frames_ * height_ * width_;
  nn::EncoderConfig ec;
  ec.in_channels = frames_;
  ec.height = height_;
  ec.width = width_;
  ec.latent_dim = config.latent_dim;
  ec.conv_channels = config.conv_channels;
  encoder_ = nn::Encoder(ec, rng);
  nn::PolicyConfig pc;
  pc.input_dim = config.latent_dim + kFeatures;
  pc.hidden = config.hidden;
  pc.init_log_std = config.init_log_std;
  head_ = nn::PolicyNet("oracle", pc, rng);
}

RowMatrix OraclePolicy::observe(const EnvViews& envs) const {
  RowMatrix obs(static_cast<Index>(envs.size()), obs_dim());
  for (std::size_t i = 0; i < envs.size(); ++i) {
    const sim::PrivilegedState p = envs[i]->privileged();
    double* dst = obs.row(static_cast<Index>(i)).data();
    for (const auto& f : p.depth) {
      if (static_cast<Index>(f.data.size()) != height_ * width_)
        throw DimensionError("oracle: depth frame missing or resized (depth output disabled?)");
      dst = std::copy(f.data.begin(), f.data.end(), dst);
    }
    const Eigen::VectorXd feat = envs[i]->oracle_features();
    std::copy(feat.data(), feat.data() + kFeatures, dst);
  }
  return obs;
}

nn::PolicyNet::Output OraclePolicy::forward(ad::Tape& tape, const RowMatrix& obs, bool trainable) {
  check_rows(obs, obs_dim(), "oracle");
  const Index n = obs.rows();
  RowMatrix depth = obs.leftCols(depth_size_);
  RowMatrix feat = obs.rightCols(kFeatures);
  ad::Var x = tape.constant({n, frames_, height_, width_},
                            Eigen::Map<const Eigen::VectorXd>(depth.data(), depth.size()));
  ad::Var z = encoder_.forward(tape, x, trainable);
  return head_.forward(tape, ad::concat_cols({z, tape.constant(feat)}), trainable);
}

RowMatrix OraclePolicy::act_mean(const EnvViews& envs) {
  ad::Tape tape;
  return forward(tape, observe(envs), false).mean.matrix();
}

void OraclePolicy::collect(nn::ParameterRefs& out) {
  encoder_.collect(out);
  head_.collect(out);
}

StudentPolicy::StudentPolicy(nn::Encoder encoder, nn::Projection projection, int crop,
                             const StudentNetConfig& config, std::mt19937_64& rng)
    : config_(config), crop_(crop), encoder_(std::move(encoder)), projection_(std::move(projection)) {
  nn::PolicyConfig pc;
  pc.input_dim = encoder_.config().latent_dim + kFeatures;
  pc.hidden = config.hidden;
  pc.init_log_std = config.init_log_std;
  head_ = nn::PolicyNet("student", pc, rng);
}

Index StudentPolicy::obs_dim() const { return encoder_.config().latent_dim + kFeatures; }

RowMatrix StudentPolicy::embed(const EnvViews& envs) const {
  const auto& ec = encoder_.config();
  const Index n = static_cast<Index>(envs.size());
  Eigen::VectorXd pixels(n * ec.in_channels * ec.height * ec.width);
  double* dst = pixels.data();
  for (const auto* env : envs) {
    const sim::FrameStack stack = env->rgb_stack();
    const auto& f = stack.frames.front();
    if (f.height < crop_ || f.width < crop_ || ec.height != crop_ || ec.width != crop_)
      throw DimensionError("student: frame " + std::to_string(f.height) + "x" + std::to_string(f.width) +
                           " does not match the encoder input " + std::to_string(ec.height) + "x" +
                           std::to_string(ec.width));
    const contrastive::Crop center{(f.height - crop_) / 2, (f.width - crop_) / 2};
    contrastive::write_cropped(stack, center, crop_, dst);
    dst += ec.in_channels * crop_ * crop_;
  }
  ad::Tape tape;
  ad::Var x = tape.constant({n, ec.in_channels, ec.height, ec.width}, std::move(pixels));
  return projection_.forward(tape, encoder_.forward(tape, x, false), false).matrix();
}

RowMatrix StudentPolicy::observe(const EnvViews& envs) const {
  RowMatrix obs(static_cast<Index>(envs.size()), obs_dim());
  const Index d = encoder_.config().latent_dim;
  obs.leftCols(d) = embed(envs);
  for (std::size_t i = 0; i < envs.size(); ++i) {
    const Eigen::VectorXd feat = envs[i]->student_features();
    obs.row(static_cast<Index>(i)).tail(kFeatures) = feat.transpose();
  }
  return obs;
}

nn::PolicyNet::Output StudentPolicy::forward(ad::Tape& tape, const RowMatrix& obs, bool trainable) {
  check_rows(obs, obs_dim(), "student");
  return head_.forward(tape, tape.constant(obs), trainable);
}

RowMatrix StudentPolicy::act_mean(const EnvViews& envs) {
  ad::Tape tape;
  return forward(tape, observe(envs), false).mean.matrix();
}

void StudentPolicy::collect(nn::ParameterRefs& out) { head_.collect(out); }

nn::ParameterRefs StudentPolicy::frozen_parameters() {
  nn::ParameterRefs out;
  encoder_.collect(out);
  projection_.collect(out);
  return out;
}

}  // namespace omcrl::train
