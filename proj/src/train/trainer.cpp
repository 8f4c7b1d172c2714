#include "omcrl/train/trainer.hpp"

#include "omcrl/error.hpp"
#include "omcrl/log.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace omcrl::train {

namespace {

constexpr std::uint64_t kRolloutStream = 0x5851f42d4c957f2dULL;

struct Agent {
  std::function<RowMatrix(const EnvViews&)> observe;
  std::function<nn::PolicyNet::Output(ad::Tape&, const RowMatrix&, bool)> forward;
};

struct TeacherSpec {
  OraclePolicy* oracle = nullptr;
  const StudentConfig* student = nullptr;
};

TrainRow summarize_rollout(rl::EnvPool& pool, long env_step) {
  TrainRow row;
  row.env_step = env_step;
  const auto finished = pool.take_finished();
  row.episodes = static_cast<int>(finished.size());
  if (finished.empty()) {
    row.ret = std::numeric_limits<double>::quiet_NaN();
    return row;
  }
  double ret = 0.0, success = 0.0;
  for (const auto& e : finished) {
    ret += e.ret;
    success += e.cause == sim::TerminalCause::goal;
  }
  row.ret = ret / static_cast<double>(finished.size());
  row.success = success / static_cast<double>(finished.size());
  return row;
}

std::vector<TrainRow> run(const TrainConfig& cfg, const Agent& agent, nn::ParameterRefs params,
                          const TeacherSpec& teacher, const UpdateHook& hook) {
  validate(cfg);
  rl::EnvPool pool(cfg.arena, cfg.envs, cfg.seed);
  bool want_depth = teacher.oracle != nullptr || teacher.student == nullptr;
  pool.set_outputs(teacher.student != nullptr, want_depth);
  std::mt19937_64 rng(cfg.seed ^ kRolloutStream);
  nn::AdamOptions ao;
  ao.max_grad_norm = cfg.ppo.max_grad_norm;
  nn::Adam adam(std::move(params), ao);
  const int steps_per_update = cfg.ppo.buffer - cfg.ppo.buffer % cfg.envs;
  if (steps_per_update < cfg.envs) throw ConfigError("rl.buffer smaller than the env pool");

  std::vector<TrainRow> log;
  long env_step = 0;
  while (env_step < cfg.total_steps) {
    double a = 0.0;
    if (teacher.student && teacher.student->use_oracle) a = alpha(env_step, teacher.student->decay);
    rl::RolloutSources src;
    src.observe = agent.observe;
    src.act = [&](ad::Tape& tape, const RowMatrix& obs) { return agent.forward(tape, obs, false); };
    if (a > 0.0) {
      src.teacher = [&](const EnvViews& envs, RowMatrix& mean, RowMatrix& log_std) {
        ad::Tape tape;
        const auto out = teacher.oracle->forward(tape, teacher.oracle->observe(envs), false);
        mean = out.mean.matrix();
        log_std = out.log_std.matrix();
      };
    } else if (teacher.student && want_depth) {
      // Alpha never grows back for linear / exponential decay.
      want_depth = false;
      pool.set_outputs(true, false);
    }

    rl::TrajectoryBatch batch = rl::collect_rollouts(pool, src, steps_per_update, cfg.ppo.horizon, rng);
    env_step += batch.size();
    rl::compute_gae(batch, cfg.ppo.gamma, cfg.ppo.lambda);
    if (cfg.ppo.normalize_advantages) rl::advantage_normalize(batch);

    const double lr =
        cfg.ppo.lr * std::max(0.0, 1.0 - static_cast<double>(env_step - batch.size()) /
                                             static_cast<double>(cfg.total_steps));
    auto forward = [&](ad::Tape& tape, const std::vector<Index>& idx) {
      RowMatrix obs(static_cast<Index>(idx.size()), batch.obs.cols());
      for (std::size_t k = 0; k < idx.size(); ++k) obs.row(static_cast<Index>(k)) = batch.obs.row(idx[k]);
      return agent.forward(tape, obs, true);
    };
    const double beta = teacher.student ? teacher.student->decay.beta : 0.0;
    auto loss = [&](ad::Tape& tape, const nn::PolicyNet::Output& out, const std::vector<Index>& idx,
                    rl::UpdateStats& stats) {
      (void)tape;
      rl::PpoTerms terms = rl::ppo_loss(out, batch, idx, cfg.ppo.clip, cfg.ppo.value_coef);
      stats.surrogate += terms.surrogate;
      stats.value_loss += terms.value_loss;
      stats.clip_fraction += terms.clip_fraction;
      std::optional<ad::Var> kl;
      if (a > 0.0) {
        RowMatrix mp(static_cast<Index>(idx.size()), batch.teacher_mean.cols());
        RowMatrix sp(mp.rows(), mp.cols());
        for (std::size_t k = 0; k < idx.size(); ++k) {
          mp.row(static_cast<Index>(k)) = batch.teacher_mean.row(idx[k]);
          sp.row(static_cast<Index>(k)) = batch.teacher_log_std.row(idx[k]);
        }
        const StudentConfig& sc = *teacher.student;
        kl = ad::mean(sc.monte_carlo_kl ? kl_monte_carlo(mp, sp, out.mean, out.log_std, sc.kl_samples, rng)
                                        : kl_gaussian(mp, sp, out.mean, out.log_std));
      }
      StudentLossTerms st = student_loss(terms.total, kl, a, beta);
      stats.kl += st.kl;
      return st.total;
    };
    const rl::UpdateStats us = rl::ppo_update(batch, cfg.ppo, adam, lr, rng, forward, loss);

    TrainRow row = summarize_rollout(pool, env_step);
    row.alpha = a;
    row.l_rl = us.surrogate + cfg.ppo.value_coef * us.value_loss;
    row.kl = us.kl;
    row.total = us.total;
    row.surrogate = us.surrogate;
    row.value_loss = us.value_loss;
    row.lr = lr;
    row.clip_fraction = us.clip_fraction;
    log.push_back(row);
    log_info("step " + std::to_string(env_step) + " return " + std::to_string(row.ret) + " success " +
             std::to_string(row.success) + " alpha " + std::to_string(a));
    if (hook) hook(row);
  }
  return log;
}

}  // namespace

void validate(const TrainConfig& c) {
  rl::validate(c.ppo);
  sim::validate(c.arena);
  if (c.total_steps < 1) throw ConfigError("rl.total_steps must be positive");
  if (c.envs < 1) throw ConfigError("rl.envs must be positive");
}

std::string train_csv_header() {
  return "env_step,alpha,return,L_rl,KL,total,surrogate,value_loss,clip_fraction,lr,episodes,success";
}

std::string train_csv_row(const TrainRow& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.env_step << ',' << r.alpha << ',' << r.ret << ',' << r.l_rl << ',' << r.kl << ',' << r.total << ','
     << r.surrogate << ',' << r.value_loss << ',' << r.clip_fraction << ',' << r.lr << ',' << r.episodes << ',' << r.success;
  return os.str();
}

void write_train_csv(const std::string& path, const std::vector<TrainRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "# omcrl-train v1\n" << train_csv_header() << '\n';
  for (const auto& r : rows) out << train_csv_row(r) << '\n';
}

std::vector<TrainRow> train_oracle(OraclePolicy& policy, const TrainConfig& config, const UpdateHook& hook) {
  Agent agent;
  agent.observe = [&](const EnvViews& envs) { return policy.observe(envs); };
  agent.forward = [&](ad::Tape& t, const RowMatrix& obs, bool trainable) {
    return policy.forward(t, obs, trainable);
  };
  nn::ParameterRefs params;
  policy.collect(params);
  return run(config, agent, std::move(params), {}, hook);
}

std::vector<TrainRow> train_student(StudentPolicy& student, OraclePolicy* teacher, const StudentConfig& config,
                                    const UpdateHook& hook) {
  validate(config.decay);
  if (config.use_oracle && !teacher) throw ContractError("train_student: oracle guidance requested without a teacher");
  Agent agent;
  agent.observe = [&](const EnvViews& envs) { return student.observe(envs); };
  agent.forward = [&](ad::Tape& t, const RowMatrix& obs, bool trainable) {
    return student.forward(t, obs, trainable);
  };
  nn::ParameterRefs params;
  student.collect(params);
  TeacherSpec ts{config.use_oracle ? teacher : nullptr, &config};
  return run(config.train, agent, std::move(params), ts, hook);
}

}  // namespace omcrl::train
