#include "omcrl/app/pipeline.hpp"

#include "omcrl/contrastive/pretrain.hpp"
#include "omcrl/error.hpp"
#include "omcrl/io/checkpoint.hpp"
#include "omcrl/io/csv.hpp"
#include "omcrl/io/svg.hpp"
#include "omcrl/log.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace omcrl::app {

namespace fs = std::filesystem;
using io::Component;

namespace {

constexpr std::uint64_t kEvalBatchSalt = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kOracleInitSalt = 0x2545f4914f6cdd1dULL;
constexpr std::uint64_t kStudentInitSalt = 0x94d049bb133111ebULL;
constexpr int kCheckpointEvery = 20;  // PPO updates between intermediate checkpoints

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void require(const fs::path& path, const std::string& command) {
  if (!fs::exists(path))
    throw ConfigError("missing " + path.string() + "; run `omcrl " + command + "` first");
}

void prepare(const fs::path& dir, const io::RunConfig& config) {
  fs::create_directories(dir);
  write_text(dir / "config.toml", io::dump_config(config));
}

int input_side(const io::RunConfig& c) {
  return c.upstream.model.crop > 0 ? c.upstream.model.crop : c.arena.image_height;
}

nn::EncoderConfig student_encoder_config(const io::RunConfig& c) {
  nn::EncoderConfig ec;
  ec.in_channels = 3 * c.arena.frames;
  ec.height = input_side(c);
  ec.width = input_side(c);
  ec.latent_dim = c.upstream.model.latent_dim;
  ec.conv_channels = c.upstream.model.conv_channels;
  return ec;
}

train::TrainConfig train_config(const io::RunConfig& c, long steps, int envs) {
  train::TrainConfig tc;
  tc.arena = c.arena;
  tc.ppo = c.rl;
  tc.total_steps = steps;
  tc.envs = envs;
  tc.seed = c.seed;
  return tc;
}

io::Checkpoint load_component(const fs::path& path, Component component, const io::RunConfig& config,
                              const std::string& hash_key, bool force, const std::string& command) {
  require(path, command);
  io::Checkpoint ckpt = io::load_checkpoint(path.string());
  io::expect_component(ckpt, component, path.string());
  io::check_config_hash(ckpt, io::component_hash(config, hash_key), force, path.string());
  return ckpt;
}

eval::MetricsReport run_eval(const io::RunConfig& c, const eval::BatchPolicy& policy, bool rgb, bool depth,
                             const fs::path& dir, const std::string& name, const std::string& prefix) {
  eval::EvalOptions o;
  o.episodes = c.eval.episodes;
  o.seed = c.eval.seed;
  o.parallel = c.eval.parallel;
  o.rgb = rgb;
  o.depth = depth;
  const auto records = eval::run_episodes(c.arena, o, policy);
  const eval::MetricsReport report = eval::summarize(records, c.eval.epsilon);
  write_text(dir / (prefix + ".csv"), "# omcrl-report v1\n" + eval::format_report_csv(report));
  write_text(dir / (prefix + ".txt"), eval::format_table({{name, report}}));
  eval::write_episode_csv((dir / (prefix + "_episodes.csv")).string(), records);
  log_info(name + " evaluation: SR " + num(report.sr) + " SPL " + num(report.spl));
  return report;
}

struct Student {
  train::StudentPolicy policy;
  std::string encoder_hash;
};

Student build_student(const io::RunConfig& c, const Layout& L, bool force) {
  const io::Checkpoint enc_ckpt =
      load_component(L.upstream / "encoder.ckpt", Component::encoder, c, "encoder", force, "pretrain");
  const io::Checkpoint proj_ckpt =
      load_component(L.upstream / "projection.ckpt", Component::projection, c, "projection", force, "pretrain");
  std::mt19937_64 rng(c.seed ^ kStudentInitSalt);
  nn::Encoder encoder(student_encoder_config(c), rng);
  nn::Projection projection(c.upstream.model.latent_dim, c.upstream.model.projection_hidden,
                            c.upstream.model.projection, rng);
  nn::ParameterRefs enc_refs, proj_refs;
  encoder.collect(enc_refs);
  projection.collect(proj_refs);
  io::load_parameters(enc_ckpt, enc_refs);
  io::load_parameters(proj_ckpt, proj_refs);
  nn::ParameterRefs frozen = enc_refs;
  frozen.insert(frozen.end(), proj_refs.begin(), proj_refs.end());
  const std::string hash = io::hex(io::parameter_hash(frozen));
  if (!c.student.encoder_hash.empty() && c.student.encoder_hash != hash)
    throw ConfigError("frozen encoder hash " + hash + " does not match student.encoder_hash " +
                      c.student.encoder_hash);
  return {train::StudentPolicy(std::move(encoder), std::move(projection), input_side(c), c.student.net, rng), hash};
}

train::OraclePolicy build_oracle(const io::RunConfig& c) {
  std::mt19937_64 rng(c.seed ^ kOracleInitSalt);
  return train::OraclePolicy(c.arena, c.oracle.net, rng);
}

std::string label_of(const fs::path& file, const fs::path& root) {
  const fs::path rel = fs::relative(file.parent_path(), root);
  return rel.empty() || rel == "." ? root.filename().string() : rel.string();
}

std::vector<fs::path> find_files(const fs::path& root, const std::string& name) {
  std::vector<fs::path> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() == name) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void apply(io::RunConfig& c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.mask_prob) c.upstream.model.mask_prob = *o.mask_prob;
  if (o.decay) c.decay.kind = train::decay_from_string(*o.decay);
  if (o.no_oracle) c.student.use_oracle = false;
  if (o.no_projection) c.upstream.model.projection = false;
  if (o.curl_mode) c.upstream.model.curl = true;
  if (o.out) c.out_dir = *o.out;
}

io::RunConfig resolve_config(const std::string& path, const Overrides& overrides) {
  io::RunConfig c = path.empty() ? io::RunConfig{} : io::load_config(path);
  apply(c, overrides);
  io::validate(c);
  return c;
}

std::string upstream_suffix(const io::RunConfig& c) {
  const contrastive::PretrainConfig defaults;
  std::string s;
  if (c.upstream.model.curl) {
    s += "-curl";
  } else if (c.upstream.model.mask_prob != defaults.mask_prob) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "-mask%g", c.upstream.model.mask_prob);
    s += buf;
  }
  if (!c.upstream.model.projection) s += "-noproj";
  return s;
}

Layout layout(const io::RunConfig& c) {
  Layout L;
  L.root = c.out_dir;
  L.corpus = L.root / "corpus";
  L.upstream = L.root / ("upstream" + upstream_suffix(c));
  L.oracle = L.root / "oracle";
  std::string student = "student" + upstream_suffix(c);
  if (!c.student.use_oracle) student += "-no-oracle";
  if (c.decay.kind != train::DecayKind::linear) student += "-" + train::to_string(c.decay.kind);
  L.student = L.root / student;
  L.plots = L.root / "plots";
  return L;
}

void collect(const io::RunConfig& c) {
  const Layout L = layout(c);
  const auto corpus = contrastive::collect_corpus(c.arena, c.corpus, c.seed);
  contrastive::save_corpus(corpus, L.corpus);
  write_text(L.corpus / "config.toml", io::dump_config(c));
  log_info("collected " + std::to_string(corpus.episodes.size()) + " episodes into " + L.corpus.string());
}

std::vector<PretrainEval> pretrain(const io::RunConfig& c) {
  const Layout L = layout(c);
  require(L.corpus / "manifest.json", "collect");
  const auto corpus = contrastive::load_corpus(L.corpus);
  contrastive::Pretrainer p(c.upstream.model, corpus, c.seed);
  const auto batches = p.make_eval_batches(c.upstream.eval_batches, c.seed ^ kEvalBatchSalt);
  prepare(L.upstream, c);

  io::CsvWriter steps(
      (L.upstream / "pretrain.csv").string(), "omcrl-pretrain v1",
      "step,loss,retrieval,masked,lr_encoder,lr_transformer");
  io::CsvWriter evals((L.upstream / "pretrain_eval.csv").string(), "omcrl-pretrain-eval v1",
                      "step,loss,retrieval,drift");
  const std::string mode = c.upstream.model.curl ? "curl" : "masked";
  auto save = [&](long step) {
    auto write = [&](Component comp, const nn::ParameterRefs& refs, const std::string& file) {
      io::Checkpoint ckpt =
          io::make_checkpoint(comp, refs, io::component_hash(c, io::to_string(comp)), static_cast<std::uint64_t>(step),
                              &p.rng());
      ckpt.set_meta("mode", mode);
      ckpt.set_meta("mask_prob", num(c.upstream.model.mask_prob));
      io::save_checkpoint((L.upstream / file).string(), ckpt);
    };
    nn::ParameterRefs enc, proj;
    p.encoder().collect(enc);
    p.projection().collect(proj);
    write(Component::encoder, enc, "encoder.ckpt");
    write(Component::projection, proj, "projection.ckpt");
    if (!c.upstream.model.curl) write(Component::transformer, p.transformer_parameters(), "transformer.ckpt");
  };

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<PretrainEval> out;
  const long total = c.upstream.model.steps;
  for (long s = 1; s <= total; ++s) {
    const contrastive::StepLog l = p.step();
    steps.row(std::to_string(l.step) + "," + num(l.loss) + "," + num(l.retrieval.value_or(nan)) + "," +
              std::to_string(l.masked) + "," + num(l.lr_encoder) + "," + num(l.lr_transformer));
    if (s % c.upstream.eval_every == 0 || s == total) {
      const contrastive::EvalLog e = p.evaluate(batches);
      PretrainEval row{s, e.loss, e.retrieval.value_or(nan), e.drift.value_or(nan)};
      evals.row(std::to_string(s) + "," + num(row.loss) + "," + num(row.retrieval) + "," + num(row.drift));
      out.push_back(row);
      save(s);
      log_info("pretrain step " + std::to_string(s) + " loss " + num(row.loss) + " retrieval " +
               num(row.retrieval) + " drift " + num(row.drift));
    }
  }
  return out;
}

StageResult teach(const io::RunConfig& c) {
  const Layout L = layout(c);
  train::OraclePolicy policy = build_oracle(c);
  nn::ParameterRefs refs;
  policy.collect(refs);
  prepare(L.oracle, c);
  const std::uint64_t hash = io::component_hash(c, "oracle");
  const std::string ckpt_path = (L.oracle / "oracle.ckpt").string();
  io::CsvWriter csv((L.oracle / "train.csv").string(), "omcrl-train v1", train::train_csv_header());
  int updates = 0;
  auto hook = [&](const train::TrainRow& row) {
    csv.row(train::train_csv_row(row));
    if (++updates % kCheckpointEvery == 0)
      io::save_checkpoint(ckpt_path, io::make_checkpoint(Component::oracle, refs, hash,
                                                         static_cast<std::uint64_t>(row.env_step)));
  };
  StageResult r;
  r.log = train::train_oracle(policy, train_config(c, c.oracle.steps, c.oracle.envs), hook);
  io::round_to_float(refs);
  const long final_step = r.log.empty() ? 0 : r.log.back().env_step;
  io::save_checkpoint(ckpt_path,
                      io::make_checkpoint(Component::oracle, refs, hash, static_cast<std::uint64_t>(final_step)));
  r.report = run_eval(
      c, [&](const train::EnvViews& envs) { return policy.act_mean(envs); }, false, true, L.oracle, "oracle",
      "report");
  return r;
}

StageResult distill(const io::RunConfig& c, bool force) {
  const Layout L = layout(c);
  Student s = build_student(c, L, force);
  std::optional<train::OraclePolicy> teacher;
  if (c.student.use_oracle) {
    const io::Checkpoint ckpt =
        load_component(L.oracle / "oracle.ckpt", Component::oracle, c, "oracle", force, "teach");
    teacher = build_oracle(c);
    nn::ParameterRefs refs;
    teacher->collect(refs);
    io::load_parameters(ckpt, refs);
  }
  nn::ParameterRefs head;
  s.policy.collect(head);
  prepare(L.student, c);
  io::CsvWriter csv((L.student / "train.csv").string(), "omcrl-train v1", train::train_csv_header());
  auto hook = [&](const train::TrainRow& row) { csv.row(train::train_csv_row(row)); };

  train::StudentConfig sc;
  sc.train = train_config(c, c.student.steps, c.student.envs);
  sc.decay = c.decay;
  sc.use_oracle = c.student.use_oracle;
  sc.monte_carlo_kl = c.student.kl_estimator == "monte_carlo";
  sc.kl_samples = c.student.kl_samples;
  StageResult r;
  r.log = train::train_student(s.policy, teacher ? &*teacher : nullptr, sc, hook);

  io::round_to_float(head);
  const long final_step = r.log.empty() ? 0 : r.log.back().env_step;
  io::Checkpoint ckpt = io::make_checkpoint(Component::student, head, io::component_hash(c, "student"),
                                            static_cast<std::uint64_t>(final_step));
  // Paths relative to out_dir so the run directory can be moved.
  ckpt.set_meta("encoder", (fs::relative(L.upstream, L.root) / "encoder.ckpt").generic_string());
  ckpt.set_meta("projection", (fs::relative(L.upstream, L.root) / "projection.ckpt").generic_string());
  ckpt.set_meta("encoder_hash", s.encoder_hash);
  io::save_checkpoint((L.student / "student.ckpt").string(), ckpt);
  r.report = run_eval(
      c, [&](const train::EnvViews& envs) { return s.policy.act_mean(envs); }, true, false, L.student, "student",
      "report");
  return r;
}

eval::MetricsReport evaluate(const io::RunConfig& c, const std::string& target, bool force) {
  const Layout L = layout(c);
  if (target == "oracle") {
    const io::Checkpoint ckpt =
        load_component(L.oracle / "oracle.ckpt", Component::oracle, c, "oracle", force, "teach");
    train::OraclePolicy policy = build_oracle(c);
    nn::ParameterRefs refs;
    policy.collect(refs);
    io::load_parameters(ckpt, refs);
    return run_eval(
        c, [&](const train::EnvViews& envs) { return policy.act_mean(envs); }, false, true, L.oracle, "oracle",
        "eval_report");
  }
  if (target != "student") throw ConfigError("eval target must be 'oracle' or 'student', got '" + target + "'");
  const io::Checkpoint ckpt =
      load_component(L.student / "student.ckpt", Component::student, c, "student", force, "distill");
  Student s = build_student(c, L, force);
  const std::string* pinned = ckpt.meta("encoder_hash");
  if (pinned && *pinned != s.encoder_hash) {
    const std::string msg = "student was trained on encoder " + *pinned + " but " + L.upstream.string() +
                            " holds " + s.encoder_hash;
    if (!force) throw ConfigError(msg + " (use --force to override)");
    log_warn(msg);
  }
  nn::ParameterRefs head;
  s.policy.collect(head);
  io::load_parameters(ckpt, head);
  return run_eval(
      c, [&](const train::EnvViews& envs) { return s.policy.act_mean(envs); }, true, false, L.student, "student",
      "eval_report");
}

std::vector<fs::path> plot(const io::RunConfig& c) {
  const Layout L = layout(c);
  if (!fs::exists(L.root)) throw ConfigError("output directory " + L.root.string() + " does not exist");
  fs::create_directories(L.plots);
  std::vector<fs::path> written;
  auto emit = [&](const std::string& file, const std::string& svg) {
    write_text(L.plots / file, svg);
    written.push_back(L.plots / file);
  };

  std::vector<io::Series> reward, success;
  for (const auto& f : find_files(L.root, "train.csv")) {
    const io::CsvTable t = io::read_csv(f.string());
    const std::string label = label_of(f, L.root);
    const auto x = t.numbers("env_step");
    reward.push_back({label, x, io::smooth(t.numbers("return"), 10)});
    success.push_back({label, x, io::smooth(t.numbers("success"), 10)});
  }
  if (!reward.empty()) {
    emit("reward.svg", io::line_chart(reward, {"Mean episode return", "environment steps", "return"}));
    emit("success.svg", io::line_chart(success, {"Training success rate", "environment steps", "success"}));
  }

  std::vector<io::Series> retrieval, drift;
  for (const auto& f : find_files(L.root, "pretrain_eval.csv")) {
    const io::CsvTable t = io::read_csv(f.string());
    const std::string label = label_of(f, L.root);
    retrieval.push_back({label, t.numbers("step"), t.numbers("retrieval")});
    drift.push_back({label, t.numbers("step"), t.numbers("drift")});
  }
  if (!retrieval.empty()) {
    emit("retrieval.svg", io::line_chart(retrieval, {"Held-out retrieval accuracy", "pretraining step", "accuracy"}));
    emit("drift.svg", io::line_chart(drift, {"Representation drift d_z", "pretraining step", "d_z"}));
  }

  std::vector<std::string> groups;
  std::vector<std::vector<double>> values;
  for (const auto& f : find_files(L.root, "report.csv")) {
    const io::CsvTable t = io::read_csv(f.string());
    if (t.rows.empty()) continue;
    groups.push_back(label_of(f, L.root));
    values.push_back({t.numbers("sr")[0], t.numbers("os")[0], 100.0 * t.numbers("spl")[0], t.numbers("cr")[0]});
  }
  if (!groups.empty())
    emit("metrics.svg", io::bar_chart(groups, {"SR %", "OS %", "SPL x100", "CR %"}, values,
                                      {"Final evaluation", "run", "value"}));
  if (written.empty()) log_warn("no CSV logs found under " + L.root.string());
  return written;
}

}  // namespace omcrl::app
