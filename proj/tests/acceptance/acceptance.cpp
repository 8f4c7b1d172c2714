// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,4,7] [--work DIR] [--reuse] [--scale F]
//
// --reuse keeps finished stages whose stored config.toml matches exactly,
// --scale shrinks every training budget for a quick dry run (results are then
// tagged as scaled and are not acceptance results). The exit status is 0 when
// every selected criterion ran to completion, whatever its verdict.

#include "../support/gradcheck.hpp"
#include "omcrl/app/pipeline.hpp"
#include "omcrl/autodiff/ops.hpp"
#include "omcrl/contrastive/infonce.hpp"
#include "omcrl/contrastive/masking.hpp"
#include "omcrl/error.hpp"
#include "omcrl/io/checkpoint.hpp"
#include "omcrl/io/csv.hpp"
#include "omcrl/io/svg.hpp"
#include "omcrl/log.hpp"
#include "omcrl/nn/transformer.hpp"
#include "omcrl/rl/ppo.hpp"
#include "omcrl/sim/arena.hpp"
#include "omcrl/train/distill.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <set>

using namespace omcrl;
namespace fs = std::filesystem;
using ad::Index;
using ad::RowMatrix;
using ad::Var;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradTol = 1e-4;
constexpr double kGradStep = 1e-6;
constexpr int kGradSeeds = 10;
constexpr double kGradSeconds = 120.0;
constexpr double kExactTol = 1e-9;
constexpr double kMaskTol = 0.01;
constexpr double kMaskSeconds = 10.0;
constexpr long kMaskDraws = 100000;
constexpr long kKlSamples = 1000000;
constexpr int kKlPairs = 20;
constexpr int kKlNonNegPairs = 10000;
constexpr double kKlSigmas = 3.0;
constexpr int kCorpusEpisodes = 500;
constexpr long kPretrainSteps = 20000;
constexpr double kRetrievalTarget = 0.90;
constexpr int kMinDriftCheckpoints = 10;
constexpr double kPretrainSeconds = 1800.0;
constexpr long kOracleEmptySteps = 200000;
constexpr long kOracleObstacleSteps = 500000;
constexpr double kOracleEmptySr = 95.0;
constexpr double kOracleObstacleSr = 80.0;
constexpr double kOracleSeconds = 2700.0;
constexpr int kEvalEpisodes = 100;
constexpr long kStudentSteps = 300000;
constexpr double kReturnThreshold = 14.0;  // smoothed training return, criterion 7
constexpr int kReturnWindow = 5;           // PPO updates in the moving average
constexpr int kStudentSeeds = 3;
constexpr int kFormatRecordSets = 1000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string steps_text(double v) { return std::isfinite(v) ? fmt("%.0f", v) : "never"; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Shared expensive stages.

struct Options {
  std::set<int> only;
  fs::path work = "acceptance_work";
  bool reuse = false;
  double scale = 1.0;
};

void write_seconds(const fs::path& dir, double s) { std::ofstream(dir / "elapsed_seconds.txt") << fmt("%.3f", s); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// A stage is reused only if it finished and ran with exactly this config.
bool finished_with(const fs::path& dir, const io::RunConfig& c) {
  return fs::exists(dir / "elapsed_seconds.txt") && read_text(dir / "config.toml") == io::dump_config(c);
}

double read_seconds(const fs::path& dir) {
  std::ifstream in(dir / "elapsed_seconds.txt");
  double s = std::numeric_limits<double>::quiet_NaN();
  in >> s;
  return s;
}

struct PretrainRun {
  std::vector<double> step, retrieval, drift;
  double seconds = 0.0;
};

struct Report {
  double sr = 0.0;
  double seconds = 0.0;
};

class Context {
 public:
  explicit Context(Options o) : opt_(std::move(o)) {}

  const Options& options() const { return opt_; }

  long budget(long steps) const {
    return std::max(1L, static_cast<long>(std::llround(static_cast<double>(steps) * opt_.scale)));
  }

  io::RunConfig base() const {
    io::RunConfig c;
    c.seed = 1;
    c.out_dir = shared().string();
    c.corpus.episodes = static_cast<int>(std::max(2L, budget(kCorpusEpisodes)));
    c.upstream.model.steps = budget(kPretrainSteps);
    c.upstream.model.warmup = std::min(c.upstream.model.warmup, c.upstream.model.steps);
    c.upstream.eval_every = static_cast<int>(std::max(1L, c.upstream.model.steps / 40));
    c.oracle.steps = budget(kOracleObstacleSteps);
    c.student.steps = budget(kStudentSteps);
    c.eval.episodes = kEvalEpisodes;
    return c;
  }

  fs::path shared() const { return opt_.work / "shared"; }

  void ensure_corpus() {
    const io::RunConfig c = base();
    if (corpus_ready_ || (opt_.reuse && fs::exists(app::layout(c).corpus / "manifest.json") &&
                          read_text(app::layout(c).corpus / "config.toml") == io::dump_config(c))) {
      corpus_ready_ = true;
      return;
    }
    app::collect(c);
    corpus_ready_ = true;
  }

  const PretrainRun& pretrain(double rho, bool curl) {
    const std::string key = (curl ? "curl" : "masked") + fmt("%g", rho);
    auto it = pretrain_.find(key);
    if (it != pretrain_.end()) return it->second;
    io::RunConfig c = base();
    c.upstream.model.mask_prob = rho;
    c.upstream.model.curl = curl;
    const fs::path dir = app::layout(c).upstream;
    PretrainRun run;
    if (!(opt_.reuse && finished_with(dir, c))) {
      ensure_corpus();
      const auto t0 = Clock::now();
      app::pretrain(c);
      write_seconds(dir, seconds_since(t0));
    }
    const io::CsvTable t = io::read_csv((dir / "pretrain_eval.csv").string());
    run.step = t.numbers("step");
    run.retrieval = t.numbers("retrieval");
    run.drift = t.numbers("drift");
    run.seconds = read_seconds(dir);
    return pretrain_.emplace(key, std::move(run)).first->second;
  }

  io::RunConfig oracle_config(int obstacles) const {
    io::RunConfig c = base();
    c.arena.random_obstacles = obstacles;
    c.oracle.steps = budget(obstacles == 0 ? kOracleEmptySteps : kOracleObstacleSteps);
    c.out_dir = (opt_.work / (obstacles == 0 ? "oracle-empty" : "oracle-obstacles")).string();
    return c;
  }

  Report oracle(int obstacles) {
    auto it = oracle_.find(obstacles);
    if (it != oracle_.end()) return it->second;
    const io::RunConfig c = oracle_config(obstacles);
    const fs::path dir = app::layout(c).oracle;
    if (!(opt_.reuse && finished_with(dir, c))) {
      const auto t0 = Clock::now();
      app::teach(c);
      write_seconds(dir, seconds_since(t0));
    }
    Report r;
    r.sr = io::read_csv((dir / "report.csv").string()).numbers("sr").at(0);
    r.seconds = read_seconds(dir);
    return oracle_.emplace(obstacles, r).first->second;
  }

  // Student run under work/group/seedN with the shared upstream directories
  // and the matching oracle linked in.
  fs::path student(const std::string& group, io::RunConfig c, int seed) {
    const int obstacles = c.arena.random_obstacles;
    if (c.student.use_oracle) oracle(obstacles);
    pretrain(c.upstream.model.mask_prob, c.upstream.model.curl);
    const fs::path root = opt_.work / group / ("seed" + std::to_string(seed));
    fs::create_directories(root);
    auto link = [&](const fs::path& target, const std::string& name) {
      const fs::path at = root / name;
      if (!fs::exists(target)) return;
      if (fs::is_symlink(at) || fs::exists(at)) fs::remove_all(at);
      fs::create_directory_symlink(fs::absolute(target), at);
    };
    link(app::layout(base()).upstream, "upstream");
    io::RunConfig curl = base();
    curl.upstream.model.curl = true;
    link(app::layout(curl).upstream, app::layout(curl).upstream.filename().string());
    link(app::layout(oracle_config(obstacles)).oracle, "oracle");

    c.out_dir = root.string();
    c.seed = static_cast<std::uint64_t>(seed);
    const fs::path dir = app::layout(c).student;
    if (!(opt_.reuse && finished_with(dir, c))) {
      const auto t0 = Clock::now();
      app::distill(c, false);
      write_seconds(dir, seconds_since(t0));
    }
    return dir;
  }

 private:
  Options opt_;
  bool corpus_ready_ = false;
  std::map<std::string, PretrainRun> pretrain_;
  std::map<int, Report> oracle_;
};

// ---------------------------------------------------------------------------
// 1. Gradient correctness.

Verdict gradients(Context&) {
  using testing::Leaf;
  using testing::max_gradient_error;
  using testing::parameter_gradient_error;
  using testing::random_vector;
  using F = testing::ForwardFn;
  const auto t0 = Clock::now();
  std::map<std::string, double> worst;
  auto note = [&](const std::string& name, double e) { worst[name] = std::max(worst[name], e); };

  for (unsigned seed = 0; seed < kGradSeeds; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    auto r = [&](Index n, double s = 1.0) { return random_vector(n, rng, s); };
    const Eigen::VectorXd probe = r(256);
    auto project = [probe](const Var& y) { return ad::weighted_sum(y, probe.head(y.size())); };
    auto check = [&](const std::string& name, const F& f, std::vector<Leaf> leaves) {
      note(name, max_gradient_error(f, std::move(leaves), kGradStep, -1, seed));
    };

    check("conv", [&](ad::Tape&, const std::vector<Var>& v) { return project(ad::conv2d(v[0], v[1], v[2], 2)); },
          {{{2, 2, 7, 7}, r(196)}, {{3, 2, 3, 3}, r(54)}, {{3}, r(3)}});
    check("linear", [&](ad::Tape&, const std::vector<Var>& v) { return project(ad::linear(v[0], v[1], v[2])); },
          {{{3, 4}, r(12)}, {{4, 5}, r(20)}, {{5}, r(5)}});
    check("layernorm",
          [&](ad::Tape&, const std::vector<Var>& v) { return project(ad::layernorm(v[0], v[1], v[2])); },
          {{{3, 6}, r(18)}, {{6}, r(6)}, {{6}, r(6)}});
    check("softmax", [&](ad::Tape&, const std::vector<Var>& v) { return project(ad::softmax(v[0])); },
          {{{3, 5}, r(15, 2.0)}});

    nn::TransformerBlock blk("acc", 6, 12, rng);
    nn::ParameterRefs params;
    blk.collect(params);
    const Eigen::VectorXd tokens = r(2 * 4 * 6);
    auto attn = [&](ad::Tape& t) { return project(nn::attention_block(t, blk, t.constant({8, 6}, tokens), 2, true)); };
    auto ffn = [&](ad::Tape& t) { return project(nn::ffn_block(t, blk, t.constant({8, 6}, tokens), true)); };
    note("attention", parameter_gradient_error(attn, params, 80, seed, kGradStep));
    note("ffn", parameter_gradient_error(ffn, params, 80, seed, kGradStep));
    check("attention input",
          [&](ad::Tape& t, const std::vector<Var>& v) { return project(nn::attention_block(t, blk, v[0], 2, false)); },
          {{{8, 6}, tokens}});

    contrastive::ContrastiveBatch b;
    b.length = 5;
    b.tau = 0.07;
    b.keys = Eigen::Map<const RowMatrix>(r(5 * 4).eval().data(), 5, 4);
    b.mask = {1, 0, 1, 1, 0};
    check("infonce",
          [&](ad::Tape& t, const std::vector<Var>& v) { return contrastive::masked_infonce(t, v[0], b); },
          {{{5, 4}, r(20)}});

    rl::TrajectoryBatch batch;
    batch.resize(6, 1, 3, false);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Index i = 0; i < 6; ++i) {
      for (int d = 0; d < 3; ++d) batch.actions(i, d) = nd(rng);
      batch.advantages[i] = nd(rng);
      batch.returns[i] = nd(rng);
      batch.log_probs[i] = -3.0 + 0.3 * nd(rng);
    }
    std::vector<Index> idx(6);
    std::iota(idx.begin(), idx.end(), Index{0});
    check("ppo loss",
          [&](ad::Tape&, const std::vector<Var>& v) {
            nn::PolicyNet::Output out{v[0], v[1], v[2]};
            return rl::ppo_loss(out, batch, idx, 0.2, 1.0).total;
          },
          {{{6, 3}, r(18, 0.5)}, {{6, 3}, r(18, 0.3)}, {{6}, r(6)}});

    const RowMatrix mp = Eigen::Map<const RowMatrix>(r(12).eval().data(), 4, 3);
    const RowMatrix sp = Eigen::Map<const RowMatrix>(r(12, 0.5).eval().data(), 4, 3);
    check("gaussian kl",
          [&](ad::Tape&, const std::vector<Var>& v) { return ad::mean(train::kl_gaussian(mp, sp, v[0], v[1])); },
          {{{4, 3}, r(12)}, {{4, 3}, r(12, 0.5)}});
  }
  const double elapsed = seconds_since(t0);
  double w = 0.0;
  std::string names;
  for (const auto& [name, e] : worst) {
    w = std::max(w, e);
    names += (names.empty() ? "" : ", ") + name + " " + fmt("%.1e", e);
  }
  return {w <= kGradTol && elapsed < kGradSeconds,
          "worst relative error " + fmt("%.2e", w) + " (<= 1e-4) over " + std::to_string(kGradSeeds) +
              " seeds, h = 1e-6, " + fmt("%.1f", elapsed) + " s (< 120 s) [" + names + "]"};
}

// ---------------------------------------------------------------------------
// 2. Exact values.

Verdict exact_values(Context&) {
  std::vector<std::string> failed;
  auto expect = [&](const std::string& what, double got, double want, double tol) {
    if (!(std::abs(got - want) <= tol)) failed.push_back(what + " = " + fmt("%.12g", got));
  };

  ad::Tape t;
  contrastive::ContrastiveBatch b;
  b.length = 2;
  b.tau = 0.07;
  b.keys = RowMatrix::Identity(2, 2);
  b.mask = {1, 0};
  RowMatrix q(2, 2);
  q << 1, 0, 0, 1;
  const double infonce = contrastive::masked_infonce(t, t.constant(q), b).item();
  expect("infonce", infonce, std::log1p(std::exp(-1.0 / 0.07)), kExactTol);
  const bool two_figures = std::abs(infonce - 6.2e-7) <= 0.05e-7;
  if (!two_figures) failed.push_back("infonce does not round to 6.2e-7");

  ad::Parameter qp("q", {1}), kp("k", {1});
  qp.value << 1.0;
  kp.value << 0.0;
  contrastive::momentum_update({&qp}, {&kp}, 0.05);
  expect("momentum", kp.value[0], 0.05, kExactTol);

  train::DecaySchedule linear;
  expect("alpha(0)", train::alpha(0, linear), 0.95, kExactTol);
  expect("alpha(10000)", train::alpha(10000, linear), 0.0, kExactTol);
  expect("alpha(25000)", train::alpha(25000, linear), 0.0, kExactTol);

  sim::AgentState s;
  sim::StepOutcome o;
  o.d_init = 3.0;
  o.d_t = 3.0;
  expect("step reward", sim::reward_fn(s, s, o, 5000), -1.0 / 5000.0, kExactTol);

  rl::TrajectoryBatch batch;
  batch.resize(1, 1, 3, false);
  batch.actions.row(0) << 0.3, -0.2, 0.1;
  batch.advantages[0] = 1.0;
  batch.returns[0] = 0.0;
  ad::Tape pt;
  nn::PolicyNet::Output out{pt.constant({1, 3}, Eigen::Vector3d(0.1, 0.0, -0.1)),
                            pt.constant({1, 3}, Eigen::Vector3d(-0.5, 0.2, 0.0)), pt.constant({1}, Eigen::VectorXd::Zero(1))};
  batch.log_probs[0] = nn::gaussian_log_prob(batch.actions.row(0).transpose(), Eigen::Vector3d(0.1, 0.0, -0.1),
                                             Eigen::Vector3d(-0.5, 0.2, 0.0)) -
                       std::log(1.5);
  expect("clip factor", -rl::ppo_loss(out, batch, {0}, 0.2, 1.0).surrogate, 1.2, kExactTol);

  eval::EpisodeRecord rec;
  rec.trajectory = {Eigen::Vector2d(0, 0), Eigen::Vector2d(10, 0)};
  rec.goal = Eigen::Vector2d(10, 0);
  rec.cause = sim::TerminalCause::goal;
  rec.optimal_length = 10.0;
  rec.path_length = 20.0;
  expect("SPL", eval::spl({rec}), 0.5, kExactTol);

  std::string detail = "InfoNCE " + fmt("%.4e", infonce) + ", momentum " + fmt("%.3g", kp.value[0]) +
                       ", alpha 0.95 -> 0, reward -1/5000, clip 1.2, SPL 0.5";
  if (!failed.empty()) {
    detail = "mismatch:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

// ---------------------------------------------------------------------------
// 3. Mask statistics.

Verdict mask_statistics(Context&) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(31);
  constexpr int T = 16;
  long ones = 0;
  for (long i = 0; i < kMaskDraws; ++i)
    for (auto v : contrastive::sample_mask(T, 0.5, rng)) ones += v;
  const double rate = static_cast<double>(ones) / static_cast<double>(kMaskDraws * T);

  sim::ArenaConfig arena;
  arena.image_height = arena.image_width = 8;
  arena.depth_height = arena.depth_width = 8;
  contrastive::CorpusConfig cc;
  cc.episodes = 4;
  cc.max_frames = 20;
  const LogLevel level = log_level();
  set_log_level(LogLevel::quiet);
  const auto corpus = contrastive::collect_corpus(arena, cc, 32);
  set_log_level(level);
  std::vector<contrastive::StackRef> seq;
  for (int i = 0; i < T; ++i) seq.push_back(corpus.stack_at(i));
  long counts[4] = {0, 0, 0, 0};
  long masked = 0;
  while (masked < kMaskDraws) {
    const auto mask = contrastive::sample_mask(T, 0.5, rng);
    const auto m = contrastive::corrupt(seq, mask, corpus, rng);
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) {
        ++counts[static_cast<int>(m.kinds[i])];
        ++masked;
      }
  }
  const double z = counts[1] / static_cast<double>(masked);
  const double s = counts[2] / static_cast<double>(masked);
  const double k = counts[3] / static_cast<double>(masked);
  const double elapsed = seconds_since(t0);
  const bool pass = std::abs(rate - 0.5) <= kMaskTol && std::abs(z - 0.8) <= kMaskTol &&
                    std::abs(s - 0.1) <= kMaskTol && std::abs(k - 0.1) <= kMaskTol && counts[0] == 0 &&
                    elapsed < kMaskSeconds;
  return {pass, "mask rate " + fmt("%.4f", rate) + " over 1e5 draws of T=16, mix (" + fmt("%.4f", z) + ", " +
                    fmt("%.4f", s) + ", " + fmt("%.4f", k) + ") over " + std::to_string(masked) +
                    " masked positions, tolerance 0.01, " + fmt("%.2f", elapsed) + " s (< 10 s)"};
}

// ---------------------------------------------------------------------------
// 4. Gaussian KL.

Verdict gaussian_kl(Context&) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ls(-1.0, 0.7);
  constexpr int A = 3;
  double worst_z = 0.0;
  for (int pair = 0; pair < kKlPairs; ++pair) {
    Eigen::Vector3d mp, sp, mq, sq;
    for (int d = 0; d < A; ++d) {
      mp[d] = nd(rng);
      mq[d] = nd(rng);
      sp[d] = ls(rng);
      sq[d] = ls(rng);
    }
    ad::Tape t;
    const double closed =
        train::kl_gaussian(mp.transpose(), sp.transpose(), t.constant(RowMatrix(mq.transpose())),
                           t.constant(RowMatrix(sq.transpose())))
            .item();
    // log p(x) - log q(x) for x ~ p, summed over independent dimensions.
    double sum = 0.0, sum2 = 0.0;
    for (long n = 0; n < kKlSamples; ++n) {
      double v = 0.0;
      for (int d = 0; d < A; ++d) {
        const double x = mp[d] + std::exp(sp[d]) * nd(rng);
        const double up = (x - mp[d]) / std::exp(sp[d]), uq = (x - mq[d]) / std::exp(sq[d]);
        v += -sp[d] - 0.5 * up * up + sq[d] + 0.5 * uq * uq;
      }
      sum += v;
      sum2 += v * v;
    }
    const double n = static_cast<double>(kKlSamples);
    const double mean = sum / n;
    const double se = std::sqrt(std::max(0.0, sum2 / n - mean * mean) / n);
    worst_z = std::max(worst_z, std::abs(closed - mean) / se);
  }
  double min_kl = std::numeric_limits<double>::infinity();
  for (int pair = 0; pair < kKlNonNegPairs; ++pair) {
    RowMatrix mp(1, A), sp(1, A), mq(1, A), sq(1, A);
    for (int d = 0; d < A; ++d) {
      mp(0, d) = 3 * nd(rng);
      mq(0, d) = 3 * nd(rng);
      sp(0, d) = 2 * nd(rng);
      sq(0, d) = 2 * nd(rng);
    }
    ad::Tape t;
    min_kl = std::min(min_kl, train::kl_gaussian(mp, sp, t.constant(mq), t.constant(sq)).item());
    min_kl = std::min(min_kl, train::kl_gaussian(mp, sp, t.constant(mp), t.constant(sp)).item());
  }
  return {worst_z <= kKlSigmas && min_kl >= 0.0,
          "largest |closed - MC| " + fmt("%.2f", worst_z) + " standard errors (<= 3) over 20 pairs x 1e6 samples; min KL " +
              fmt("%.3g", min_kl) + " over 1e4 pairs (>= 0)"};
}

// ---------------------------------------------------------------------------
// 5. Upstream convergence.

Verdict upstream(Context& ctx) {
  const PretrainRun& run = ctx.pretrain(0.5, false);
  const double best = *std::max_element(run.retrieval.begin(), run.retrieval.end());
  const double rho = spearman(run.step, run.drift);
  const bool enough = static_cast<int>(run.step.size()) >= kMinDriftCheckpoints;
  const bool pass = best >= kRetrievalTarget && rho < 0.0 && enough && run.seconds <= kPretrainSeconds;
  return {pass, "best held-out retrieval " + fmt("%.3f", best) + " (>= 0.90), final " +
                    fmt("%.3f", run.retrieval.back()) + "; drift Spearman " + fmt("%.3f", rho) + " (< 0) over " +
                    std::to_string(run.step.size()) + " checkpoints; " + fmt("%.0f", run.seconds) +
                    " s (<= 1800 s) for " + std::to_string(ctx.base().upstream.model.steps) + " steps"};
}

// ---------------------------------------------------------------------------
// 6. Oracle competence.

Verdict oracle(Context& ctx) {
  const Report empty = ctx.oracle(0);
  const Report obstacles = ctx.oracle(4);
  const bool pass = empty.sr >= kOracleEmptySr && obstacles.sr >= kOracleObstacleSr &&
                    empty.seconds <= kOracleSeconds && obstacles.seconds <= kOracleSeconds;
  return {pass, "empty arena SR " + fmt("%.1f", empty.sr) + "% (>= 95) after " +
                    std::to_string(ctx.oracle_config(0).oracle.steps) + " steps in " + fmt("%.0f", empty.seconds) +
                    " s; 4-obstacle SR " + fmt("%.1f", obstacles.sr) + "% (>= 80) after " +
                    std::to_string(ctx.oracle_config(4).oracle.steps) + " steps in " +
                    fmt("%.0f", obstacles.seconds) + " s (<= 2700 s each)"};
}

// ---------------------------------------------------------------------------
// 7. Sample-efficiency ordering.

double steps_to_threshold(const fs::path& dir) {
  const io::CsvTable t = io::read_csv((dir / "train.csv").string());
  const auto steps = t.numbers("env_step");
  const auto ret = io::smooth(t.numbers("return"), kReturnWindow);
  // only full windows count
  for (std::size_t i = kReturnWindow - 1; i < steps.size(); ++i)
    if (std::isfinite(ret[i]) && ret[i] >= kReturnThreshold) return steps[i];
  return std::numeric_limits<double>::infinity();
}

Verdict sample_efficiency(Context& ctx) {
  struct Arm {
    std::string name;
    bool oracle;
    bool curl;
    std::vector<double> steps;
  };
  std::vector<Arm> arms = {{"guided", true, false, {}}, {"no-oracle", false, false, {}}, {"curl", true, true, {}}};
  for (auto& arm : arms) {
    for (int seed = 1; seed <= kStudentSeeds; ++seed) {
      io::RunConfig c = ctx.base();
      c.arena.random_obstacles = 4;
      c.student.use_oracle = arm.oracle;
      c.upstream.model.curl = arm.curl;
      c.eval.episodes = 20;
      arm.steps.push_back(steps_to_threshold(ctx.student("c7", c, seed)));
    }
  }
  const double g = median(arms[0].steps), n = median(arms[1].steps), c = median(arms[2].steps);
  std::string detail = "median env steps to smoothed return >= " + fmt("%g", kReturnThreshold) + ": ";
  for (const auto& arm : arms) {
    detail += arm.name + " " + steps_text(median(arm.steps)) + " [";
    for (std::size_t i = 0; i < arm.steps.size(); ++i) detail += (i ? " " : "") + steps_text(arm.steps[i]);
    detail += "]; ";
  }
  detail += "budget " + std::to_string(ctx.base().student.steps) + " steps, need guided < no-oracle and guided < curl";
  return {g < n && g < c, detail};
}

// ---------------------------------------------------------------------------
// 8. Decay-schedule ablation.

Verdict decay_ablation(Context& ctx) {
  std::map<std::string, std::vector<double>> sr;
  for (const std::string kind : {"linear", "fixed", "exp"}) {
    for (int seed = 1; seed <= kStudentSeeds; ++seed) {
      io::RunConfig c = ctx.base();
      c.arena.random_obstacles = 0;
      c.decay.kind = train::decay_from_string(kind);
      const fs::path dir = ctx.student("c8", c, seed);
      sr[kind].push_back(io::read_csv((dir / "report.csv").string()).numbers("sr").at(0));
    }
  }
  const double lin = median(sr["linear"]), fix = median(sr["fixed"]), ex = median(sr["exp"]);
  std::string detail = "median final SR (empty arena, " + std::to_string(kEvalEpisodes) + " episodes): ";
  for (const std::string kind : {"linear", "fixed", "exp"}) {
    detail += kind + " " + fmt("%.1f", median(sr[kind])) + " [";
    for (std::size_t i = 0; i < sr[kind].size(); ++i) detail += (i ? " " : "") + fmt("%.0f", sr[kind][i]);
    detail += "]; ";
  }
  detail += "need linear >= fixed and linear >= exp";
  return {lin >= fix && lin >= ex, detail};
}

// ---------------------------------------------------------------------------
// 9. Mask-probability sweep.

Verdict mask_sweep(Context& ctx) {
  std::map<double, double> best;
  std::string detail = "best held-out retrieval:";
  for (double rho : {0.1, 0.5, 0.9}) {
    const PretrainRun& run = ctx.pretrain(rho, false);
    best[rho] = *std::max_element(run.retrieval.begin(), run.retrieval.end());
    detail += " rho " + fmt("%.1f", rho) + " -> " + fmt("%.3f", best[rho]);
  }
  detail += "; need rho 0.5 >= both extremes";
  return {best[0.5] >= best[0.1] && best[0.5] >= best[0.9], detail};
}

// ---------------------------------------------------------------------------
// 10. Determinism and persistence.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

io::RunConfig tiny(const fs::path& out) {
  io::RunConfig c;
  c.seed = 11;
  c.out_dir = out.string();
  c.arena.max_steps = 100;
  c.corpus.episodes = 6;
  c.upstream.model.steps = 8;
  c.upstream.model.warmup = 4;
  c.upstream.model.batch = 2;
  c.upstream.eval_every = 4;
  c.upstream.eval_batches = 1;
  c.rl.buffer = 512;
  c.rl.minibatch = 128;
  c.oracle.steps = 1024;
  c.oracle.envs = 4;
  c.student.steps = 1024;
  c.student.envs = 4;
  c.decay.horizon = 512;
  c.eval.episodes = 8;
  c.eval.parallel = 4;
  return c;
}

Verdict determinism(Context& ctx) {
  const fs::path root = ctx.options().work / "determinism";
  fs::remove_all(root);
  std::vector<std::string> diffs;
  for (const char* run : {"a", "b"}) {
    const io::RunConfig c = tiny(root / run);
    app::collect(c);
    app::pretrain(c);
    app::teach(c);
    app::distill(c, false);
  }
  int csvs = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root / "a");
    const std::string ext = rel.extension().string();
    if (ext != ".csv" && ext != ".ckpt") continue;
    csvs += ext == ".csv";
    if (slurp(e.path()) != slurp(root / "b" / rel)) diffs.push_back(rel.string());
  }

  bool round_trip = true;
  for (const char* f : {"upstream/encoder.ckpt", "oracle/oracle.ckpt", "student/student.ckpt"}) {
    const io::Checkpoint ck = io::load_checkpoint((root / "a" / f).string());
    const fs::path copy = root / (std::string(fs::path(f).filename()) + ".copy");
    io::save_checkpoint(copy.string(), ck);
    round_trip = round_trip && slurp(copy) == slurp(root / "a" / f);
  }
  const io::RunConfig a = tiny(root / "a");
  app::evaluate(a, "student", false);
  app::evaluate(a, "oracle", false);
  const bool student_eval = slurp(root / "a/student/eval_report.csv") == slurp(root / "a/student/report.csv") &&
                            slurp(root / "a/student/eval_report_episodes.csv") ==
                                slurp(root / "a/student/report_episodes.csv");
  const bool oracle_eval = slurp(root / "a/oracle/eval_report.csv") == slurp(root / "a/oracle/report.csv");

  std::string detail = std::to_string(csvs) + " CSVs and all checkpoints byte-identical across two runs";
  if (!diffs.empty()) {
    detail = "differing artifacts:";
    for (const auto& d : diffs) detail += " " + d;
  }
  detail += std::string("; checkpoint round trip ") + (round_trip ? "bit-exact" : "DIFFERS") +
            "; eval of saved student " + (student_eval ? "reproduces" : "does NOT reproduce") +
            " the training report; oracle " + (oracle_eval ? "reproduces" : "does NOT reproduce");
  return {diffs.empty() && round_trip && student_eval && oracle_eval && csvs > 0, detail};
}

// ---------------------------------------------------------------------------
// 11. Metric properties.

Verdict metric_properties(Context&) {
  std::mt19937_64 rng(111);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0, zero_success_sets = 0;
  for (int set = 0; set < kFormatRecordSets; ++set) {
    const int n = 1 + static_cast<int>(u(rng) * 30);
    const double p_goal = set % 10 == 0 ? 0.0 : u(rng);
    std::vector<eval::EpisodeRecord> recs;
    for (int i = 0; i < n; ++i) {
      eval::EpisodeRecord r;
      r.goal = Eigen::Vector2d(u(rng) * 6, u(rng) * 6);
      Eigen::Vector2d start(u(rng) * 6, u(rng) * 6);
      r.trajectory = {start};
      const double roll = u(rng);
      r.cause = roll < p_goal ? sim::TerminalCause::goal
                              : (roll < p_goal + 0.5 * (1 - p_goal) ? sim::TerminalCause::collision
                                                                   : sim::TerminalCause::timeout);
      const int k = 1 + static_cast<int>(u(rng) * 20);
      for (int j = 0; j < k; ++j) r.trajectory.emplace_back(u(rng) * 6, u(rng) * 6);
      if (r.success()) r.trajectory.push_back(r.goal + Eigen::Vector2d(0.1 * u(rng), 0.0));
      r.steps = static_cast<int>(r.trajectory.size()) - 1;
      r.optimal_length = (r.goal - start).norm();
      double len = 0.0;
      for (std::size_t j = 1; j < r.trajectory.size(); ++j) len += (r.trajectory[j] - r.trajectory[j - 1]).norm();
      r.path_length = len;
      double md = std::numeric_limits<double>::infinity();
      for (const auto& p : r.trajectory) md = std::min(md, (p - r.goal).norm());
      r.min_goal_distance = md;
      recs.push_back(r);
    }
    const eval::MetricsReport m = eval::summarize(recs, 0.5);
    const bool any_success = m.sr > 0.0;
    bool ok = m.os + 1e-12 >= m.sr && m.spl <= m.sr / 100.0 + 1e-12 && m.cr + m.sr <= 100.0 + 1e-9;
    for (const auto& r : recs) ok = ok && !(r.success() && r.cause == sim::TerminalCause::collision);
    if (!any_success) {
      ++zero_success_sets;
      ok = ok && !m.tts.has_value() && eval::format_tts(m.tts) == "--" &&
           eval::format_table({{"x", m}}).find("--") != std::string::npos;
    } else {
      ok = ok && m.tts.has_value();
    }
    violations += !ok;
  }
  return {violations == 0 && zero_success_sets > 0,
          std::to_string(violations) + " violations of OS >= SR, SPL <= SR/100, CR + SR <= 100 and TTS rendering over " +
              std::to_string(kFormatRecordSets) + " random record sets (" + std::to_string(zero_success_sets) +
              " with zero successes render TTS as --)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"omcrl acceptance suite"};
  std::vector<int> only;
  Options opt;
  std::string work = "acceptance_work";
  cli.add_option("--only", only, "criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 11));
  cli.add_option("--work", work, "working directory for stage artifacts");
  cli.add_flag("--reuse", opt.reuse, "keep stage artifacts already in the working directory");
  cli.add_option("--scale", opt.scale, "multiply training budgets (dry runs only)")->check(CLI::PositiveNumber);
  CLI11_PARSE(cli, argc, argv);
  opt.only.insert(only.begin(), only.end());
  opt.work = fs::absolute(work);
  if (!opt.reuse) fs::remove_all(opt.work);
  fs::create_directories(opt.work);
  set_log_level(LogLevel::warn);

  Context ctx(opt);
  const std::vector<std::pair<std::string, std::function<Verdict(Context&)>>> criteria = {
      {"gradient correctness", gradients},
      {"exact-value suite", exact_values},
      {"mask statistics", mask_statistics},
      {"gaussian KL closed form", gaussian_kl},
      {"upstream convergence", upstream},
      {"oracle competence", oracle},
      {"sample-efficiency ordering", sample_efficiency},
      {"decay-schedule ablation", decay_ablation},
      {"mask-probability sweep", mask_sweep},
      {"determinism and persistence", determinism},
      {"metric properties", metric_properties},
  };
  const std::string tag = opt.scale != 1.0 ? " (budgets scaled by " + fmt("%g", opt.scale) + ", not an acceptance result)" : "";
  int passed = 0, ran = 0, errors = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!opt.only.empty() && !opt.only.count(id)) continue;
    ++ran;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      ++errors;
      v = {false, std::string("error: ") + e.what()};
    }
    passed += v.pass;
    std::printf("[%s] %2d %s: %s [%.0f s]%s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                v.detail.c_str(), seconds_since(t0), tag.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed%s\n", passed, ran, tag.c_str());
  return errors == 0 ? 0 : 1;
}
