#include <doctest.h>

#include "../support/gradcheck.hpp"
#include "omcrl/error.hpp"
#include "omcrl/io/checkpoint.hpp"
#include "omcrl/log.hpp"
#include "omcrl/train/trainer.hpp"

#include <cmath>

using namespace omcrl;
using namespace omcrl::train;
using ad::RowMatrix;

namespace {

RowMatrix row(std::initializer_list<double> v) {
  RowMatrix m(1, static_cast<ad::Index>(v.size()));
  ad::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

double kl_value(const RowMatrix& mp, const RowMatrix& sp, const RowMatrix& mq, const RowMatrix& sq) {
  ad::Tape t;
  return kl_gaussian(mp, sp, t.constant(mq), t.constant(sq)).item();
}

// Independent Monte Carlo estimate of KL(p||q) with its standard error.
std::pair<double, double> kl_sampled(const Eigen::VectorXd& mp, const Eigen::VectorXd& sp, const Eigen::VectorXd& mq,
                                     const Eigen::VectorXd& sq, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  double sum = 0, sum2 = 0;
  for (int s = 0; s < n; ++s) {
    double lp = 0, lq = 0;
    for (int d = 0; d < mp.size(); ++d) {
      const double x = mp[d] + std::exp(sp[d]) * nd(rng);
      const double zp = (x - mp[d]) / std::exp(sp[d]), zq = (x - mq[d]) / std::exp(sq[d]);
      lp += -0.5 * zp * zp - sp[d];
      lq += -0.5 * zq * zq - sq[d];
    }
    sum += lp - lq;
    sum2 += (lp - lq) * (lp - lq);
  }
  const double mean = sum / n;
  return {mean, std::sqrt((sum2 / n - mean * mean) / n)};
}

sim::ArenaConfig tiny_arena() {
  sim::ArenaConfig a;
  a.random_obstacles = 2;
  a.image_height = a.image_width = 12;
  a.depth_height = a.depth_width = 8;
  a.max_steps = 60;
  return a;
}

StudentPolicy tiny_student(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::EncoderConfig ec;
  ec.in_channels = 9;
  ec.height = ec.width = 10;
  ec.latent_dim = 8;
  ec.conv_channels = 4;
  nn::Encoder enc(ec, rng);
  nn::Projection proj(8, 16, true, rng);
  StudentNetConfig sc;
  sc.hidden = 16;
  return StudentPolicy(std::move(enc), std::move(proj), 10, sc, rng);
}

OraclePolicy tiny_oracle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  OracleNetConfig oc;
  oc.latent_dim = 8;
  oc.conv_channels = 4;
  oc.hidden = 16;
  return OraclePolicy(tiny_arena(), oc, rng);
}

TrainConfig tiny_train(long steps) {
  TrainConfig c;
  c.arena = tiny_arena();
  c.total_steps = steps;
  c.envs = 4;
  c.ppo.buffer = 256;
  c.ppo.minibatch = 64;
  c.ppo.horizon = 32;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("kl_gaussian: reference values") {
  CHECK(kl_value(row({0.3, -1, 2}), row({0.1, 0.2, -0.4}), row({0.3, -1, 2}), row({0.1, 0.2, -0.4})) == 0.0);
  // N(0,1) vs N(1,1): 0.5 per dimension.
  CHECK(std::abs(kl_value(row({0, 0, 0}), row({0, 0, 0}), row({1, 1, 1}), row({0, 0, 0})) - 1.5) < 1e-12);
  // Grows like ln sigma_q for wide students.
  double prev = -1;
  for (double ls = 1; ls <= 8; ls += 1) {
    const double k = kl_value(row({0}), row({0}), row({0}), row({ls}));
    CHECK(k > prev);
    CHECK(std::abs(k - (ls - 0.5)) < 0.5 * std::exp(-2 * ls) + 1e-12);
    prev = k;
  }
}

TEST_CASE("kl_gaussian: closed form agrees with sampling") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int pair = 0; pair < 20; ++pair) {
    Eigen::VectorXd mp(3), sp(3), mq(3), sq(3);
    for (int d = 0; d < 3; ++d) {
      mp[d] = nd(rng);
      mq[d] = mp[d] + 0.5 * nd(rng);
      sp[d] = 0.3 * nd(rng);
      sq[d] = sp[d] + 0.3 * nd(rng);
    }
    const double closed = kl_value(mp.transpose(), sp.transpose(), mq.transpose(), sq.transpose());
    const auto [est, se] = kl_sampled(mp, sp, mq, sq, 200000, rng);
    CHECK(std::abs(closed - est) <= 3.0 * se);
  }
}

TEST_CASE("kl_gaussian: non-negative on random pairs") {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> nd(0.0, 1.0);
  RowMatrix mp(10000, 3), sp(10000, 3), mq(10000, 3), sq(10000, 3);
  for (ad::Index i = 0; i < mp.size(); ++i) {
    mp.data()[i] = 2 * nd(rng);
    sp.data()[i] = nd(rng);
    mq.data()[i] = 2 * nd(rng);
    sq.data()[i] = nd(rng);
  }
  ad::Tape t;
  const auto k = kl_gaussian(mp, sp, t.constant(mq), t.constant(sq)).values();
  CHECK(k.minCoeff() >= 0.0);
}

TEST_CASE("kl_gaussian: gradient matches finite differences") {
  for (unsigned seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const RowMatrix mp = testing::random_vector(12, rng).reshaped<Eigen::RowMajor>(4, 3);
    const RowMatrix sp = (0.3 * testing::random_vector(12, rng)).reshaped<Eigen::RowMajor>(4, 3);
    auto f = [&](ad::Tape&, const std::vector<ad::Var>& v) { return ad::mean(kl_gaussian(mp, sp, v[0], v[1])); };
    std::vector<testing::Leaf> leaves{{{4, 3}, testing::random_vector(12, rng)},
                                      {{4, 3}, 0.3 * testing::random_vector(12, rng)}};
    CHECK(testing::max_gradient_error(f, leaves) < 1e-4);
  }
}

TEST_CASE("kl_monte_carlo: unbiased around the closed form") {
  std::mt19937_64 rng(5);
  const RowMatrix mp = row({0.2, -0.3, 0.5}).replicate(20000, 1);
  const RowMatrix sp = row({0.1, -0.2, 0.0}).replicate(20000, 1);
  ad::Tape t;
  const ad::Var mq = t.constant(row({0.0, 0.1, 0.9}).replicate(20000, 1));
  const ad::Var sq = t.constant(row({0.3, 0.0, -0.1}).replicate(20000, 1));
  const double closed = ad::mean(kl_gaussian(mp, sp, mq, sq)).item();
  const double est = ad::mean(kl_monte_carlo(mp, sp, mq, sq, 2, rng)).item();
  CHECK(std::abs(closed - est) < 0.02);
}

TEST_CASE("alpha schedules") {
  DecaySchedule lin;
  CHECK(alpha(0, lin) == 0.95);
  CHECK(std::abs(alpha(5000, lin) - 0.475) < 1e-12);
  CHECK(alpha(10000, lin) == 0.0);
  CHECK(alpha(250000, lin) == 0.0);
  DecaySchedule fixed{DecayKind::fixed};
  CHECK(alpha(123456, fixed) == 0.95);
  DecaySchedule ex{DecayKind::exponential};
  CHECK(alpha(999, ex) == 0.95);
  CHECK(std::abs(alpha(1000, ex) - 0.95 * 0.95) < 1e-15);
  CHECK(std::abs(alpha(5500, ex) - 0.95 * std::pow(0.95, 5)) < 1e-15);
  for (const auto& s : {lin, ex}) {
    double prev = 1.0;
    for (long step = 0; step < 30000; step += 37) {
      const double a = alpha(step, s);
      CHECK(a <= prev);
      CHECK((a >= 0.0 && a <= 0.95));
      prev = a;
    }
  }
  CHECK(decay_from_string("exp") == DecayKind::exponential);
  CHECK_THROWS_AS(decay_from_string("cosine"), ConfigError);
}

TEST_CASE("student_loss: endpoints, reference value and continuity") {
  ad::Tape t;
  ad::Var rl = t.scalar(2.0);
  ad::Var kl = t.scalar(4.0);
  CHECK(student_loss(rl, std::nullopt, 0.0, 1.0).total.item() == 2.0);
  CHECK(student_loss(rl, kl, 0.0, 1.0).total.id() == rl.id());
  CHECK(student_loss(rl, kl, 1.0, 1.0).total.item() == 4.0);
  CHECK(std::abs(student_loss(rl, kl, 0.5, 1.0).total.item() - 3.0) < 1e-12);
  CHECK(std::abs(student_loss(rl, kl, 0.3, 1.0).total.item() - student_loss(rl, kl, 0.3 + 1e-9, 1.0).total.item()) <
        1e-6);
  CHECK_THROWS_AS(student_loss(rl, std::nullopt, 0.2, 1.0), ContractError);
}

TEST_CASE("student update never reaches encoder or teacher parameters") {
  StudentPolicy student = tiny_student(1);
  OraclePolicy oracle = tiny_oracle(2);
  sim::NavEnv env(tiny_arena(), 4);
  env.reset();
  EnvViews views{&env, &env};
  nn::ParameterRefs frozen = student.frozen_parameters(), teacher, head;
  oracle.collect(teacher);
  student.collect(head);
  for (auto* p : frozen) p->grad.setZero();
  for (auto* p : teacher) p->grad.setZero();

  ad::Tape tt;
  const auto tout = oracle.forward(tt, oracle.observe(views), false);
  const RowMatrix tm = tout.mean.matrix(), ts = tout.log_std.matrix();
  ad::Tape tape;
  const auto out = student.forward(tape, student.observe(views), true);
  ad::Var loss = ad::mean(kl_gaussian(tm, ts, out.mean, out.log_std)) + ad::mean(ad::square(out.value));
  tape.backward(loss);
  for (auto* p : frozen) {
    CHECK(!tape.binds_trainable(*p));
    CHECK(p->grad.isZero(0.0));
  }
  for (auto* p : teacher) CHECK(p->grad.isZero(0.0));
  double head_grad = 0;
  for (auto* p : head) head_grad += p->grad.squaredNorm();
  CHECK(head_grad > 0);
}

TEST_CASE("train_oracle: deterministic tiny run") {
  set_log_level(LogLevel::quiet);
  auto once = [] {
    OraclePolicy o = tiny_oracle(9);
    auto log = train_oracle(o, tiny_train(512));
    nn::ParameterRefs p;
    o.collect(p);
    return std::make_pair(log, io::parameter_hash(p));
  };
  auto [log1, h1] = once();
  auto [log2, h2] = once();
  REQUIRE(log1.size() == 2);
  CHECK(log1.back().env_step == 512);
  CHECK(h1 == h2);
  for (std::size_t i = 0; i < log1.size(); ++i) CHECK(train_csv_row(log1[i]) == train_csv_row(log2[i]));
  CHECK(log1[0].alpha == 0.0);
  set_log_level(LogLevel::info);
}

TEST_CASE("train_student: frozen encoder, alpha bookkeeping and ablation") {
  set_log_level(LogLevel::quiet);
  StudentPolicy student = tiny_student(1);
  OraclePolicy oracle = tiny_oracle(2);
  const auto before = io::parameter_hash(student.frozen_parameters());
  StudentConfig sc;
  sc.train = tiny_train(768);
  sc.decay.horizon = 500;
  auto log = train_student(student, &oracle, sc);
  CHECK(io::parameter_hash(student.frozen_parameters()) == before);
  REQUIRE(log.size() == 3);
  CHECK(log[0].alpha == 0.95);
  CHECK(std::abs(log[1].alpha - 0.95 * (1 - 256.0 / 500)) < 1e-12);
  CHECK(log[2].alpha == 0.0);
  CHECK(log[0].kl > 0);

  StudentPolicy plain = tiny_student(1);
  sc.use_oracle = false;
  auto ablation = train_student(plain, nullptr, sc);
  for (const auto& r : ablation) {
    CHECK(r.alpha == 0.0);
    CHECK(r.kl == 0.0);
  }
  sc.use_oracle = true;
  CHECK_THROWS_AS(train_student(plain, nullptr, sc), ContractError);
  set_log_level(LogLevel::info);
}
