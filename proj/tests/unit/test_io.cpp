#include <doctest.h>

#include "omcrl/app/pipeline.hpp"
#include "omcrl/error.hpp"
#include "omcrl/io/checkpoint.hpp"
#include "omcrl/io/config.hpp"
#include "omcrl/io/csv.hpp"
#include "omcrl/io/svg.hpp"
#include "omcrl/log.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

using namespace omcrl;
namespace fs = std::filesystem;

namespace {

// Reference FNV-1a 64, written out independently of the library.
std::uint64_t fnv_reference(const std::vector<std::uint8_t>& bytes, std::size_t n) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

void reseal(std::vector<std::uint8_t>& bytes) {
  const std::size_t body = bytes.size() - 8;
  const std::uint64_t h = fnv_reference(bytes, body);
  for (int i = 0; i < 8; ++i) bytes[body + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(h >> (8 * i));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("omcrl_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Params {
  ad::Parameter a{"net.a", {2, 3}};
  ad::Parameter b{"net.b", {4}};
  nn::ParameterRefs refs() { return {&a, &b}; }
};

Params filled(double offset) {
  Params p;
  for (ad::Index i = 0; i < p.a.size(); ++i) p.a.value[i] = static_cast<float>(0.1 * static_cast<double>(i) + offset);
  for (ad::Index i = 0; i < p.b.size(); ++i) p.b.value[i] = static_cast<float>(-0.37 * static_cast<double>(i) - offset);
  return p;
}

io::Checkpoint sample_checkpoint() {
  Params p = filled(0.25);
  std::mt19937_64 rng(77);
  rng();
  io::Checkpoint c = io::make_checkpoint(io::Component::oracle, p.refs(), 0xabcdefULL, 4096, &rng);
  c.set_meta("mode", "masked");
  return c;
}

io::RunConfig tiny_config(const fs::path& out) {
  io::RunConfig c;
  c.seed = 5;
  c.out_dir = out.string();
  c.arena.max_steps = 80;
  c.corpus.episodes = 4;
  c.upstream.model.steps = 6;
  c.upstream.model.warmup = 3;
  c.upstream.model.batch = 2;
  c.upstream.eval_every = 3;
  c.upstream.eval_batches = 1;
  c.rl.buffer = 256;
  c.rl.minibatch = 128;
  c.rl.horizon = 32;
  c.oracle.steps = 512;
  c.oracle.envs = 2;
  c.oracle.net.hidden = 32;
  c.student.steps = 512;
  c.student.envs = 2;
  c.student.net.hidden = 32;
  c.decay.horizon = 256;
  c.eval.episodes = 4;
  c.eval.parallel = 2;
  io::validate(c);
  return c;
}

void run_pipeline(const io::RunConfig& c) {
  app::collect(c);
  app::pretrain(c);
  app::teach(c);
  app::distill(c, false);
}

}  // namespace

TEST_CASE("toml subset parser") {
  const auto t = io::parse_toml(
      "top = 1  # comment\n"
      "[a]\n"
      "x = -2.5e-1\n"
      "flag = false\n"
      "name = \"q\\\"uote # not a comment\"\n"
      "b.c = 7\n"
      "[a.d]\n"
      "\"quoted key\" = 3\n",
      "inline");
  CHECK(std::get<std::int64_t>(t.at("top")) == 1);
  CHECK(std::get<double>(t.at("a.x")) == -0.25);
  CHECK(std::get<bool>(t.at("a.flag")) == false);
  CHECK(std::get<std::string>(t.at("a.name")) == "q\"uote # not a comment");
  CHECK(std::get<std::int64_t>(t.at("a.b.c")) == 7);
  CHECK(std::get<std::int64_t>(t.at("a.d.quoted key")) == 3);
  CHECK_THROWS_AS(io::parse_toml("x = 1\nx = 2\n", "dup"), ConfigError);
  CHECK_THROWS_AS(io::parse_toml("x = \n", "empty"), ConfigError);
  CHECK_THROWS_AS(io::parse_toml("[open\n", "header"), ConfigError);
}

TEST_CASE("config: unknown key is rejected by name") {
  try {
    io::config_from_toml("[upstream]\nmasc_prob = 0.3\n", "run.toml");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("masc_prob") != std::string::npos);
  }
}

TEST_CASE("config: ranges validated at load") {
  CHECK_THROWS_AS(io::config_from_toml("[rl]\ngamma = 1.5\n", "x"), ConfigError);
  CHECK_THROWS_AS(io::config_from_toml("[upstream]\nmask_prob = -0.1\n", "x"), ConfigError);
  CHECK_THROWS_AS(io::config_from_toml("[decay]\nkind = \"cosine\"\n", "x"), ConfigError);
  CHECK_THROWS_AS(io::config_from_toml("[upstream]\ntau = \"hot\"\n", "x"), ConfigError);
  CHECK_NOTHROW(io::config_from_toml("[rl]\ngamma = 0.9\n", "x"));
}

TEST_CASE("config: dump round-trips") {
  io::RunConfig c = io::config_from_toml(
      "seed = 9\n[upstream]\nmask_prob = 0.3\ncurl = true\n[decay]\nkind = \"exp\"\n[rl]\ngamma = 0.97\n", "x");
  CHECK(c.upstream.model.mask_prob == 0.3);
  CHECK(c.decay.kind == train::DecayKind::exponential);
  const std::string text = io::dump_config(c);
  const io::RunConfig back = io::config_from_toml(text, "dump");
  CHECK(io::dump_config(back) == text);
  CHECK(back.rl.gamma == 0.97);
  CHECK(back.seed == 9);
}

TEST_CASE("config: component hashes track the sections they depend on") {
  io::RunConfig a;
  io::RunConfig b = a;
  b.seed = 123;
  b.out_dir = "elsewhere";
  b.upstream.model.steps = 1;
  for (const char* comp : {"encoder", "oracle", "student"}) CHECK(io::component_hash(a, comp) == io::component_hash(b, comp));
  b.rl.gamma = 0.5;
  CHECK(io::component_hash(a, "encoder") == io::component_hash(b, "encoder"));
  CHECK(io::component_hash(a, "oracle") != io::component_hash(b, "oracle"));
  b = a;
  b.upstream.model.mask_prob = 0.1;
  CHECK(io::component_hash(a, "encoder") != io::component_hash(b, "encoder"));
  CHECK(io::component_hash(a, "oracle") == io::component_hash(b, "oracle"));
}

TEST_CASE("checkpoint: save, load, save is byte-identical and values bit-exact") {
  const fs::path dir = scratch("roundtrip");
  const io::Checkpoint c = sample_checkpoint();
  io::save_checkpoint((dir / "a.ckpt").string(), c);
  const io::Checkpoint loaded = io::load_checkpoint((dir / "a.ckpt").string());
  io::save_checkpoint((dir / "b.ckpt").string(), loaded);
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
  CHECK_FALSE(fs::exists(dir / "a.ckpt.tmp"));

  Params src = filled(0.25), dst = filled(9.0);
  io::load_parameters(loaded, dst.refs());
  CHECK(std::memcmp(src.a.value.data(), dst.a.value.data(), sizeof(double) * 6) == 0);
  CHECK(std::memcmp(src.b.value.data(), dst.b.value.data(), sizeof(double) * 4) == 0);
  CHECK(loaded.step == 4096);
  CHECK(*loaded.meta("mode") == "masked");

  std::mt19937_64 expected(77);
  expected();
  std::mt19937_64 restored;
  io::restore_rng(restored, loaded.rng_state);
  CHECK(restored() == expected());
}

TEST_CASE("checkpoint: every truncation is an integrity error") {
  const auto bytes = io::serialize(sample_checkpoint());
  CHECK(io::serialize(io::deserialize(bytes, "mem")) == bytes);
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
    CHECK_THROWS_AS(io::deserialize(cut, "cut"), IntegrityError);
  }
  auto longer = bytes;
  longer.push_back(0);
  CHECK_THROWS_AS(io::deserialize(longer, "long"), IntegrityError);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(io::deserialize(flipped, "flip"), IntegrityError);

  const fs::path dir = scratch("truncated");
  std::ofstream((dir / "t.ckpt"), std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), 40);
  CHECK_THROWS_AS(io::load_checkpoint((dir / "t.ckpt").string()), IntegrityError);
  CHECK_THROWS_AS(io::load_checkpoint((dir / "absent.ckpt").string()), ConfigError);
}

TEST_CASE("checkpoint: version bump is a version error") {
  auto bytes = io::serialize(sample_checkpoint());
  REQUIRE(std::memcmp(bytes.data(), "OMCK", 4) == 0);
  bytes[4] = static_cast<std::uint8_t>(io::kCheckpointVersion + 1);
  reseal(bytes);
  CHECK_THROWS_AS(io::deserialize(bytes, "future"), VersionError);
  bytes[4] = static_cast<std::uint8_t>(io::kCheckpointVersion);
  reseal(bytes);
  CHECK_NOTHROW(io::deserialize(bytes, "current"));
}

TEST_CASE("checkpoint: shape or name mismatch loads nothing") {
  const io::Checkpoint c = sample_checkpoint();
  Params dst = filled(3.0);
  const Eigen::VectorXd before_a = dst.a.value;
  dst.b = ad::Parameter("net.b", {5});
  dst.b.value.setConstant(1.5);
  CHECK_THROWS_AS(io::load_parameters(c, dst.refs()), DimensionError);
  CHECK(dst.a.value == before_a);
  ad::Parameter stray("net.c", {1});
  CHECK_THROWS_AS(io::load_parameters(c, {&stray}), ConfigError);
}

TEST_CASE("checkpoint: config hash mismatch needs --force") {
  const io::Checkpoint c = sample_checkpoint();
  CHECK_NOTHROW(io::check_config_hash(c, 0xabcdefULL, false, "x"));
  CHECK_THROWS_AS(io::check_config_hash(c, 0x1234ULL, false, "x"), ConfigError);
  const long warnings = warning_count();
  set_log_level(LogLevel::error);
  CHECK_NOTHROW(io::check_config_hash(c, 0x1234ULL, true, "x"));
  set_log_level(LogLevel::info);
  CHECK(warning_count() == warnings + 1);
  CHECK_THROWS_AS(io::expect_component(c, io::Component::student, "x"), ConfigError);
}

TEST_CASE("csv and svg helpers") {
  const fs::path dir = scratch("csv");
  {
    io::CsvWriter w((dir / "t.csv").string(), "demo v1", "x,y");
    w.row("1,2.5");
    w.row("2,nan");
    w.row("3,--");
  }
  const io::CsvTable t = io::read_csv((dir / "t.csv").string());
  CHECK(t.schema == "demo v1");
  const auto y = t.numbers("y");
  REQUIRE(y.size() == 3);
  CHECK(y[0] == 2.5);
  CHECK(std::isnan(y[1]));
  CHECK(std::isnan(y[2]));
  CHECK_THROWS_AS(t.numbers("z"), ConfigError);

  const auto s = io::smooth({1, NAN, 3, 5, 7}, 2);
  CHECK(s[0] == 1);
  CHECK(s[1] == 1);
  CHECK(s[2] == 2);
  CHECK(s[3] == 4);
  CHECK(s[4] == 6);

  const std::string svg = io::line_chart({{"run <a>", {0, 1, 2}, {0, NAN, 1}}}, {"t", "x", "y"});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("run &lt;a&gt;") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("pipeline: ablation flags map to their own directories") {
  io::RunConfig c;
  c.out_dir = "out";
  CHECK(app::layout(c).upstream == fs::path("out/upstream"));
  CHECK(app::layout(c).student == fs::path("out/student"));
  app::Overrides o;
  o.mask_prob = 0.1;
  o.no_oracle = true;
  o.decay = "fixed";
  app::apply(c, o);
  CHECK(app::layout(c).upstream == fs::path("out/upstream-mask0.1"));
  CHECK(app::layout(c).student == fs::path("out/student-mask0.1-no-oracle-fixed"));
  o = {};
  o.curl_mode = true;
  o.out = "x";
  app::apply(c, o);
  CHECK(app::layout(c).upstream == fs::path("x/upstream-curl"));
}

TEST_CASE("pipeline: missing prerequisite names the command") {
  const io::RunConfig c = tiny_config(scratch("missing"));
  auto message = [](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message([&] { app::pretrain(c); }).find("omcrl collect") != std::string::npos);
  CHECK(message([&] { app::distill(c, false); }).find("omcrl pretrain") != std::string::npos);
  CHECK(message([&] { app::evaluate(c, "oracle", false); }).find("omcrl teach") != std::string::npos);
}

TEST_CASE("pipeline: identical config and seed give byte-identical artifacts") {
  set_log_level(LogLevel::warn);
  const fs::path root = scratch("determinism");
  const io::RunConfig a = tiny_config(root / "a");
  const io::RunConfig b = tiny_config(root / "b");
  run_pipeline(a);
  run_pipeline(b);
  for (const char* f : {"upstream/pretrain.csv", "upstream/pretrain_eval.csv", "oracle/train.csv", "oracle/report.csv",
                        "student/train.csv", "student/report.csv", "student/report_episodes.csv",
                        "student/student.ckpt", "upstream/encoder.ckpt"}) {
    const std::string file = f;
    CAPTURE(file);
    CHECK(slurp(root / "a" / f) == slurp(root / "b" / f));
  }
  CHECK(slurp(root / "a/upstream/pretrain.csv").rfind("# omcrl-pretrain v1\n", 0) == 0);
  CHECK(slurp(root / "a/student/train.csv").rfind("# omcrl-train v1\n", 0) == 0);

  app::evaluate(a, "student", false);
  CHECK(slurp(root / "a/student/eval_report.csv") == slurp(root / "a/student/report.csv"));
  app::evaluate(a, "oracle", false);
  CHECK(slurp(root / "a/oracle/eval_report.csv") == slurp(root / "a/oracle/report.csv"));

  io::RunConfig other = a;
  other.rl.gamma = 0.5;
  CHECK_THROWS_AS(app::evaluate(other, "oracle", false), ConfigError);
  CHECK_NOTHROW(app::evaluate(other, "oracle", true));

  const auto plots = app::plot(a);
  CHECK(plots.size() == 5);
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    const auto rel = fs::relative(entry.path(), root / "a");
    CHECK(rel.string().rfind("..", 0) != 0);
  }
  set_log_level(LogLevel::info);
}
