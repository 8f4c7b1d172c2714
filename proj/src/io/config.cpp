#include "omcrl/io/config.hpp"

#include "omcrl/error.hpp"
#include "omcrl/io/checkpoint.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace omcrl::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
}

bool bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

// Reads a possibly dotted key starting at pos; stops at '=' or ']'.
std::string read_key(const std::string& s, std::size_t& pos, const std::string& origin, int line) {
  std::string key;
  while (true) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    std::string part;
    if (pos < s.size() && s[pos] == '"') {
      const auto end = s.find('"', pos + 1);
      if (end == std::string::npos) fail(origin, line, "unterminated quoted key");
      part = s.substr(pos + 1, end - pos - 1);
      pos = end + 1;
    } else {
      while (pos < s.size() && bare_key_char(s[pos])) part += s[pos++];
    }
    if (part.empty()) fail(origin, line, "empty key");
    key += part;
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    if (pos < s.size() && s[pos] == '.') {
      key += '.';
      ++pos;
      continue;
    }
    return key;
  }
}

TomlValue read_value(const std::string& raw, const std::string& origin, int line) {
  std::string v = raw;
  if (!v.empty() && v[0] == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < v.size() && v[i] != '"'; ++i) {
      if (v[i] == '\\' && i + 1 < v.size()) {
        const char e = v[++i];
        out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
      } else {
        out += v[i];
      }
    }
    if (i >= v.size()) fail(origin, line, "unterminated string");
    const std::string rest = trim(v.substr(i + 1));
    if (!rest.empty() && rest[0] != '#') fail(origin, line, "unexpected text after string: " + rest);
    return out;
  }
  const auto hash = v.find('#');
  if (hash != std::string::npos) v = trim(v.substr(0, hash));
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.empty()) fail(origin, line, "missing value");
  std::string digits;
  for (char c : v)
    if (c != '_') digits += c;
  const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
  if (!is_float) {
    std::int64_t x = 0;
    const char* first = digits.data() + (digits[0] == '+' ? 1 : 0);
    auto [p, ec] = std::from_chars(first, digits.data() + digits.size(), x);
    if (ec == std::errc() && p == digits.data() + digits.size()) return x;
  } else {
    double x = 0;
    const char* first = digits.data() + (digits[0] == '+' ? 1 : 0);
    auto [p, ec] = std::from_chars(first, digits.data() + digits.size(), x);
    if (ec == std::errc() && p == digits.data() + digits.size()) return x;
  }
  fail(origin, line, "cannot parse value '" + v + "'");
}

// Typed view of one config field.
struct Field {
  std::string key;
  std::function<void(const TomlValue&, const std::string& where)> set;
  std::function<std::string()> get;
};

std::string type_error(const std::string& where, const char* expected) {
  return where + ": expected " + expected;
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

template <typename T>
Field integer(const std::string& key, T& ref) {
  return {key,
          [&ref](const TomlValue& v, const std::string& where) {
            if (!std::holds_alternative<std::int64_t>(v)) throw ConfigError(type_error(where, "an integer"));
            const auto x = std::get<std::int64_t>(v);
            if constexpr (std::is_unsigned_v<T>) {
              if (x < 0) throw ConfigError(where + ": must be non-negative");
            }
            ref = static_cast<T>(x);
          },
          [&ref] { return std::to_string(ref); }};
}

Field real(const std::string& key, double& ref) {
  return {key,
          [&ref](const TomlValue& v, const std::string& where) {
            if (std::holds_alternative<double>(v)) {
              ref = std::get<double>(v);
            } else if (std::holds_alternative<std::int64_t>(v)) {
              ref = static_cast<double>(std::get<std::int64_t>(v));
            } else {
              throw ConfigError(type_error(where, "a number"));
            }
          },
          [&ref] { return fmt_double(ref); }};
}

Field boolean(const std::string& key, bool& ref) {
  return {key,
          [&ref](const TomlValue& v, const std::string& where) {
            if (!std::holds_alternative<bool>(v)) throw ConfigError(type_error(where, "true or false"));
            ref = std::get<bool>(v);
          },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

Field text(const std::string& key, std::string& ref) {
  return {key,
          [&ref](const TomlValue& v, const std::string& where) {
            if (!std::holds_alternative<std::string>(v)) throw ConfigError(type_error(where, "a string"));
            ref = std::get<std::string>(v);
          },
          [&ref] { return quote(ref); }};
}

template <typename E>
Field choice(const std::string& key, E& ref, std::function<E(const std::string&)> parse,
             std::function<std::string(E)> name) {
  return {key,
          [&ref, parse](const TomlValue& v, const std::string& where) {
            if (!std::holds_alternative<std::string>(v)) throw ConfigError(type_error(where, "a string"));
            try {
              ref = parse(std::get<std::string>(v));
            } catch (const ConfigError& e) {
              throw ConfigError(where + ": " + e.what());
            }
          },
          [&ref, name] { return quote(name(ref)); }};
}

std::vector<Field> fields(RunConfig& c) {
  auto& a = c.arena;
  auto& u = c.upstream.model;
  std::vector<Field> f{
      integer("seed", c.seed),
      text("out_dir", c.out_dir),

      real("arena.width", a.width),
      real("arena.height", a.height),
      integer("arena.obstacles", a.random_obstacles),
      real("arena.obstacle_radius_min", a.obstacle_radius_min),
      real("arena.obstacle_radius_max", a.obstacle_radius_max),
      real("arena.goal_radius", a.goal_radius),
      real("arena.agent_radius", a.agent_radius),
      real("arena.min_start_goal", a.min_start_goal),
      real("arena.spawn_clearance", a.spawn_clearance),
      integer("arena.max_steps", a.max_steps),
      real("arena.dt", a.dt),
      real("arena.max_vx", a.max_action[0]),
      real("arena.max_vy", a.max_action[1]),
      real("arena.max_yaw_rate", a.max_action[2]),
      real("arena.fov_deg", a.fov_deg),
      integer("arena.image_height", a.image_height),
      integer("arena.image_width", a.image_width),
      integer("arena.depth_height", a.depth_height),
      integer("arena.depth_width", a.depth_width),
      integer("arena.frames", a.frames),
      real("arena.max_range", a.max_range),
      real("arena.depth_near", a.depth_near),
      real("arena.wall_scale", a.wall_scale),
      real("arena.camera_height", a.camera_height),
      real("arena.floor_period", a.floor_period),

      integer("corpus.episodes", c.corpus.episodes),
      real("corpus.random_fraction", c.corpus.random_fraction),
      integer("corpus.max_frames", c.corpus.max_frames),
      integer("corpus.min_frames", c.corpus.min_frames),

      integer("upstream.batch", u.batch),
      integer("upstream.seq_len", u.seq_len),
      real("upstream.mask_prob", u.mask_prob),
      real("upstream.tau", u.tau),
      real("upstream.momentum", u.momentum),
      integer("upstream.latent_dim", u.latent_dim),
      integer("upstream.conv_channels", u.conv_channels),
      integer("upstream.projection_hidden", u.projection_hidden),
      boolean("upstream.projection", u.projection),
      integer("upstream.crop", u.crop),
      boolean("upstream.shared_crop", u.shared_crop),
      integer("upstream.blocks", u.blocks),
      integer("upstream.ffn_dim", u.ffn_dim),
      boolean("upstream.positional", u.positional),
      choice<contrastive::Similarity>(
          "upstream.similarity", u.similarity,
          [](const std::string& s) {
            if (s == "cosine") return contrastive::Similarity::cosine;
            if (s == "bilinear") return contrastive::Similarity::bilinear;
            throw ConfigError("similarity '" + s + "' is not one of cosine, bilinear");
          },
          [](contrastive::Similarity s) {
            return std::string(s == contrastive::Similarity::cosine ? "cosine" : "bilinear");
          }),
      real("upstream.lr_encoder", u.lr_encoder),
      real("upstream.lr_transformer", u.lr_transformer),
      integer("upstream.warmup", u.warmup),
      integer("upstream.steps", u.steps),
      boolean("upstream.curl", u.curl),
      integer("upstream.eval_every", c.upstream.eval_every),
      integer("upstream.eval_batches", c.upstream.eval_batches),

      real("rl.clip", c.rl.clip),
      real("rl.lambda", c.rl.lambda),
      real("rl.gamma", c.rl.gamma),
      integer("rl.horizon", c.rl.horizon),
      integer("rl.epochs", c.rl.epochs),
      integer("rl.minibatch", c.rl.minibatch),
      integer("rl.buffer", c.rl.buffer),
      real("rl.value_coef", c.rl.value_coef),
      real("rl.lr", c.rl.lr),
      boolean("rl.normalize_advantages", c.rl.normalize_advantages),
      real("rl.max_grad_norm", c.rl.max_grad_norm),

      integer("oracle.steps", c.oracle.steps),
      integer("oracle.envs", c.oracle.envs),
      integer("oracle.hidden", c.oracle.net.hidden),
      integer("oracle.latent_dim", c.oracle.net.latent_dim),
      integer("oracle.conv_channels", c.oracle.net.conv_channels),
      real("oracle.init_log_std", c.oracle.net.init_log_std),

      integer("student.steps", c.student.steps),
      integer("student.envs", c.student.envs),
      integer("student.hidden", c.student.net.hidden),
      real("student.init_log_std", c.student.net.init_log_std),
      boolean("student.use_oracle", c.student.use_oracle),
      text("student.kl_estimator", c.student.kl_estimator),
      integer("student.kl_samples", c.student.kl_samples),
      text("student.encoder_hash", c.student.encoder_hash),

      choice<train::DecayKind>(
          "decay.kind", c.decay.kind, [](const std::string& s) { return train::decay_from_string(s); },
          [](train::DecayKind k) { return train::to_string(k); }),
      real("decay.alpha0", c.decay.alpha0),
      integer("decay.horizon", c.decay.horizon),
      real("decay.exp_factor", c.decay.exp_factor),
      integer("decay.exp_interval", c.decay.exp_interval),
      real("decay.beta", c.decay.beta),

      integer("eval.episodes", c.eval.episodes),
      real("eval.epsilon", c.eval.epsilon),
      integer("eval.seed", c.eval.seed),
      integer("eval.parallel", c.eval.parallel),
  };
  return f;
}

}  // namespace

std::map<std::string, TomlValue> parse_toml(const std::string& text, const std::string& origin) {
  std::map<std::string, TomlValue> out;
  std::istringstream is(text);
  std::string raw, table;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    if (s[0] == '[') {
      if (s.size() > 1 && s[1] == '[') fail(origin, line, "arrays of tables are not supported");
      std::size_t pos = 1;
      table = read_key(s, pos, origin, line);
      if (pos >= s.size() || s[pos] != ']') fail(origin, line, "expected ']' after table name");
      const std::string rest = trim(s.substr(pos + 1));
      if (!rest.empty() && rest[0] != '#') fail(origin, line, "unexpected text after table header");
      continue;
    }
    std::size_t pos = 0;
    const std::string key = read_key(s, pos, origin, line);
    if (pos >= s.size() || s[pos] != '=') fail(origin, line, "expected '=' after key '" + key + "'");
    const std::string value = trim(s.substr(pos + 1));
    if (!value.empty() && (value[0] == '[' || value[0] == '{'))
      fail(origin, line, "arrays and inline tables are not supported");
    const std::string full = table.empty() ? key : table + "." + key;
    if (!out.emplace(full, read_value(value, origin, line)).second) fail(origin, line, "duplicate key '" + full + "'");
  }
  return out;
}

RunConfig::RunConfig() {
  arena.random_obstacles = 4;
  rl.gamma = 0.95;
}

RunConfig config_from_toml(const std::string& text, const std::string& origin) {
  RunConfig c;
  auto values = parse_toml(text, origin);
  for (auto& f : fields(c)) {
    auto it = values.find(f.key);
    if (it == values.end()) continue;
    f.set(it->second, origin + ": " + f.key);
    values.erase(it);
  }
  if (!values.empty()) {
    std::string keys;
    for (const auto& [k, _] : values) keys += (keys.empty() ? "'" : ", '") + k + "'";
    throw ConfigError(origin + ": unknown key" + (values.size() > 1 ? "s " : " ") + keys);
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return config_from_toml(ss.str(), path);
}

void validate(const RunConfig& c) {
  sim::validate(c.arena);
  contrastive::validate(c.upstream.model);
  rl::validate(c.rl);
  train::validate(c.decay);
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.corpus.episodes >= 1, "corpus.episodes must be positive");
  require(c.corpus.random_fraction >= 0 && c.corpus.random_fraction <= 1, "corpus.random_fraction must lie in [0, 1]");
  require(c.corpus.min_frames >= c.upstream.model.seq_len + c.arena.frames - 1,
          "corpus.min_frames must be at least seq_len + frames - 1");
  require(c.corpus.max_frames >= c.corpus.min_frames, "corpus.max_frames below corpus.min_frames");
  require(c.upstream.eval_every >= 1, "upstream.eval_every must be positive");
  require(c.upstream.eval_batches >= 1, "upstream.eval_batches must be positive");
  require(c.upstream.model.crop <= std::min(c.arena.image_height, c.arena.image_width),
          "upstream.crop exceeds the rendered image");
  require(c.oracle.steps >= 1 && c.oracle.envs >= 1, "oracle.steps and oracle.envs must be positive");
  require(c.oracle.net.hidden >= 1 && c.oracle.net.latent_dim >= 1 && c.oracle.net.conv_channels >= 1,
          "oracle network sizes must be positive");
  require(c.student.steps >= 1 && c.student.envs >= 1, "student.steps and student.envs must be positive");
  require(c.student.net.hidden >= 1, "student.hidden must be positive");
  require(c.student.kl_estimator == "closed" || c.student.kl_estimator == "monte_carlo",
          "student.kl_estimator must be closed or monte_carlo");
  require(c.student.kl_samples >= 1, "student.kl_samples must be positive");
  require(c.eval.episodes >= 1, "eval.episodes must be positive");
  require(c.eval.epsilon > 0, "eval.epsilon must be positive");
  require(c.eval.parallel >= 1, "eval.parallel must be positive");
}

std::string dump_config(const RunConfig& config) {
  RunConfig copy = config;
  std::ostringstream os;
  std::string section = "";
  for (const auto& f : fields(copy)) {
    const auto dot = f.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : f.key.substr(0, dot);
    const std::string key = dot == std::string::npos ? f.key : f.key.substr(dot + 1);
    if (sec != section) {
      os << "\n[" << sec << "]\n";
      section = sec;
    }
    os << key << " = " << f.get() << '\n';
  }
  return os.str();
}

std::uint64_t component_hash(const RunConfig& config, const std::string& component) {
  std::vector<std::string> sections;
  if (component == "encoder" || component == "projection" || component == "transformer") {
    sections = {"arena.image", "arena.frames", "arena.fov", "arena.max_range", "arena.wall_scale",
                "arena.camera_height", "arena.floor_period", "upstream."};
  } else if (component == "oracle") {
    sections = {"arena.", "rl.", "oracle."};
  } else if (component == "student") {
    sections = {"arena.", "rl.", "student.", "decay.", "upstream."};
  } else {
    throw ConfigError("no config hash defined for component '" + component + "'");
  }
  RunConfig copy = config;
  std::string canon;
  for (const auto& f : fields(copy)) {
    if (f.key.rfind("upstream.eval", 0) == 0 || f.key.rfind("upstream.steps", 0) == 0) continue;
    if (f.key == "student.encoder_hash" || f.key == "student.steps" || f.key == "oracle.steps") continue;
    for (const auto& s : sections)
      if (f.key.rfind(s, 0) == 0) {
        canon += f.key + "=" + f.get() + "\n";
        break;
      }
  }
  return fnv1a(canon.data(), canon.size());
}

}  // namespace omcrl::io
