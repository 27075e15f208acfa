#ifndef PGLAB_CONFIG_HPP_
#define PGLAB_CONFIG_HPP_

#include <openssl/evp.h>

#include <charconv>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pglab/algorithms.hpp"
#include "pglab/estimators.hpp"
#include "pglab/io.hpp"
#include "pglab/lqg_oracle.hpp"

namespace pglab {

struct ExperimentConfig {
  std::string env = "lqg";
  double b_sq = 2.0;
  std::string algo = "rpg";
  std::string reward_mode = "true";
  std::vector<std::string> estimators{"pg", "rpg"};
  std::string value_oracle = "riccati";
  std::vector<double> theta{kLqgEvalTheta[0], kLqgEvalTheta[1]};
  double bandit_mu = 0.5;
  double bandit_sigma = 0.25;
  std::vector<std::size_t> n_list{10, 25, 50, 75, 100};
  std::size_t M = 1000;
  std::size_t B = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;  // empty: {seed}
  std::string out = "out";
  TrainConfig train;
  std::vector<double> sweep_b_sq;
  std::vector<std::string> sweep_algos;
  std::vector<std::string> sweep_reward_modes{"true"};

  std::vector<std::uint64_t> run_seeds() const { return seeds.empty() ? std::vector{seed} : seeds; }
};

using Assignment = std::pair<std::string, std::string>;

namespace config_detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] inline void bad_value(std::string_view key, std::string_view v, const char* want) {
  throw std::invalid_argument("config: key '" + std::string(key) + "' expects " + want + ", got '" +
                              std::string(v) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  v = trim(v);
  T x{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return x;
}

inline std::string parse_string(std::string_view v) {
  v = trim(v);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  return std::string(v);
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(key, v, "true or false");
}

inline std::vector<std::string> split_list(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') bad_value(key, v, "a [list]");
  v = trim(v.substr(1, v.size() - 2));
  std::vector<std::string> out;
  if (v.empty()) return out;
  std::size_t pos = 0;
  for (;;) {
    const auto comma = v.find(',', pos);
    out.emplace_back(trim(v.substr(pos, comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::string quote(const std::string& s) { return '"' + s + '"'; }

template <typename T>
std::string render(const T& x) {
  if constexpr (std::is_same_v<T, double>) {
    return format_double(x);
  } else if constexpr (std::is_same_v<T, bool>) {
    return x ? "true" : "false";
  } else if constexpr (std::is_same_v<T, std::string>) {
    return quote(x);
  } else {
    return std::to_string(x);
  }
}

template <typename T>
std::string render(const std::vector<T>& xs) {
  std::string s = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + render(xs[i]);
  return s + "]";
}

template <typename T>
T parse_scalar(std::string_view key, std::string_view v) {
  if constexpr (std::is_same_v<T, bool>) {
    return parse_bool(key, v);
  } else if constexpr (std::is_same_v<T, std::string>) {
    return parse_string(v);
  } else {
    return parse_number<T>(key, v);
  }
}

template <typename T>
struct Parser {
  static T parse(std::string_view key, std::string_view v) { return parse_scalar<T>(key, v); }
};

template <typename T>
struct Parser<std::vector<T>> {
  static std::vector<T> parse(std::string_view key, std::string_view v) {
    std::vector<T> out;
    for (const auto& item : split_list(key, v)) out.push_back(parse_scalar<T>(key, item));
    return out;
  }
};

// "A..B" (inclusive) or a list.
inline std::vector<std::uint64_t> parse_seed_range(std::string_view key, std::string_view v) {
  v = trim(v);
  const auto dots = v.find("..");
  if (dots == std::string_view::npos) return Parser<std::vector<std::uint64_t>>::parse(key, v);
  const auto a = parse_number<std::uint64_t>(key, v.substr(0, dots));
  const auto b = parse_number<std::uint64_t>(key, v.substr(dots + 2));
  if (b < a) bad_value(key, v, "A..B with A <= B");
  std::vector<std::uint64_t> out;
  for (auto s = a; s <= b; ++s) out.push_back(s);
  return out;
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Access>
Field bind(std::string key, Access access) {
  using T = std::remove_reference_t<decltype(access(std::declval<ExperimentConfig&>()))>;
  return {key,
          [access, key](ExperimentConfig& c, std::string_view v) {
            access(c) = Parser<T>::parse(key, v);
          },
          [access](const ExperimentConfig& c) {
            return render(access(const_cast<ExperimentConfig&>(c)));
          }};
}

#define PGLAB_FIELD(name, expr) bind(name, [](ExperimentConfig& c) -> auto& { return expr; })

inline const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v{
        PGLAB_FIELD("env", c.env),
        PGLAB_FIELD("b_sq", c.b_sq),
        PGLAB_FIELD("algo", c.algo),
        PGLAB_FIELD("reward_mode", c.reward_mode),
        PGLAB_FIELD("estimators", c.estimators),
        PGLAB_FIELD("value_oracle", c.value_oracle),
        PGLAB_FIELD("theta", c.theta),
        PGLAB_FIELD("bandit_mu", c.bandit_mu),
        PGLAB_FIELD("bandit_sigma", c.bandit_sigma),
        PGLAB_FIELD("n_list", c.n_list),
        PGLAB_FIELD("M", c.M),
        PGLAB_FIELD("B", c.B),
        PGLAB_FIELD("level", c.level),
        PGLAB_FIELD("seed", c.seed),
        PGLAB_FIELD("out", c.out),
        PGLAB_FIELD("policy_lr", c.train.policy_lr),
        PGLAB_FIELD("value_lr", c.train.value_lr),
        PGLAB_FIELD("reward_lr", c.train.reward_lr),
        PGLAB_FIELD("hidden", c.train.hidden),
        PGLAB_FIELD("policy_arch", c.train.policy_arch),
        PGLAB_FIELD("steps_per_iter", c.train.steps_per_iter),
        PGLAB_FIELD("epochs", c.train.epochs),
        PGLAB_FIELD("minibatch", c.train.minibatch),
        PGLAB_FIELD("gamma", c.train.gamma),
        PGLAB_FIELD("lambda", c.train.lambda),
        PGLAB_FIELD("clip_eps", c.train.clip_eps),
        PGLAB_FIELD("target_kl", c.train.target_kl),
        PGLAB_FIELD("obs_clip", c.train.obs_clip),
        PGLAB_FIELD("grad_clip", c.train.grad_clip),
        PGLAB_FIELD("paper_literal_clip", c.train.paper_literal_clip),
        PGLAB_FIELD("use_value_function", c.train.use_value_function),
        PGLAB_FIELD("init_log_std", c.train.init_log_std),
        PGLAB_FIELD("policy_output_gain", c.train.policy_output_gain),
        PGLAB_FIELD("total_steps", c.train.total_steps),
        PGLAB_FIELD("eval_every", c.train.eval_every),
        PGLAB_FIELD("eval_episodes", c.train.eval_episodes),
        PGLAB_FIELD("record_wallclock", c.train.record_wallclock),
        PGLAB_FIELD("sweep_b_sq", c.sweep_b_sq),
        PGLAB_FIELD("sweep_algos", c.sweep_algos),
        PGLAB_FIELD("sweep_reward_modes", c.sweep_reward_modes),
    };
    v.push_back({"seeds",
                 [](ExperimentConfig& c, std::string_view s) { c.seeds = parse_seed_range("seeds", s); },
                 [](const ExperimentConfig& c) { return render(c.seeds); }});
    return v;
  }();
  return f;
}

#undef PGLAB_FIELD

inline const Field* find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace config_detail

// key = value lines; '#' starts a comment outside quotes.
inline std::vector<Assignment> parse_config_text(std::string_view text) {
  std::vector<Assignment> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const auto body = config_detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    out.emplace_back(std::string(config_detail::trim(body.substr(0, eq))),
                     std::string(config_detail::trim(body.substr(eq + 1))));
  }
  return out;
}

// "key=value" from the command line.
inline Assignment parse_assignment(std::string_view kv) {
  const auto eq = kv.find('=');
  if (eq == std::string_view::npos) throw std::invalid_argument("expected key=value, got '" + std::string(kv) + "'");
  return {std::string(config_detail::trim(kv.substr(0, eq))),
          std::string(config_detail::trim(kv.substr(eq + 1)))};
}

inline void validate(const ExperimentConfig& c) {
  make_env(c.env, {c.b_sq, {}});
  parse_algo(c.algo);
  parse_reward_mode(c.reward_mode);
  for (const auto& e : c.estimators) parse_estimator(e);
  if (c.value_oracle != "riccati" && c.value_oracle != "exact") {
    throw std::invalid_argument("config: value_oracle must be riccati or exact");
  }
  if (c.theta.size() != 2) throw std::invalid_argument("config: theta needs 2 entries");
  if (!(c.bandit_sigma > 0.0)) throw std::invalid_argument("config: bandit_sigma must be > 0");
  if (c.n_list.empty()) throw std::invalid_argument("config: n_list is empty");
  for (auto n : c.n_list) {
    if (n == 0) throw std::invalid_argument("config: n_list entries must be >= 1");
  }
  if (c.M < 2) throw std::invalid_argument("config: M must be >= 2");
  if (c.B < 100) throw std::invalid_argument("config: B must be >= 100");
  if (!(c.level > 0.0 && c.level < 1.0)) throw std::invalid_argument("config: level in (0,1)");
  for (auto b : c.sweep_b_sq) {
    if (!(b > 0.0)) throw std::invalid_argument("config: sweep_b_sq entries must be > 0");
  }
  for (const auto& a : c.sweep_algos) parse_algo(a);
  for (const auto& m : c.sweep_reward_modes) parse_reward_mode(m);
  c.train.validate();
}

// Task defaults for the (last) env given, then every assignment in order.
inline ExperimentConfig resolve_config(const std::vector<Assignment>& assignments) {
  ExperimentConfig c;
  for (const auto& [k, v] : assignments) {
    if (k == "env") c.env = config_detail::parse_string(v);
  }
  c.train = default_train_config(c.env);
  if (c.env == "peaks" || c.env == "holes") c.reward_mode = "learned";
  for (const auto& [k, v] : assignments) {
    const auto* f = config_detail::find_field(k);
    if (!f) throw std::invalid_argument("config: unknown key '" + k + "'");
    f->set(c, v);
  }
  validate(c);
  return c;
}

inline bool is_seed_key(std::string_view k) { return k == "seed" || k == "seeds"; }

// Every field, one per line, in a fixed order; parse_config_text of the
// result resolves back to the same config.
inline std::string serialize_config(const ExperimentConfig& c, bool include_seeds = true) {
  std::string s;
  for (const auto& f : config_detail::fields()) {
    if (!include_seeds && (is_seed_key(f.key) || f.key == "out")) continue;
    s += f.key + " = " + f.get(c) + "\n";
  }
  return s;
}

inline std::string hex(const unsigned char* p, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string s(2 * n, '0');
  for (std::size_t i = 0; i < n; ++i) {
    s[2 * i] = digits[p[i] >> 4];
    s[2 * i + 1] = digits[p[i] & 0xF];
  }
  return s;
}

inline std::string sha1_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("sha1 failed");
  }
  return hex(md, len);
}

// Git blob id of the seed-free serialized config.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string body = serialize_config(c, false);
  std::string blob = "blob " + std::to_string(body.size());
  blob.push_back('\0');
  blob += body;
  return sha1_hex(blob);
}

}  // namespace pglab

#endif  // PGLAB_CONFIG_HPP_
