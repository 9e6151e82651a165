#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "madqrl/cli.hpp"
#include "madqrl/errors.hpp"

namespace madqrl::cli {

namespace {

using runtime::format_double;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
  throw UsageError("invalid value '" + value + "' for " + key + ": " + why);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad(key, value, "not a number");
  return out;
}

int parse_int(const std::string& key, const std::string& v) { return parse_number<int>(key, v); }
double parse_double(const std::string& key, const std::string& v) { return parse_number<double>(key, v); }

int parse_positive(const std::string& key, const std::string& v) {
  const int n = parse_int(key, v);
  if (n <= 0) bad(key, v, "must be positive");
  return n;
}

int parse_non_negative(const std::string& key, const std::string& v) {
  const int n = parse_int(key, v);
  if (n < 0) bad(key, v, "must be >= 0");
  return n;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(key, v, "expected true or false");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(trim(item));
  return parts;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Key {
  std::string name;
  std::function<void(AppConfig&, const std::string&)> set;
  std::function<std::string(const AppConfig&)> get;
};

#define MADQRL_DOUBLE_KEY(NAME, FIELD, CHECK, WHY)                       \
  Key {                                                                  \
    NAME,                                                                \
        [](AppConfig& c, const std::string& v) {                         \
          const double x = parse_double(NAME, v);                        \
          if (!(CHECK)) bad(NAME, v, WHY);                               \
          c.FIELD = x;                                                   \
        },                                                               \
        [](const AppConfig& c) { return format_double(c.FIELD); }        \
  }

#define MADQRL_INT_KEY(NAME, FIELD, PARSER)                                             \
  Key {                                                                                 \
    NAME, [](AppConfig& c, const std::string& v) { c.FIELD = PARSER(NAME, v); },        \
        [](const AppConfig& c) { return std::to_string(c.FIELD); }                      \
  }

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = {
      {"strategy",
       [](AppConfig& c, const std::string& v) {
         try {
           c.run.strategy.kind = marl::parse_strategy(v);
         } catch (const ValidationError&) {
           bad("strategy", v, "expected joint, shared or independent");
         }
       },
       [](const AppConfig& c) { return std::string(marl::to_string(c.run.strategy.kind)); }},
      {"model",
       [](AppConfig& c, const std::string& v) {
         if (v == "quantum") {
           c.run.model.kind = policy::ModelKind::HybridQNN;
         } else if (v == "classical") {
           c.run.model.kind = policy::ModelKind::ClassicalCNN;
         } else {
           bad("model", v, "expected quantum or classical");
         }
       },
       [](const AppConfig& c) { return std::string(policy::to_string(c.run.model.kind)); }},
      {"entanglement",
       [](AppConfig& c, const std::string& v) {
         if (v == "strong") {
           c.run.model.ansatz.entanglement = qsim::Entanglement::Strong;
         } else if (v == "basic") {
           c.run.model.ansatz.entanglement = qsim::Entanglement::Basic;
         } else {
           bad("entanglement", v, "expected basic or strong");
         }
       },
       [](const AppConfig& c) {
         return std::string(c.run.model.ansatz.entanglement == qsim::Entanglement::Strong ? "strong"
                                                                                          : "basic");
       }},
      {"qubits",
       [](AppConfig& c, const std::string& v) {
         const int n = parse_int("qubits", v);
         if (n < 2 || n > 24) bad("qubits", v, "must be in [2, 24]");
         c.run.model.ansatz.n_qubits = n;
       },
       [](const AppConfig& c) { return std::to_string(c.run.model.ansatz.n_qubits); }},
      MADQRL_INT_KEY("layers", run.model.ansatz.n_layers, parse_positive),
      {"hybrid_layers",
       [](AppConfig& c, const std::string& v) {
         const int n = parse_positive("hybrid_layers", v);
         c.run.model.n_hybrid_layers = n;
         const int width = c.run.model.hidden_dims.empty() ? 16 : c.run.model.hidden_dims.front();
         if (!c.explicit_keys.count("hidden_dims")) c.run.model.hidden_dims.assign(static_cast<std::size_t>(n), width);
       },
       [](const AppConfig& c) { return std::to_string(c.run.model.n_hybrid_layers); }},
      {"hidden_dims",
       [](AppConfig& c, const std::string& v) {
         std::vector<int> dims;
         for (const auto& p : split(v, ',')) dims.push_back(parse_positive("hidden_dims", p));
         if (dims.empty()) bad("hidden_dims", v, "needs at least one width");
         c.run.model.hidden_dims = dims;
       },
       [](const AppConfig& c) { return join_ints(c.run.model.hidden_dims); }},
      {"conv",
       [](AppConfig& c, const std::string& v) {
         std::vector<policy::ConvSpec> conv;
         if (v != "none") {
           for (const auto& layer : split(v, ',')) {
             const auto f = split(layer, ':');
             if (f.size() != 3) bad("conv", v, "expected channels:kernel:stride[,...] or none");
             conv.push_back({parse_positive("conv", f[0]), parse_positive("conv", f[1]),
                             parse_positive("conv", f[2])});
           }
         }
         c.run.model.conv = conv;
       },
       [](const AppConfig& c) {
         if (c.run.model.conv.empty()) return std::string("none");
         std::string out;
         for (std::size_t i = 0; i < c.run.model.conv.size(); ++i) {
           const auto& l = c.run.model.conv[i];
           out += (i ? "," : "") + std::to_string(l.channels) + ":" + std::to_string(l.kernel) + ":" +
                  std::to_string(l.stride);
         }
         return out;
       }},
      {"iterations",
       [](AppConfig& c, const std::string& v) {
         c.iterations = parse_non_negative("iterations", v);
         c.run.ppo.total_iterations = c.iterations;
       },
       [](const AppConfig& c) { return std::to_string(c.iterations); }},
      MADQRL_INT_KEY("batch_size", run.ppo.batch_size, parse_positive),
      MADQRL_INT_KEY("minibatch_size", run.ppo.minibatch_size, parse_positive),
      MADQRL_INT_KEY("epochs", run.ppo.epochs_per_iter, parse_positive),
      MADQRL_DOUBLE_KEY("gamma", run.ppo.gamma, x > 0.0 && x < 1.0, "must be in (0, 1)"),
      MADQRL_DOUBLE_KEY("clip_eps", run.ppo.clip_eps, x > 0.0, "must be positive"),
      MADQRL_DOUBLE_KEY("lr", run.ppo.lr, x > 0.0, "must be positive"),
      MADQRL_DOUBLE_KEY("gae_lambda", run.ppo.gae_lambda, x >= 0.0 && x <= 1.0, "must be in [0, 1]"),
      MADQRL_DOUBLE_KEY("vf_coef", run.ppo.vf_coef, x >= 0.0, "must be >= 0"),
      MADQRL_DOUBLE_KEY("entropy_coef", run.ppo.entropy_coef, x >= 0.0, "must be >= 0"),
      MADQRL_DOUBLE_KEY("kl_coef", run.ppo.kl_coef, x >= 0.0, "must be >= 0"),
      MADQRL_DOUBLE_KEY("max_grad_norm", run.ppo.max_grad_norm, x == x, "must be a number"),
      {"normalize_advantages",
       [](AppConfig& c, const std::string& v) {
         c.run.ppo.normalize_advantages = parse_bool("normalize_advantages", v);
       },
       [](const AppConfig& c) { return std::string(c.run.ppo.normalize_advantages ? "true" : "false"); }},
      {"seed",
       [](AppConfig& c, const std::string& v) { c.run.seed = parse_number<std::uint64_t>("seed", v); },
       [](const AppConfig& c) { return std::to_string(c.run.seed); }},
      MADQRL_INT_KEY("workers", run.n_workers, parse_positive),
      MADQRL_INT_KEY("threads", run.threads, parse_non_negative),
      {"steps_per_worker",
       [](AppConfig& c, const std::string& v) {
         if (v == "auto") {
           c.run.steps_per_worker.reset();
         } else {
           c.run.steps_per_worker = parse_positive("steps_per_worker", v);
         }
       },
       [](const AppConfig& c) {
         return c.run.steps_per_worker ? std::to_string(*c.run.steps_per_worker) : std::string("auto");
       }},
      MADQRL_INT_KEY("eval_every", run.eval_every, parse_non_negative),
      MADQRL_INT_KEY("eval_episodes", run.eval_episodes, parse_positive),
      MADQRL_INT_KEY("checkpoint_every", run.checkpoint_every, parse_non_negative),
      {"output_dir", [](AppConfig& c, const std::string& v) { c.run.output_dir = v; },
       [](const AppConfig& c) { return c.run.output_dir.string(); }},
      {"deterministic",
       [](AppConfig& c, const std::string& v) { c.run.deterministic = parse_bool("deterministic", v); },
       [](const AppConfig& c) { return std::string(c.run.deterministic ? "true" : "false"); }},
      MADQRL_INT_KEY("arena_w", run.env.arena_w, parse_positive),
      MADQRL_INT_KEY("arena_h", run.env.arena_h, parse_positive),
      MADQRL_INT_KEY("obs_w", run.env.obs_w, parse_positive),
      MADQRL_INT_KEY("obs_h", run.env.obs_h, parse_positive),
      MADQRL_DOUBLE_KEY("paddle_speed", run.env.paddle_speed, x > 0.0, "must be positive"),
      MADQRL_DOUBLE_KEY("ball_speed", run.env.ball_speed, x > 0.0, "must be positive"),
      MADQRL_DOUBLE_KEY("paddle_length", run.env.paddle_length, x > 0.0, "must be positive"),
      MADQRL_DOUBLE_KEY("paddle_thickness", run.env.paddle_thickness, x > 0.0, "must be positive"),
      MADQRL_DOUBLE_KEY("ball_radius", run.env.ball_radius, x > 0.0, "must be positive"),
      MADQRL_DOUBLE_KEY("cake_deflection", run.env.cake_deflection, x >= 0.0, "must be >= 0"),
      MADQRL_DOUBLE_KEY("max_bounce_angle", run.env.max_bounce_angle, x > 0.0, "must be positive"),
      MADQRL_INT_KEY("max_cycles", run.env.max_cycles, parse_positive),
  };
  return keys;
}

#undef MADQRL_DOUBLE_KEY
#undef MADQRL_INT_KEY

const Key* find_key(const std::string& name) {
  for (const auto& k : key_table()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

}  // namespace

AppConfig default_config(bool desk) {
  AppConfig c;
  auto& m = c.run.model;
  m.kind = policy::ModelKind::HybridQNN;
  m.n_hybrid_layers = 3;
  m.hidden_dims = {16, 16, 16};
  c.run.eval_episodes = 100;
  c.run.output_dir = "madqrl_run";
  if (!desk) {
    m.ansatz = {13, 9, qsim::Entanglement::Strong};
    m.conv = {{8, 4, 2}, {32, 4, 2}};
    c.iterations = 15000;
    c.run.env = pong::EnvConfig{};
    c.run.checkpoint_every = 100;
    c.run.eval_every = 500;
  } else {
    m.ansatz = {4, 2, qsim::Entanglement::Strong};
    m.n_hybrid_layers = 1;
    m.hidden_dims = {16};
    m.conv = {{8, 3, 2}, {12, 3, 2}};
    c.iterations = 300;
    c.run.env = pong::desk_config();
    c.run.checkpoint_every = 50;
    c.run.eval_every = 0;
    c.run.ppo.lr = 3e-3;
    c.run.ppo.entropy_coef = 0.01;
    c.run.ppo.kl_coef = 0.0;
    c.run.ppo.gamma = 0.99;
    c.run.ppo.epochs_per_iter = 10;
    c.run.ppo.batch_size = 1024;
    c.run.ppo.minibatch_size = 256;
  }
  c.run.ppo.total_iterations = c.iterations;
  return c;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& k : key_table()) out.push_back(k.name);
    return out;
  }();
  return names;
}

void apply_setting(AppConfig& config, const std::string& key, const std::string& value) {
  const Key* k = find_key(key);
  if (!k) throw UsageError("unknown configuration key '" + key + "'");
  k->set(config, trim(value));
  config.explicit_keys.insert(key);
}

void apply_config_text(AppConfig& config, const std::string& text, const std::string& source) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(source + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_setting(config, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(AppConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str(), path.string());
}

std::string dump_config(const AppConfig& config) {
  std::string out;
  for (const auto& k : key_table()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

void validate(const AppConfig& config) {
  const bool classical = config.run.model.kind == policy::ModelKind::ClassicalCNN;
  for (const char* key : {"qubits", "layers", "entanglement", "hybrid_layers"}) {
    if (classical && config.explicit_keys.count(key)) {
      throw UsageError(std::string(key) + " conflicts with model = classical");
    }
  }
  if (!classical && config.explicit_keys.count("conv")) {
    throw UsageError("conv conflicts with model = quantum");
  }
  try {
    config.run.validate();
    marl::model_for(config.run.strategy, config.run.model, config.run.env.obs_h, config.run.env.obs_w).validate();
  } catch (const ValidationError& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }
}

std::string manifest_text(const AppConfig& config) {
  return "# madqrl run manifest\nformat_version = " + std::to_string(kManifestFormat) + "\n" +
         dump_config(config);
}

AppConfig load_manifest(const std::filesystem::path& run_dir) {
  const auto path = run_dir / "manifest.txt";
  std::ifstream in(path);
  if (!in) throw IoError("run manifest missing or unreadable: " + path.string());
  std::stringstream body;
  std::string line;
  bool versioned = false;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos && trim(line.substr(0, eq)) == "format_version") {
      if (trim(line.substr(eq + 1)) != std::to_string(kManifestFormat)) {
        throw IoError("unsupported manifest format in " + path.string());
      }
      versioned = true;
      continue;
    }
    body << line << '\n';
  }
  if (!versioned) throw IoError("manifest " + path.string() + " has no format_version");
  AppConfig config = default_config(false);
  try {
    apply_config_text(config, body.str(), path.string());
  } catch (const UsageError& e) {
    throw IoError(std::string("corrupt manifest: ") + e.what());
  }
  config.explicit_keys.clear();
  return config;
}

}  // namespace madqrl::cli
