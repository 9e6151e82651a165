#include <fstream>
#include <json.hpp>

#include "madqrl/errors.hpp"
#include "madqrl/runtime.hpp"

namespace madqrl::runtime {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json spec_to_json(const policy::ModelSpec& s) {
  json conv = json::array();
  for (const auto& c : s.conv) conv.push_back({{"channels", c.channels}, {"kernel", c.kernel}, {"stride", c.stride}});
  return {{"kind", policy::to_string(s.kind)},
          {"n_hybrid_layers", s.n_hybrid_layers},
          {"n_qubits", s.ansatz.n_qubits},
          {"n_layers", s.ansatz.n_layers},
          {"entanglement", s.ansatz.entanglement == qsim::Entanglement::Strong ? "strong" : "basic"},
          {"obs_h", s.obs_h},
          {"obs_w", s.obs_w},
          {"n_actions", s.n_actions},
          {"hidden_dims", s.hidden_dims},
          {"conv", conv},
          {"critic_only", s.critic_only}};
}

policy::ModelSpec spec_from_json(const json& j) {
  policy::ModelSpec s;
  s.kind = j.at("kind").get<std::string>() == "quantum" ? policy::ModelKind::HybridQNN
                                                         : policy::ModelKind::ClassicalCNN;
  s.n_hybrid_layers = j.at("n_hybrid_layers").get<int>();
  s.ansatz.n_qubits = j.at("n_qubits").get<int>();
  s.ansatz.n_layers = j.at("n_layers").get<int>();
  s.ansatz.entanglement = j.at("entanglement").get<std::string>() == "strong" ? qsim::Entanglement::Strong
                                                                              : qsim::Entanglement::Basic;
  s.obs_h = j.at("obs_h").get<int>();
  s.obs_w = j.at("obs_w").get<int>();
  s.n_actions = j.at("n_actions").get<int>();
  s.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
  for (const auto& c : j.at("conv")) {
    s.conv.push_back({c.at("channels").get<int>(), c.at("kernel").get<int>(), c.at("stride").get<int>()});
  }
  s.critic_only = j.at("critic_only").get<bool>();
  return s;
}

void write_atomic(const fs::path& path, const json& j) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << j.dump();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("checkpoint file missing or unreadable: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint file " + path.string() + ": " + e.what());
  }
}

}  // namespace

void save_checkpoint(const fs::path& dir, const Checkpoint& cp) {
  fs::create_directories(dir);
  const auto& ps = cp.policies;
  if (cp.optimizers.size() != ps.sets.size()) {
    throw ShapeError("checkpoint needs one optimizer state per parameter set");
  }
  json names = json::array();
  for (std::size_t i = 0; i < ps.sets.size(); ++i) {
    const auto& set = ps.sets[i];
    const auto& opt = cp.optimizers[i];
    json j = {{"name", set.name},
              {"model", spec_to_json(set.model->spec())},
              {"params", set.params},
              {"adam", {{"m", opt.m}, {"v", opt.v}, {"step", opt.step}}}};
    write_atomic(dir / (set.name + ".json"), j);
    names.push_back(set.name);
  }
  const auto& actor = ps.sets[static_cast<std::size_t>(ps.learners.at(0).actor_set)];
  write_atomic(dir / "state.json", {{"format_version", kCheckpointFormat},
                                    {"iteration", cp.iteration},
                                    {"strategy", marl::to_string(ps.strategy.kind)},
                                    {"actor_model", spec_to_json(actor.model->spec())},
                                    {"sets", names}});
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const auto state_path = dir / "state.json";
  const json state = read_json(state_path);
  Checkpoint cp;
  try {
    if (state.at("format_version").get<int>() != kCheckpointFormat) {
      throw IoError("unsupported checkpoint format in " + state_path.string());
    }
    cp.iteration = state.at("iteration").get<int>();
    const marl::StrategySpec strategy{marl::parse_strategy(state.at("strategy").get<std::string>())};
    cp.policies = marl::make_policies(strategy, spec_from_json(state.at("actor_model")), 0);
    const auto names = state.at("sets").get<std::vector<std::string>>();
    if (names.size() != cp.policies.sets.size()) {
      throw IoError("checkpoint " + state_path.string() + " lists the wrong number of parameter sets");
    }
    cp.optimizers.resize(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
      auto& set = cp.policies.sets[i];
      const auto path = dir / (names[i] + ".json");
      const json j = read_json(path);
      try {
        if (j.at("name").get<std::string>() != set.name || spec_from_json(j.at("model")) != set.model->spec()) {
          throw IoError("checkpoint file " + path.string() + " does not match the saved strategy");
        }
        auto params = j.at("params").get<std::vector<double>>();
        if (params.size() != set.params.size()) {
          throw IoError("checkpoint file " + path.string() + " has the wrong parameter count");
        }
        set.params = std::move(params);
        const auto& adam = j.at("adam");
        auto& opt = cp.optimizers[i];
        opt.m = adam.at("m").get<std::vector<double>>();
        opt.v = adam.at("v").get<std::vector<double>>();
        opt.step = adam.at("step").get<std::int64_t>();
      } catch (const json::exception& e) {
        throw IoError("corrupt checkpoint file " + path.string() + ": " + e.what());
      }
    }
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint file " + state_path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw IoError("invalid checkpoint in " + state_path.string() + ": " + e.what());
  }
  return cp;
}

}  // namespace madqrl::runtime
