#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "madqrl/cli.hpp"
#include "madqrl/errors.hpp"
#include "madqrl/seeding.hpp"

namespace madqrl::cli {

namespace fs = std::filesystem;
using runtime::format_double;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_cell(const std::string& cell, const fs::path& path, int row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw IoError("bad value '" + cell + "' in " + path.string() + " row " + std::to_string(row));
  }
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

runtime::EvalMode parse_mode(const std::string& name) {
  if (name == "greedy") return runtime::EvalMode::Greedy;
  if (name == "sample") return runtime::EvalMode::Sample;
  if (name == "uniform") return runtime::EvalMode::Uniform;
  throw UsageError("invalid value '" + name + "' for mode: expected greedy, sample or uniform");
}

// Config flags attached to every command that builds a run configuration.
struct ConfigFlags {
  bool desk = false;
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App& app) {
    app.add_flag("--desk", desk, "Start from the small test-scale preset");
    app.add_option("--config", config_file, "Flat key = value configuration file");
    for (const auto& key : config_keys()) {
      options[key] = app.add_option("--" + dashed(key), values[key], "Sets " + key);
    }
  }

  void apply_flags(AppConfig& cfg) const {
    for (const auto& key : config_keys()) {
      if (options.at(key)->count() > 0) apply_setting(cfg, key, values.at(key));
    }
  }

  AppConfig build() const {
    AppConfig cfg = default_config(desk);
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    apply_flags(cfg);
    return cfg;
  }
};

std::string actor_counts(const InspectSummary& s) {
  std::size_t classical = 0;
  std::size_t quantum = 0;
  for (const auto& set : s.sets) {
    classical += set.classical;
    quantum += set.quantum;
  }
  return "classical " + std::to_string(classical) + ", quantum " + std::to_string(quantum) + ", total " +
         std::to_string(classical + quantum);
}

const runtime::EvalRecord* find_eval(const std::vector<runtime::EvalRecord>& evals, int iteration,
                                     runtime::EvalMode mode) {
  for (const auto& e : evals) {
    if (e.iteration == iteration && e.mode == mode) return &e;
  }
  return nullptr;
}

std::string eval_line(const std::string& what, const runtime::EvalResult& r) {
  return what + ": episodes " + std::to_string(r.episodes) + ", mean_episode_len " +
         fixed(r.mean_episode_len) + ", mean_return " + fixed(r.mean_return, 4);
}

std::string ordering_observation(const std::vector<MetricsTable>& runs, const std::vector<std::string>& labels) {
  std::vector<std::pair<double, std::string>> finals;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].mean_reward.empty()) continue;
    finals.emplace_back(moving_average(runs[i].mean_reward, 5).back(), labels[i]);
  }
  std::stable_sort(finals.begin(), finals.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::string out = "final mean reward (window-5 average):";
  for (const auto& [v, label] : finals) out += " " + label + " " + format_double(v) + ";";
  out += "\nobserved ordering:";
  for (std::size_t i = 0; i < finals.size(); ++i) out += (i ? " > " : " ") + finals[i].second;
  out += "\n";
  return out;
}

int cmd_train(const ConfigFlags& flags, bool resume, std::ostream& out) {
  AppConfig cfg;
  if (resume) {
    const AppConfig base = flags.build();
    cfg = load_manifest(base.run.output_dir);
    const std::string saved = dump_config(cfg);
    const int saved_iterations = cfg.iterations;
    AppConfig trial = cfg;
    if (!flags.config_file.empty()) apply_config_file(trial, flags.config_file);
    flags.apply_flags(trial);
    AppConfig same = trial;
    apply_setting(same, "iterations", std::to_string(saved_iterations));
    if (dump_config(same) != saved) {
      throw UsageError("only iterations may change when resuming; other settings conflict with " +
                       (base.run.output_dir / "manifest.txt").string());
    }
    cfg = trial;
  } else {
    cfg = flags.build();
  }
  validate(cfg);
  const fs::path dir = cfg.run.output_dir;
  fs::create_directories(dir);
  write_file(dir / "manifest.txt", manifest_text(cfg));

  runtime::Trainer trainer = resume ? runtime::Trainer::resume(cfg.run) : runtime::Trainer(cfg.run);
  const int start = trainer.iteration();
  const int total = cfg.iterations;
  const int every = std::max(1, (total - start) / 20);
  out << "training " << marl::to_string(cfg.run.strategy.kind) << "/" << policy::to_string(cfg.run.model.kind)
      << " from iteration " << start << " to " << total << " in " << dir.string() << "\n";
  trainer.train(total, [&](const runtime::IterationMetrics& m) {
    if (m.iteration % every == 0 || m.iteration == total) {
      out << "iteration " << m.iteration << " mean_reward " << format_double(m.mean_reward)
          << " mean_episode_len " << fixed(m.mean_episode_len) << "\n";
    }
  });

  const auto table = read_metrics_csv(dir / "metrics.csv");
  write_file(dir / "plot.svg", render_plot_svg({table}, {marl::to_string(cfg.run.strategy.kind)}));

  runtime::RunConfig eval_cfg = cfg.run;
  eval_cfg.output_dir.clear();
  const auto* base_rec = find_eval(trainer.evaluations(), 0, runtime::EvalMode::Sample);
  const runtime::EvalResult baseline =
      base_rec ? base_rec->result
               : runtime::evaluate(eval_cfg, *runtime::Trainer(eval_cfg).snapshot(), cfg.run.eval_episodes,
                                   runtime::EvalMode::Sample);
  const auto* final_rec = find_eval(trainer.evaluations(), trainer.iteration(), runtime::EvalMode::Greedy);
  const runtime::EvalResult final_eval =
      final_rec ? final_rec->result
                : runtime::evaluate(eval_cfg, *trainer.snapshot(), cfg.run.eval_episodes, runtime::EvalMode::Greedy);

  const InspectSummary summary = inspect(cfg);
  std::ostringstream report;
  report << "strategy = " << summary.strategy << "\nmodel = " << summary.model
         << "\niterations = " << trainer.iteration() << "\n";
  if (!table.iteration.empty()) {
    report << "final mean_reward = " << format_double(table.mean_reward.back())
           << "\nfinal mean_episode_len = " << fixed(table.mean_episode_len.back()) << "\n";
  }
  report << eval_line("baseline sample eval (iteration 0)", baseline) << "\n"
         << eval_line("final greedy eval (iteration " + std::to_string(trainer.iteration()) + ")", final_eval)
         << "\ntest episodes (final greedy mean episode length) = " << fixed(final_eval.mean_episode_len)
         << "\nimprovement over baseline = " << fixed(final_eval.mean_episode_len / baseline.mean_episode_len)
         << "x\n";
  if (const auto sat = sampling_saturation(table)) {
    const double pct = 100.0 * (*sat) / std::max(1, table.iteration.back());
    report << "sampling saturation = iteration " << *sat << " (" << fixed(pct, 1)
           << "% of iterations); defined here as the first iteration whose 50-iteration moving average of "
              "mean_reward reaches 95% of its final value\n";
  }
  report << "parameters: " << actor_counts(summary) << "\n";
  if (cfg.run.model.kind == policy::ModelKind::ClassicalCNN) {
    std::string conv = "none";
    for (std::size_t i = 0; i < cfg.run.model.conv.size(); ++i) {
      const auto& l = cfg.run.model.conv[i];
      conv = (i ? conv + "," : std::string()) + std::to_string(l.channels) + ":" + std::to_string(l.kernel) + ":" +
             std::to_string(l.stride);
    }
    AppConfig quantum = cfg;
    quantum.run.model.kind = policy::ModelKind::HybridQNN;
    double quantum_total = 0.0;
    for (const auto& set : inspect(quantum).sets) quantum_total += static_cast<double>(set.classical + set.quantum);
    double classical_total = 0.0;
    for (const auto& set : summary.sets) classical_total += static_cast<double>(set.classical);
    report << "conv stack (channels:kernel:stride) = " << conv << "; chosen size, "
           << fixed(classical_total / quantum_total) << "x the parameters of the matching quantum model\n";
  }
  for (const auto& note : summary.notes) report << "note: " << note << "\n";
  write_file(dir / "report.txt", report.str());
  out << report.str();
  return 0;
}

int cmd_eval(const ConfigFlags& flags, const fs::path& checkpoint, int episodes, const std::string& mode_name,
             const std::string& trajectory, std::string report, std::ostream& out) {
  if (checkpoint.empty()) throw UsageError("eval needs --checkpoint DIR");
  const auto mode = parse_mode(mode_name);
  const fs::path run_dir = checkpoint.parent_path();
  AppConfig cfg = default_config(flags.desk);
  if (fs::exists(run_dir / "manifest.txt")) cfg = load_manifest(run_dir);
  if (!flags.config_file.empty()) apply_config_file(cfg, flags.config_file);
  flags.apply_flags(cfg);
  if (episodes > 0) cfg.run.eval_episodes = episodes;
  validate(cfg);

  const runtime::Checkpoint cp = runtime::load_checkpoint(checkpoint);
  cfg.run.output_dir.clear();
  const auto result = runtime::evaluate(cfg.run, cp.policies, cfg.run.eval_episodes, mode);
  const std::string line = eval_line(std::string(runtime::to_string(mode)) + " eval of " + checkpoint.string() +
                                         " (iteration " + std::to_string(cp.iteration) + ")",
                                     result);
  out << line << "\n";
  if (!trajectory.empty()) {
    std::ofstream traj(trajectory, std::ios::trunc);
    if (!traj) throw IoError("cannot write " + trajectory);
    write_trajectory(cfg.run, cp.policies, mode, traj);
  }
  if (report.empty() && fs::exists(run_dir / "report.txt")) report = (run_dir / "report.txt").string();
  if (!report.empty()) {
    std::ofstream rep(report, std::ios::app);
    if (!rep) throw IoError("cannot append to " + report);
    rep << line << "\n";
  }
  return 0;
}

int cmd_plot(const std::vector<std::string>& files, std::vector<std::string> labels, const std::string& output,
             std::ostream& out) {
  if (files.empty()) throw UsageError("plot needs at least one metrics file");
  if (!labels.empty() && labels.size() != files.size()) {
    throw UsageError("plot needs one --label per metrics file");
  }
  if (labels.empty()) labels = files;
  std::vector<MetricsTable> runs;
  for (const auto& f : files) runs.push_back(read_metrics_csv(f));
  write_file(output, render_plot_svg(runs, labels));
  out << "wrote " << output << "\n" << ordering_observation(runs, labels);
  return 0;
}

}  // namespace

MetricsTable read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("metrics file missing or unreadable: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != runtime::kMetricsHeader) {
    throw IoError("unexpected metrics header in " + path.string());
  }
  MetricsTable t;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != split_csv_line(runtime::kMetricsHeader).size()) {
      throw IoError("wrong column count in " + path.string() + " row " + std::to_string(row));
    }
    t.iteration.push_back(static_cast<int>(parse_cell(cells[0], path, row)));
    t.mean_reward.push_back(parse_cell(cells[1], path, row));
    t.std_reward.push_back(parse_cell(cells[2], path, row));
    t.mean_episode_len.push_back(parse_cell(cells[3], path, row));
  }
  return t;
}

std::vector<double> moving_average(const std::vector<double>& values, int window) {
  if (window < 1) throw ValidationError("moving average window must be positive");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    sum += values[k];
    if (k >= static_cast<std::size_t>(window)) sum -= values[k - window];
    const std::size_t n = std::min(k + 1, static_cast<std::size_t>(window));
    out[k] = sum / static_cast<double>(n);
  }
  return out;
}

std::optional<int> sampling_saturation(const MetricsTable& table, int window, double fraction) {
  if (table.mean_reward.empty()) return std::nullopt;
  const auto ma = moving_average(table.mean_reward, window);
  const double target = fraction * ma.back();
  for (std::size_t k = 0; k < ma.size(); ++k) {
    if (ma[k] >= target) return table.iteration[k];
  }
  return table.iteration.back();
}

std::string render_plot_svg(const std::vector<MetricsTable>& runs, const std::vector<std::string>& labels) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  constexpr double width = 800, height = 480, left = 70, right = 160, top = 30, bottom = 50;
  const double pw = width - left - right;
  const double ph = height - top - bottom;

  double xmax = 1.0;
  double ymin = 0.0;
  double ymax = 0.0;
  std::vector<std::vector<double>> means, stds;
  for (const auto& r : runs) {
    means.push_back(moving_average(r.mean_reward, 5));
    stds.push_back(moving_average(r.std_reward, 5));
    for (std::size_t k = 0; k < r.iteration.size(); ++k) {
      xmax = std::max(xmax, static_cast<double>(r.iteration[k]));
      ymin = std::min(ymin, means.back()[k] - stds.back()[k]);
      ymax = std::max(ymax, means.back()[k] + stds.back()[k]);
    }
  }
  if (ymax <= ymin) ymax = ymin + 1.0;
  const auto sx = [&](double x) { return left + pw * x / xmax; };
  const auto sy = [&](double y) { return top + ph * (1.0 - (y - ymin) / (ymax - ymin)); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = ymin + (ymax - ymin) * i / 4.0;
    const double x = xmax * i / 4.0;
    svg << "<text x=\"" << left - 6 << "\" y=\"" << sy(y) + 4 << "\" text-anchor=\"end\">" << fixed(y, 3)
        << "</text>\n"
        << "<text x=\"" << sx(x) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << fixed(x, 0)
        << "</text>\n";
  }
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">iteration</text>\n"
      << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << top + ph / 2 << ")\">mean reward (moving average, window 5)</text>\n";

  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& it = runs[r].iteration;
    const char* color = colors[r % (sizeof(colors) / sizeof(colors[0]))];
    std::ostringstream band, line;
    for (std::size_t k = 0; k < it.size(); ++k) band << sx(it[k]) << "," << sy(means[r][k] + stds[r][k]) << " ";
    for (std::size_t k = it.size(); k-- > 0;) band << sx(it[k]) << "," << sy(means[r][k] - stds[r][k]) << " ";
    for (std::size_t k = 0; k < it.size(); ++k) line << sx(it[k]) << "," << sy(means[r][k]) << " ";
    svg << "<polygon points=\"" << band.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n"
        << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n"
        << "<rect x=\"" << left + pw + 12 << "\" y=\"" << top + 18 * r << "\" width=\"12\" height=\"12\" fill=\""
        << color << "\"/>\n"
        << "<text x=\"" << left + pw + 30 << "\" y=\"" << top + 18 * r + 10 << "\">"
        << xml_escape(r < labels.size() ? labels[r] : "run " + std::to_string(r)) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

InspectSummary inspect(const AppConfig& config) {
  const auto& run = config.run;
  InspectSummary s;
  s.strategy = marl::to_string(run.strategy.kind);
  s.model = policy::to_string(run.model.kind);
  const auto spec = marl::model_for(run.strategy, run.model, run.env.obs_h, run.env.obs_w);
  const auto policies = marl::make_policies(run.strategy, spec, 0);
  for (std::size_t i = 0; i < policies.sets.size(); ++i) {
    const auto& set = policies.sets[i];
    SetSummary ss;
    ss.name = set.name;
    const bool critic = policies.critic_set && *policies.critic_set == static_cast<int>(i);
    ss.role = critic ? "critic" : "actor";
    if (critic) {
      for (int a = 0; a < run.strategy.n_agents; ++a) ss.agents.push_back(a);
    } else {
      for (const auto& entry : policies.entries) {
        if (entry.set == static_cast<int>(i)) ss.agents.insert(ss.agents.end(), entry.agents.begin(), entry.agents.end());
      }
      std::sort(ss.agents.begin(), ss.agents.end());
    }
    const auto& layout = set.model->layout();
    ss.classical = layout.count(policy::ParamKind::Classical);
    ss.quantum = layout.count(policy::ParamKind::Quantum);
    for (const auto& slice : layout.slices()) {
      ss.layers.push_back({slice.layer, policy::to_string(slice.kind), slice.size});
    }
    s.sets.push_back(std::move(ss));
  }
  if (run.model.kind == policy::ModelKind::HybridQNN) {
    s.per_circuit = run.model.ansatz.parameter_count();
    s.quantum_closed_form = static_cast<std::size_t>(run.model.n_hybrid_layers) * s.per_circuit;
    s.notes.push_back("the quoted figure of 1170 tunable VQC parameters does not factor as qubits x layers x "
                      "rotations for these gate sets; a 13-qubit, 9-layer strong circuit has " +
                      std::to_string(13 * 9 * 2) + " per circuit and " + std::to_string(3 * 13 * 9 * 2) +
                      " over 3 hybrid layers, and this configuration has " + std::to_string(s.per_circuit) +
                      " per circuit and " + std::to_string(s.quantum_closed_form) + " per actor");
  }
  return s;
}

std::string format_inspect(const InspectSummary& s) {
  std::ostringstream os;
  os << "strategy: " << s.strategy << "\nmodel: " << s.model << "\n";
  for (const auto& set : s.sets) {
    os << "\nparameter set " << set.name << " (" << set.role << ", agents";
    for (int a : set.agents) os << " " << a;
    os << ")\n";
    for (const auto& l : set.layers) os << "  " << l.name << " [" << l.kind << "] " << l.count << "\n";
    os << "  classical " << set.classical << ", quantum " << set.quantum << ", total "
       << set.classical + set.quantum << "\n";
  }
  os << "\nownership:\n";
  for (const auto& set : s.sets) {
    os << "  " << set.name << " ->";
    for (int a : set.agents) os << " agent " << a;
    os << " (" << set.role << ")\n";
  }
  os << "\ntotal: " << actor_counts(s) << "\n";
  if (s.per_circuit > 0) {
    os << "quantum closed form: " << s.per_circuit << " per circuit, " << s.quantum_closed_form << " per actor\n";
  }
  for (const auto& note : s.notes) os << "note: " << note << "\n";
  return os.str();
}

void write_trajectory(const runtime::RunConfig& config, const marl::PolicySet& policies, runtime::EvalMode mode,
                      std::ostream& out) {
  const auto eval = static_cast<std::uint64_t>(SeedStream::Eval);
  pong::PongEnv env(config.env);
  env.reset(derive_seed({eval, config.seed, 0}));
  std::mt19937_64 rng(derive_seed({eval, config.seed, 0, 1}));
  pong::TrajectoryWriter writer(out);
  bool done = false;
  while (!done) {
    JointAction a{};
    if (mode == runtime::EvalMode::Uniform) {
      for (auto& m : a) m = static_cast<int>(rng() % 3) - 1;
    } else {
      a = marl::act(policies, marl::observe(env, policies.strategy), rng, mode == runtime::EvalMode::Greedy)
              .joint_action;
    }
    const auto st = env.step(a);
    writer.record(env.state(), a, st.rewards, st.done);
    done = st.done;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-agent hybrid quantum-classical PPO on cooperative Pong"};
  app.require_subcommand(1);

  ConfigFlags train_flags, eval_flags, inspect_flags;
  bool resume = false;
  auto* train = app.add_subcommand("train", "Train policies and write metrics, checkpoints, plot and report");
  train_flags.attach(*train);
  train->add_flag("--resume", resume, "Continue from <output-dir>/checkpoint");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_flags.attach(*eval);
  std::string checkpoint, mode = "greedy", trajectory, report;
  int episodes = 0;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory");
  eval->add_option("--episodes", episodes, "Number of evaluation episodes");
  eval->add_option("--mode", mode, "greedy, sample or uniform");
  eval->add_option("--trajectory", trajectory, "Write episode 0 as CSV");
  eval->add_option("--report", report, "Append the result to this file");

  auto* insp = app.add_subcommand("inspect", "Print parameter counts and ownership");
  inspect_flags.attach(*insp);

  auto* plot = app.add_subcommand("plot", "Plot one or more metrics files");
  std::vector<std::string> files, labels;
  std::string plot_out = "plot.svg";
  plot->add_option("files", files, "Metrics CSV files");
  plot->add_option("--label", labels, "Legend label, one per file");
  plot->add_option("--output", plot_out, "SVG output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(train_flags, resume, out);
    if (eval->parsed()) return cmd_eval(eval_flags, checkpoint, episodes, mode, trajectory, report, out);
    if (insp->parsed()) {
      AppConfig cfg = inspect_flags.build();
      validate(cfg);
      out << format_inspect(inspect(cfg));
      return 0;
    }
    if (plot->parsed()) return cmd_plot(files, labels, plot_out, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace madqrl::cli
