// causarm command-line tool: data generation, model training, mental
// simulation, attribution reports, and the end-to-end pipeline.

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "causarm/attribution.hpp"
#include "causarm/forward_model.hpp"
#include "causarm/inverse_model.hpp"
#include "causarm/pipeline.hpp"
#include "causarm/sim.hpp"
#include "causarm/svg.hpp"

namespace {

using namespace causarm;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;
constexpr int kExitAttribution = 5;

struct GenArgs {
  std::string mode = "kinematics";
  std::size_t steps = 20000;
  std::size_t episodes = 40;
  std::size_t iterations = 500;
  std::size_t substeps = 10;
  double sigma_scale = -1.0;  // negative = mode default
  std::string center;         // empty = mode default
  bool babble_joint6 = false;
  std::uint64_t seed = 42;
  std::string out = "transitions.csv";
  std::string chain_file;
};

ChainConfig load_chain_or_default(const std::string& path) {
  return path.empty() ? ChainConfig::defaults() : load_chain_config(path);
}

int cmd_gen(const GenArgs& a) {
  ChainConfig chain = load_chain_or_default(a.chain_file);
  BabbleConfig cfg;
  if (a.mode == "kinematics") {
    cfg = BabbleConfig::kinematics(a.steps, a.seed);
  } else if (a.mode == "physics") {
    cfg = BabbleConfig::physics(a.episodes, a.iterations, a.seed, chain.chain.dof());
    if (a.babble_joint6 && cfg.joint_mask.size() >= 7) cfg.joint_mask[6] = true;
  } else {
    throw ConfigError("invalid mode '" + a.mode + "' (kinematics|physics)");
  }
  cfg.substeps = a.substeps;
  if (a.sigma_scale > 0.0) cfg.sigma_scale = a.sigma_scale;
  if (!a.center.empty()) {
    if (a.center == "midpoint")
      cfg.center = BabbleCenter::kMidpoint;
    else if (a.center == "current")
      cfg.center = BabbleCenter::kCurrent;
    else
      throw ConfigError("invalid center '" + a.center + "' (midpoint|current)");
  }
  cfg.validate();

  PhysicsSessionLog log;
  TransitionSet set = run_session(chain, cfg, &log);
  write_transition_set(set, a.out);
  std::cout << "wrote " << set.records.size() << " transitions (seed " << a.seed
            << ") to " << a.out << "\n";
  if (log.skipped_episodes > 0)
    std::cout << "warning: " << log.skipped_episodes
              << " episode(s) skipped after reach retries\n";
  return 0;
}

struct TrainArgs {
  std::string role;
  std::string data;
  std::string out = "model.json";
  std::string cv_out = "cv_report.csv";
  std::string loss_out = "loss_history.csv";
  std::vector<std::size_t> hidden;
  long epochs = -1;
  std::size_t batch = 0;
  std::string opt;
  double eta = -1.0;
  double lambda = -1.0;
  double beta1 = -1.0;
  double beta2 = -1.0;
  bool cosine = false;
  bool no_cosine = false;
  std::size_t kfold = 5;
  std::uint64_t seed = 42;
  bool normalize = false;
  std::string activation = "tanh";
};

// Role defaults mirror the published training setups; flags override.
void apply_role_defaults(const std::string& role, const std::string& schema_version,
                         const TrainArgs& a, ModelTrainSpec& spec) {
  const bool phys = schema_version == "phys-v1";
  if (role == "fm") {
    spec.hidden = default_fm_widths(schema_version);
    spec.epochs = phys ? 100 : 60;
    spec.batch_size = phys ? 64 : 32;
    spec.opt.kind = OptimizerKind::kAdam;
    spec.opt.beta2 = 0.99;
    spec.opt.cosine_eta_decay = true;
  } else if (role == "im-mono") {
    spec.hidden = {256, 256, 256, 256};
    spec.epochs = 1000;
    spec.opt.kind = OptimizerKind::kAdamW;
    spec.opt.lambda = 0.004;
    spec.opt.cosine_eta_decay = true;
  } else if (role == "im-base") {
    spec.hidden = {128, 128};
    spec.epochs = 100;
    spec.opt.kind = OptimizerKind::kAdam;
    spec.opt.cosine_eta_decay = true;
  } else if (role == "im-pre") {
    spec.hidden = {256, 256, 256, 256};
    spec.epochs = 4000;
    spec.opt.kind = OptimizerKind::kAdamW;
    spec.opt.lambda = 0.004;
    spec.opt.cosine_eta_decay = true;
  } else {
    throw ConfigError("invalid role '" + role + "' (fm|im-mono|im-pre|im-base)");
  }
  spec.opt.eta = 1e-3;
  if (!a.hidden.empty()) spec.hidden = a.hidden;
  if (a.epochs >= 0) spec.epochs = static_cast<std::size_t>(a.epochs);
  if (a.batch > 0) spec.batch_size = a.batch;
  if (!a.opt.empty())
    spec.opt.kind = a.opt == "adamw" ? OptimizerKind::kAdamW : OptimizerKind::kAdam;
  if (a.eta > 0.0) spec.opt.eta = a.eta;
  if (a.lambda >= 0.0) spec.opt.lambda = a.lambda;
  if (a.beta1 >= 0.0) spec.opt.beta1 = a.beta1;
  if (a.beta2 >= 0.0) spec.opt.beta2 = a.beta2;
  if (a.cosine) spec.opt.cosine_eta_decay = true;
  if (a.no_cosine) spec.opt.cosine_eta_decay = false;
  spec.normalize = a.normalize;
}

int cmd_train(const TrainArgs& a) {
  if (a.kfold < 2) throw ConfigError("--kfold must be >= 2");
  TransitionSet set = read_transition_set(a.data);
  ModelTrainSpec spec;
  apply_role_defaults(a.role, set.manifest.schema_version, a, spec);
  TrainConfig cfg = spec.train_config(a.seed);

  ModelFile file;
  std::vector<CvRow> cv;
  std::vector<EpochLoss> history;
  MlpSpec net_spec;
  if (a.role == "fm") {
    ForwardModel fm =
        build_fm(set.manifest.state, set.manifest.action, spec.hidden, a.seed);
    train_fm(fm, set, cfg, spec.opt, a.kfold, spec.normalize);
    file = fm_to_model_file(fm);
    cv = fm.core.cv;
    history = fm.core.history;
    net_spec = fm.core.params.spec;
  } else {
    const Activation act = activation_from_name(a.activation);
    InverseModel im;
    if (a.role == "im-mono")
      im = train_im_monolithic(set, cfg, spec.opt, a.kfold, spec.hidden, act);
    else if (a.role == "im-base")
      im = train_base_im(set, cfg, spec.opt, a.kfold, spec.hidden, act);
    else
      im = train_pre_network(set, cfg, spec.opt, a.kfold, spec.hidden);
    file = im_to_model_file(im);
    cv = im.core.cv;
    history = im.core.history;
    net_spec = im.core.params.spec;
  }
  save_model(file, a.out);
  write_text_file(a.cv_out, cv_report_csv(cv));
  write_text_file(a.loss_out, loss_history_csv(net_spec, history));
  std::cout << "trained " << a.role << " on " << set.records.size()
            << " transitions; model -> " << a.out << ", cv -> " << a.cv_out << "\n";
  for (const auto& head : net_spec.heads) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& row : cv)
      if (row.head == head.name) {
        acc += row.mae;
        ++n;
      }
    if (n > 0)
      std::cout << "  cv MAE " << head.name << " = " << fmt_short(acc / n) << "\n";
  }
  return 0;
}

struct RolloutArgs {
  std::string fm;
  std::string data;
  std::size_t horizon = 10;
  std::size_t trajectories = 500;
  std::string out_dir = ".";
};

int cmd_rollout(const RolloutArgs& a) {
  TransitionSet set = read_transition_set(a.data);
  ModelFile file = load_model(a.fm);
  ForwardModel fm = fm_from_model_file(file, set.manifest.state, set.manifest.action);
  RolloutEval ev = eval_rollout(fm, set, a.horizon, a.trajectories);

  std::filesystem::create_directories(a.out_dir);
  write_text_file(std::filesystem::path(a.out_dir) / "rollout.csv", rollout_csv(ev));
  std::vector<svg::LineSeries> series;
  for (std::size_t k = 0; k < ev.subvectors.size(); ++k) {
    svg::LineSeries s;
    s.label = ev.subvectors[k];
    for (std::size_t t = 0; t < ev.horizon; ++t) {
      s.x.push_back(static_cast<double>(t + 1));
      s.y.push_back(ev.mae_mean(t, k));
      s.band.push_back(ev.mae_std(t, k));
    }
    series.push_back(std::move(s));
  }
  write_text_file(std::filesystem::path(a.out_dir) / "rollout.svg",
                  svg::line_chart("mental simulation error", "steps ahead", "MAE",
                                  series));
  std::cout << "rollout over " << ev.trajectories << " trajectories (skipped "
            << ev.skipped << " short runs); report -> " << a.out_dir << "\n";
  return 0;
}

struct ExplainArgs {
  std::string fm;
  std::string data;
  std::size_t sample = 200;
  std::size_t background = 100;
  std::string method = "deep";
  std::size_t budget = 2048;
  std::uint64_t seed = 42;
  double threshold = 0.05;
  std::string out_dir = ".";
  std::vector<std::string> pdp;
};

int cmd_explain(const ExplainArgs& a) {
  TransitionSet set = read_transition_set(a.data);
  ModelFile file = load_model(a.fm);
  ForwardModel fm = fm_from_model_file(file, set.manifest.state, set.manifest.action);

  AttributionSettings st;
  st.method = attribution_method_from_name(a.method);
  st.scope = AttributionScope::kAllInputs;
  st.sample_size = a.sample;
  st.background_size = a.background;
  st.coalition_budget = a.budget;
  st.seed = a.seed;
  AttributionTensor full = attribute_dataset(fm, set, st);
  AttributionTensor actions = slice_tensor(full, fm.state_schema.total_dim());
  GlobalImportance global = aggregate_global(actions);
  auto relevance = relevance_report(global, a.threshold);

  namespace fs = std::filesystem;
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  write_text_file(dir / "phi.csv", phi_csv(actions));
  write_text_file(dir / "global.csv", global_csv(global));
  write_text_file(dir / "global_normalized.csv", global_csv(column_normalized(global)));
  write_text_file(dir / "relevance.csv", relevance_csv(relevance));
  write_text_file(dir / "heatmap.svg",
                  svg::heatmap("action-to-state contribution magnitude",
                               global.input_labels, global.output_labels, global.m));

  std::vector<PdpPair> pairs;
  if (a.pdp.empty()) {
    if (set.manifest.schema_version == "phys-v1")
      pairs = {{"a0", "th0"}, {"a0", "o_x"}, {"a2", "o_B"}, {"a_mgt", "o_z"}};
    else
      pairs = {{"a0", "th0"}, {"a0", "ef_x"}};
  } else {
    for (const auto& spec : a.pdp) {
      const auto colon = spec.find(':');
      if (colon == std::string::npos)
        throw ConfigError("--pdp expects input:output, got '" + spec + "'");
      pairs.push_back({spec.substr(0, colon), spec.substr(colon + 1)});
    }
  }
  for (const auto& pair : pairs) {
    std::size_t ii = actions.input_labels.size(), oo = actions.output_labels.size();
    for (std::size_t i = 0; i < actions.input_labels.size(); ++i)
      if (actions.input_labels[i] == pair.input) ii = i;
    for (std::size_t o = 0; o < actions.output_labels.size(); ++o)
      if (actions.output_labels[o] == pair.output) oo = o;
    if (ii == actions.input_labels.size() || oo == actions.output_labels.size()) {
      std::cout << "pdp pair " << pair.input << ":" << pair.output
                << " not in schema; skipped\n";
      continue;
    }
    auto series = pdp_series(actions, ii, oo);
    const std::string stem = "pdp_" + pair.input + "_" + pair.output;
    write_text_file(dir / (stem + ".csv"), pdp_csv(series));
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : series) pts.emplace_back(p.input_value, p.phi);
    write_text_file(dir / (stem + ".svg"),
                    svg::scatter(pair.input + " contribution to " + pair.output,
                                 pair.input, "phi", pts));
  }
  std::cout << "attribution over " << actions.instances() << " instances ("
            << a.method << "); report -> " << a.out_dir << "\n";
  return 0;
}

struct PipelineArgs {
  std::string config;
  std::string out_dir;
  long seed = -1;
};

int cmd_pipeline(const PipelineArgs& a) {
  PipelineConfig cfg = PipelineConfig::desk_defaults();
  if (!a.config.empty()) {
    try {
      cfg = pipeline_config_from_json(nlohmann::json::parse(read_text_file(a.config)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("pipeline config: " + std::string(e.what()));
    }
  }
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  PipelineResult result = run_pipeline(cfg, &std::cout);
  std::size_t passed = 0, evaluated = 0;
  for (const auto& c : result.checks) {
    if (c.status == CheckStatus::kSkip) continue;
    ++evaluated;
    if (c.status == CheckStatus::kPass) ++passed;
  }
  std::cout << "summary: " << passed << "/" << evaluated
            << " checks passed; see " << (cfg.out_dir / "summary.txt").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motor babbling -> forward/inverse models -> attribution reports"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* cmd_g = app.add_subcommand("gen", "generate a motor-babbling transition set");
  cmd_g->add_option("--mode", gen.mode, "kinematics|physics")->capture_default_str();
  cmd_g->add_option("--steps", gen.steps, "kinematics steps")->capture_default_str();
  cmd_g->add_option("--episodes", gen.episodes, "physics episodes")->capture_default_str();
  cmd_g->add_option("--iterations", gen.iterations, "iterations per episode")
      ->capture_default_str();
  cmd_g->add_option("--substeps", gen.substeps)->capture_default_str();
  cmd_g->add_option("--sigma-scale", gen.sigma_scale,
                    "babble std as a fraction of half-range");
  cmd_g->add_option("--center", gen.center, "midpoint|current");
  cmd_g->add_flag("--babble-joint6", gen.babble_joint6,
                  "physics mode: let joint 6 babble too");
  cmd_g->add_option("--seed", gen.seed)->capture_default_str();
  cmd_g->add_option("--out", gen.out)->capture_default_str();
  cmd_g->add_option("--chain", gen.chain_file, "chain/world config file");

  TrainArgs train;
  auto* cmd_t = app.add_subcommand("train", "train a forward or inverse model");
  cmd_t->add_option("--role", train.role, "fm|im-mono|im-pre|im-base")->required();
  cmd_t->add_option("--data", train.data, "transition CSV")->required();
  cmd_t->add_option("--out", train.out)->capture_default_str();
  cmd_t->add_option("--cv-out", train.cv_out)->capture_default_str();
  cmd_t->add_option("--loss-out", train.loss_out)->capture_default_str();
  cmd_t->add_option("--hidden", train.hidden, "hidden layer widths (e.g. 160,160)")
      ->delimiter(',');
  cmd_t->add_option("--epochs", train.epochs);
  cmd_t->add_option("--batch", train.batch);
  cmd_t->add_option("--opt", train.opt, "adam|adamw");
  cmd_t->add_option("--eta", train.eta);
  cmd_t->add_option("--lambda", train.lambda);
  cmd_t->add_option("--beta1", train.beta1);
  cmd_t->add_option("--beta2", train.beta2);
  cmd_t->add_flag("--cosine-decay", train.cosine);
  cmd_t->add_flag("--no-cosine-decay", train.no_cosine);
  cmd_t->add_option("--kfold", train.kfold)->capture_default_str();
  cmd_t->add_option("--seed", train.seed)->capture_default_str();
  cmd_t->add_flag("--normalize", train.normalize, "z-score inputs");
  cmd_t->add_option("--activation", train.activation,
                    "hidden activation for inverse models (tanh|relu)")
      ->capture_default_str();

  RolloutArgs roll;
  auto* cmd_r = app.add_subcommand("rollout", "chained mental-simulation evaluation");
  cmd_r->add_option("--fm", roll.fm, "forward model file")->required();
  cmd_r->add_option("--data", roll.data, "ground-truth transition CSV")->required();
  cmd_r->add_option("--horizon", roll.horizon)->capture_default_str();
  cmd_r->add_option("--trajectories", roll.trajectories)->capture_default_str();
  cmd_r->add_option("--out-dir", roll.out_dir)->capture_default_str();

  ExplainArgs expl;
  auto* cmd_e = app.add_subcommand("explain", "Shapley attribution reports");
  cmd_e->add_option("--fm", expl.fm, "forward model file")->required();
  cmd_e->add_option("--data", expl.data, "transition CSV")->required();
  cmd_e->add_option("--sample", expl.sample)->capture_default_str();
  cmd_e->add_option("--background", expl.background)->capture_default_str();
  cmd_e->add_option("--method", expl.method, "deep|kernel|exact")->capture_default_str();
  cmd_e->add_option("--budget", expl.budget, "kernel coalition budget")
      ->capture_default_str();
  cmd_e->add_option("--seed", expl.seed)->capture_default_str();
  cmd_e->add_option("--threshold", expl.threshold, "relevance threshold fraction")
      ->capture_default_str();
  cmd_e->add_option("--out-dir", expl.out_dir)->capture_default_str();
  cmd_e->add_option("--pdp", expl.pdp, "input:output pairs (repeatable)");

  PipelineArgs pipe;
  auto* cmd_p = app.add_subcommand("pipeline", "gen -> train -> rollout -> explain");
  cmd_p->add_option("--config", pipe.config, "pipeline config JSON");
  cmd_p->add_option("--out-dir", pipe.out_dir, "override the report directory");
  cmd_p->add_option("--seed", pipe.seed, "override the seed");

  try {
    app.parse(argc, argv);
    if (cmd_g->parsed()) return cmd_gen(gen);
    if (cmd_t->parsed()) return cmd_train(train);
    if (cmd_r->parsed()) return cmd_rollout(roll);
    if (cmd_e->parsed()) return cmd_explain(expl);
    if (cmd_p->parsed()) return cmd_pipeline(pipe);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitTraining;
  } catch (const AttributionError& e) {
    std::cerr << "attribution error: " << e.what() << "\n";
    return kExitAttribution;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
