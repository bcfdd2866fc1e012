// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// pisces: command-line front end.
//
// Every subcommand resolves its parameters as defaults < --config JSON <
// explicit flags (seed additionally falls back to $PISCES_SEED), writes the
// result to <out>/resolved_config.json and then runs.
//
// Exit codes: 0 ok, 2 usage, 3 data/IO, 4 numeric.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pisces/pisces.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pisces;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return kExitUsage;
    case ErrorKind::data: return kExitData;
    case ErrorKind::numeric: return kExitNumeric;
  }
  return 1;
}

// One subcommand's parameter set. Flags are registered against typed
// storage; after parsing, only flags that actually appeared override.
class Params {
 public:
  Params(CLI::App* cmd, json defaults) : cmd_(cmd), values_(std::move(defaults)) {
    cmd_->add_option("--config", config_path_, "JSON file with parameter values");
    cmd_->add_option("--seed", seed_, "RNG seed (falls back to $PISCES_SEED)");
    cmd_->add_option("--out", out_, "output directory")->required();
  }

  template <class T>
  CLI::Option* flag(const std::string& name, const std::string& key, const std::string& help) {
    auto store = std::make_shared<T>();
    CLI::Option* o = cmd_->add_option(name, *store, help);
    overrides_.push_back([o, store, key](json& v) {
      if (o->count() > 0) v[key] = *store;
    });
    return o;
  }

  json resolve() {
    if (!config_path_.empty()) {
      json file;
      try {
        file = json::parse(io::read_file(config_path_));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::usage, "bad-config", config_path_ + ": " + e.what());
      }
      require(file.is_object(), ErrorKind::usage, "bad-config", "config file must hold a JSON object");
      for (const auto& [k, v] : file.items()) {
        require(values_.contains(k) || k == "seed", ErrorKind::usage, "unknown-key", "config key '" + k + "'");
        values_[k] = v;
      }
    }
    for (auto& f : overrides_) f(values_);
    if (cmd_->get_option("--seed")->count() > 0) {
      values_["seed"] = seed_;
    } else if (!values_.contains("seed")) {
      std::uint64_t s = 0;
      const char* env = std::getenv("PISCES_SEED");
      if (env && *env) {
        std::size_t pos = 0;
        try {
          s = std::stoull(env, &pos);
        } catch (const std::logic_error&) {
          pos = 0;
        }
        require(pos > 0 && pos == std::string(env).size(), ErrorKind::usage, "bad-seed",
                "PISCES_SEED must be an integer");
      } else {
        seed_defaulted_ = true;
      }
      values_["seed"] = s;
    }
    return values_;
  }

  const std::string& out() const { return out_; }
  // True when no flag, config entry or environment variable chose the seed.
  bool seed_defaulted() const { return seed_defaulted_; }

 private:
  CLI::App* cmd_;
  json values_;
  std::string config_path_;
  std::uint64_t seed_ = 0;
  std::string out_;
  bool seed_defaulted_ = false;
  std::vector<std::function<void(json&)>> overrides_;
};

template <class T>
T get(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::usage, "bad-config", "parameter '" + key + "': " + e.what());
  }
}

void prepare_out(const std::string& dir, const json& resolved) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::data, "io-error", "cannot create " + dir + ": " + ec.message());
  io::write_file((fs::path(dir) / "resolved_config.json").string(), resolved.dump(2) + "\n");
}

void write_out(const std::string& dir, const std::string& name, const std::string& bytes) {
  io::write_file((fs::path(dir) / name).string(), bytes);
}

// ---- subcommands ----------------------------------------------------------

struct SinkhornCmd {
  std::string cost;
  std::unique_ptr<Params> p;

  void setup(CLI::App& app) {
    auto* c = app.add_subcommand("sinkhorn", "partial entropic OT plan for a CSV cost matrix");
    c->add_option("cost", cost, "cost matrix CSV")->required();
    const PartialOTConfig d;
    p = std::make_unique<Params>(
        c, json{{"epsilon", d.epsilon}, {"mass", d.mass}, {"max_iters", d.max_iters}, {"tol", d.tol}});
    p->flag<double>("--epsilon", "epsilon", "entropic regularization");
    p->flag<double>("--mass", "mass", "transported mass fraction m in (0, 1]");
    p->flag<int>("--max-iters", "max_iters", "iteration cap K");
    p->flag<double>("--tol", "tol", "stopping tolerance");
    c->callback([this] { run(); });
  }

  void run() {
    json r = p->resolve();
    PartialOTConfig cfg;
    cfg.epsilon = get<double>(r, "epsilon");
    cfg.mass = get<double>(r, "mass");
    cfg.max_iters = get<int>(r, "max_iters");
    cfg.tol = get<double>(r, "tol");
    cfg.validate();
    r["cost"] = cost;
    prepare_out(p->out(), r);
    const Mat c = io::mat_from_csv(io::read_file(cost));
    const TransportPlan plan = solve_partial_ot(c, cfg);
    const Relaxation rel = mass_to_relaxation(cfg.mass, cfg.epsilon);
    write_out(p->out(), "plan.csv", io::mat_to_csv(plan.plan));
    const json diag = {{"iters_used", plan.iters_used},
                       {"converged", plan.converged},
                       {"marginal_residual", plan.marginal_residual},
                       {"transported_mass", plan.transported_mass},
                       {"plan_cost", plan_cost(plan, c)},
                       {"rho", rel.balanced() ? json("inf") : json(rel.rho)},
                       {"tau", rel.tau_a}};
    write_out(p->out(), "diagnostics.json", diag.dump(2) + "\n");
  }
};

struct CostCmd {
  std::string text, patches, attn;
  std::unique_ptr<Params> p;

  void setup(CLI::App& app) {
    auto* c = app.add_subcommand("cost", "spatio-temporal text/patch cost matrix from CSV inputs");
    c->add_option("text", text, "N x d text tokens CSV")->required();
    c->add_option("patches", patches, "M x d patch tokens CSV")->required();
    c->add_option("attention", attn, "N x M attention CSV (rows sum to 1)")->required();
    const CostWeights d;
    p = std::make_unique<Params>(
        c, json{{"frames", 1}, {"height", 1}, {"width", 1}, {"gamma", d.gamma}, {"eta", d.eta}});
    p->flag<std::size_t>("--frames", "frames", "F");
    p->flag<std::size_t>("--height", "height", "patch rows per frame");
    p->flag<std::size_t>("--width", "width", "patch columns per frame");
    p->flag<double>("--gamma", "gamma", "temporal weight");
    p->flag<double>("--eta", "eta", "spatial weight");
    c->callback([this] { run(); });
  }

  void run() {
    json r = p->resolve();
    const PatchGrid grid =
        PatchGrid::regular(get<std::size_t>(r, "frames"), get<std::size_t>(r, "height"), get<std::size_t>(r, "width"));
    const CostWeights wts{get<double>(r, "gamma"), get<double>(r, "eta")};
    r["text"] = text;
    r["patches"] = patches;
    r["attention"] = attn;
    prepare_out(p->out(), r);
    const CostMatrix cm = build_cost(io::mat_from_csv(io::read_file(text)), io::mat_from_csv(io::read_file(patches)),
                                     io::mat_from_csv(io::read_file(attn)), grid, wts);
    write_out(p->out(), "cost.csv", io::mat_to_csv(cm.cost));
    write_out(p->out(), "semantic.csv", io::mat_to_csv(cm.semantic));
    write_out(p->out(), "temporal.csv", io::mat_to_csv(cm.temporal));
    write_out(p->out(), "spatial.csv", io::mat_to_csv(cm.spatial));
  }
};

struct TrainNotCmd {
  std::string text, video;
  std::unique_ptr<Params> p;

  void setup(CLI::App& app) {
    auto* c = app.add_subcommand("train-not", "train a neural OT map from text to video embeddings");
    c->add_option("text", text, "text embeddings (.emb)")->required();
    c->add_option("video", video, "video embeddings (.emb)")->required();
    json d = to_json(NotTrainConfig{});
    d.erase("seed");
    p = std::make_unique<Params>(c, d);
    p->flag<int>("--steps", "steps", "outer iterations");
    p->flag<int>("--kt", "inner_iters", "map steps per potential step");
    p->flag<std::size_t>("--batch", "batch", "batch size");
    p->flag<double>("--lr-map", "lr_map", "map step size");
    p->flag<double>("--lr-potential", "lr_potential", "potential step size");
    p->flag<std::size_t>("--hidden", "hidden", "hidden width");
    p->flag<bool>("--linear-decay", "linear_decay", "decay step sizes linearly to 0 (true/false)");
    c->callback([this] { run(); });
  }

  void run() {
    json r = p->resolve();
    const NotTrainConfig cfg = not_config_from_json(r);
    cfg.validate();
    r["text"] = text;
    r["video"] = video;
    prepare_out(p->out(), r);
    const EmbeddingSet t = read_emb(text), v = read_emb(video);
    const OtMapArtifact art = train_not(t, v, cfg);
    for (const auto& pt : art.curve)
      require(std::isfinite(pt.map_loss) && std::isfinite(pt.potential_loss), ErrorKind::numeric, "non-finite",
              "training diverged");
    save_otmap(art, (fs::path(p->out()) / "map.otmap").string());
    std::string csv = "step,map_loss,potential_loss\n";
    for (std::size_t i = 0; i < art.curve.size(); ++i)
      csv += std::to_string(i) + "," + io::format_double(art.curve[i].map_loss) + "," +
             io::format_double(art.curve[i].potential_loss) + "\n";
    write_out(p->out(), "curve.csv", csv);
  }
};

struct EvalAlignCmd {
  std::string text, video, map;
  std::unique_ptr<Params> p;

  void setup(CLI::App& app) {
    auto* c = app.add_subcommand("eval-align", "mutual KNN / Spearman / distance histograms before and after mapping");
    c->add_option("text", text, "text embeddings (.emb)")->required();
    c->add_option("video", video, "video embeddings (.emb), row-paired with text")->required();
    c->add_option("map", map, "trained map (.otmap)")->required();
    p = std::make_unique<Params>(c, json{{"k", 10}, {"bins", 20}});
    p->flag<std::size_t>("--k", "k", "neighbourhood size");
    p->flag<std::size_t>("--bins", "bins", "histogram bins");
    c->callback([this] { run(); });
  }

  void run() {
    json r = p->resolve();
    const auto k = get<std::size_t>(r, "k");
    const auto bins = get<std::size_t>(r, "bins");
    r["text"] = text;
    r["video"] = video;
    r["map"] = map;
    prepare_out(p->out(), r);
    const EmbeddingSet t = read_emb(text), v = read_emb(video);
    const OtMapArtifact art = load_otmap(map);
    require(art.in_dim() == t.dim() && art.out_dim() == v.dim(), ErrorKind::data, "shape-mismatch",
            "map dims do not match the embeddings");
    const Mat mapped = art.apply(t.vectors);
    const AlignReport rep = align_report(t.vectors, mapped, v.vectors, k, bins);
    write_out(p->out(), "align_report.json", to_json(rep).dump(2) + "\n");
    write_out(p->out(), "histograms.csv", histograms_to_csv(rep.histogram_pre, rep.histogram_post));
  }
};

struct SynthCmd {
  std::string spec_path;
  std::unique_ptr<Params> p;

  void setup(CLI::App& app) {
    auto* c = app.add_subcommand("synth", "generate paired, misaligned text/video embedding sets");
    c->add_option("spec", spec_path, "SynthSpec JSON")->required();
    p = std::make_unique<Params>(c, json{{"out_prefix", "synth"}});
    p->flag<std::string>("--out-prefix", "out_prefix", "file name prefix");
    c->callback([this] { run(); });
  }

  void run() {
    json r = p->resolve();
    json spec_json;
    try {
      spec_json = json::parse(io::read_file(spec_path));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::data, "bad-json", spec_path + ": " + e.what());
    }
    SynthSpec spec = synth_spec_from_json(spec_json);
    // An explicit seed (flag, config or env) overrides the spec file.
    if (p->seed_defaulted())
      r["seed"] = spec.seed;
    else
      spec.seed = get<std::uint64_t>(r, "seed");
    spec.validate();
    const auto prefix = get<std::string>(r, "out_prefix");
    require(!prefix.empty() && prefix.find('/') == std::string::npos, ErrorKind::usage, "bad-prefix",
            "out prefix must be a plain file name");
    r["spec"] = to_json(spec);
    prepare_out(p->out(), r);
    const auto [text, video] = generate(spec);
    write_emb(text, (fs::path(p->out()) / (prefix + ".text.emb")).string());
    write_emb(video, (fs::path(p->out()) / (prefix + ".video.emb")).string());
  }
};

struct PosttrainCmd {
  std::string world_path;
  std::unique_ptr<Params> p;

  void setup(CLI::App& app) {
    auto* c = app.add_subcommand("posttrain", "post-train the toy denoiser with the OT-aligned rewards");
    c->add_option("world", world_path, "WorldConfig JSON")->required();
    const PosttrainConfig d;
    json dj = to_json(d);
    dj.erase("seed");
    dj.erase("grpo");
    dj["grpo_group"] = d.grpo.group;
    dj["grpo_clip"] = d.grpo.clip;
    dj["grpo_timesteps"] = d.grpo.timesteps;
    dj["grpo_sde_noise"] = d.grpo.sde_noise;
    p = std::make_unique<Params>(c, dj);
    p->flag<std::string>("--mode", "mode", "direct or grpo");
    p->flag<int>("--steps", "steps", "optimizer steps");
    p->flag<double>("--lr", "lr", "Adam step size");
    p->flag<std::size_t>("--prompts", "prompts", "prompts per step");
    p->flag<std::size_t>("--group", "group", "samples per prompt");
    p->flag<double>("--cd-weight", "cd_weight", "weight of the consistency loss (0 ablates it)");
    p->flag<bool>("--adaptive", "adaptive", "group-normalized reward weighting (true/false)");
    p->flag<bool>("--detach-rewards", "detach_rewards", "rewards enter as constants (true/false)");
    p->flag<double>("--lambda", "lambda", "EMA rate");
    p->flag<int>("--eval-every", "eval_every", "held-out evaluation period");
    p->flag<std::size_t>("--heldout", "heldout", "held-out sample count");
    p->flag<std::size_t>("--energy-samples", "energy_samples", "samples for the energy distance");
    p->flag<std::size_t>("--grpo-group", "grpo_group", "GRPO group size G");
    p->flag<double>("--grpo-clip", "grpo_clip", "GRPO clip epsilon");
    p->flag<std::size_t>("--grpo-timesteps", "grpo_timesteps", "sampler steps per rollout");
    p->flag<double>("--grpo-sde-noise", "grpo_sde_noise", "per-step transition std");
    c->callback([this] { run(); });
  }

  void run() {
    json r = p->resolve();
    PosttrainConfig cfg;
    cfg.mode = posttrain_mode_from_string(get<std::string>(r, "mode"));
    cfg.steps = get<int>(r, "steps");
    cfg.seed = get<std::uint64_t>(r, "seed");
    cfg.lr = get<double>(r, "lr");
    cfg.prompts = get<std::size_t>(r, "prompts");
    cfg.group = get<std::size_t>(r, "group");
    cfg.cd_weight = get<double>(r, "cd_weight");
    cfg.adaptive = get<bool>(r, "adaptive");
    cfg.detach_rewards = get<bool>(r, "detach_rewards");
    cfg.lambda = get<double>(r, "lambda");
    cfg.eval_every = get<int>(r, "eval_every");
    cfg.heldout = get<std::size_t>(r, "heldout");
    cfg.energy_samples = get<std::size_t>(r, "energy_samples");
    cfg.grpo.group = get<std::size_t>(r, "grpo_group");
    cfg.grpo.clip = get<double>(r, "grpo_clip");
    cfg.grpo.timesteps = get<std::size_t>(r, "grpo_timesteps");
    cfg.grpo.sde_noise = get<double>(r, "grpo_sde_noise");
    cfg.grpo.seed = cfg.seed;
    cfg.validate();
    json world_json;
    try {
      world_json = json::parse(io::read_file(world_path));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::data, "bad-json", world_path + ": " + e.what());
    }
    const WorldConfig wc = world_config_from_json(world_json);
    r["world"] = to_json(wc);
    prepare_out(p->out(), r);
    const ToyWorld w = setup_world(wc);
    const PosttrainReport rep = run_posttrain(w, cfg);
    write_out(p->out(), "report.jsonl", report_jsonl(rep));
    write_out(p->out(), "summary.csv", report_summary_csv(rep));
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pisces: OT-aligned reward toolkit"};
  app.require_subcommand(1);
  SinkhornCmd sinkhorn;
  CostCmd cost;
  TrainNotCmd train_not_cmd;
  EvalAlignCmd eval_align;
  SynthCmd synth;
  PosttrainCmd posttrain;
  sinkhorn.setup(app);
  cost.setup(app);
  train_not_cmd.setup(app);
  eval_align.setup(app);
  synth.setup(app);
  posttrain.setup(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "pisces: error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "pisces: error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
