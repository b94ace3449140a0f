#include "pi2vec/pipeline/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "pi2vec/embed/embedding.hpp"
#include "pi2vec/env/planning.hpp"

namespace pi2vec {

using ordered_json = nlohmann::ordered_json;

namespace {

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported.
class ObjectReader {
 public:
  ObjectReader(const ordered_json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected an object", where_));
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("{}.{}: {}", where_, key, e.what()));
    }
  }

  const ordered_json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(fmt::format("{}: unknown key '{}'", where_, key));
    }
  }

  const std::string& where() const { return where_; }

 private:
  const ordered_json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Cell read_cell(const ordered_json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw ConfigError(fmt::format("{}: expected [x, y]", where));
  }
  return Cell{j[0].get<int>(), j[1].get<int>()};
}

ordered_json cell_json(Cell c) { return ordered_json::array({c.x, c.y}); }
ordered_json point_json(const std::array<double, 2>& p) { return ordered_json::array({p[0], p[1]}); }

void read_point(ObjectReader& r, const char* key, std::array<double, 2>& out) {
  std::vector<double> v;
  r.get(key, v);
  if (v.empty()) return;
  if (v.size() != 2) throw ConfigError(fmt::format("{}.{}: expected [x, y]", r.where(), key));
  out = {v[0], v[1]};
}

GridSpec read_grid(const ordered_json& j) {
  GridSpec g;
  ObjectReader r(j, "environment.grid");
  r.get("width", g.width);
  r.get("height", g.height);
  r.get("slip", g.slip);
  if (auto* c = r.child("start")) g.start = read_cell(*c, "environment.grid.start");
  if (auto* c = r.child("goal")) g.goal = read_cell(*c, "environment.grid.goal");
  if (auto* c = r.child("pit")) g.pit = read_cell(*c, "environment.grid.pit");
  r.get("goal_reward", g.goal_reward);
  r.get("pit_reward", g.pit_reward);
  r.get("step_cost", g.step_cost);
  r.get("bump_reward", g.bump_reward);
  r.get("terminal_goal_pit", g.terminal_goal_pit);
  r.finish();
  return g;
}

ReacherSpec read_reacher(const ordered_json& j) {
  ReacherSpec s;
  ObjectReader r(j, "environment.reacher");
  r.get("step_size", s.step_size);
  r.get("noise_scale", s.noise_scale);
  read_point(r, "goal", s.goal);
  r.get("goal_radius", s.goal_radius);
  read_point(r, "start_low", s.start_low);
  read_point(r, "start_high", s.start_high);
  r.get("goal_reward", s.goal_reward);
  r.get("step_cost", s.step_cost);
  r.get("horizon", s.horizon);
  r.finish();
  return s;
}

void validate(const ExperimentConfig& c) {
  const auto& e = c.environment;
  if (e.kind != "gridworld" && e.kind != "reacher") throw ConfigError(fmt::format("environment.kind '{}' unknown", e.kind));
  if (e.reward != "default" && e.reward != "linear") throw ConfigError(fmt::format("environment.reward '{}' unknown", e.reward));
  if (e.kind == "reacher" && e.reward != "default") throw ConfigError("environment.reward applies to gridworlds only");
  if (c.epsilons.empty()) throw ConfigError("epsilons: need at least one policy");
  for (double eps : c.epsilons) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError(fmt::format("epsilons: {} outside [0, 1]", eps));
  }
  if (!(c.planning_gamma >= 0.0 && c.planning_gamma < 1.0)) throw ConfigError("planning_gamma must lie in [0, 1)");
  if (c.dataset.max_steps < 1) throw ConfigError("dataset.max_steps must be >= 1");
  if (c.dataset.sources.empty()) throw ConfigError("dataset.sources: need at least one source");
  std::set<std::string> labels;
  for (const auto& s : c.dataset.sources) {
    if (s.label.empty() || !labels.insert(s.label).second) throw ConfigError("dataset.sources: labels must be unique and non-empty");
    if (s.trajectories_per_policy < 1) throw ConfigError("dataset.sources: trajectories_per_policy must be >= 1");
    for (int i : s.policies) {
      if (i < 0 || i >= static_cast<int>(c.epsilons.size())) {
        throw ConfigError(fmt::format("dataset.sources '{}': policy index {} out of range", s.label, i));
      }
    }
  }
  if (c.encoders.empty()) throw ConfigError("encoders: need at least one encoder");
  std::set<std::string> names;
  for (const auto& name : c.encoders) {
    try {
      if (parse_encoder_name(name).name() != name) throw ConfigError(fmt::format("encoders: '{}' is not canonical", name));
    } catch (const ConfigError&) {
      throw;
    } catch (const InputError& err) {
      throw ConfigError(fmt::format("encoders: {}", err.what()));
    }
    if (!names.insert(name).second) throw ConfigError(fmt::format("encoders: '{}' listed twice", name));
  }
  try {
    c.fqe.validate();
  } catch (const InputError& err) {
    throw ConfigError(err.what());
  }
  if (e.kind == "reacher" && c.fqe.architecture == Architecture::kTabular) {
    throw ConfigError("fqe.architecture: the reacher needs a linear or mlp parameterization");
  }
  if (c.canonical.k < 1) throw ConfigError("canonical.k must be >= 1");
  if (c.representations.empty()) throw ConfigError("representations: need at least one");
  for (const auto& r : c.representations) {
    if (r != kPi2vecRepresentation && r != kActionsRepresentation) {
      throw ConfigError(fmt::format("representations: '{}' unknown", r));
    }
  }
  const auto& ev = c.evaluation;
  if (ev.folds < 2) throw ConfigError("evaluation.folds must be >= 2");
  if (static_cast<int>(c.epsilons.size()) < ev.folds) throw ConfigError("evaluation.folds exceeds the number of policies");
  if (ev.lambda_grid.empty()) throw ConfigError("evaluation.lambda_grid must not be empty");
  for (double l : ev.lambda_grid) {
    if (!(l >= 0.0)) throw ConfigError("evaluation.lambda_grid: values must be >= 0");
  }
  if (ev.return_rollouts < 1) throw ConfigError("evaluation.return_rollouts must be >= 1");
  const auto& o = c.oracle;
  if (!(o.fqe_tolerance > 0.0) || o.min_visits < 1 || o.mc_pairs < 1 || o.mc_rollouts < 2 ||
      !(o.mc_pass_fraction > 0.0 && o.mc_pass_fraction <= 1.0) || o.projection_cases < 1) {
    throw ConfigError("oracle: invalid tolerance or count");
  }
}

}  // namespace

ExperimentConfig parse_config(const ordered_json& j) {
  ExperimentConfig c;
  ObjectReader r(j, "config");
  r.get("name", c.name);
  r.get("root_seed", c.root_seed);
  if (auto* e = r.child("environment")) {
    ObjectReader er(*e, "environment");
    er.get("kind", c.environment.kind);
    if (auto* g = er.child("grid")) c.environment.grid = read_grid(*g);
    er.get("reward", c.environment.reward);
    er.get("reward_seed", c.environment.reward_seed);
    if (auto* rs = er.child("reacher")) c.environment.reacher = read_reacher(*rs);
    er.finish();
  }
  r.get("epsilons", c.epsilons);
  r.get("planning_gamma", c.planning_gamma);
  if (auto* d = r.child("dataset")) {
    ObjectReader dr(*d, "dataset");
    dr.get("max_steps", c.dataset.max_steps);
    if (auto* sources = dr.child("sources")) {
      if (!sources->is_array()) throw ConfigError("dataset.sources: expected an array");
      for (const auto& s : *sources) {
        SourceConfig src;
        ObjectReader sr(s, "dataset.sources[]");
        sr.get("label", src.label);
        sr.get("policies", src.policies);
        sr.get("trajectories_per_policy", src.trajectories_per_policy);
        sr.finish();
        c.dataset.sources.push_back(std::move(src));
      }
    }
    dr.finish();
  }
  r.get("encoders", c.encoders);
  if (auto* f = r.child("fqe")) {
    try {
      c.fqe = fqe_config_from_json(*f);
    } catch (const InputError& err) {
      throw ConfigError(err.what());
    }
  }
  if (auto* k = r.child("canonical")) {
    ObjectReader kr(*k, "canonical");
    kr.get("k", c.canonical.k);
    kr.get("first_state_only", c.canonical.first_state_only);
    kr.finish();
  }
  r.get("representations", c.representations);
  if (auto* ev = r.child("evaluation")) {
    ObjectReader vr(*ev, "evaluation");
    vr.get("folds", c.evaluation.folds);
    vr.get("lambda_grid", c.evaluation.lambda_grid);
    vr.get("fqe_baseline", c.evaluation.fqe_baseline);
    vr.get("offline_mode", c.evaluation.offline_mode);
    vr.get("return_rollouts", c.evaluation.return_rollouts);
    vr.finish();
  }
  if (auto* o = r.child("oracle")) {
    ObjectReader orr(*o, "oracle");
    orr.get("fqe_tolerance", c.oracle.fqe_tolerance);
    orr.get("min_visits", c.oracle.min_visits);
    orr.get("mc_pairs", c.oracle.mc_pairs);
    orr.get("mc_rollouts", c.oracle.mc_rollouts);
    orr.get("mc_pass_fraction", c.oracle.mc_pass_fraction);
    orr.get("projection_cases", c.oracle.projection_cases);
    orr.finish();
  }
  r.finish();
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
  ordered_json j;
  try {
    j = ordered_json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config '{}': {}", path, e.what()));
  }
  return parse_config(j);
}

ordered_json to_json(const ExperimentConfig& c) {
  const auto& g = c.environment.grid;
  const auto& rs = c.environment.reacher;
  ordered_json env;
  env["kind"] = c.environment.kind;
  env["grid"] = {{"width", g.width},
                 {"height", g.height},
                 {"slip", g.slip},
                 {"start", cell_json(g.start)},
                 {"goal", cell_json(g.goal)},
                 {"pit", cell_json(g.pit)},
                 {"goal_reward", g.goal_reward},
                 {"pit_reward", g.pit_reward},
                 {"step_cost", g.step_cost},
                 {"bump_reward", g.bump_reward},
                 {"terminal_goal_pit", g.terminal_goal_pit}};
  env["reward"] = c.environment.reward;
  env["reward_seed"] = c.environment.reward_seed;
  env["reacher"] = {{"step_size", rs.step_size},
                    {"noise_scale", rs.noise_scale},
                    {"goal", point_json(rs.goal)},
                    {"goal_radius", rs.goal_radius},
                    {"start_low", point_json(rs.start_low)},
                    {"start_high", point_json(rs.start_high)},
                    {"goal_reward", rs.goal_reward},
                    {"step_cost", rs.step_cost},
                    {"horizon", rs.horizon}};
  ordered_json sources = ordered_json::array();
  for (const auto& s : c.dataset.sources) {
    sources.push_back(
        {{"label", s.label}, {"policies", s.policies}, {"trajectories_per_policy", s.trajectories_per_policy}});
  }
  ordered_json j;
  j["name"] = c.name;
  j["root_seed"] = c.root_seed;
  j["environment"] = env;
  j["epsilons"] = c.epsilons;
  j["planning_gamma"] = c.planning_gamma;
  j["dataset"] = {{"max_steps", c.dataset.max_steps}, {"sources", sources}};
  j["encoders"] = c.encoders;
  j["fqe"] = to_json(c.fqe);
  j["canonical"] = {{"k", c.canonical.k}, {"first_state_only", c.canonical.first_state_only}};
  j["representations"] = c.representations;
  j["evaluation"] = {{"folds", c.evaluation.folds},
                     {"lambda_grid", c.evaluation.lambda_grid},
                     {"fqe_baseline", c.evaluation.fqe_baseline},
                     {"offline_mode", c.evaluation.offline_mode},
                     {"return_rollouts", c.evaluation.return_rollouts}};
  j["oracle"] = {{"fqe_tolerance", c.oracle.fqe_tolerance},
                 {"min_visits", c.oracle.min_visits},
                 {"mc_pairs", c.oracle.mc_pairs},
                 {"mc_rollouts", c.oracle.mc_rollouts},
                 {"mc_pass_fraction", c.oracle.mc_pass_fraction},
                 {"projection_cases", c.oracle.projection_cases}};
  return j;
}

std::string config_hash(const ExperimentConfig& c) { return to_hex(fnv1a64(to_json(c).dump())); }

std::uint64_t sub_seed(const ExperimentConfig& c, const std::string& name) { return derive_seed(c.root_seed, name); }

ExperimentEnv build_environment(const ExperimentConfig& c) {
  ExperimentEnv out;
  try {
    if (c.environment.kind == "reacher") {
      out.reacher = std::make_shared<const ContinuousEnv>(c.environment.reacher);
      out.env = out.reacher;
      return out;
    }
    const GridSpec& spec = c.environment.grid;
    if (c.environment.reward == "linear") {
      out.linear = make_linear_reward_gridworld(spec, c.environment.reward_seed);
      out.mdp = std::make_shared<const TabularMDP>(out.linear->mdp);
      out.context = EncoderContext{spec.num_cells(), out.linear->spec, PlanarView(grid_coordinates(spec))};
    } else {
      out.mdp = std::make_shared<const TabularMDP>(make_gridworld(spec));
      out.context = EncoderContext{spec.num_cells(), spec, PlanarView(grid_coordinates(spec))};
    }
    out.env = out.mdp;
  } catch (const InputError& e) {
    throw ConfigError(fmt::format("environment: {}", e.what()));
  }
  return out;
}

std::vector<PolicyPtr> build_policies(const ExperimentConfig& c, const ExperimentEnv& env) {
  const auto seed = sub_seed(c, "policies");
  if (env.mdp) {
    const auto q = value_iteration(*env.mdp, c.planning_gamma, 1e-10);
    return make_policy_family(*env.mdp, q, c.epsilons, seed);
  }
  std::vector<PolicyPtr> out;
  const auto reacher = env.reacher;
  for (std::size_t i = 0; i < c.epsilons.size(); ++i) {
    PolicyInfo info{fmt::format("p{:02d}_eps{:.3f}", i, c.epsilons[i]), "eps_greedy", derive_seed(seed, i)};
    out.push_back(std::make_shared<EpsilonGreedyPolicy>(std::move(info), ContinuousEnv::kActions, c.epsilons[i],
                                                        [reacher](const State& s) { return reacher->heading_action(s); }));
  }
  return out;
}

}  // namespace pi2vec
