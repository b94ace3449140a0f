#include "pi2vec/env/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "json.hpp"

namespace pi2vec {

using ordered_json = nlohmann::ordered_json;

std::size_t OfflineDataset::num_transitions() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.steps.size();
  return n;
}

void validate_dataset(const OfflineDataset& dataset) {
  std::set<std::int64_t> ids;
  for (const auto& traj : dataset.trajectories) {
    if (!ids.insert(traj.id).second) throw InputError(fmt::format("dataset: duplicate trajectory id {}", traj.id));
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const auto& step = traj.steps[t];
      if (step.trajectory_id != traj.id || step.step_index != static_cast<int>(t)) {
        throw InputError(fmt::format("dataset: trajectory {} step {} is mislabeled", traj.id, t));
      }
      if (t + 1 < traj.steps.size()) {
        if (step.terminal) throw InputError(fmt::format("dataset: trajectory {} continues after a terminal", traj.id));
        if (!(step.next_state == traj.steps[t + 1].state)) {
          throw InputError(fmt::format("dataset: trajectory {} breaks at step {}", traj.id, t));
        }
      }
    }
  }
}

std::vector<const Transition*> flatten(const OfflineDataset& dataset) {
  std::vector<const Transition*> out;
  out.reserve(dataset.num_transitions());
  for (const auto& traj : dataset.trajectories) {
    for (const auto& step : traj.steps) out.push_back(&step);
  }
  return out;
}

Trajectory rollout(const Environment& env, const Policy& policy, int max_steps, std::uint64_t seed,
                   std::int64_t trajectory_id) {
  if (max_steps < 1) throw InputError("rollout: max_steps must be >= 1");
  Rng rng(seed);
  Trajectory traj;
  traj.id = trajectory_id;
  traj.policy_id = policy.id();
  State s = env.sample_start(rng);
  for (int t = 0; t < max_steps; ++t) {
    const int a = policy.act(s, rng);
    const StepResult r = env.step(s, a, rng);
    traj.steps.push_back(Transition{s, a, r.reward, r.next, r.terminal, trajectory_id, t});
    if (r.terminal) break;
    s = r.next;
  }
  return traj;
}

OfflineDataset generate_dataset(const Environment& env, std::span<const SourceSpec> sources, int max_steps,
                                std::uint64_t seed) {
  if (sources.empty()) throw InputError("generate_dataset: no sources");
  OfflineDataset data;
  data.provenance.env_id = env.id();
  data.provenance.seed = seed;
  data.provenance.max_steps = max_steps;
  std::int64_t next_id = 0;
  for (const auto& source : sources) {
    if (source.policies.empty()) throw InputError(fmt::format("generate_dataset: source '{}' has no policies", source.label));
    if (source.trajectories_per_policy < 0) throw InputError("generate_dataset: negative trajectory count");
    DatasetSource record{source.label, {}, source.trajectories_per_policy};
    for (const auto& policy : source.policies) {
      if (!policy) throw InputError("generate_dataset: null policy");
      record.policy_ids.push_back(policy->id());
      for (int k = 0; k < source.trajectories_per_policy; ++k) {
        const auto id = next_id++;
        data.trajectories.push_back(
            rollout(env, *policy, max_steps, derive_seed(seed, static_cast<std::uint64_t>(id)), id));
      }
    }
    data.provenance.sources.push_back(std::move(record));
  }
  return data;
}

OfflineDataset generate_dataset(const Environment& env, std::span<const PolicyPtr> policies,
                                int n_traj_per_policy, int max_steps, std::uint64_t seed) {
  if (policies.empty()) throw InputError("generate_dataset: empty policy list");
  const SourceSpec source{"policies", std::vector<PolicyPtr>(policies.begin(), policies.end()), n_traj_per_policy};
  return generate_dataset(env, std::span<const SourceSpec>(&source, 1), max_steps, seed);
}

namespace {

ordered_json state_to_json(const State& s) {
  if (s.is_tabular()) return s.index;
  return ordered_json::array({s.pos[0], s.pos[1]});
}

State state_from_json(const ordered_json& j) {
  if (j.is_number_integer()) {
    const auto index = j.get<int>();
    if (index < 0) throw FormatError("dataset: negative state index");
    return tabular_state(index);
  }
  if (j.is_array() && j.size() == 2) return planar_state(j[0].get<double>(), j[1].get<double>());
  throw FormatError("dataset: state must be an index or [x, y]");
}

const std::vector<std::string> kFields = {"trajectory_id", "step_index", "state", "action",
                                          "reward",        "next_state", "terminal"};

}  // namespace

void write_dataset(std::ostream& out, const OfflineDataset& dataset) {
  ordered_json header;
  header["record"] = "header";
  header["format"] = "pi2vec-dataset";
  header["version"] = 1;
  header["env"] = dataset.provenance.env_id;
  header["seed"] = dataset.provenance.seed;
  header["max_steps"] = dataset.provenance.max_steps;
  header["config_hash"] = dataset.provenance.config_hash;
  header["sources"] = ordered_json::array();
  for (const auto& src : dataset.provenance.sources) {
    ordered_json s;
    s["label"] = src.label;
    s["policies"] = src.policy_ids;
    s["trajectories_per_policy"] = src.trajectories_per_policy;
    header["sources"].push_back(std::move(s));
  }
  header["fields"] = kFields;
  out << header.dump() << '\n';

  for (const auto& traj : dataset.trajectories) {
    for (const auto& t : traj.steps) {
      ordered_json line;
      line["trajectory_id"] = t.trajectory_id;
      line["step_index"] = t.step_index;
      line["state"] = state_to_json(t.state);
      line["action"] = t.action;
      line["reward"] = t.reward;
      line["next_state"] = state_to_json(t.next_state);
      line["terminal"] = t.terminal;
      out << line.dump() << '\n';
    }
  }
}

OfflineDataset read_dataset(std::istream& in) {
  OfflineDataset data;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset: missing header");
  try {
    const auto header = ordered_json::parse(line);
    if (header.at("format") != "pi2vec-dataset") throw FormatError("dataset: unknown format");
    if (header.at("version") != 1) throw FormatError("dataset: unsupported version");
    if (header.at("fields").get<std::vector<std::string>>() != kFields) throw FormatError("dataset: unexpected fields");
    data.provenance.env_id = header.at("env").get<std::string>();
    data.provenance.seed = header.at("seed").get<std::uint64_t>();
    data.provenance.max_steps = header.at("max_steps").get<int>();
    data.provenance.config_hash = header.at("config_hash").get<std::string>();
    for (const auto& s : header.at("sources")) {
      data.provenance.sources.push_back(DatasetSource{s.at("label").get<std::string>(),
                                                      s.at("policies").get<std::vector<std::string>>(),
                                                      s.at("trajectories_per_policy").get<int>()});
    }

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto j = ordered_json::parse(line);
      Transition t;
      t.trajectory_id = j.at("trajectory_id").get<std::int64_t>();
      t.step_index = j.at("step_index").get<int>();
      t.state = state_from_json(j.at("state"));
      t.action = j.at("action").get<int>();
      t.reward = j.at("reward").get<double>();
      t.next_state = state_from_json(j.at("next_state"));
      t.terminal = j.at("terminal").get<bool>();
      if (data.trajectories.empty() || data.trajectories.back().id != t.trajectory_id) {
        Trajectory traj;
        traj.id = t.trajectory_id;
        data.trajectories.push_back(std::move(traj));
      }
      data.trajectories.back().steps.push_back(t);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("dataset: {}", e.what()));
  }

  // Owners are implied by the header layout.
  std::size_t k = 0;
  for (const auto& src : data.provenance.sources) {
    for (const auto& pid : src.policy_ids) {
      for (int n = 0; n < src.trajectories_per_policy; ++n, ++k) {
        if (k >= data.trajectories.size()) throw FormatError("dataset: fewer trajectories than the header declares");
        data.trajectories[k].policy_id = pid;
      }
    }
  }
  if (k != data.trajectories.size()) throw FormatError("dataset: more trajectories than the header declares");
  validate_dataset(data);
  return data;
}

void save_dataset(const std::string& path, const OfflineDataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot open '{}' for writing", path));
  write_dataset(out, dataset);
  if (!out) throw InputError(fmt::format("failed writing '{}'", path));
}

OfflineDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path));
  return read_dataset(in);
}

}  // namespace pi2vec
