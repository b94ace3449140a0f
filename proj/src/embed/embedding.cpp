#include "pi2vec/embed/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "json.hpp"

namespace pi2vec {

std::string CanonicalStateSet::fingerprint() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& s : states) {
    const double raw[3] = {static_cast<double>(s.index), s.pos[0], s.pos[1]};
    h = fnv1a64(std::span<const double>(raw, 3), h);
  }
  return to_hex(h);
}

CanonicalStateSet sample_canonical(const OfflineDataset& dataset, int k, std::uint64_t seed,
                                   bool first_state_only) {
  if (k < 1) throw InputError("sample_canonical: k must be >= 1");
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < dataset.trajectories.size(); ++i) {
    if (!dataset.trajectories[i].steps.empty()) usable.push_back(i);
  }
  if (static_cast<std::size_t>(k) > usable.size()) {
    throw InputError(fmt::format("sample_canonical: k={} exceeds the {} non-empty trajectories", k, usable.size()));
  }
  Rng rng(seed);
  // Partial Fisher-Yates: the first k slots end up a uniform draw without replacement.
  for (int i = 0; i < k; ++i) {
    const int j = i + uniform_index(rng, static_cast<int>(usable.size()) - i);
    std::swap(usable[i], usable[j]);
  }
  CanonicalStateSet canon;
  canon.seed = seed;
  canon.first_state_only = first_state_only;
  for (int i = 0; i < k; ++i) {
    const auto& traj = dataset.trajectories[usable[i]];
    const int t = first_state_only ? 0 : uniform_index(rng, static_cast<int>(traj.steps.size()));
    canon.states.push_back(traj.steps[t].state);
    canon.trajectory_ids.push_back(traj.id);
  }
  return canon;
}

PolicyEmbedding embed_with(const StatePsiFn& psi, const std::string& encoder, const std::string& policy_id,
                           const CanonicalStateSet& canon) {
  if (canon.states.empty()) throw InputError("embed: empty canonical set");
  PolicyEmbedding e{kPi2vecRepresentation, encoder, policy_id, canon.fingerprint(), {}};
  for (const auto& s : canon.states) {
    const auto row = psi(s);
    if (e.vector.empty()) e.vector.assign(row.size(), 0.0);
    if (row.size() != e.vector.size()) throw InputError("embed: psi dimension changed between states");
    for (std::size_t d = 0; d < row.size(); ++d) e.vector[d] += row[d];
  }
  const double n = static_cast<double>(canon.states.size());
  for (auto& v : e.vector) v /= n;
  return e;
}

PolicyEmbedding embed_policy(const SuccessorFeatureModel& model, const Policy& policy,
                             const CanonicalStateSet& canon) {
  if (model.policy_id() != policy.id()) {
    throw InputError(fmt::format("embed_policy: model trained for '{}' but asked about '{}'", model.policy_id(),
                                 policy.id()));
  }
  return embed_with([&](const State& s) { return predict_psi_on_policy(model, policy, s); },
                    model.features().spec().name(), policy.id(), canon);
}

PolicyEmbedding actions_representation(const Policy& policy, const CanonicalStateSet& canon) {
  if (canon.states.empty()) throw InputError("actions_representation: empty canonical set");
  const int n_actions = policy.num_actions();
  PolicyEmbedding e{kActionsRepresentation, "", policy.id(), canon.fingerprint(), {}};
  e.vector.assign(canon.states.size() * n_actions, 0.0);
  for (std::size_t i = 0; i < canon.states.size(); ++i) {
    const int a = policy.act_frozen(canon.states[i]);
    e.vector[i * n_actions + a] = 1.0;
  }
  return e;
}

double embedding_distance(const PolicyEmbedding& a, const PolicyEmbedding& b) {
  if (a.fingerprint != b.fingerprint) {
    throw InputError(fmt::format("embeddings of '{}' and '{}' use different canonical sets", a.policy_id, b.policy_id));
  }
  if (a.representation != b.representation || a.encoder != b.encoder || a.vector.size() != b.vector.size()) {
    throw InputError(fmt::format("embeddings of '{}' and '{}' are of different kinds", a.policy_id, b.policy_id));
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < a.vector.size(); ++i) sq += (a.vector[i] - b.vector[i]) * (a.vector[i] - b.vector[i]);
  return std::sqrt(sq);
}

double mean_pairwise_distance(std::span<const PolicyEmbedding> set) {
  if (set.size() < 2) throw InputError("mean_pairwise_distance: need at least two embeddings");
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (std::size_t j = i + 1; j < set.size(); ++j, ++pairs) total += embedding_distance(set[i], set[j]);
  }
  return total / static_cast<double>(pairs);
}

double normalized_spread(std::span<const PolicyEmbedding> probe, std::span<const PolicyEmbedding> reference) {
  if (!probe.empty() && !reference.empty()) embedding_distance(probe.front(), reference.front());  // kind check
  const double ref = mean_pairwise_distance(reference);
  if (ref <= 0.0) throw InputError("normalized_spread: reference embeddings coincide");
  return mean_pairwise_distance(probe) / ref;
}

void write_embeddings_jsonl(std::ostream& out, std::span<const PolicyEmbedding> embeddings) {
  for (const auto& e : embeddings) {
    nlohmann::ordered_json j;
    j["representation"] = e.representation;
    j["encoder"] = e.encoder;
    j["policy_id"] = e.policy_id;
    j["fingerprint"] = e.fingerprint;
    j["vector"] = e.vector;
    out << j.dump() << '\n';
  }
}

std::vector<PolicyEmbedding> read_embeddings_jsonl(std::istream& in) {
  std::vector<PolicyEmbedding> out;
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::ordered_json::parse(line);
      out.push_back(PolicyEmbedding{j.at("representation").get<std::string>(), j.at("encoder").get<std::string>(),
                                    j.at("policy_id").get<std::string>(), j.at("fingerprint").get<std::string>(),
                                    j.at("vector").get<std::vector<double>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("embeddings: {}", e.what()));
  }
  return out;
}

void write_embeddings_csv(std::ostream& out, std::span<const PolicyEmbedding> embeddings) {
  out << "representation,encoder,policy_id,fingerprint,index,value\n";
  for (const auto& e : embeddings) {
    for (std::size_t i = 0; i < e.vector.size(); ++i) {
      out << fmt::format("{},{},{},{},{},{:.17g}\n", e.representation, e.encoder, e.policy_id, e.fingerprint, i,
                         e.vector[i]);
    }
  }
}

}  // namespace pi2vec
