#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pi2vec/env/dataset.hpp"
#include "pi2vec/env/policy.hpp"
#include "pi2vec/successor/model.hpp"

namespace pi2vec {

/// Fixed states over which every policy in an experiment is summarized.
/// At most one state per source trajectory.
struct CanonicalStateSet {
  std::vector<State> states;
  std::vector<std::int64_t> trajectory_ids;
  std::uint64_t seed = 0;
  bool first_state_only = false;

  std::size_t size() const { return states.size(); }
  /// Hash of the ordered states; embeddings are comparable only when these agree.
  std::string fingerprint() const;
};

/// k distinct trajectories drawn uniformly without replacement, then one
/// uniformly drawn step of each (step 0 with `first_state_only`).
CanonicalStateSet sample_canonical(const OfflineDataset& dataset, int k, std::uint64_t seed,
                                   bool first_state_only = false);

inline constexpr const char* kPi2vecRepresentation = "pi2vec";
inline constexpr const char* kActionsRepresentation = "actions";

/// A policy representation: either averaged successor features ("pi2vec",
/// tagged with the encoder name) or concatenated one-hot actions ("actions").
struct PolicyEmbedding {
  std::string representation;
  std::string encoder;
  std::string policy_id;
  std::string fingerprint;
  std::vector<double> vector;

  bool operator==(const PolicyEmbedding&) const = default;
};

/// Mean of psi(s, pi(s)) over the canonical states.
PolicyEmbedding embed_policy(const SuccessorFeatureModel& model, const Policy& policy,
                             const CanonicalStateSet& canon);

/// Same aggregation with an arbitrary per-state psi, e.g. an exact oracle.
using StatePsiFn = std::function<std::vector<double>(const State&)>;
PolicyEmbedding embed_with(const StatePsiFn& psi, const std::string& encoder, const std::string& policy_id,
                           const CanonicalStateSet& canon);

/// One-hot of the policy's frozen action at each canonical state, concatenated
/// in canonical order.
PolicyEmbedding actions_representation(const Policy& policy, const CanonicalStateSet& canon);

/// Euclidean distance; throws InputError unless both embeddings share
/// representation, encoder, fingerprint and dimension.
double embedding_distance(const PolicyEmbedding& a, const PolicyEmbedding& b);

/// Mean over unordered pairs; needs at least two embeddings.
double mean_pairwise_distance(std::span<const PolicyEmbedding> set);

/// mean_pairwise_distance(probe) / mean_pairwise_distance(reference).
double normalized_spread(std::span<const PolicyEmbedding> probe, std::span<const PolicyEmbedding> reference);

// Store formats. JSONL: one object per embedding with keys representation,
// encoder, policy_id, fingerprint, vector. CSV: long format with header
// representation,encoder,policy_id,fingerprint,index,value.
void write_embeddings_jsonl(std::ostream& out, std::span<const PolicyEmbedding> embeddings);
std::vector<PolicyEmbedding> read_embeddings_jsonl(std::istream& in);
void write_embeddings_csv(std::ostream& out, std::span<const PolicyEmbedding> embeddings);

}  // namespace pi2vec
