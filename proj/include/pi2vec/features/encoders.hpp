#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pi2vec/env/environment.hpp"
#include "pi2vec/env/gridworld.hpp"

namespace pi2vec {

/// Serializable description of an encoder; enough to rebuild it given the
/// environment it was built for.
struct EncoderSpec {
  std::string variant;  // one_hot | hand_crafted | random_projection | rbf_grid
  int dim = 0;          // output size for random_projection, grid side for rbf_grid
  std::uint64_t seed = 0;
  bool delta = false;  // use phi(s') - phi(s) as the transition feature

  /// Stable short name, e.g. "hand_crafted" or "delta_random_projection32".
  std::string name() const;
  bool operator==(const EncoderSpec&) const = default;
};

/// Policy-agnostic state features phi: S -> R^N with frozen parameters.
class FeatureEncoder {
 public:
  virtual ~FeatureEncoder() = default;

  virtual int dim() const = 0;
  virtual EncoderSpec spec() const = 0;
  /// Writes phi(s) into `out`; throws InputError on a size mismatch or a
  /// state outside the encoder's domain.
  virtual void encode(const State& s, std::span<double> out) const = 0;

  std::vector<double> encode(const State& s) const;

 protected:
  void check_output(std::span<double> out) const;
};

using EncoderPtr = std::shared_ptr<const FeatureEncoder>;

/// Indicator of the tabular state index.
class OneHotEncoder final : public FeatureEncoder {
 public:
  explicit OneHotEncoder(int n_states);
  int dim() const override { return n_states_; }
  EncoderSpec spec() const override { return {"one_hot", 0, 0, false}; }
  void encode(const State& s, std::span<double> out) const override;
  using FeatureEncoder::encode;

 private:
  int n_states_;
};

/// Gridworld features: one-hot cell, normalized (x, y), goal indicator, pit
/// indicator and negated normalized Manhattan distance to the goal.
class GridSemanticEncoder final : public FeatureEncoder {
 public:
  explicit GridSemanticEncoder(GridSpec spec);
  int dim() const override { return spec_.num_cells() + 5; }
  EncoderSpec spec() const override { return {"hand_crafted", 0, 0, false}; }
  void encode(const State& s, std::span<double> out) const override;
  using FeatureEncoder::encode;

  int x_dim() const { return spec_.num_cells(); }
  int y_dim() const { return spec_.num_cells() + 1; }
  int goal_dim() const { return spec_.num_cells() + 2; }
  int pit_dim() const { return spec_.num_cells() + 3; }
  int distance_dim() const { return spec_.num_cells() + 4; }

 private:
  GridSpec spec_;
};

/// Maps a state to its planar coordinates: planar states directly, tabular
/// states through a coordinate table.
class PlanarView {
 public:
  PlanarView() = default;
  explicit PlanarView(std::vector<std::array<double, 2>> tabular_coordinates);
  std::array<double, 2> operator()(const State& s) const;

 private:
  std::vector<std::array<double, 2>> coords_;
};

/// tanh(A x + b) of the planar coordinates with A, b drawn once from `seed`.
class RandomProjectionEncoder final : public FeatureEncoder {
 public:
  RandomProjectionEncoder(PlanarView view, int output_dim, std::uint64_t seed);
  int dim() const override { return output_dim_; }
  EncoderSpec spec() const override { return {"random_projection", output_dim_, seed_, false}; }
  void encode(const State& s, std::span<double> out) const override;
  using FeatureEncoder::encode;

 private:
  PlanarView view_;
  int output_dim_;
  std::uint64_t seed_;
  std::vector<double> weights_;  // output_dim x 2, row-major
  std::vector<double> bias_;
};

/// Gaussian radial basis functions on a side x side grid of centers over the
/// unit square.
class RbfGridEncoder final : public FeatureEncoder {
 public:
  RbfGridEncoder(PlanarView view, int side, double width = 0.0);
  int dim() const override { return side_ * side_; }
  EncoderSpec spec() const override { return {"rbf_grid", side_, 0, false}; }
  void encode(const State& s, std::span<double> out) const override;
  using FeatureEncoder::encode;

 private:
  PlanarView view_;
  int side_;
  double width_;
};

/// Delta-phi(s, s') = phi(s') - phi(s).
class DeltaEncoder {
 public:
  explicit DeltaEncoder(EncoderPtr inner);
  int dim() const { return inner_->dim(); }
  const FeatureEncoder& inner() const { return *inner_; }
  void encode_transition(const State& s, const State& s_next, std::span<double> out) const;
  std::vector<double> encode_transition(const State& s, const State& s_next) const;

 private:
  EncoderPtr inner_;
};

/// The transition feature phi(s, a, s') summed by successor features: either
/// phi(s') of a state encoder or Delta-phi(s, s').
class TransitionFeatures {
 public:
  TransitionFeatures(EncoderPtr encoder, bool delta);

  int dim() const { return encoder_->dim(); }
  bool is_delta() const { return delta_; }
  EncoderSpec spec() const;
  const FeatureEncoder& state_encoder() const { return *encoder_; }
  const EncoderPtr& state_encoder_ptr() const { return encoder_; }

  void encode(const State& s, const State& s_next, std::span<double> out) const;
  std::vector<double> encode(const State& s, const State& s_next) const;

 private:
  EncoderPtr encoder_;
  bool delta_;
  std::optional<DeltaEncoder> delta_encoder_;
};

/// What make_encoder needs to know about the environment.
struct EncoderContext {
  int n_states = 0;                  // tabular environments
  std::optional<GridSpec> grid;      // gridworlds
  PlanarView planar;                 // coordinates for projection/RBF encoders
};

EncoderPtr make_encoder(const EncoderSpec& spec, const EncoderContext& context);
TransitionFeatures make_transition_features(const EncoderSpec& spec, const EncoderContext& context);

/// Parses names produced by EncoderSpec::name().
EncoderSpec parse_encoder_name(const std::string& name);

}  // namespace pi2vec
