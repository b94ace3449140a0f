#include "pi2vec/features/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include <fmt/format.h>

namespace pi2vec {

std::string EncoderSpec::name() const {
  std::string base = variant;
  if (variant == "random_projection") base = fmt::format("random_projection{}_s{}", dim, seed);
  if (variant == "rbf_grid") base = fmt::format("rbf_grid{}", dim);
  return delta ? "delta_" + base : base;
}

EncoderSpec parse_encoder_name(const std::string& name) {
  static const std::regex pattern(R"(^(delta_)?(one_hot|hand_crafted|random_projection(\d+)_s(\d+)|rbf_grid(\d+))$)");
  std::smatch m;
  if (!std::regex_match(name, m, pattern)) throw InputError(fmt::format("unknown encoder name '{}'", name));
  EncoderSpec spec;
  spec.delta = m[1].matched;
  if (m[3].matched) {
    spec.variant = "random_projection";
    spec.dim = std::stoi(m[3]);
    spec.seed = std::stoull(m[4]);
  } else if (m[5].matched) {
    spec.variant = "rbf_grid";
    spec.dim = std::stoi(m[5]);
  } else {
    spec.variant = m[2];
  }
  return spec;
}

std::vector<double> FeatureEncoder::encode(const State& s) const {
  std::vector<double> out(dim());
  encode(s, out);
  return out;
}

void FeatureEncoder::check_output(std::span<double> out) const {
  if (static_cast<int>(out.size()) != dim()) {
    throw InputError(fmt::format("{}: output has size {}, expected {}", spec().name(), out.size(), dim()));
  }
}

OneHotEncoder::OneHotEncoder(int n_states) : n_states_(n_states) {
  if (n_states < 1) throw InputError("OneHotEncoder: need at least one state");
}

void OneHotEncoder::encode(const State& s, std::span<double> out) const {
  check_output(out);
  if (s.index < 0 || s.index >= n_states_) throw InputError("OneHotEncoder: state outside the tabular domain");
  std::fill(out.begin(), out.end(), 0.0);
  out[s.index] = 1.0;
}

GridSemanticEncoder::GridSemanticEncoder(GridSpec spec) : spec_(spec) {}

void GridSemanticEncoder::encode(const State& s, std::span<double> out) const {
  check_output(out);
  if (s.index < 0 || s.index >= spec_.num_cells()) throw InputError("GridSemanticEncoder: state outside the grid");
  std::fill(out.begin(), out.end(), 0.0);
  const Cell c = spec_.cell(s.index);
  out[s.index] = 1.0;
  out[x_dim()] = spec_.width > 1 ? static_cast<double>(c.x) / (spec_.width - 1) : 0.0;
  out[y_dim()] = spec_.height > 1 ? static_cast<double>(c.y) / (spec_.height - 1) : 0.0;
  out[goal_dim()] = c == spec_.goal ? 1.0 : 0.0;
  out[pit_dim()] = c == spec_.pit ? 1.0 : 0.0;
  const int span = std::max(1, spec_.width - 1 + spec_.height - 1);
  out[distance_dim()] = -static_cast<double>(std::abs(c.x - spec_.goal.x) + std::abs(c.y - spec_.goal.y)) / span;
}

PlanarView::PlanarView(std::vector<std::array<double, 2>> tabular_coordinates)
    : coords_(std::move(tabular_coordinates)) {}

std::array<double, 2> PlanarView::operator()(const State& s) const {
  if (!s.is_tabular()) return s.pos;
  if (s.index >= static_cast<int>(coords_.size())) throw InputError("PlanarView: no coordinates for tabular state");
  return coords_[s.index];
}

RandomProjectionEncoder::RandomProjectionEncoder(PlanarView view, int output_dim, std::uint64_t seed)
    : view_(std::move(view)), output_dim_(output_dim), seed_(seed) {
  if (output_dim < 1) throw InputError("RandomProjectionEncoder: output_dim must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 4.0);
  weights_.resize(static_cast<std::size_t>(output_dim) * 2);
  bias_.resize(output_dim);
  for (int i = 0; i < output_dim; ++i) {
    // Each unit is a tanh ridge through a random point of the unit square.
    const double cx = uniform01(rng);
    const double cy = uniform01(rng);
    weights_[2 * i] = normal(rng);
    weights_[2 * i + 1] = normal(rng);
    bias_[i] = -(weights_[2 * i] * cx + weights_[2 * i + 1] * cy);
  }
}

void RandomProjectionEncoder::encode(const State& s, std::span<double> out) const {
  check_output(out);
  const auto p = view_(s);
  for (int i = 0; i < output_dim_; ++i) {
    out[i] = std::tanh(weights_[2 * i] * p[0] + weights_[2 * i + 1] * p[1] + bias_[i]);
  }
}

RbfGridEncoder::RbfGridEncoder(PlanarView view, int side, double width)
    : view_(std::move(view)), side_(side), width_(width) {
  if (side < 2) throw InputError("RbfGridEncoder: side must be >= 2");
  if (width_ <= 0.0) width_ = 1.0 / (side - 1);
}

void RbfGridEncoder::encode(const State& s, std::span<double> out) const {
  check_output(out);
  const auto p = view_(s);
  const double inv = 1.0 / (2.0 * width_ * width_);
  for (int j = 0; j < side_; ++j) {
    for (int i = 0; i < side_; ++i) {
      const double dx = p[0] - static_cast<double>(i) / (side_ - 1);
      const double dy = p[1] - static_cast<double>(j) / (side_ - 1);
      out[j * side_ + i] = std::exp(-(dx * dx + dy * dy) * inv);
    }
  }
}

DeltaEncoder::DeltaEncoder(EncoderPtr inner) : inner_(std::move(inner)) {
  if (!inner_) throw InputError("DeltaEncoder: null inner encoder");
}

void DeltaEncoder::encode_transition(const State& s, const State& s_next, std::span<double> out) const {
  inner_->encode(s_next, out);
  std::vector<double> before(out.size());
  inner_->encode(s, before);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= before[i];
}

std::vector<double> DeltaEncoder::encode_transition(const State& s, const State& s_next) const {
  std::vector<double> out(dim());
  encode_transition(s, s_next, out);
  return out;
}

TransitionFeatures::TransitionFeatures(EncoderPtr encoder, bool delta) : encoder_(std::move(encoder)), delta_(delta) {
  if (!encoder_) throw InputError("TransitionFeatures: null encoder");
  if (delta_) delta_encoder_.emplace(encoder_);
}

EncoderSpec TransitionFeatures::spec() const {
  EncoderSpec s = encoder_->spec();
  s.delta = delta_;
  return s;
}

void TransitionFeatures::encode(const State& s, const State& s_next, std::span<double> out) const {
  if (delta_encoder_) {
    delta_encoder_->encode_transition(s, s_next, out);
  } else {
    encoder_->encode(s_next, out);
  }
}

std::vector<double> TransitionFeatures::encode(const State& s, const State& s_next) const {
  std::vector<double> out(dim());
  encode(s, s_next, out);
  return out;
}

EncoderPtr make_encoder(const EncoderSpec& spec, const EncoderContext& context) {
  if (spec.variant == "one_hot") {
    if (context.n_states < 1) throw UnsupportedError("one_hot encoder needs a tabular environment");
    return std::make_shared<OneHotEncoder>(context.n_states);
  }
  if (spec.variant == "hand_crafted") {
    if (!context.grid) throw UnsupportedError("hand_crafted encoder needs a gridworld");
    return std::make_shared<GridSemanticEncoder>(*context.grid);
  }
  if (spec.variant == "random_projection") {
    return std::make_shared<RandomProjectionEncoder>(context.planar, spec.dim > 0 ? spec.dim : 32, spec.seed);
  }
  if (spec.variant == "rbf_grid") {
    return std::make_shared<RbfGridEncoder>(context.planar, spec.dim > 0 ? spec.dim : 5);
  }
  throw InputError(fmt::format("unknown encoder variant '{}'", spec.variant));
}

TransitionFeatures make_transition_features(const EncoderSpec& spec, const EncoderContext& context) {
  return TransitionFeatures(make_encoder(spec, context), spec.delta);
}

}  // namespace pi2vec
