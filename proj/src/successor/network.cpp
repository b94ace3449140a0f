#include "pi2vec/successor/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

namespace pi2vec {

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kTabular:
      return "tabular";
    case Architecture::kLinear:
      return "linear";
    case Architecture::kMlp:
      return "mlp";
  }
  return "unknown";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "tabular") return Architecture::kTabular;
  if (name == "linear") return Architecture::kLinear;
  if (name == "mlp") return Architecture::kMlp;
  throw InputError(fmt::format("unknown architecture '{}'", name));
}

namespace {

void check_action(int a, int n_actions) {
  if (a < 0 || a >= n_actions) throw InputError(fmt::format("network: action {} out of range", a));
}

}  // namespace

// --- tabular ---

TabularNetwork::TabularNetwork(int n_states, int n_actions, int output_dim)
    : n_states_(n_states), n_actions_(n_actions), out_(output_dim) {
  if (n_states < 1 || n_actions < 1 || output_dim < 1) throw InputError("TabularNetwork: sizes must be positive");
}

int TabularNetwork::row(const State& s, int a) const {
  if (s.index < 0 || s.index >= n_states_) {
    throw InputError(fmt::format("TabularNetwork: state {} outside the {} tabular rows", s.index, n_states_));
  }
  check_action(a, n_actions_);
  return s.index * n_actions_ + a;
}

void TabularNetwork::init(std::span<double> theta, Rng&) const { std::fill(theta.begin(), theta.end(), 0.0); }

void TabularNetwork::forward(std::span<const double> theta, const State& s, int a, std::span<double> out,
                             NetScratch&) const {
  const auto src = theta.subspan(block_offset(row(s, a)), out_);
  std::copy(src.begin(), src.end(), out.begin());
}

int TabularNetwork::backward(std::span<const double>, const State& s, int a, std::span<const double> grad_out,
                             NetScratch&, std::span<double> grad) const {
  const int r = row(s, a);
  double* dst = grad.data() + block_offset(r);
  for (int i = 0; i < out_; ++i) dst[i] += grad_out[i];
  return r;
}

nlohmann::ordered_json TabularNetwork::describe() const {
  return {{"kind", "tabular"}, {"n_states", n_states_}, {"n_actions", n_actions_}, {"output_dim", out_}};
}

// --- linear ---

LinearNetwork::LinearNetwork(EncoderPtr encoder, int n_actions, int output_dim)
    : encoder_(std::move(encoder)), n_actions_(n_actions), out_(output_dim) {
  if (!encoder_) throw InputError("LinearNetwork: null encoder");
  if (n_actions < 1 || output_dim < 1) throw InputError("LinearNetwork: sizes must be positive");
  in_ = encoder_->dim();
}

void LinearNetwork::init(std::span<double> theta, Rng&) const { std::fill(theta.begin(), theta.end(), 0.0); }

void LinearNetwork::forward(std::span<const double> theta, const State& s, int a, std::span<double> out,
                            NetScratch& scratch) const {
  check_action(a, n_actions_);
  scratch.input.resize(in_ + 1);
  encoder_->encode(s, std::span<double>(scratch.input.data(), in_));
  scratch.input[in_] = 1.0;
  const double* w = theta.data() + block_offset(a);
  const int cols = in_ + 1;
  for (int o = 0; o < out_; ++o) {
    const double* wr = w + static_cast<std::size_t>(o) * cols;
    double acc = 0.0;
    for (int i = 0; i < cols; ++i) acc += wr[i] * scratch.input[i];
    out[o] = acc;
  }
}

int LinearNetwork::backward(std::span<const double>, const State&, int a, std::span<const double> grad_out,
                            NetScratch& scratch, std::span<double> grad) const {
  double* g = grad.data() + block_offset(a);
  const int cols = in_ + 1;
  for (int o = 0; o < out_; ++o) {
    const double go = grad_out[o];
    if (go == 0.0) continue;
    double* gr = g + static_cast<std::size_t>(o) * cols;
    for (int i = 0; i < cols; ++i) gr[i] += go * scratch.input[i];
  }
  return a;
}

nlohmann::ordered_json LinearNetwork::describe() const {
  return {{"kind", "linear"}, {"input_dim", in_}, {"n_actions", n_actions_}, {"output_dim", out_}};
}

// --- mlp ---

MlpNetwork::MlpNetwork(EncoderPtr encoder, int n_actions, int hidden, int output_dim)
    : encoder_(std::move(encoder)), n_actions_(n_actions), hidden_(hidden), out_(output_dim) {
  if (!encoder_) throw InputError("MlpNetwork: null encoder");
  if (n_actions < 1 || hidden < 1 || output_dim < 1) throw InputError("MlpNetwork: sizes must be positive");
  in_ = encoder_->dim() + n_actions;
}

std::size_t MlpNetwork::param_count() const { return b3() + out_; }

void MlpNetwork::init(std::span<double> theta, Rng& rng) const {
  std::fill(theta.begin(), theta.end(), 0.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s1 = std::sqrt(2.0 / in_);
  const double s2 = std::sqrt(2.0 / hidden_);
  for (std::size_t i = w1(); i < b1(); ++i) theta[i] = s1 * normal(rng);
  for (std::size_t i = w2(); i < b2(); ++i) theta[i] = s2 * normal(rng);
  // Small head so the initial output is close to uniform / zero.
  for (std::size_t i = w3(); i < b3(); ++i) theta[i] = 0.01 * s2 * normal(rng);
}

void MlpNetwork::forward(std::span<const double> theta, const State& s, int a, std::span<double> out,
                         NetScratch& scratch) const {
  check_action(a, n_actions_);
  const int n_phi = in_ - n_actions_;
  scratch.input.assign(in_, 0.0);
  encoder_->encode(s, std::span<double>(scratch.input.data(), n_phi));
  scratch.input[n_phi + a] = 1.0;
  scratch.h1.resize(hidden_);
  scratch.h2.resize(hidden_);
  const double* t = theta.data();
  for (int h = 0; h < hidden_; ++h) {
    const double* wr = t + w1() + static_cast<std::size_t>(h) * in_;
    double acc = t[b1() + h];
    for (int i = 0; i < in_; ++i) acc += wr[i] * scratch.input[i];
    scratch.h1[h] = std::max(0.0, acc);
  }
  for (int h = 0; h < hidden_; ++h) {
    const double* wr = t + w2() + static_cast<std::size_t>(h) * hidden_;
    double acc = t[b2() + h];
    for (int i = 0; i < hidden_; ++i) acc += wr[i] * scratch.h1[i];
    scratch.h2[h] = std::max(0.0, acc);
  }
  for (int o = 0; o < out_; ++o) {
    const double* wr = t + w3() + static_cast<std::size_t>(o) * hidden_;
    double acc = t[b3() + o];
    for (int i = 0; i < hidden_; ++i) acc += wr[i] * scratch.h2[i];
    out[o] = acc;
  }
}

int MlpNetwork::backward(std::span<const double> theta, const State&, int, std::span<const double> grad_out,
                         NetScratch& scratch, std::span<double> grad) const {
  const double* t = theta.data();
  double* g = grad.data();
  scratch.g2.assign(hidden_, 0.0);
  scratch.g1.assign(hidden_, 0.0);
  for (int o = 0; o < out_; ++o) {
    const double go = grad_out[o];
    if (go == 0.0) continue;
    g[b3() + o] += go;
    const double* wr = t + w3() + static_cast<std::size_t>(o) * hidden_;
    double* gr = g + w3() + static_cast<std::size_t>(o) * hidden_;
    for (int i = 0; i < hidden_; ++i) {
      gr[i] += go * scratch.h2[i];
      scratch.g2[i] += go * wr[i];
    }
  }
  for (int h = 0; h < hidden_; ++h) {
    if (scratch.h2[h] <= 0.0) continue;
    const double gh = scratch.g2[h];
    g[b2() + h] += gh;
    const double* wr = t + w2() + static_cast<std::size_t>(h) * hidden_;
    double* gr = g + w2() + static_cast<std::size_t>(h) * hidden_;
    for (int i = 0; i < hidden_; ++i) {
      gr[i] += gh * scratch.h1[i];
      scratch.g1[i] += gh * wr[i];
    }
  }
  for (int h = 0; h < hidden_; ++h) {
    if (scratch.h1[h] <= 0.0) continue;
    const double gh = scratch.g1[h];
    g[b1() + h] += gh;
    double* gr = g + w1() + static_cast<std::size_t>(h) * in_;
    for (int i = 0; i < in_; ++i) gr[i] += gh * scratch.input[i];
  }
  return 0;
}

nlohmann::ordered_json MlpNetwork::describe() const {
  return {{"kind", "mlp"}, {"input_dim", in_ - n_actions_}, {"n_actions", n_actions_}, {"hidden", hidden_},
          {"output_dim", out_}};
}

std::unique_ptr<PsiNetwork> make_network(const nlohmann::ordered_json& d, EncoderPtr encoder) {
  try {
    const auto kind = parse_architecture(d.at("kind").get<std::string>());
    const int n_actions = d.at("n_actions").get<int>();
    const int out = d.at("output_dim").get<int>();
    switch (kind) {
      case Architecture::kTabular:
        return std::make_unique<TabularNetwork>(d.at("n_states").get<int>(), n_actions, out);
      case Architecture::kLinear: {
        auto net = std::make_unique<LinearNetwork>(encoder, n_actions, out);
        if (d.at("input_dim").get<int>() != encoder->dim()) throw FormatError("network: encoder dimension mismatch");
        return net;
      }
      case Architecture::kMlp: {
        auto net = std::make_unique<MlpNetwork>(encoder, n_actions, d.at("hidden").get<int>(), out);
        if (d.at("input_dim").get<int>() != encoder->dim()) throw FormatError("network: encoder dimension mismatch");
        return net;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("network description: {}", e.what()));
  }
  throw FormatError("network description: unknown kind");
}

}  // namespace pi2vec
