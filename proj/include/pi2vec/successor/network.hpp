#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pi2vec/features/encoders.hpp"

namespace pi2vec {

enum class Architecture { kTabular, kLinear, kMlp };

std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& name);

/// Per-call buffers so that one network can serve concurrent callers.
struct NetScratch {
  std::vector<double> input;
  std::vector<double> h1;
  std::vector<double> h2;
  std::vector<double> g1;
  std::vector<double> g2;
};

/// Differentiable map (s, a) -> R^out. Parameters live outside the network
/// (live and target copies share one structure) and are split into blocks;
/// a sample's gradient touches only the blocks it reports.
class PsiNetwork {
 public:
  virtual ~PsiNetwork() = default;

  virtual Architecture architecture() const = 0;
  virtual int output_dim() const = 0;
  virtual int n_actions() const = 0;
  virtual std::size_t param_count() const = 0;
  virtual int num_blocks() const = 0;
  virtual std::size_t block_offset(int block) const = 0;
  virtual std::size_t block_size(int block) const = 0;

  virtual void init(std::span<double> theta, Rng& rng) const = 0;
  virtual void forward(std::span<const double> theta, const State& s, int a, std::span<double> out,
                       NetScratch& scratch) const = 0;
  /// Adds d(loss)/d(theta) into `grad` given d(loss)/d(out), reusing the
  /// activations of the last forward on `scratch` for the same (s, a).
  /// Returns the touched block.
  virtual int backward(std::span<const double> theta, const State& s, int a, std::span<const double> grad_out,
                       NetScratch& scratch, std::span<double> grad) const = 0;

  /// Rows of a tabular network can be cached between target refreshes;
  /// other networks return -1.
  virtual int cache_key(const State&, int) const { return -1; }

  virtual nlohmann::ordered_json describe() const = 0;
};

/// One free output row per (state index, action).
class TabularNetwork final : public PsiNetwork {
 public:
  TabularNetwork(int n_states, int n_actions, int output_dim);

  Architecture architecture() const override { return Architecture::kTabular; }
  int output_dim() const override { return out_; }
  int n_actions() const override { return n_actions_; }
  std::size_t param_count() const override { return static_cast<std::size_t>(n_states_) * n_actions_ * out_; }
  int num_blocks() const override { return n_states_ * n_actions_; }
  std::size_t block_offset(int block) const override { return static_cast<std::size_t>(block) * out_; }
  std::size_t block_size(int) const override { return out_; }

  void init(std::span<double> theta, Rng& rng) const override;
  void forward(std::span<const double> theta, const State& s, int a, std::span<double> out,
               NetScratch& scratch) const override;
  int backward(std::span<const double> theta, const State& s, int a, std::span<const double> grad_out,
               NetScratch& scratch, std::span<double> grad) const override;
  int cache_key(const State& s, int a) const override { return row(s, a); }
  nlohmann::ordered_json describe() const override;

  int n_states() const { return n_states_; }

 private:
  int row(const State& s, int a) const;
  int n_states_;
  int n_actions_;
  int out_;
};

/// out = W_a [phi(s); 1], one weight block per action.
class LinearNetwork final : public PsiNetwork {
 public:
  LinearNetwork(EncoderPtr encoder, int n_actions, int output_dim);

  Architecture architecture() const override { return Architecture::kLinear; }
  int output_dim() const override { return out_; }
  int n_actions() const override { return n_actions_; }
  std::size_t param_count() const override { return block_size(0) * n_actions_; }
  int num_blocks() const override { return n_actions_; }
  std::size_t block_offset(int block) const override { return block * block_size(0); }
  std::size_t block_size(int) const override { return static_cast<std::size_t>(out_) * (in_ + 1); }

  void init(std::span<double> theta, Rng& rng) const override;
  void forward(std::span<const double> theta, const State& s, int a, std::span<double> out,
               NetScratch& scratch) const override;
  int backward(std::span<const double> theta, const State& s, int a, std::span<const double> grad_out,
               NetScratch& scratch, std::span<double> grad) const override;
  nlohmann::ordered_json describe() const override;

 private:
  EncoderPtr encoder_;
  int n_actions_;
  int in_;
  int out_;
};

/// Two ReLU hidden layers on [phi(s); onehot(a)]; one dense block.
class MlpNetwork final : public PsiNetwork {
 public:
  MlpNetwork(EncoderPtr encoder, int n_actions, int hidden, int output_dim);

  Architecture architecture() const override { return Architecture::kMlp; }
  int output_dim() const override { return out_; }
  int n_actions() const override { return n_actions_; }
  std::size_t param_count() const override;
  int num_blocks() const override { return 1; }
  std::size_t block_offset(int) const override { return 0; }
  std::size_t block_size(int) const override { return param_count(); }

  void init(std::span<double> theta, Rng& rng) const override;
  void forward(std::span<const double> theta, const State& s, int a, std::span<double> out,
               NetScratch& scratch) const override;
  int backward(std::span<const double> theta, const State& s, int a, std::span<const double> grad_out,
               NetScratch& scratch, std::span<double> grad) const override;
  nlohmann::ordered_json describe() const override;

  int hidden() const { return hidden_; }

 private:
  // Offsets of W1 (H x in), b1, W2 (H x H), b2, W3 (out x H), b3.
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return w1() + static_cast<std::size_t>(hidden_) * in_; }
  std::size_t w2() const { return b1() + hidden_; }
  std::size_t b2() const { return w2() + static_cast<std::size_t>(hidden_) * hidden_; }
  std::size_t w3() const { return b2() + hidden_; }
  std::size_t b3() const { return w3() + static_cast<std::size_t>(out_) * hidden_; }

  EncoderPtr encoder_;
  int n_actions_;
  int hidden_;
  int in_;
  int out_;
};

/// Rebuilds a network from describe() output.
std::unique_ptr<PsiNetwork> make_network(const nlohmann::ordered_json& description, EncoderPtr encoder);

}  // namespace pi2vec
