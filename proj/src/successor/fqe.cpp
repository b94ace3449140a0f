#include "pi2vec/successor/fqe.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include <fmt/format.h>

#include "pi2vec/features/bounds.hpp"
#include "pi2vec/successor/adam.hpp"

namespace pi2vec {

void FqeConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InputError("FqeConfig: learning_rate must be positive");
  if (!(final_learning_rate >= 0.0)) throw InputError("FqeConfig: final_learning_rate must be >= 0");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("FqeConfig: gamma must lie in [0, 1)");
  if (batch_size < 1 || train_steps < 1 || target_refresh_period < 1) throw InputError("FqeConfig: counts must be >= 1");
  if (bins < 2) throw InputError("FqeConfig: bins must be >= 2");
  if (hidden < 1) throw InputError("FqeConfig: hidden must be >= 1");
  if (tabular_states < 0 || residual_log_period < 0) throw InputError("FqeConfig: negative size");
}

nlohmann::ordered_json to_json(const FqeConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"final_learning_rate", c.final_learning_rate},
          {"gamma", c.gamma},
          {"batch_size", c.batch_size},
          {"train_steps", c.train_steps},
          {"target_refresh_period", c.target_refresh_period},
          {"bins", c.bins},
          {"mode", to_string(c.mode)},
          {"seed", c.seed},
          {"architecture", to_string(c.architecture)},
          {"hidden", c.hidden},
          {"tabular_states", c.tabular_states},
          {"residual_log_period", c.residual_log_period}};
}

FqeConfig fqe_config_from_json(const nlohmann::ordered_json& j) {
  FqeConfig c;
  if (!j.is_object()) throw InputError("fqe config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "final_learning_rate") c.final_learning_rate = value.get<double>();
      else if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "train_steps") c.train_steps = value.get<int>();
      else if (key == "target_refresh_period") c.target_refresh_period = value.get<int>();
      else if (key == "bins") c.bins = value.get<int>();
      else if (key == "mode") c.mode = parse_fqe_mode(value.get<std::string>());
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "architecture") c.architecture = parse_architecture(value.get<std::string>());
      else if (key == "hidden") c.hidden = value.get<int>();
      else if (key == "tabular_states") c.tabular_states = value.get<int>();
      else if (key == "residual_log_period") c.residual_log_period = value.get<int>();
      else throw InputError(fmt::format("fqe config: unknown key '{}'", key));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("fqe config: {}", e.what()));
  }
  c.validate();
  return c;
}

double empirical_bellman_residual(const SuccessorFeatureModel& model, const Policy& policy,
                                  const OfflineDataset& dataset) {
  const int n = model.dim();
  const double gamma = model.gamma();
  using Key = std::pair<std::uint64_t, int>;
  std::map<Key, std::vector<double>> psi_cache;
  auto psi = [&](const State& s, int a) -> const std::vector<double>& {
    const Key key{state_hash(s), a};
    auto it = psi_cache.find(key);
    if (it == psi_cache.end()) it = psi_cache.emplace(key, predict_psi(model, s, a)).first;
    return it->second;
  };

  struct Group {
    State state;
    int action = 0;
    std::vector<double> target_sum;
    int count = 0;
  };
  std::map<Key, Group> groups;
  std::vector<double> phi(n);
  for (const auto& traj : dataset.trajectories) {
    for (const auto& t : traj.steps) {
      auto& g = groups[{state_hash(t.state), t.action}];
      if (g.count == 0) {
        g.state = t.state;
        g.action = t.action;
        g.target_sum.assign(n, 0.0);
      }
      ++g.count;
      model.features().encode(t.state, t.next_state, phi);
      for (int d = 0; d < n; ++d) g.target_sum[d] += phi[d];
      if (t.terminal) continue;
      const auto probs = policy.action_probabilities(t.next_state);
      if (probs) {
        for (int a = 0; a < static_cast<int>(probs->size()); ++a) {
          if ((*probs)[a] == 0.0) continue;
          const auto& next = psi(t.next_state, a);
          for (int d = 0; d < n; ++d) g.target_sum[d] += gamma * (*probs)[a] * next[d];
        }
      } else {
        const auto& next = psi(t.next_state, policy.act_frozen(t.next_state));
        for (int d = 0; d < n; ++d) g.target_sum[d] += gamma * next[d];
      }
    }
  }
  double weighted = 0.0;
  std::size_t total = 0;
  for (const auto& [key, g] : groups) {
    const auto& current = psi(g.state, g.action);
    double gap = 0.0;
    for (int d = 0; d < n; ++d) gap = std::max(gap, std::abs(current[d] - g.target_sum[d] / g.count));
    weighted += g.count * gap * gap;
    total += g.count;
  }
  return std::sqrt(weighted / total);
}

namespace {

struct CoreFit {
  std::shared_ptr<const PsiNetwork> net;
  std::vector<double> theta;
  double final_loss = 0.0;
};

using StepLogger = std::function<void(int, const std::shared_ptr<const PsiNetwork>&, const std::vector<double>&)>;

// The training loop proper. `phi` holds n immediate features per transition.
CoreFit fit_core(const std::vector<const Transition*>& transitions, const std::vector<double>& phi, int n,
                 const Support& support, const Policy& policy, const EncoderPtr& input_encoder, int max_index,
                 const FqeConfig& config, const StepLogger& log, bool track_final_loss) {
  const int bins = config.bins;
  const bool distributional = config.mode == FqeMode::kDistributional;
  const int out_dim = distributional ? n * bins : n;
  const int n_actions = policy.num_actions();

  std::shared_ptr<const PsiNetwork> net;
  switch (config.architecture) {
    case Architecture::kTabular: {
      const int rows = config.tabular_states > 0 ? config.tabular_states : max_index + 1;
      if (rows <= max_index) throw InputError("train_fqe: tabular_states smaller than the dataset's state indices");
      net = std::make_shared<TabularNetwork>(rows, n_actions, out_dim);
      break;
    }
    case Architecture::kLinear:
      if (!input_encoder) throw InputError("train_fqe: linear parameterization needs an input encoder");
      net = std::make_shared<LinearNetwork>(input_encoder, n_actions, out_dim);
      break;
    case Architecture::kMlp:
      if (!input_encoder) throw InputError("train_fqe: mlp parameterization needs an input encoder");
      net = std::make_shared<MlpNetwork>(input_encoder, n_actions, config.hidden, out_dim);
      break;
  }

  Rng rng(config.seed);
  std::vector<double> theta(net->param_count());
  net->init(theta, rng);
  std::vector<double> target_theta = theta;
  std::vector<double> grad(theta.size(), 0.0);
  BlockAdam adam(*net, AdamConfig{config.learning_rate});
  std::vector<char> touched_flag(net->num_blocks(), 0);
  std::vector<int> touched;

  // Target-network outputs for cacheable (tabular) rows, reset each refresh.
  std::vector<std::vector<double>> target_cache;
  if (net->cache_key(tabular_state(0), 0) >= 0) target_cache.resize(net->num_blocks());

  NetScratch online_scratch, target_scratch;
  std::vector<double> out(out_dim), target_out(out_dim), target(out_dim), grad_out(out_dim);
  std::vector<double> point_row(bins, 0.0);
  point_row[0] = 1.0;

  if (log) log(0, net, theta);

  // Target-network answer at (s', a'), as probabilities or raw values.
  auto target_at = [&](const State& s, int a) -> const std::vector<double>& {
    const int key = net->cache_key(s, a);
    if (key >= 0 && !target_cache[key].empty()) return target_cache[key];
    net->forward(target_theta, s, a, target_out, target_scratch);
    if (distributional) softmax_rows(target_out, bins);
    if (key < 0) return target_out;
    target_cache[key] = target_out;
    return target_cache[key];
  };

  double loss_sum = 0.0;
  long loss_count = 0;
  const double inv_batch = 1.0 / config.batch_size;
  const double decay = config.final_learning_rate > 0.0 && config.train_steps > 1
                           ? std::log(config.final_learning_rate / config.learning_rate) / (config.train_steps - 1)
                           : 0.0;
  for (int step = 1; step <= config.train_steps; ++step) {
    if (decay != 0.0) adam.set_learning_rate(config.learning_rate * std::exp(decay * (step - 1)));
    if ((step - 1) % config.target_refresh_period == 0) {
      target_theta = theta;
      for (auto& row : target_cache) row.clear();
      loss_sum = 0.0;
      loss_count = 0;
    }
    const bool track_loss = track_final_loss && step > config.train_steps - config.target_refresh_period;
    for (int k = 0; k < config.batch_size; ++k) {
      const std::size_t i = static_cast<std::size_t>(uniform_index(rng, static_cast<int>(transitions.size())));
      const auto& t = *transitions[i];
      const double* phi_i = phi.data() + i * n;

      // Build the target before the online forward so scratch stays valid.
      if (distributional) {
        if (t.terminal) {
          for (int d = 0; d < n; ++d) {
            project_dimension(phi_i[d], point_row, 0.0, support, d,
                              std::span<double>(target.data() + static_cast<std::size_t>(d) * bins, bins));
          }
        } else {
          const int a_next = policy.act(t.next_state, rng);
          const auto& next = target_at(t.next_state, a_next);
          for (int d = 0; d < n; ++d) {
            const std::size_t off = static_cast<std::size_t>(d) * bins;
            project_dimension(phi_i[d], std::span<const double>(next.data() + off, bins), config.gamma, support, d,
                              std::span<double>(target.data() + off, bins));
          }
        }
      } else {
        for (int d = 0; d < n; ++d) target[d] = phi_i[d];
        if (!t.terminal) {
          const int a_next = policy.act(t.next_state, rng);
          const auto& next = target_at(t.next_state, a_next);
          for (int d = 0; d < n; ++d) target[d] += config.gamma * next[d];
        }
      }

      net->forward(theta, t.state, t.action, out, online_scratch);
      double loss = 0.0;
      if (distributional) {
        softmax_rows(out, bins);
        for (int j = 0; j < out_dim; ++j) grad_out[j] = (out[j] - target[j]) * inv_batch;
        // Cross-entropy is only reported, so only pay for logs in the last window.
        if (track_loss) {
          for (int j = 0; j < out_dim; ++j) {
            if (target[j] > 0.0) loss -= target[j] * std::log(std::max(out[j], 1e-300));
          }
        }
      } else {
        for (int j = 0; j < out_dim; ++j) {
          const double diff = out[j] - target[j];
          loss += 0.5 * diff * diff;
          grad_out[j] = diff * inv_batch;
        }
      }
      loss_sum += loss;
      ++loss_count;
      const int block = net->backward(theta, t.state, t.action, grad_out, online_scratch, grad);
      if (!touched_flag[block]) {
        touched_flag[block] = 1;
        touched.push_back(block);
      }
    }
    adam.step(theta, grad, touched);
    for (int b : touched) touched_flag[b] = 0;
    touched.clear();

    if (log && config.residual_log_period > 0 && step % config.residual_log_period == 0 &&
        step != config.train_steps) {
      log(step, net, theta);
    }
  }
  if (log) log(config.train_steps, net, theta);
  return CoreFit{net, std::move(theta), loss_count > 0 ? loss_sum / loss_count : 0.0};
}

// Checks actions and tabular requirements; returns the largest state index seen.
int check_transitions(const std::vector<const Transition*>& transitions, const Policy& policy,
                      const FqeConfig& config) {
  int max_index = -1;
  for (const auto* t : transitions) {
    if (t->action < 0 || t->action >= policy.num_actions()) {
      throw InputError("train_fqe: dataset action outside the policy's range");
    }
    if (config.architecture == Architecture::kTabular) {
      if (!t->state.is_tabular() || !t->next_state.is_tabular()) {
        throw InputError("train_fqe: tabular parameterization needs tabular states");
      }
      max_index = std::max({max_index, t->state.index, t->next_state.index});
    }
  }
  return max_index;
}

}  // namespace

SuccessorFeatureModel train_fqe(const OfflineDataset& dataset, const Policy& policy,
                                const TransitionFeatures& features, const FqeConfig& config, TrainStats* stats) {
  config.validate();
  const auto transitions = flatten(dataset);
  if (transitions.empty()) throw InputError("train_fqe: empty dataset");
  const int n = features.dim();
  const int max_index = check_transitions(transitions, policy, config);

  // Immediate features for every transition; also rejects out-of-domain states.
  std::vector<double> phi(transitions.size() * n);
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    features.encode(transitions[i]->state, transitions[i]->next_state, std::span<double>(phi.data() + i * n, n));
  }
  const Support support(feature_bounds(features, dataset, config.gamma), config.bins);

  auto snapshot = [&](const std::shared_ptr<const PsiNetwork>& net, const std::vector<double>& params) {
    return SuccessorFeatureModel(support, config.gamma, config.mode, features, policy.id(), net, params);
  };
  StepLogger log;
  if (stats) {
    log = [&](int step, const std::shared_ptr<const PsiNetwork>& net, const std::vector<double>& theta) {
      stats->residual_log.emplace_back(step, empirical_bellman_residual(snapshot(net, theta), policy, dataset));
    };
  }
  auto fit = fit_core(transitions, phi, n, support, policy, features.state_encoder_ptr(), max_index, config, log,
                      stats != nullptr);
  if (stats) stats->final_loss = fit.final_loss;
  return snapshot(fit.net, fit.theta);
}

double ValueFqeModel::q(const State& s, int a) const {
  NetScratch scratch;
  std::vector<double> out(network->output_dim());
  network->forward(params, s, a, out, scratch);
  if (mode == FqeMode::kExpected) return out[0];
  softmax_rows(out, support.bins());
  return expected_value(out, support, 0);
}

double ValueFqeModel::value(const Policy& policy, const State& s) const {
  if (policy.id() != policy_id) throw InputError("ValueFqeModel: policy id mismatch");
  return q(s, policy.act_frozen(s));
}

ValueFqeModel train_value_fqe(const OfflineDataset& dataset, const Policy& policy, const EncoderPtr& input_encoder,
                              const FqeConfig& config) {
  config.validate();
  const auto transitions = flatten(dataset);
  if (transitions.empty()) throw InputError("train_value_fqe: empty dataset");
  const int max_index = check_transitions(transitions, policy, config);
  std::vector<double> phi(transitions.size());
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    phi[i] = transitions[i]->reward;
    lo = std::min(lo, phi[i]);
    hi = std::max(hi, phi[i]);
  }
  // Same rule as feature_bounds, applied to the scalar reward.
  FeatureBounds bounds{{lo / (1.0 - config.gamma)}, {hi / (1.0 - config.gamma)}};
  if (bounds.upper[0] - bounds.lower[0] <= 0.0) {
    bounds.lower[0] -= 0.5;
    bounds.upper[0] += 0.5;
  }
  const Support support(bounds, config.bins);
  auto fit = fit_core(transitions, phi, 1, support, policy, input_encoder, max_index, config, {}, false);
  return ValueFqeModel{support, config.mode, policy.id(), fit.net, std::move(fit.theta)};
}

}  // namespace pi2vec
