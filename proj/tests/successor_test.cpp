#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "pi2vec/env/dataset.hpp"
#include "pi2vec/env/gridworld.hpp"
#include "pi2vec/env/planning.hpp"
#include "pi2vec/env/reacher.hpp"
#include "pi2vec/features/linear_reward.hpp"
#include "pi2vec/successor/adam.hpp"
#include "pi2vec/successor/fqe.hpp"
#include "pi2vec/successor/oracles.hpp"

namespace pi2vec {
namespace {

EncoderContext grid_context(const GridSpec& spec) {
  return EncoderContext{spec.num_cells(), spec, PlanarView(grid_coordinates(spec))};
}

Support symmetric_support(int n, int bins, double half_width) {
  return Support(FeatureBounds{std::vector<double>(n, -half_width), std::vector<double>(n, half_width)}, bins);
}

std::vector<double> random_row(Rng& rng, int bins) {
  std::vector<double> row(bins);
  double total = 0.0;
  for (auto& p : row) {
    p = uniform01(rng) < 0.3 ? 0.0 : uniform01(rng);
    total += p;
  }
  if (total == 0.0) {
    row[0] = 1.0;
    total = 1.0;
  }
  for (auto& p : row) p /= total;
  return row;
}

class ConstantFeature final : public FeatureEncoder {
 public:
  explicit ConstantFeature(double c) : c_(c) {}
  int dim() const override { return 1; }
  EncoderSpec spec() const override { return {"constant", 1, 0, false}; }
  void encode(const State&, std::span<double> out) const override { out[0] = c_; }
  using FeatureEncoder::encode;

 private:
  double c_;
};

class FixedPolicy final : public Policy {
 public:
  FixedPolicy(int n_actions, int action) : Policy({"fixed", "test", 0}), n_(n_actions), a_(action) {}
  int num_actions() const override { return n_; }
  int act(const State&, Rng&) const override { return a_; }
  std::optional<std::vector<double>> action_probabilities(const State&) const override {
    std::vector<double> p(n_, 0.0);
    p[a_] = 1.0;
    return p;
  }

 private:
  int n_;
  int a_;
};

// Same behaviour as FixedPolicy but refuses to reveal probabilities.
class OpaquePolicy final : public Policy {
 public:
  OpaquePolicy() : Policy({"opaque", "test", 0}) {}
  int num_actions() const override { return 4; }
  int act(const State&, Rng&) const override { return 0; }
};

struct GridSetup {
  GridSpec spec;
  TabularMDP mdp;
  std::vector<PolicyPtr> policies;

  explicit GridSetup(std::vector<double> eps, GridSpec layout = GridSpec{})
      : spec(layout), mdp(make_gridworld(layout)) {
    const auto q = value_iteration(mdp, 0.99, 1e-10);
    policies = make_policy_family(mdp, q, eps, 1);
  }
};

GridSpec small_grid() {
  GridSpec spec;
  spec.width = 4;
  spec.height = 4;
  spec.goal = {3, 3};
  spec.pit = {1, 2};
  return spec;
}

// --- support and projection ---

TEST(Support, RejectsDegenerateBounds) {
  EXPECT_THROW(Support(FeatureBounds{{0.0}, {0.0}}, 51), InputError);
  EXPECT_THROW(Support(FeatureBounds{{1.0}, {0.0}}, 51), InputError);
  EXPECT_THROW(symmetric_support(1, 1, 1.0), InputError);
  const auto s = symmetric_support(2, 5, 1.0);
  EXPECT_DOUBLE_EQ(s.atom(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(s.atom(0, 2), 0.0);
  EXPECT_DOUBLE_EQ(s.atom(1, 4), 1.0);
  EXPECT_DOUBLE_EQ(s.width(1), 0.5);
}

TEST(Projection, GammaZeroIsPointMassAtShift) {
  const auto support = symmetric_support(1, 5, 1.0);
  Rng rng(3);
  const auto next = random_row(rng, 5);
  // 0.25 sits halfway between atoms 0 and 0.5.
  auto out = categorical_project(std::vector<double>{0.25}, next, 0.0, support);
  EXPECT_NEAR(out[2], 0.5, 1e-12);
  EXPECT_NEAR(out[3], 0.5, 1e-12);
  // Exactly on an atom.
  out = categorical_project(std::vector<double>{-0.5}, next, 0.0, support);
  EXPECT_NEAR(out[1], 1.0, 1e-12);
  // Beyond the support clamps to the edge.
  out = categorical_project(std::vector<double>{7.0}, next, 0.0, support);
  EXPECT_NEAR(out[4], 1.0, 1e-12);
}

TEST(Projection, IdentityWhenShiftZeroGammaOne) {
  const auto support = symmetric_support(3, 11, 2.0);
  Rng rng(4);
  std::vector<double> next;
  for (int d = 0; d < 3; ++d) {
    const auto row = random_row(rng, 11);
    next.insert(next.end(), row.begin(), row.end());
  }
  const auto out = categorical_project(std::vector<double>(3, 0.0), next, 1.0, support);
  for (std::size_t i = 0; i < next.size(); ++i) EXPECT_NEAR(out[i], next[i], 1e-12);
}

TEST(Projection, MeanPreservedInsideSupport) {
  // Support from the bounds rule with shift in [m, M]: no atom ever leaves
  // the support, so the projection keeps the mean exactly.
  Rng rng(5);
  for (int k = 0; k < 1000; ++k) {
    const double gamma = uniform01(rng) * 0.999;
    const double m = -uniform01(rng) * 3.0;
    const double big = uniform01(rng) * 3.0 + 1e-3;
    const int bins = 2 + uniform_index(rng, 60);
    const Support support(FeatureBounds{{m / (1 - gamma)}, {big / (1 - gamma)}}, bins);
    const double shift = m + uniform01(rng) * (big - m);
    const auto next = random_row(rng, bins);
    const auto out = categorical_project(std::vector<double>{shift}, next, gamma, support);
    double total = 0.0;
    for (double p : out) total += p;
    EXPECT_NEAR(total, 1.0, 1e-9);
    const double want = shift + gamma * expected_value(next, support, 0);
    EXPECT_NEAR(expected_value(out, support, 0), want, 1e-9 * (1.0 + std::abs(want)));
  }
}

TEST(Projection, MeanEqualsExpectedClampedAtom) {
  Rng rng(6);
  for (int k = 0; k < 1000; ++k) {
    const int bins = 2 + uniform_index(rng, 60);
    const auto support = symmetric_support(1, bins, 1.0 + 4.0 * uniform01(rng));
    const double gamma = uniform01(rng);
    const double shift = (uniform01(rng) - 0.5) * 20.0;
    const auto next = random_row(rng, bins);
    const auto out = categorical_project(std::vector<double>{shift}, next, gamma, support);
    double want = 0.0;
    for (int b = 0; b < bins; ++b) {
      want += next[b] * std::clamp(shift + gamma * support.atom(0, b), support.lower(0), support.upper(0));
    }
    EXPECT_NEAR(expected_value(out, support, 0), want, 1e-9);
    double total = 0.0;
    for (double p : out) {
      EXPECT_GE(p, 0.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Projection, RejectsBadInput) {
  const auto support = symmetric_support(2, 5, 1.0);
  const std::vector<double> uniform(10, 0.2);
  EXPECT_THROW(categorical_project(std::vector<double>{0.0}, uniform, 0.5, support), InputError);
  EXPECT_THROW(categorical_project(std::vector<double>{0.0, 0.0}, std::vector<double>(10, 0.1), 0.5, support),
               InputError);
  EXPECT_THROW(categorical_project(std::vector<double>{0.0, 0.0}, uniform, 1.5, support), InputError);
}

TEST(ExpectedValue, PointMassAndUniform) {
  const auto support = symmetric_support(1, 7, 3.0);
  std::vector<double> point(7, 0.0);
  point[5] = 1.0;
  EXPECT_DOUBLE_EQ(expected_value(point, support, 0), support.atom(0, 5));
  EXPECT_NEAR(expected_value(std::vector<double>(7, 1.0 / 7), support, 0), 0.0, 1e-12);
}

// --- DP oracle ---

TEST(DpPsi, GammaZeroIsOneStepFeatureMean) {
  GridSetup g({0.3});
  const auto f = make_transition_features(parse_encoder_name("hand_crafted"), grid_context(g.spec));
  const auto psi = dp_successor_features(g.mdp, *g.policies[0], f, 0.0, 1e-12);
  for (int s = 0; s < g.mdp.num_states(); ++s) {
    for (int a = 0; a < 4; ++a) {
      std::vector<double> want(f.dim(), 0.0);
      for (const auto& o : g.mdp.outcomes(s, a)) {
        const auto phi = f.encode(tabular_state(s), tabular_state(o.next));
        for (int d = 0; d < f.dim(); ++d) want[d] += o.prob * phi[d];
      }
      for (int d = 0; d < f.dim(); ++d) ASSERT_NEAR(psi.at(s, a)[d], want[d], 1e-12);
    }
  }
}

TEST(DpPsi, GeometricSeriesOnAbsorbingState) {
  const TransitionFeatures f(std::make_shared<ConstantFeature>(1.0), false);
  const FixedPolicy policy(1, 0);
  const double tol = 1e-10;
  const TabularMDP loop("loop", 1, 1, {{Outcome{0, 1.0, 0.0}}}, {false}, {1.0});
  EXPECT_NEAR(dp_successor_features(loop, policy, f, 0.99, tol).at(0, 0)[0], 100.0, tol / 0.01);
  // Terminal: the sum stops after the first transition.
  const TabularMDP term("term", 1, 1, {{Outcome{0, 1.0, 0.0}}}, {true}, {1.0});
  EXPECT_DOUBLE_EQ(dp_successor_features(term, policy, f, 0.99, tol).at(0, 0)[0], 1.0);
}

TEST(DpPsi, ResidualBelowTolerance) {
  GridSetup g({0.25});
  const auto f = make_transition_features(parse_encoder_name("delta_hand_crafted"), grid_context(g.spec));
  const auto psi = dp_successor_features(g.mdp, *g.policies[0], f, 0.95, 1e-9);
  EXPECT_LE(psi_bellman_residual(g.mdp, policy_matrix(g.mdp, *g.policies[0]), f, 0.95, psi), 1e-9);
}

TEST(DpPsi, Unsupported) {
  GridSetup g({0.0});
  const auto f = make_transition_features(parse_encoder_name("one_hot"), grid_context(g.spec));
  EXPECT_THROW(dp_successor_features(g.mdp, OpaquePolicy(), f, 0.9, 1e-6), UnsupportedError);
  const ContinuousEnv reacher{ReacherSpec{}};
  const Environment& env = reacher;
  EXPECT_THROW(dp_successor_features(env, *g.policies[0], f, 0.9, 1e-6), UnsupportedError);
  EXPECT_THROW(dp_successor_features(g.mdp, *g.policies[0], f, 1.0, 1e-6), InputError);
}

TEST(DpPsi, ReconstructsQOnLinearRewardGrid) {
  const auto env = make_linear_reward_gridworld(GridSpec{}, 4);
  const auto q_opt = value_iteration(env.mdp, 0.99, 1e-10);
  const std::vector<double> eps{0.0, 0.5, 1.0};
  const auto policies = make_policy_family(env.mdp, q_opt, eps, 2);
  const TransitionFeatures f(env.encoder, false);
  for (const auto& p : policies) {
    const auto psi = dp_successor_features(env.mdp, *p, f, 0.99, 1e-12);
    const auto q = evaluate_q(env.mdp, policy_matrix(env.mdp, *p), 0.99);
    double worst = 0.0;
    for (int s = 0; s < env.mdp.num_states(); ++s) {
      for (int a = 0; a < 4; ++a) {
        double dot = 0.0;
        for (int d = 0; d < f.dim(); ++d) dot += psi.at(s, a)[d] * env.w_task[d];
        worst = std::max(worst, std::abs(dot - q(s, a)));
      }
    }
    EXPECT_LE(worst, 1e-8) << p->id();
  }
}

// --- Monte Carlo oracle ---

TEST(MonteCarloPsi, HorizonOneIsOneStepMean) {
  GridSetup g({0.5});
  const auto f = make_transition_features(parse_encoder_name("hand_crafted"), grid_context(g.spec));
  const auto est = monte_carlo_psi(g.mdp, *g.policies[0], f, tabular_state(10), kRight, 0.9, 4000, 1, 8);
  const auto psi0 = dp_successor_features(g.mdp, *g.policies[0], f, 0.0, 1e-12);
  for (int d = 0; d < f.dim(); ++d) {
    EXPECT_NEAR(est.mean[d], psi0.at(10, kRight)[d], 4.0 * est.std_error[d] + 1e-12) << d;
  }
}

TEST(MonteCarloPsi, DeterministicEnvHasZeroError) {
  GridSpec spec;
  spec.slip = 0.0;
  const auto mdp = make_gridworld(spec);
  const auto q = value_iteration(mdp, 0.99, 1e-10);
  const std::vector<double> eps{0.0};
  const auto policies = make_policy_family(mdp, q, eps, 1);
  const auto f = make_transition_features(parse_encoder_name("hand_crafted"), grid_context(spec));
  const auto est = monte_carlo_psi(mdp, *policies[0], f, tabular_state(0), kUp, 0.99, 50, 200, 2);
  const auto psi = dp_successor_features(mdp, *policies[0], f, 0.99, 1e-12);
  for (int d = 0; d < f.dim(); ++d) {
    EXPECT_EQ(est.std_error[d], 0.0);
    EXPECT_NEAR(est.mean[d], psi.at(0, kUp)[d], 1e-9);
  }
}

TEST(MonteCarloPsi, AgreesWithDpWithinThreeStandardErrors) {
  GridSetup g({0.25});
  const auto f = make_transition_features(parse_encoder_name("hand_crafted"), grid_context(g.spec));
  const auto psi = dp_successor_features(g.mdp, *g.policies[0], f, 0.99, 1e-10);
  int inside = 0, total = 0;
  for (const auto& [s, a] : {std::pair{0, kUp}, std::pair{27, kLeft}, std::pair{50, kDown}}) {
    const auto est = monte_carlo_psi(g.mdp, *g.policies[0], f, tabular_state(s), a, 0.99, 10000, 1000, 9 + s);
    for (int d = 0; d < f.dim(); ++d) {
      const double err = std::abs(est.mean[d] - psi.at(s, a)[d]);
      // Dimensions the rollouts never reached have no spread to test against;
      // their exact value must then be negligible.
      if (est.std_error[d] == 0.0) {
        EXPECT_LE(err, 1e-3);
        continue;
      }
      ++total;
      inside += err <= 3.0 * est.std_error[d];
    }
  }
  EXPECT_GE(inside, 0.95 * total);
}

// --- networks and optimizer ---

double loss_at(const PsiNetwork& net, std::span<const double> theta, const State& s, int a,
               const std::vector<double>& weights) {
  std::vector<double> out(net.output_dim());
  NetScratch scratch;
  net.forward(theta, s, a, out, scratch);
  double l = 0.0;
  for (int i = 0; i < net.output_dim(); ++i) l += weights[i] * out[i];
  return l;
}

void gradient_check(const PsiNetwork& net, const State& s, int a) {
  Rng rng(7);
  std::vector<double> theta(net.param_count());
  net.init(theta, rng);
  // Move away from a zero init so every path carries gradient.
  std::normal_distribution<double> normal(0.0, 0.3);
  for (auto& t : theta) t += normal(rng);
  std::vector<double> weights(net.output_dim());
  for (auto& w : weights) w = normal(rng);

  std::vector<double> out(net.output_dim()), grad(theta.size(), 0.0);
  NetScratch scratch;
  net.forward(theta, s, a, out, scratch);
  net.backward(theta, s, a, weights, scratch, grad);

  for (int k = 0; k < 40; ++k) {
    const auto i = static_cast<std::size_t>(uniform_index(rng, static_cast<int>(theta.size())));
    const double h = 1e-6;
    auto plus = theta, minus = theta;
    plus[i] += h;
    minus[i] -= h;
    const double numeric = (loss_at(net, plus, s, a, weights) - loss_at(net, minus, s, a, weights)) / (2 * h);
    EXPECT_NEAR(grad[i], numeric, 1e-6 * (1.0 + std::abs(numeric))) << "param " << i;
  }
}

TEST(Network, LinearGradientMatchesFiniteDifferences) {
  const auto enc = std::make_shared<RbfGridEncoder>(PlanarView{}, 3);
  gradient_check(LinearNetwork(enc, 3, 5), planar_state(0.3, 0.7), 2);
}

TEST(Network, MlpGradientMatchesFiniteDifferences) {
  const auto enc = std::make_shared<RbfGridEncoder>(PlanarView{}, 3);
  gradient_check(MlpNetwork(enc, 4, 8, 6), planar_state(0.6, 0.2), 1);
}

TEST(Network, TabularRejectsForeignStates) {
  TabularNetwork net(4, 2, 3);
  std::vector<double> theta(net.param_count()), out(3);
  NetScratch scratch;
  EXPECT_THROW(net.forward(theta, tabular_state(4), 0, out, scratch), InputError);
  EXPECT_THROW(net.forward(theta, planar_state(0.1, 0.1), 0, out, scratch), InputError);
  EXPECT_THROW(net.forward(theta, tabular_state(1), 2, out, scratch), InputError);
}

TEST(Adam, FirstStepMovesByLearningRateAndSkipsIdleBlocks) {
  TabularNetwork net(2, 1, 3);
  std::vector<double> theta(net.param_count(), 1.0), grad(net.param_count(), 0.0);
  grad[0] = 5.0;
  grad[1] = -0.01;
  BlockAdam adam(net, AdamConfig{0.1});
  const std::vector<int> blocks{0};
  adam.step(theta, grad, blocks);
  EXPECT_NEAR(theta[0], 0.9, 1e-6);
  EXPECT_NEAR(theta[1], 1.1, 1e-6);
  EXPECT_EQ(theta[2], 1.0);
  for (std::size_t i = 3; i < theta.size(); ++i) EXPECT_EQ(theta[i], 1.0);
  for (double g : grad) EXPECT_EQ(g, 0.0);
}

TEST(Adam, MinimizesQuadratic) {
  TabularNetwork net(1, 1, 2);
  std::vector<double> theta{3.0, -2.0}, grad(2);
  BlockAdam adam(net, AdamConfig{0.05});
  const std::vector<int> blocks{0};
  for (int k = 0; k < 2000; ++k) {
    grad[0] = 2 * (theta[0] - 1.0);
    grad[1] = 2 * (theta[1] + 0.5);
    adam.step(theta, grad, blocks);
  }
  EXPECT_NEAR(theta[0], 1.0, 1e-3);
  EXPECT_NEAR(theta[1], -0.5, 1e-3);
}

// --- FQE ---

TEST(Fqe, DefaultConfig) {
  const FqeConfig c;
  EXPECT_EQ(c.gamma, 0.99);
  EXPECT_EQ(c.learning_rate, 3e-5);
  EXPECT_EQ(c.bins, 51);
  EXPECT_EQ(c.target_refresh_period, 100);
  EXPECT_EQ(c.train_steps, 20000);
  EXPECT_EQ(c.mode, FqeMode::kDistributional);
  EXPECT_EQ(fqe_config_from_json(to_json(c)).train_steps, 20000);
  EXPECT_THROW(fqe_config_from_json({{"gamma", 1.0}}), InputError);
  EXPECT_THROW(fqe_config_from_json({{"batch", 3}}), InputError);
}

TEST(Fqe, ZeroFeaturesGiveZeroPsi) {
  // Self-loop data: delta features vanish on every transition.
  OfflineDataset data;
  Trajectory traj{0, "fixed", {}};
  for (int t = 0; t < 20; ++t) traj.steps.push_back({tabular_state(0), 0, 0.0, tabular_state(0), false, 0, t});
  data.trajectories.push_back(traj);
  const FixedPolicy policy(1, 0);
  const TransitionFeatures f(std::make_shared<OneHotEncoder>(1), true);
  for (FqeMode mode : {FqeMode::kDistributional, FqeMode::kExpected}) {
    FqeConfig c;
    c.mode = mode;
    c.learning_rate = 0.01;
    c.train_steps = 300;
    const auto model = train_fqe(data, policy, f, c);
    EXPECT_LE(std::abs(predict_psi(model, tabular_state(0), 0)[0]), 1e-3);
  }
}

TEST(Fqe, RejectsOutOfDomainStates) {
  OfflineDataset data;
  data.trajectories.push_back({0, "fixed", {{tabular_state(5), 0, 0.0, tabular_state(5), false, 0, 0}}});
  const FixedPolicy policy(1, 0);
  EXPECT_THROW(train_fqe(data, policy, TransitionFeatures(std::make_shared<OneHotEncoder>(3), false), FqeConfig{}),
               InputError);
  EXPECT_THROW(train_fqe(OfflineDataset{}, policy, TransitionFeatures(std::make_shared<OneHotEncoder>(3), false),
                         FqeConfig{}),
               InputError);
}

// 4x4 layout keeps every (s, a) row well visited at unit-test budgets.
struct TrainedGrid {
  GridSetup grid{{0.0, 0.5, 1.0}, small_grid()};
  OfflineDataset data = generate_dataset(grid.mdp, grid.policies, 300, 100, 21);
  TransitionFeatures features = make_transition_features(parse_encoder_name("one_hot"), grid_context(grid.spec));

  FqeConfig config(double gamma, FqeMode mode) const {
    FqeConfig c;
    c.gamma = gamma;
    c.mode = mode;
    c.learning_rate = 0.1;
    c.final_learning_rate = 0.01;
    c.batch_size = 16;
    c.train_steps = 6000;
    c.target_refresh_period = 25;
    c.tabular_states = 16;
    c.seed = 5;
    return c;
  }
};

// (s, a) pairs with at least `min_visits` transitions in the data, with the
// empirical mean of their immediate features.
std::map<std::pair<int, int>, std::vector<double>> covered_pairs(const OfflineDataset& data,
                                                                 const TransitionFeatures& f, int min_visits) {
  std::map<std::pair<int, int>, std::pair<int, std::vector<double>>> acc;
  for (const auto& tr : data.trajectories) {
    for (const auto& t : tr.steps) {
      auto& [count, sum] = acc[{t.state.index, t.action}];
      if (sum.empty()) sum.assign(f.dim(), 0.0);
      ++count;
      const auto phi = f.encode(t.state, t.next_state);
      for (int d = 0; d < f.dim(); ++d) sum[d] += phi[d];
    }
  }
  std::map<std::pair<int, int>, std::vector<double>> out;
  for (auto& [key, entry] : acc) {
    if (entry.first < min_visits) continue;
    for (auto& x : entry.second) x /= entry.first;
    out[key] = entry.second;
  }
  return out;
}

// Largest per-dimension gap between the model and `reference(s, a)`, as a
// fraction of the support range.
template <typename Ref>
double worst_relative_error(const SuccessorFeatureModel& m, const std::map<std::pair<int, int>, std::vector<double>>& pairs,
                            Ref reference) {
  double worst = 0.0;
  for (const auto& [key, mean_phi] : pairs) {
    const auto psi = predict_psi(m, tabular_state(key.first), key.second);
    const auto want = reference(key.first, key.second, mean_phi);
    for (int d = 0; d < m.dim(); ++d) {
      const double range = m.support().upper(d) - m.support().lower(d);
      worst = std::max(worst, std::abs(psi[d] - want[d]) / range);
    }
  }
  return worst;
}

TEST(Fqe, GammaZeroMatchesOneStepExpectation) {
  TrainedGrid t;
  const auto pairs = covered_pairs(t.data, t.features, 100);
  ASSERT_GE(pairs.size(), 20u);
  for (FqeMode mode : {FqeMode::kDistributional, FqeMode::kExpected}) {
    // Nothing to bootstrap, so the rate can anneal hard to average out target noise.
    auto c = t.config(0.0, mode);
    c.final_learning_rate = 1e-4;
    c.train_steps = 20000;
    const auto model = train_fqe(t.data, *t.grid.policies[1], t.features, c);
    // With gamma = 0 the fit target is the data's own one-step mean.
    const double err = worst_relative_error(model, pairs, [](int, int, const std::vector<double>& m) { return m; });
    EXPECT_LE(err, 0.02) << to_string(mode);
  }
}

TEST(Fqe, MatchesDpOnGridworld) {
  TrainedGrid t;
  const auto pairs = covered_pairs(t.data, t.features, 100);
  for (FqeMode mode : {FqeMode::kDistributional, FqeMode::kExpected}) {
    for (int p : {0, 2}) {
      const auto& policy = *t.grid.policies[p];
      TrainStats stats;
      auto c = t.config(0.9, mode);
      c.residual_log_period = 1500;
      const auto model = train_fqe(t.data, policy, t.features, c, &stats);
      const auto dp = dp_successor_features(t.grid.mdp, policy, t.features, 0.9, 1e-10);
      const double err = worst_relative_error(model, pairs, [&](int s, int a, const std::vector<double>&) {
        const auto row = dp.at(s, a);
        return std::vector<double>(row.begin(), row.end());
      });
      EXPECT_LE(err, 0.05) << to_string(mode) << " " << policy.id();
      ASSERT_EQ(stats.residual_log.size(), 5u);
      EXPECT_LE(stats.residual_log.back().second, stats.residual_log.front().second / 5)
          << to_string(mode) << " " << policy.id();
    }
  }
}

TEST(Fqe, LinearRewardGridTabularMatchesDp) {
  const auto env = make_linear_reward_gridworld(small_grid(), 4);
  const auto q = value_iteration(env.mdp, 0.9, 1e-10);
  const std::vector<double> eps{0.3, 1.0};
  const auto policies = make_policy_family(env.mdp, q, eps, 2);
  const auto data = generate_dataset(env.mdp, policies, 50, 100, 3);
  const TransitionFeatures f(env.encoder, false);
  FqeConfig c;
  c.gamma = 0.9;
  c.learning_rate = 0.1;
  c.final_learning_rate = 0.01;
  c.batch_size = 16;
  c.train_steps = 6000;
  c.target_refresh_period = 25;
  c.tabular_states = 16;
  const auto model = train_fqe(data, *policies[0], f, c);
  const auto dp = dp_successor_features(env.mdp, *policies[0], f, 0.9, 1e-10);
  const double err = worst_relative_error(model, covered_pairs(data, f, 100), [&](int s, int a, const auto&) {
    const auto row = dp.at(s, a);
    return std::vector<double>(row.begin(), row.end());
  });
  EXPECT_LE(err, 0.05);
}

TEST(Fqe, DeterministicUnderSeed) {
  TrainedGrid t;
  auto c = t.config(0.9, FqeMode::kDistributional);
  c.train_steps = 200;
  const auto a = train_fqe(t.data, *t.grid.policies[1], t.features, c);
  const auto b = train_fqe(t.data, *t.grid.policies[1], t.features, c);
  EXPECT_EQ(a.params(), b.params());
  for (int s = 0; s < 16; s += 3) {
    EXPECT_EQ(predict_psi_on_policy(a, *t.grid.policies[1], tabular_state(s)),
              predict_psi_on_policy(b, *t.grid.policies[1], tabular_state(s)));
  }
  c.seed += 1;
  EXPECT_NE(train_fqe(t.data, *t.grid.policies[1], t.features, c).params(), a.params());
}

TEST(Fqe, OnPolicyPredictionUsesPolicyAction) {
  TrainedGrid t;
  auto c = t.config(0.9, FqeMode::kDistributional);
  c.train_steps = 100;
  const auto& greedy = *t.grid.policies[0];
  const auto model = train_fqe(t.data, greedy, t.features, c);
  Rng rng(1);
  for (int s = 0; s < 16; ++s) {
    const State st = tabular_state(s);
    EXPECT_EQ(predict_psi_on_policy(model, greedy, st), predict_psi(model, st, greedy.act(st, rng)));
  }
  EXPECT_THROW(predict_psi_on_policy(model, *t.grid.policies[1], tabular_state(0)), InputError);
}

TEST(Fqe, DistributionsNormalizedAndMeansInsideSupport) {
  TrainedGrid t;
  auto c = t.config(0.9, FqeMode::kDistributional);
  c.train_steps = 300;
  const auto model = train_fqe(t.data, *t.grid.policies[1], t.features, c);
  for (int s = 0; s < 16; s += 2) {
    const auto dist = model.distribution(tabular_state(s), 1);
    for (int d = 0; d < model.dim(); ++d) {
      double total = 0.0;
      for (int b = 0; b < model.bins(); ++b) total += dist[d * model.bins() + b];
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
    const auto psi = predict_psi(model, tabular_state(s), 1);
    for (int d = 0; d < model.dim(); ++d) {
      EXPECT_GE(psi[d], model.support().lower(d) - 1e-9);
      EXPECT_LE(psi[d], model.support().upper(d) + 1e-9);
    }
  }
}

TEST(Fqe, ContinuousEnvWithLinearAndMlpHeads) {
  const ContinuousEnv env{ReacherSpec{}};
  EpsilonGreedyPolicy policy({"heading", "test", 4}, ContinuousEnv::kActions, 0.2,
                             [&](const State& s) { return env.heading_action(s); });
  OfflineDataset data;
  for (int k = 0; k < 40; ++k) data.trajectories.push_back(rollout(env, policy, 100, derive_seed(2, k), k));
  const TransitionFeatures f(std::make_shared<RbfGridEncoder>(PlanarView{}, 3), false);
  const double gamma = 0.8;

  // Monte Carlo psi at a few start states as the reference.
  std::vector<std::pair<State, MonteCarloEstimate>> refs;
  for (int k = 0; k < 4; ++k) {
    const auto& first = data.trajectories[k].steps.front();
    refs.emplace_back(first.state, monte_carlo_psi(env, policy, f, first.state, first.action, gamma, 300, 60, 17 + k));
  }
  auto error = [&](const SuccessorFeatureModel& m) {
    double total = 0.0;
    for (std::size_t k = 0; k < refs.size(); ++k) {
      const auto psi = predict_psi(m, refs[k].first, data.trajectories[k].steps.front().action);
      for (int d = 0; d < f.dim(); ++d) total += std::pow(psi[d] - refs[k].second.mean[d], 2);
    }
    return std::sqrt(total / (refs.size() * f.dim()));
  };

  for (Architecture arch : {Architecture::kLinear, Architecture::kMlp}) {
    for (FqeMode mode : {FqeMode::kDistributional, FqeMode::kExpected}) {
      FqeConfig c;
      c.architecture = arch;
      c.mode = mode;
      c.gamma = gamma;
      c.learning_rate = 3e-3;
      c.train_steps = 1;
      c.hidden = 16;
      c.batch_size = 32;
      const double before = error(train_fqe(data, policy, f, c));
      c.train_steps = 1500;
      const auto model = train_fqe(data, policy, f, c);
      const double after = error(model);
      EXPECT_LT(after, 0.5 * before) << to_string(arch) << " " << to_string(mode) << " " << before << " -> " << after;
      for (double x : predict_psi_on_policy(model, policy, planar_state(0.2, 0.3))) EXPECT_TRUE(std::isfinite(x));
    }
  }
}

// --- checkpoints ---

void expect_round_trip(const SuccessorFeatureModel& m, const EncoderContext& ctx) {
  std::stringstream buf;
  write_model(buf, m);
  const std::string bytes = buf.str();
  std::stringstream in(bytes);
  const auto back = read_model(in, ctx);
  EXPECT_EQ(back.params(), m.params());
  EXPECT_EQ(back.support().bounds(), m.support().bounds());
  EXPECT_EQ(back.gamma(), m.gamma());
  EXPECT_EQ(back.mode(), m.mode());
  EXPECT_EQ(back.policy_id(), m.policy_id());
  EXPECT_EQ(back.features().spec(), m.features().spec());
  std::stringstream again;
  write_model(again, back);
  EXPECT_EQ(again.str(), bytes);
}

TEST(Checkpoint, BitExactRoundTrip) {
  TrainedGrid t;
  const auto ctx = grid_context(t.grid.spec);
  auto c = t.config(0.9, FqeMode::kDistributional);
  c.train_steps = 50;
  expect_round_trip(train_fqe(t.data, *t.grid.policies[0], t.features, c), ctx);
  c.mode = FqeMode::kExpected;
  c.architecture = Architecture::kLinear;
  const auto rp = make_transition_features(parse_encoder_name("delta_random_projection8_s3"), ctx);
  expect_round_trip(train_fqe(t.data, *t.grid.policies[0], rp, c), ctx);
  c.architecture = Architecture::kMlp;
  c.hidden = 8;
  expect_round_trip(train_fqe(t.data, *t.grid.policies[0], rp, c), ctx);
}

TEST(Checkpoint, DetectsCorruption) {
  TrainedGrid t;
  const auto ctx = grid_context(t.grid.spec);
  auto c = t.config(0.9, FqeMode::kDistributional);
  c.train_steps = 20;
  std::stringstream buf;
  write_model(buf, train_fqe(t.data, *t.grid.policies[0], t.features, c));
  std::string bytes = buf.str();

  std::string flipped = bytes;
  flipped[flipped.size() - 3] ^= 0x10;
  std::stringstream a(flipped);
  EXPECT_THROW(read_model(a, ctx), FormatError);

  std::stringstream b(bytes.substr(0, bytes.size() - 8));
  EXPECT_THROW(read_model(b, ctx), FormatError);

  std::stringstream d("not json\n");
  EXPECT_THROW(read_model(d, ctx), FormatError);
}

}  // namespace
}  // namespace pi2vec
