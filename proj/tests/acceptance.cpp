// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance [--work DIR] [criterion ...]
// With no criteria listed all nine run. Exit status is 0 only if every
// selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "pi2vec/env/planning.hpp"
#include "pi2vec/evaluate/metrics.hpp"
#include "pi2vec/evaluate/offline.hpp"
#include "pi2vec/pipeline/pipeline.hpp"
#include "pi2vec/successor/oracles.hpp"

namespace fs = std::filesystem;
using namespace pi2vec;

namespace {

struct Verdict {
  bool passed = false;
  std::string summary;
};

fs::path g_work;

fs::path fresh_dir(const std::string& name) {
  const auto dir = g_work / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shared by the pipeline-driven criteria: the default 8x8 task, a mixed
// dataset of demonstrations plus held-out policy runs, hand-crafted features.
ExperimentConfig ranking_config(std::vector<double> epsilons) {
  ExperimentConfig c;
  c.name = "acceptance";
  c.root_seed = 11;
  c.epsilons = std::move(epsilons);
  c.dataset.max_steps = 100;
  c.dataset.sources = {{"demonstrations", {0}, 100}, {"held_out", {}, 15}};
  c.encoders = {"hand_crafted"};
  c.fqe.gamma = 0.99;
  c.fqe.learning_rate = 0.1;
  c.fqe.final_learning_rate = 0.01;
  c.fqe.batch_size = 16;
  c.fqe.train_steps = 10000;
  c.fqe.target_refresh_period = 25;
  c.canonical.k = 50;
  return c;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(std::round((lo + (hi - lo) * i / (n - 1)) * 100.0) / 100.0);
  return out;
}

const MetricsReport& find_report(const EvaluateResult& r, const std::string& representation, const std::string& encoder) {
  for (const auto& rep : r.reports) {
    if (rep.representation == representation && rep.encoder == encoder) return rep;
  }
  throw VerificationError(fmt::format("no {}/{} report", representation, encoder));
}

std::string opt_str(const std::optional<double>& v) { return v ? fmt::format("{:.3f}", *v) : "NA"; }

// 1. Tabular FQE against DP successor features, one-hot features on 8x8.
Verdict criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  GridSpec spec;
  const auto mdp = make_gridworld(spec);
  const auto q = value_iteration(mdp, 0.99, 1e-10);
  const std::vector<double> eps{0.0, 0.5, 1.0};
  const auto policies = make_policy_family(mdp, q, eps, 1);
  const auto data = generate_dataset(mdp, policies, 100, 200, 2);
  const auto f = make_transition_features(parse_encoder_name("one_hot"),
                                          EncoderContext{spec.num_cells(), spec, PlanarView(grid_coordinates(spec))});
  FqeConfig c;
  c.gamma = 0.99;
  c.learning_rate = 0.1;
  c.batch_size = 16;
  c.train_steps = 30000;
  c.target_refresh_period = 25;
  c.tabular_states = spec.num_cells();
  c.seed = 3;
  double worst = 0.0;
  bool all = true;
  std::string parts;
  for (const auto& p : policies) {
    const auto model = train_fqe(data, *p, f, c);
    const auto check = check_fqe_vs_dp(model, *p, mdp, data, 1, 0.05);
    worst = std::max(worst, check.value);
    all = all && check.passed;
    parts += fmt::format(" {}={:.4f}", p->id(), check.value);
  }
  const double secs = seconds_since(t0);
  return {all && secs <= 300.0,
          fmt::format("oracle equivalence: worst |FQE-DP|/range {:.4f} <= 0.05 over all dataset (s,a);{} ({:.0f}s <= 300s)",
                      worst, parts, secs)};
}

// 2. <psi, w_task> reproduces Q on the linear-reward gridworld.
Verdict criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto env = make_linear_reward_gridworld(GridSpec{}, 4);
  const auto q = value_iteration(env.mdp, 0.99, 1e-10);
  const std::vector<double> eps{0.0, 0.5, 1.0};
  const auto check = check_q_reconstruction(env, make_policy_family(env.mdp, q, eps, 2), 0.99, 1e-8);
  return {check.passed, fmt::format("Q reconstruction: max |<psi,w>-Q| {:.2e} <= 1e-8 for 3 policies ({:.1f}s)",
                                    check.value, seconds_since(t0))};
}

// 3. Monte Carlo psi within 3 standard errors of DP psi.
Verdict criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  GridSpec spec;
  const auto mdp = make_gridworld(spec);
  const auto q = value_iteration(mdp, 0.99, 1e-10);
  const std::vector<double> eps{0.3};
  const auto policy = make_policy_family(mdp, q, eps, 5).front();
  const auto f = make_transition_features(parse_encoder_name("hand_crafted"),
                                          EncoderContext{spec.num_cells(), spec, PlanarView(grid_coordinates(spec))});
  const auto check = check_mc_consistency(mdp, *policy, f, 0.9, 100, 10000, 0.95, 77);
  return {check.passed, fmt::format("Monte Carlo consistency: {:.0f}% of 100 (dimension, state) pairs agree, need 95% ({}; {:.0f}s)",
                                    100.0 * check.value, check.detail, seconds_since(t0))};
}

// 4. Categorical projection preserves the clamped mean and total mass.
Verdict criterion_4() {
  const auto check = check_projection_mean(1000, 4);
  return {check.passed, fmt::format("categorical projection: worst mean gap {:.2e} bin widths <= 1, {} over 1000 cases",
                                    check.value, check.detail)};
}

// 5. Ranking 12 epsilon-graded policies with 3-fold CV.
Verdict criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  const Experiment exp(ranking_config(linspace(0.0, 1.0, 12)));
  const RunOptions opt{fresh_dir("criterion5"), 1, false};
  cmd_generate(exp, opt);
  cmd_train(exp, opt);
  const auto r = cmd_evaluate(exp, opt);
  const double secs = seconds_since(t0);
  const auto& pi = find_report(r, "pi2vec", "hand_crafted");
  const auto& act = find_report(r, "actions", "");
  const bool ok = pi.spearman && *pi.spearman >= 0.7 && pi.regret_at_1 <= 0.15 && secs <= 1800.0;
  return {ok, fmt::format("end-to-end ranking: pi2vec spearman {} >= 0.7, regret@1 {:.3f} <= 0.15; "
                          "actions spearman {}, regret@1 {:.3f} ({:.0f}s <= 1800s)",
                          opt_str(pi.spearman), pi.regret_at_1, opt_str(act.spearman), act.regret_at_1, secs)};
}

// 6. Random policies cluster under pi2vec, not under Actions.
Verdict criterion_6() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> eps = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  eps.insert(eps.end(), 6, 1.0);
  const Experiment exp(ranking_config(eps));
  const RunOptions opt{fresh_dir("criterion6"), 1, false};
  cmd_generate(exp, opt);
  cmd_train(exp, opt);
  const auto embedded = cmd_embed(exp, opt);
  auto spread = [&](const std::string& representation) {
    std::vector<PolicyEmbedding> trained, random;
    for (const auto& e : embedded.embeddings) {
      if (e.representation != representation) continue;
      (e.policy_id.find("eps1.000") != std::string::npos ? random : trained).push_back(e);
    }
    if (trained.size() != 6 || random.size() != 6) throw VerificationError("criterion 6: unexpected policy split");
    return normalized_spread(random, trained);
  };
  const double pi = spread(kPi2vecRepresentation);
  const double act = spread(kActionsRepresentation);
  return {pi < 0.5 && act > pi,
          fmt::format("random-policy clustering: pi2vec ratio {:.3f} < 0.5, actions ratio {:.3f} > pi2vec ({:.0f}s)", pi,
                      act, seconds_since(t0))};
}

// 7. Fully-offline return prediction.
Verdict criterion_7() {
  const auto t0 = std::chrono::steady_clock::now();
  // (a) Exact psi on the linear-reward task, reward weights fitted from data.
  const auto env = make_linear_reward_gridworld(GridSpec{}, 4);
  const auto q = value_iteration(env.mdp, 0.99, 1e-10);
  const std::vector<double> eps{0.0, 0.5, 1.0};
  const auto policies = make_policy_family(env.mdp, q, eps, 2);
  const std::vector<PolicyPtr> explorer = {policies.back()};
  const auto data = generate_dataset(env.mdp, explorer, 40, 200, 6);
  const TransitionFeatures f(env.encoder, false);
  const auto reward = fit_reward_model(data, f);
  const auto start = env.mdp.start_distribution();
  double worst = 0.0;
  for (const auto& p : policies) {
    const auto psi = dp_successor_features(env.mdp, *p, f, 0.99, 1e-12);
    PolicyEmbedding e{kPi2vecRepresentation, reward.encoder, p->id(), "start", std::vector<double>(f.dim(), 0.0)};
    for (int s = 0; s < env.mdp.num_states(); ++s) {
      if (start[s] == 0.0) continue;
      const auto probs = *p->action_probabilities(tabular_state(s));
      for (int a = 0; a < env.mdp.num_actions(); ++a) {
        for (int d = 0; d < f.dim(); ++d) e.vector[d] += start[s] * probs[a] * psi.at(s, a)[d];
      }
    }
    worst = std::max(worst, std::abs(offline_return_estimate(e, reward) - policy_return(env.mdp, *p, 0.99)));
  }

  // (b) Learned embeddings on the wall-bump task, where r is not linear in phi(s').
  auto c = ranking_config(linspace(0.0, 1.0, 6));
  c.environment.grid = nonlinear_reward_grid_spec();
  c.evaluation.fqe_baseline = false;
  const Experiment exp(c);
  const RunOptions opt{fresh_dir("criterion7"), 1, false};
  cmd_generate(exp, opt);
  cmd_train(exp, opt);
  const auto r = cmd_evaluate(exp, opt);
  const auto& offline = find_report(r, "pi2vec_offline", "hand_crafted");
  const auto& regression = find_report(r, "pi2vec", "hand_crafted");
  std::vector<double> truth, pred;
  for (const auto& p : offline.predictions) {
    truth.push_back(p.truth);
    pred.push_back(p.predicted);
  }
  const auto rho = spearman(truth, pred);
  const bool ok = worst <= 1e-6 && rho && *rho > 0.0;
  return {ok, fmt::format("fully-offline mode: linear task max |<Psi,w>-return| {:.2e} <= 1e-6; bump task spearman {} > 0 "
                          "(offline nmae {:.3f} vs regression nmae {:.3f}) ({:.0f}s)",
                          worst, opt_str(rho), offline.nmae, regression.nmae, seconds_since(t0))};
}

// 8. Metric examples and fuzz invariants.
Verdict criterion_8() {
  using V = std::vector<double>;
  int failures = 0;
  auto expect = [&](bool ok) { failures += ok ? 0 : 1; };
  expect(spearman(V{1, 2, 3, 4}, V{1, 3, 2, 4}).value_or(0.0) == 0.8);
  expect(nmae(V{0, 1, 2}, V{0, 2, 2}, 2.0) == 1.0 / 6.0);
  expect(regret_at_1(V{0, 5, 10}, V{0, 9, 3}, 10.0) == 0.5);
  expect(nmae(V{1, 2, 3}, V{1, 2, 3}, 2.0) == 0.0);
  expect(nmae(V{1, 2, 3}, V{3, 4, 5}, 2.0) == 1.0);
  expect(spearman(V{1, 2, 3}, V{1, 2, 3}).value_or(0.0) == 1.0);
  expect(spearman(V{1, 2, 3}, V{3, 2, 1}).value_or(0.0) == -1.0);
  expect(regret_at_1(V{1, 2, 3}, V{1, 2, 3}, 2.0) == 0.0);
  expect(regret_at_1(V{1, 2, 3}, V{3, 2, 1}, 2.0) == 1.0);
  expect(!spearman(V{1, 2}, V{5, 5}).has_value());

  Rng rng(8);
  int fuzz_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + uniform_index(rng, 15);
    V truth(n), pred(n), mono(n);
    for (int i = 0; i < n; ++i) {
      truth[i] = std::round(uniform01(rng) * 40.0) - 20.0;
      pred[i] = std::round(uniform01(rng) * 40.0) / 4.0 - 5.0;
      mono[i] = std::tanh(pred[i] / 7.0) * 3.0 + 0.01 * pred[i] * pred[i] * pred[i];
    }
    if (value_range(truth) == 0.0) truth[0] += 1.0;
    const double range = value_range(truth);
    const double reg = regret_at_1(truth, pred, range);
    const auto rho = spearman(truth, pred);
    const auto rho_m = spearman(truth, mono);
    bool ok = reg >= 0.0 && reg <= 1.0 && reg == regret_at_1(truth, mono, range);
    ok = ok && rho.has_value() == rho_m.has_value();
    if (rho) ok = ok && *rho >= -1.0 && *rho <= 1.0 && std::abs(*rho - *rho_m) <= 1e-12;
    fuzz_failures += ok ? 0 : 1;
  }
  return {failures == 0 && fuzz_failures == 0,
          fmt::format("metric suite: {} exact-case failures, {} of 1000 fuzz instances violate monotone invariance or ranges",
                      failures, fuzz_failures)};
}

// 9. Identical config, identical metrics bytes (single- and multi-threaded runs).
Verdict criterion_9() {
  const auto t0 = std::chrono::steady_clock::now();
  auto c = ranking_config(linspace(0.0, 1.0, 6));
  c.dataset.sources = {{"demonstrations", {0}, 20}, {"held_out", {}, 5}};
  c.encoders = {"hand_crafted", "rbf_grid4"};
  c.fqe.train_steps = 1500;
  c.canonical.k = 20;
  const Experiment exp(c);
  std::vector<std::string> bytes;
  for (int run = 0; run < 2; ++run) {
    const RunOptions opt{fresh_dir(fmt::format("criterion9_{}", run)), run == 0 ? 1 : 3, false};
    cmd_generate(exp, opt);
    cmd_train(exp, opt);
    cmd_evaluate(exp, opt);
    std::ifstream in(Workspace{opt.out}.metrics(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    bytes.push_back(ss.str());
  }
  const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
  return {same, fmt::format("determinism: metrics.csv {} across two runs ({} bytes; workers 1 vs 3) ({:.0f}s)",
                            same ? "byte-identical" : "DIFFERS", bytes[0].size(), seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  g_work = fs::temp_directory_path() / "pi2vec_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      g_work = argv[++i];
    } else {
      selected.insert(std::stoi(arg));
    }
  }
  const std::vector<std::function<Verdict()>> criteria = {criterion_1, criterion_2, criterion_3,
                                                          criterion_4, criterion_5, criterion_6,
                                                          criterion_7, criterion_8, criterion_9};
  fs::create_directories(g_work);
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    failed += o.passed ? 0 : 1;
    fmt::print("[{}] criterion {}: {}\n", o.passed ? "PASS" : "FAIL", id, o.summary);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
