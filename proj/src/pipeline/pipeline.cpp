#include "pi2vec/pipeline/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "json.hpp"
#include "pi2vec/env/planning.hpp"
#include "pi2vec/evaluate/metrics.hpp"
#include "pi2vec/evaluate/offline.hpp"

namespace pi2vec {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------- Experiment

Experiment::Experiment(ExperimentConfig config)
    : config_(std::move(config)), hash_(config_hash(config_)), env_(build_environment(config_)) {
  policies_ = build_policies(config_, env_);
  // Fail on encoders the environment cannot support before any work starts.
  for (const auto& name : config_.encoders) {
    try {
      features(name);
    } catch (const UnsupportedError& e) {
      throw ConfigError(fmt::format("encoders: {}", e.what()));
    }
  }
}

TransitionFeatures Experiment::features(const std::string& encoder) const {
  return make_transition_features(parse_encoder_name(encoder), env_.context);
}

FqeConfig Experiment::fqe_config(const std::string& policy_id, const std::string& encoder) const {
  FqeConfig c = config_.fqe;
  c.seed = derive_seed(sub_seed(config_, "fqe") ^ config_.fqe.seed, policy_id + "/" + encoder);
  if (env_.mdp && c.tabular_states == 0) c.tabular_states = env_.mdp->num_states();
  return c;
}

std::vector<double> Experiment::true_returns() const {
  std::vector<double> out;
  const double gamma = config_.fqe.gamma;
  for (const auto& p : policies_) {
    if (env_.mdp) {
      out.push_back(policy_return(*env_.mdp, *p, gamma));
      continue;
    }
    const auto seed = sub_seed(config_, "returns/" + p->id());
    double total = 0.0;
    for (int i = 0; i < config_.evaluation.return_rollouts; ++i) {
      const auto traj = rollout(*env_.env, *p, env_.reacher->horizon(), derive_seed(seed, static_cast<std::uint64_t>(i)));
      double discount = 1.0, ret = 0.0;
      for (const auto& t : traj.steps) {
        ret += discount * t.reward;
        discount *= gamma;
      }
      total += ret;
    }
    out.push_back(total / config_.evaluation.return_rollouts);
  }
  return out;
}

Experiment load_experiment(const std::string& config_path, std::optional<std::uint64_t> seed_override) {
  auto config = load_config(config_path);
  if (seed_override) config.root_seed = *seed_override;
  return Experiment(std::move(config));
}

// ---------------------------------------------------------------- helpers

namespace {

std::string now_utc() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
}

// Write next to the target, then rename over it.
void atomic_write(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError(fmt::format("cannot write '{}'", tmp.string()));
    out << content;
    if (!out) throw InputError(fmt::format("failed writing '{}'", tmp.string()));
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs fn(0..n-1) on up to `workers` threads; rethrows the first failure.
template <typename Fn>
void parallel_for(int n, int workers, Fn fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// manifest.json: the config, its hash, derived seeds and every file written
// for it. Only the manifest carries timestamps.
class Manifest {
 public:
  Manifest(const Workspace& ws, const Experiment& exp, bool overwrite) : ws_(ws) {
    fs::create_directories(ws_.root);
    if (fs::exists(ws_.manifest())) {
      try {
        doc_ = ordered_json::parse(read_file(ws_.manifest()));
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(fmt::format("manifest: {}", e.what()));
      }
      const auto old_hash = doc_.value("config_hash", std::string());
      if (old_hash != exp.hash()) {
        if (!overwrite) {
          throw ConfigError(fmt::format("'{}' holds a run of config {}, not {}; pass --overwrite to replace it",
                                        ws_.root.string(), old_hash, exp.hash()));
        }
        for (const auto& a : doc_.value("artifacts", ordered_json::array())) {
          fs::remove(ws_.root / a.at("path").get<std::string>());
        }
        doc_ = ordered_json();
      }
    }
    if (doc_.is_null()) {
      doc_["format"] = "pi2vec-manifest";
      doc_["version"] = 1;
      doc_["created_at"] = now_utc();
      doc_["artifacts"] = ordered_json::array();
    }
    const auto& c = exp.config();
    doc_["tool_version"] = kToolVersion;
    doc_["config_hash"] = exp.hash();
    doc_["config"] = to_json(c);
    doc_["seeds"] = {{"policies", sub_seed(c, "policies")}, {"dataset", sub_seed(c, "dataset")},
                     {"fqe", sub_seed(c, "fqe")},           {"canonical", sub_seed(c, "canonical")},
                     {"folds", sub_seed(c, "folds")},       {"oracle", sub_seed(c, "oracle")}};
  }

  void record(const fs::path& file, const std::string& kind) {
    const std::string rel = fs::relative(file, ws_.root).generic_string();
    auto& list = doc_["artifacts"];
    std::ifstream in(file, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ordered_json entry = {{"path", rel},
                          {"kind", kind},
                          {"fnv1a64", to_hex(fnv1a64(bytes))},
                          {"bytes", bytes.size()},
                          {"written_at", now_utc()}};
    for (auto& a : list) {
      if (a.at("path") == rel) {
        a = entry;
        return;
      }
    }
    list.push_back(entry);
  }

  void save() {
    auto& list = doc_["artifacts"];
    std::sort(list.begin(), list.end(), [](const ordered_json& a, const ordered_json& b) {
      return a.at("path").get<std::string>() < b.at("path").get<std::string>();
    });
    doc_["updated_at"] = now_utc();
    atomic_write(ws_.manifest(), doc_.dump(2) + "\n");
  }

 private:
  Workspace ws_;
  ordered_json doc_;
};

OfflineDataset load_checked_dataset(const Experiment& exp, const Workspace& ws) {
  if (!fs::exists(ws.dataset())) throw InputError(fmt::format("no dataset at '{}'; run generate first", ws.dataset().string()));
  auto data = load_dataset(ws.dataset().string());
  if (data.provenance.config_hash != exp.hash()) {
    throw ConfigError(fmt::format("dataset was generated for config {}, not {}", data.provenance.config_hash, exp.hash()));
  }
  return data;
}

struct ModelJob {
  std::size_t policy = 0;
  std::string encoder;
  fs::path path;
};

std::vector<ModelJob> model_jobs(const Experiment& exp, const Workspace& ws) {
  std::vector<ModelJob> jobs;
  for (std::size_t p = 0; p < exp.policies().size(); ++p) {
    for (const auto& e : exp.config().encoders) jobs.push_back({p, e, ws.model(exp.policies()[p]->id(), e)});
  }
  return jobs;
}

void require_checkpoints(const std::vector<ModelJob>& jobs) {
  std::vector<std::string> missing;
  for (const auto& j : jobs) {
    if (!fs::exists(j.path)) missing.push_back(j.path.filename().string());
  }
  if (missing.empty()) return;
  std::string list;
  for (const auto& m : missing) list += "\n  " + m;
  throw InputError(fmt::format("{} checkpoint(s) missing; run train first:{}", missing.size(), list));
}

SuccessorFeatureModel load_checked_model(const Experiment& exp, const ModelJob& job) {
  auto model = load_model(job.path.string(), exp.env().context);
  if (model.config_hash() != exp.hash()) {
    throw ConfigError(fmt::format("checkpoint '{}' belongs to config {}, refusing to mix", job.path.filename().string(),
                                  model.config_hash()));
  }
  return model;
}

std::string hash_line(const Experiment& exp) { return fmt::format("# config_hash: {}\n", exp.hash()); }

}  // namespace

// ---------------------------------------------------------------- commands

GenerateResult cmd_generate(const Experiment& exp, const RunOptions& opt) {
  const Workspace ws{opt.out};
  Manifest manifest(ws, exp, opt.overwrite);
  if (fs::exists(ws.dataset()) && !opt.overwrite) {
    throw ConfigError(fmt::format("'{}' exists; pass --overwrite to regenerate", ws.dataset().string()));
  }
  const auto& c = exp.config();
  std::vector<SourceSpec> sources;
  for (const auto& s : c.dataset.sources) {
    SourceSpec spec{s.label, {}, s.trajectories_per_policy};
    if (s.policies.empty()) {
      spec.policies = exp.policies();
    } else {
      for (int i : s.policies) spec.policies.push_back(exp.policies()[i]);
    }
    sources.push_back(std::move(spec));
  }
  auto data = generate_dataset(*exp.env().env, sources, c.dataset.max_steps, sub_seed(c, "dataset"));
  data.provenance.config_hash = exp.hash();
  std::ostringstream buf;
  write_dataset(buf, data);
  atomic_write(ws.dataset(), buf.str());
  manifest.record(ws.dataset(), "dataset");
  manifest.save();
  return {data.trajectories.size(), data.num_transitions()};
}

TrainResult cmd_train(const Experiment& exp, const RunOptions& opt) {
  const Workspace ws{opt.out};
  Manifest manifest(ws, exp, opt.overwrite);
  const auto data = load_checked_dataset(exp, ws);
  const auto jobs = model_jobs(exp, ws);
  std::vector<const ModelJob*> todo;
  TrainResult result;
  for (const auto& job : jobs) {
    if (fs::exists(job.path) && !opt.overwrite) {
      const auto header = read_model_header(job.path.string());
      const auto h = header.value("config_hash", std::string());
      if (h != exp.hash()) {
        throw ConfigError(fmt::format("checkpoint '{}' belongs to config {}, refusing to mix; pass --overwrite",
                                      job.path.filename().string(), h));
      }
      ++result.skipped;
      continue;
    }
    todo.push_back(&job);
  }
  fs::create_directories(ws.models());
  parallel_for(static_cast<int>(todo.size()), opt.workers, [&](int i) {
    const auto& job = *todo[i];
    const auto& policy = *exp.policies()[job.policy];
    const auto m = train_fqe(data, policy, exp.features(job.encoder), exp.fqe_config(policy.id(), job.encoder));
    const SuccessorFeatureModel stamped(m.support(), m.gamma(), m.mode(), m.features(), m.policy_id(), m.network_ptr(),
                                        m.params(), exp.hash());
    const fs::path tmp = job.path.string() + ".tmp";
    save_model(tmp.string(), stamped);
    fs::rename(tmp, job.path);
  });
  result.trained = static_cast<int>(todo.size());
  for (const auto& job : jobs) manifest.record(job.path, "model");
  manifest.save();
  return result;
}

EmbedResult cmd_embed(const Experiment& exp, const RunOptions& opt) {
  const Workspace ws{opt.out};
  Manifest manifest(ws, exp, opt.overwrite);
  const auto& c = exp.config();
  const auto data = load_checked_dataset(exp, ws);
  const auto jobs = model_jobs(exp, ws);
  const bool want_pi2vec =
      std::find(c.representations.begin(), c.representations.end(), kPi2vecRepresentation) != c.representations.end();
  if (want_pi2vec) require_checkpoints(jobs);

  EmbedResult result;
  result.canonical = sample_canonical(data, c.canonical.k, sub_seed(c, "canonical"), c.canonical.first_state_only);
  const auto& canon = result.canonical;
  if (want_pi2vec) {
    std::vector<PolicyEmbedding> slots(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), opt.workers, [&](int i) {
      slots[i] = embed_policy(load_checked_model(exp, jobs[i]), *exp.policies()[jobs[i].policy], canon);
    });
    // Group by encoder, policies in config order.
    for (const auto& e : c.encoders) {
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (jobs[i].encoder == e) result.embeddings.push_back(slots[i]);
      }
    }
  }
  if (std::find(c.representations.begin(), c.representations.end(), kActionsRepresentation) != c.representations.end()) {
    for (const auto& p : exp.policies()) result.embeddings.push_back(actions_representation(*p, canon));
  }

  ordered_json cj;
  cj["config_hash"] = exp.hash();
  cj["fingerprint"] = canon.fingerprint();
  cj["seed"] = canon.seed;
  cj["first_state_only"] = canon.first_state_only;
  cj["trajectory_ids"] = canon.trajectory_ids;
  cj["states"] = ordered_json::array();
  for (const auto& s : canon.states) {
    cj["states"].push_back(s.is_tabular() ? ordered_json(s.index) : ordered_json::array({s.pos[0], s.pos[1]}));
  }
  atomic_write(ws.canonical(), cj.dump() + "\n");
  std::ostringstream jl, csv;
  write_embeddings_jsonl(jl, result.embeddings);
  csv << hash_line(exp);
  write_embeddings_csv(csv, result.embeddings);
  atomic_write(ws.embeddings_jsonl(), jl.str());
  atomic_write(ws.embeddings_csv(), csv.str());
  manifest.record(ws.canonical(), "canonical");
  manifest.record(ws.embeddings_jsonl(), "embeddings");
  manifest.record(ws.embeddings_csv(), "embeddings");
  manifest.save();
  return result;
}

EvaluateResult cmd_evaluate(const Experiment& exp, const RunOptions& opt) {
  const Workspace ws{opt.out};
  const auto& c = exp.config();
  // Embeddings are (re)derived from the checkpoints so they always match them.
  const auto embedded = cmd_embed(exp, opt);
  Manifest manifest(ws, exp, opt.overwrite);
  const auto data = load_checked_dataset(exp, ws);
  const auto folds_seed = sub_seed(c, "folds");
  const int k = c.evaluation.folds;
  const auto& grid = c.evaluation.lambda_grid;

  EvaluateResult result;
  result.returns = exp.true_returns();
  std::vector<std::string> ids;
  for (const auto& p : exp.policies()) ids.push_back(p->id());

  auto select = [&](const std::string& representation, const std::string& encoder) {
    std::vector<PolicyEmbedding> out;
    for (const auto& e : embedded.embeddings) {
      if (e.representation == representation && e.encoder == encoder) out.push_back(e);
    }
    return out;
  };

  const bool want_pi2vec =
      std::find(c.representations.begin(), c.representations.end(), kPi2vecRepresentation) != c.representations.end();
  if (want_pi2vec) {
    EncoderEmbeddings candidates;
    for (const auto& e : c.encoders) {
      auto set = select(kPi2vecRepresentation, e);
      result.reports.push_back(kfold_cv(set, result.returns, k, folds_seed, grid));
      candidates.emplace_back(e, std::move(set));
    }
    if (candidates.size() > 1) result.reports.push_back(best_encoder_cv(candidates, result.returns, k, folds_seed, grid));
  }
  if (std::find(c.representations.begin(), c.representations.end(), kActionsRepresentation) != c.representations.end()) {
    result.reports.push_back(kfold_cv(select(kActionsRepresentation, ""), result.returns, k, folds_seed, grid));
  }
  if (c.evaluation.fqe_baseline) {
    std::vector<double> est(exp.policies().size());
    const EncoderPtr input = exp.env().mdp ? nullptr : exp.features(c.encoders.front()).state_encoder_ptr();
    parallel_for(static_cast<int>(est.size()), opt.workers, [&](int i) {
      const auto& p = *exp.policies()[i];
      est[i] = fqe_value_baseline(data, p, input, exp.fqe_config(p.id(), "fqe_baseline"));
    });
    result.reports.push_back(score_predictions("fqe", "", ids, result.returns, est, k, folds_seed));
  }
  if (c.evaluation.offline_mode && want_pi2vec) {
    for (const auto& e : c.encoders) {
      const auto reward = fit_reward_model(data, exp.features(e));
      std::vector<double> est;
      for (const auto& emb : select(kPi2vecRepresentation, e)) est.push_back(offline_return_estimate(emb, reward));
      result.reports.push_back(score_predictions("pi2vec_offline", e, ids, result.returns, est, k, folds_seed));
    }
  }

  std::ostringstream returns_csv, metrics_csv, scatter_csv;
  returns_csv << hash_line(exp) << "policy_id,epsilon,true_return\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    returns_csv << fmt::format("{},{},{:.12g}\n", ids[i], c.epsilons[i], result.returns[i]);
  }
  metrics_csv << hash_line(exp);
  write_metrics_header(metrics_csv);
  scatter_csv << hash_line(exp);
  write_scatter_header(scatter_csv);
  for (const auto& r : result.reports) {
    write_metrics_rows(metrics_csv, r);
    write_scatter_rows(scatter_csv, r);
  }
  atomic_write(ws.returns(), returns_csv.str());
  atomic_write(ws.metrics(), metrics_csv.str());
  atomic_write(ws.scatter(), scatter_csv.str());
  manifest.record(ws.returns(), "returns");
  manifest.record(ws.metrics(), "metrics");
  manifest.record(ws.scatter(), "scatter");
  manifest.save();
  return result;
}

std::vector<CheckResult> cmd_oracle_check(const Experiment& exp, const RunOptions& opt) {
  const Workspace ws{opt.out};
  const auto& c = exp.config();
  if (!exp.env().mdp) throw ConfigError("oracle-check needs a tabular environment");
  const auto& mdp = *exp.env().mdp;
  if (!fs::exists(ws.dataset())) cmd_generate(exp, opt);
  const auto jobs = model_jobs(exp, ws);
  const bool any_missing = std::any_of(jobs.begin(), jobs.end(), [](const ModelJob& j) { return !fs::exists(j.path); });
  if (any_missing) cmd_train(exp, opt);
  Manifest manifest(ws, exp, opt.overwrite);
  const auto data = load_checked_dataset(exp, ws);
  const auto oracle_seed = sub_seed(c, "oracle");

  std::vector<CheckResult> checks;
  for (const auto& job : jobs) {
    const auto& policy = *exp.policies()[job.policy];
    const std::string subject = fmt::format("{}/{}", policy.id(), job.encoder);
    try {
      const auto model = load_checked_model(exp, job);
      checks.push_back({"checkpoint_integrity", subject, true, 0.0, 0.0, "checksum ok"});
      checks.push_back(check_fqe_vs_dp(model, policy, mdp, data, c.oracle.min_visits, c.oracle.fqe_tolerance));
    } catch (const FormatError& e) {
      checks.push_back({"checkpoint_integrity", subject, false, 1.0, 0.0, e.what()});
    }
  }
  for (const auto& e : c.encoders) {
    checks.push_back(check_mc_consistency(mdp, *exp.policies().front(), exp.features(e), c.fqe.gamma, c.oracle.mc_pairs,
                                          c.oracle.mc_rollouts, c.oracle.mc_pass_fraction,
                                          derive_seed(oracle_seed, "mc/" + e)));
  }
  if (c.environment.kind == "gridworld") {
    const auto linear = make_linear_reward_gridworld(c.environment.grid, c.environment.reward_seed);
    const auto q = value_iteration(linear.mdp, c.planning_gamma, 1e-10);
    const auto family = make_policy_family(linear.mdp, q, c.epsilons, sub_seed(c, "policies"));
    checks.push_back(check_q_reconstruction(linear, family, c.fqe.gamma, 1e-8));
  }
  checks.push_back(check_projection_mean(c.oracle.projection_cases, derive_seed(oracle_seed, "projection")));

  std::ostringstream csv;
  csv << hash_line(exp) << "check,subject,passed,value,tolerance,detail\n";
  for (const auto& ck : checks) {
    std::string detail = ck.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    std::replace(detail.begin(), detail.end(), '\n', ' ');
    csv << fmt::format("{},{},{},{:.6g},{:.6g},{}\n", ck.name, ck.subject, ck.passed ? "PASS" : "FAIL", ck.value,
                       ck.tolerance, detail);
  }
  atomic_write(ws.oracle(), csv.str());
  manifest.record(ws.oracle(), "oracle_check");
  manifest.save();
  return checks;
}

std::string cmd_report(const Experiment& exp, const RunOptions& opt) {
  const Workspace ws{opt.out};
  if (!fs::exists(ws.metrics())) throw InputError(fmt::format("no metrics at '{}'; run evaluate first", ws.metrics().string()));
  Manifest manifest(ws, exp, false);
  std::istringstream in(read_file(ws.metrics()));
  std::string line;
  std::ostringstream table;
  table << fmt::format("config {} ({})\n", exp.hash(), exp.config().name);
  table << fmt::format("{:<16} {:<24} {:>8} {:>9} {:>9} {:>10}\n", "representation", "encoder", "nmae", "spearman",
                       "pearson", "regret@1");
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      if (line.rfind("# config_hash: ", 0) == 0 && line.substr(15) != exp.hash()) {
        throw ConfigError("metrics.csv belongs to another config");
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() < 8 || f[2] != "mean") continue;
    auto num = [](const std::string& v) { return v == "NA" ? v : fmt::format("{:.4f}", std::stod(v)); };
    table << fmt::format("{:<16} {:<24} {:>8} {:>9} {:>9} {:>10}\n", f[0], f[1].empty() ? "-" : f[1], num(f[3]),
                         num(f[4]), num(f[5]), num(f[6]));
  }
  atomic_write(ws.report(), table.str());
  manifest.record(ws.report(), "report");
  manifest.save();
  return table.str();
}

}  // namespace pi2vec
