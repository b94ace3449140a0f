// pi2vec command-line front end.
// Exit codes: 0 success, 1 runtime error, 2 config/usage error, 3 verification failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "pi2vec/pipeline/pipeline.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitVerification = 3;

struct Args {
  std::string config;
  std::string out;
  int workers = 1;
  bool overwrite = false;
  std::optional<std::uint64_t> seed_override;
};

int run(const std::string& command, const Args& args) {
  using namespace pi2vec;
  const auto exp = load_experiment(args.config, args.seed_override);
  const RunOptions opt{args.out, args.workers, args.overwrite};
  fmt::print(stderr, "config {} -> {}\n", exp.hash(), args.out);

  auto generate = [&] {
    const auto r = cmd_generate(exp, opt);
    fmt::print("generate: {} trajectories, {} transitions\n", r.trajectories, r.transitions);
  };
  auto train = [&] {
    const auto r = cmd_train(exp, opt);
    fmt::print("train: {} trained, {} reused\n", r.trained, r.skipped);
  };
  auto embed = [&] {
    const auto r = cmd_embed(exp, opt);
    fmt::print("embed: {} embeddings over {} canonical states ({})\n", r.embeddings.size(), r.canonical.size(),
               r.canonical.fingerprint());
  };
  auto evaluate = [&] {
    const auto r = cmd_evaluate(exp, opt);
    fmt::print("evaluate: {} report rows written\n", r.reports.size());
  };
  auto report = [&] { fmt::print("{}", cmd_report(exp, opt)); };

  if (command == "generate") generate();
  else if (command == "train") train();
  else if (command == "embed") embed();
  else if (command == "evaluate") evaluate();
  else if (command == "report") report();
  else if (command == "run") {
    // Keeps an existing dataset unless --overwrite.
    if (opt.overwrite || !std::filesystem::exists(Workspace{opt.out}.dataset())) generate();
    train();
    evaluate();
    report();
  } else if (command == "oracle-check") {
    const auto checks = cmd_oracle_check(exp, opt);
    bool ok = true;
    for (const auto& c : checks) {
      fmt::print("{:<22} {:<34} {} value={:.4g} tol={:.4g}  {}\n", c.name, c.subject, c.passed ? "PASS" : "FAIL", c.value,
                 c.tolerance, c.detail);
      ok = ok && c.passed;
    }
    if (!ok) return kExitVerification;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pi2vec: policy embeddings from successor features"};
  app.require_subcommand(1);
  Args args;
  std::uint64_t seed = 0;
  const char* commands[][2] = {{"generate", "roll out the source policies into an offline dataset"},
                               {"train", "fit one successor-feature model per (policy, encoder)"},
                               {"embed", "build policy embeddings on the canonical states"},
                               {"evaluate", "cross-validated return prediction and baselines"},
                               {"oracle-check", "compare trained models with exact oracles (tabular only)"},
                               {"report", "print the summary table of metrics.csv"},
                               {"run", "generate, train, evaluate and report in one go"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", args.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory")->required();
    sub->add_option("--workers", args.workers, "parallel training jobs")->check(CLI::PositiveNumber);
    sub->add_flag("--overwrite", args.overwrite, "replace existing outputs");
    sub->add_option("--seed-override", seed, "replace the config's root_seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  const auto* sub = app.get_subcommands().front();
  if (sub->count("--seed-override") > 0) args.seed_override = seed;

  try {
    return run(sub->get_name(), args);
  } catch (const pi2vec::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const pi2vec::VerificationError& e) {
    fmt::print(stderr, "verification failed: {}\n", e.what());
    return kExitVerification;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
}
