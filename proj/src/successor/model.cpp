#include "pi2vec/successor/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

namespace pi2vec {

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

std::string to_string(FqeMode mode) { return mode == FqeMode::kDistributional ? "distributional" : "expected"; }

FqeMode parse_fqe_mode(const std::string& name) {
  if (name == "distributional") return FqeMode::kDistributional;
  if (name == "expected" || name == "expected-value") return FqeMode::kExpected;
  throw InputError(fmt::format("unknown FQE mode '{}'", name));
}

SuccessorFeatureModel::SuccessorFeatureModel(Support support, double gamma, FqeMode mode, TransitionFeatures features,
                                             std::string policy_id, std::shared_ptr<const PsiNetwork> network,
                                             std::vector<double> params, std::string config_hash)
    : support_(std::move(support)),
      gamma_(gamma),
      mode_(mode),
      features_(std::move(features)),
      policy_id_(std::move(policy_id)),
      network_(std::move(network)),
      params_(std::move(params)),
      config_hash_(std::move(config_hash)) {
  if (!network_) throw InputError("SuccessorFeatureModel: null network");
  if (features_.dim() != support_.dim()) throw InputError("SuccessorFeatureModel: feature/support dimension mismatch");
  const int expected_out = mode_ == FqeMode::kDistributional ? dim() * bins() : dim();
  if (network_->output_dim() != expected_out) throw InputError("SuccessorFeatureModel: network output size mismatch");
  if (params_.size() != network_->param_count()) throw InputError("SuccessorFeatureModel: parameter count mismatch");
}

void softmax_rows(std::span<double> logits, int bins) {
  for (std::size_t off = 0; off < logits.size(); off += bins) {
    double* row = logits.data() + off;
    const double mx = *std::max_element(row, row + bins);
    double total = 0.0;
    for (int b = 0; b < bins; ++b) {
      row[b] = std::exp(row[b] - mx);
      total += row[b];
    }
    const double inv = 1.0 / total;
    for (int b = 0; b < bins; ++b) row[b] *= inv;
  }
}

std::vector<double> SuccessorFeatureModel::distribution(const State& s, int a) const {
  if (mode_ != FqeMode::kDistributional) throw UnsupportedError("distribution: model was trained in expected mode");
  std::vector<double> out(network_->output_dim());
  NetScratch scratch;
  network_->forward(params_, s, a, out, scratch);
  softmax_rows(out, bins());
  return out;
}

void SuccessorFeatureModel::predict(const State& s, int a, std::span<double> out) const {
  if (static_cast<int>(out.size()) != dim()) throw InputError("predict: output size mismatch");
  if (mode_ == FqeMode::kExpected) {
    NetScratch scratch;
    network_->forward(params_, s, a, out, scratch);
    return;
  }
  const auto dist = distribution(s, a);
  for (int d = 0; d < dim(); ++d) {
    out[d] = expected_value(std::span<const double>(dist).subspan(static_cast<std::size_t>(d) * bins(), bins()),
                            support_, d);
  }
}

std::vector<double> predict_psi(const SuccessorFeatureModel& model, const State& s, int a) {
  std::vector<double> out(model.dim());
  model.predict(s, a, out);
  return out;
}

std::vector<double> predict_psi_on_policy(const SuccessorFeatureModel& model, const Policy& policy, const State& s) {
  if (policy.id() != model.policy_id()) {
    throw InputError(fmt::format("predict_psi_on_policy: model belongs to '{}', not '{}'", model.policy_id(), policy.id()));
  }
  return predict_psi(model, s, policy.act_frozen(s));
}

namespace {

using ordered_json = nlohmann::ordered_json;

std::string checksum(const std::vector<double>& params) { return to_hex(fnv1a64(std::span<const double>(params))); }

}  // namespace

void write_model(std::ostream& out, const SuccessorFeatureModel& model) {
  ordered_json h;
  h["format"] = "pi2vec-psi-model";
  h["version"] = 1;
  h["n"] = model.dim();
  h["bins"] = model.bins();
  h["gamma"] = model.gamma();
  h["mode"] = to_string(model.mode());
  h["lower"] = model.support().bounds().lower;
  h["upper"] = model.support().bounds().upper;
  h["encoder"] = model.features().spec().name();
  h["policy_id"] = model.policy_id();
  h["network"] = model.network().describe();
  h["param_count"] = model.params().size();
  h["checksum"] = checksum(model.params());
  h["config_hash"] = model.config_hash();
  out << h.dump() << '\n';
  out.write(reinterpret_cast<const char*>(model.params().data()),
            static_cast<std::streamsize>(model.params().size() * sizeof(double)));
}

SuccessorFeatureModel read_model(std::istream& in, const EncoderContext& context) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("model: missing header");
  try {
    const auto h = ordered_json::parse(line);
    if (h.at("format") != "pi2vec-psi-model" || h.at("version") != 1) throw FormatError("model: unknown format");
    const auto spec = parse_encoder_name(h.at("encoder").get<std::string>());
    TransitionFeatures features = make_transition_features(spec, context);
    const FeatureBounds bounds{h.at("lower").get<std::vector<double>>(), h.at("upper").get<std::vector<double>>()};
    Support support(bounds, h.at("bins").get<int>());
    if (h.at("n").get<int>() != support.dim()) throw FormatError("model: header dimension mismatch");
    std::shared_ptr<const PsiNetwork> net = make_network(h.at("network"), features.state_encoder_ptr());
    const auto count = h.at("param_count").get<std::size_t>();
    if (count != net->param_count()) throw FormatError("model: parameter count does not match the network");
    std::vector<double> params(count);
    in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double)) throw FormatError("model: truncated parameters");
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("model: trailing bytes");
    if (checksum(params) != h.at("checksum").get<std::string>()) throw FormatError("model: checksum mismatch");
    return SuccessorFeatureModel(std::move(support), h.at("gamma").get<double>(),
                                 parse_fqe_mode(h.at("mode").get<std::string>()), std::move(features),
                                 h.at("policy_id").get<std::string>(), std::move(net), std::move(params),
                                 h.at("config_hash").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("model: {}", e.what()));
  }
}

void save_model(const std::string& path, const SuccessorFeatureModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot open '{}' for writing", path));
  write_model(out, model);
  if (!out) throw InputError(fmt::format("failed writing '{}'", path));
}

SuccessorFeatureModel load_model(const std::string& path, const EncoderContext& context) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path));
  return read_model(in, context);
}

nlohmann::ordered_json read_model_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path));
  std::string line;
  if (!std::getline(in, line)) throw FormatError("model: missing header");
  try {
    return ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("model: {}", e.what()));
  }
}

}  // namespace pi2vec
