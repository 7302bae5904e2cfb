#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "rankx/error.hpp"
#include "rankx/scorer.hpp"

namespace rankx {

namespace {

std::atomic<std::uint64_t> g_version_counter{0};

std::uint64_t next_version() { return ++g_version_counter; }

}  // namespace

ParameterGradient& ParameterGradient::operator+=(const ParameterGradient& other) {
  if (values.size() != other.values.size())
    throw ValidationError("gradient shape mismatch in accumulation");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
  return *this;
}

ScoringModel::ScoringModel(std::vector<std::size_t> layer_dims, std::uint64_t seed)
    : layer_dims_(std::move(layer_dims)), seed_(seed) {
  if (layer_dims_.size() < 2)
    throw ValidationError("layer_dims needs an input and an output dimension");
  for (std::size_t d : layer_dims_)
    if (d == 0) throw ValidationError("layer dimensions must be positive");
  if (layer_dims_.back() != 1) throw ValidationError("final layer dimension must be 1");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < layer_dims_.size(); ++l) {
    weight_offsets_.push_back(offset);
    offset += layer_dims_[l] * layer_dims_[l + 1] + layer_dims_[l + 1];
  }
  params_.assign(offset, 0.0);
  bump_version();
}

void ScoringModel::bump_version() { version_ = next_version(); }

void ScoringModel::set_parameters(std::span<const double> values) {
  if (values.size() != params_.size())
    throw ValidationError("parameter count mismatch: expected " + std::to_string(params_.size()) +
                          ", got " + std::to_string(values.size()));
  for (double v : values)
    if (!std::isfinite(v)) throw ValidationError("non-finite parameter");
  params_.assign(values.begin(), values.end());
  bump_version();
}

void ScoringModel::set_parameter(std::size_t i, double value) {
  if (!std::isfinite(value)) throw ValidationError("non-finite parameter");
  params_.at(i) = value;
  bump_version();
}

void ScoringModel::apply_gradient(const ParameterGradient& grad, double learning_rate) {
  if (grad.values.size() != params_.size()) throw ValidationError("gradient shape mismatch");
  std::vector<double> next(params_);
  for (std::size_t i = 0; i < next.size(); ++i) {
    next[i] -= learning_rate * grad.values[i];
    if (!std::isfinite(next[i])) throw ValidationError("update produced a non-finite parameter");
  }
  params_ = std::move(next);
  bump_version();
}

ForwardTrace ScoringModel::forward(std::span<const double> x) const {
  if (layer_dims_.empty()) throw ValidationError("forward on an empty model");
  if (x.size() != input_dim())
    throw ValidationError("input dimension mismatch: model expects " +
                          std::to_string(input_dim()) + ", got " + std::to_string(x.size()));
  ForwardTrace trace;
  trace.model_version = version_;
  trace.activations.reserve(layer_dims_.size());
  trace.activations.emplace_back(x.begin(), x.end());
  const std::size_t layers = num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = layer_dims_[l], out = layer_dims_[l + 1];
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    const std::vector<double>& a = trace.activations.back();
    std::vector<double> z(out);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[o * in + i] * a[i];
      z[o] = (l + 1 < layers) ? std::tanh(acc) : acc;
    }
    trace.activations.push_back(std::move(z));
  }
  trace.score = trace.activations.back()[0];
  return trace;
}

double ScoringModel::score(std::span<const double> x) const { return forward(x).score; }

std::vector<double> ScoringModel::score_all(std::span<const FeatureVector> xs) const {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(score(x));
  return out;
}

ParameterGradient ScoringModel::backward(const ForwardTrace& trace, double upstream) const {
  if (trace.model_version != version_)
    throw ValidationError("stale activation trace: model changed since forward()");
  if (trace.activations.size() != layer_dims_.size())
    throw ValidationError("activation trace does not match model shape");
  ParameterGradient grad = zero_gradient();
  std::vector<double> delta{upstream};
  for (std::size_t l = num_layers(); l-- > 0;) {
    const std::size_t in = layer_dims_[l], out = layer_dims_[l + 1];
    const std::vector<double>& a = trace.activations[l];
    double* gw = grad.values.data() + weight_offset(l);
    double* gb = grad.values.data() + bias_offset(l);
    for (std::size_t o = 0; o < out; ++o) {
      gb[o] = delta[o];
      for (std::size_t i = 0; i < in; ++i) gw[o * in + i] = delta[o] * a[i];
    }
    if (l == 0) break;
    const double* w = params_.data() + weight_offset(l);
    std::vector<double> prev(in, 0.0);
    for (std::size_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc += w[o * in + i] * delta[o];
      prev[i] = acc * (1.0 - a[i] * a[i]);  // a = tanh(z) on hidden layers
    }
    delta = std::move(prev);
  }
  return grad;
}

ScoringModel init_model(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
  ScoringModel model(std::move(layer_dims), seed);
  std::vector<double> params(model.parameters().begin(), model.parameters().end());
  std::mt19937_64 rng(seed);
  const auto& dims = model.layer_dims();
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const double s = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    std::uniform_real_distribution<double> dist(-s, s);
    const std::size_t begin = model.weight_offset(l), end = model.bias_offset(l);
    for (std::size_t i = begin; i < end; ++i) params[i] = dist(rng);
  }
  model.set_parameters(params);
  return model;
}

nlohmann::json model_to_json(const ScoringModel& model) {
  nlohmann::json j;
  j["format"] = "rankx-scorer";
  j["feature_schema_version"] = kFeatureSchemaVersion;
  j["layer_dims"] = model.layer_dims();
  j["seed"] = model.seed();
  j["parameters"] = std::vector<double>(model.parameters().begin(), model.parameters().end());
  return j;
}

ScoringModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("feature_schema_version").get<int>() != kFeatureSchemaVersion)
      throw ValidationError("unsupported feature_schema_version");
    ScoringModel model(j.at("layer_dims").get<std::vector<std::size_t>>(),
                       j.at("seed").get<std::uint64_t>());
    model.set_parameters(j.at("parameters").get<std::vector<double>>());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model checkpoint: ") + e.what());
  }
}

void save_model(const ScoringModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write model checkpoint " + path);
  out << model_to_json(model).dump(2) << '\n';
}

ScoringModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model checkpoint " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model checkpoint " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace rankx
