#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "rankx/corpus.hpp"
#include "rankx/rouge.hpp"

namespace rankx {

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

inline constexpr std::size_t kFeatureDim = 7;
inline constexpr int kFeatureSchemaVersion = 1;

/// Feature layout, in order.
enum class Feature : std::size_t {
  kUnigramF1 = 0,       // query/utterance unigram overlap F1
  kBigramF1 = 1,        // query/utterance bigram overlap F1
  kTfidfCosine = 2,     // tf-idf cosine, idf over the instance's utterances
  kLength = 3,          // token count / 100, capped at 1
  kPosition = 4,        // index / (n - 1), 0 for a single utterance
  kQueryCoverage = 5,   // fraction of query content words present
  kSpeakerInQuery = 6,  // speaker name appears in the query
};

using FeatureVector = std::vector<double>;

/// Per-instance statistics shared by all utterances of one transcript.
struct InstanceStats {
  std::size_t num_utterances = 0;
  std::unordered_map<std::string, std::size_t> document_frequency;

  double idf(const std::string& term) const;
};

InstanceStats compute_instance_stats(const QueryInstance& instance);

/// True for the small built-in English function-word list.
bool is_stopword(std::string_view token);

FeatureVector featurize(std::string_view query, const Utterance& utterance,
                        const InstanceStats& stats);

/// Feature vectors for every utterance of an instance, in transcript order.
std::vector<FeatureVector> featurize_instance(const QueryInstance& instance);

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Values recorded by forward() and consumed by backward().
struct ForwardTrace {
  std::uint64_t model_version = 0;
  /// activations[0] is the input; activations[l] the output of layer l.
  std::vector<std::vector<double>> activations;
  double score = 0.0;
};

/// Flat gradient laid out exactly like ScoringModel::parameters().
struct ParameterGradient {
  std::vector<double> values;

  ParameterGradient& operator+=(const ParameterGradient& other);
};

/// Feed-forward scorer: tanh hidden layers, identity scalar output.
///
/// Parameters are stored flat, layer by layer: the weight matrix in
/// row-major (output x input) order followed by the bias vector. Every
/// mutation bumps a version stamp so traces from an older state are
/// rejected by backward().
class ScoringModel {
 public:
  ScoringModel() = default;
  /// Zero-initialized model. Throws ValidationError on invalid dims.
  explicit ScoringModel(std::vector<std::size_t> layer_dims, std::uint64_t seed = 0);

  const std::vector<std::size_t>& layer_dims() const { return layer_dims_; }
  std::size_t input_dim() const { return layer_dims_.empty() ? 0 : layer_dims_.front(); }
  std::size_t num_layers() const { return layer_dims_.empty() ? 0 : layer_dims_.size() - 1; }
  std::size_t parameter_count() const { return params_.size(); }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t version() const { return version_; }

  std::span<const double> parameters() const { return params_; }
  void set_parameters(std::span<const double> values);
  void set_parameter(std::size_t i, double value);
  /// params -= learning_rate * grad. Throws if the result is non-finite.
  void apply_gradient(const ParameterGradient& grad, double learning_rate);

  /// Offsets of layer `l`'s weights and biases in the flat parameter vector.
  std::size_t weight_offset(std::size_t layer) const { return weight_offsets_.at(layer); }
  std::size_t bias_offset(std::size_t layer) const {
    return weight_offsets_.at(layer) + layer_dims_[layer] * layer_dims_[layer + 1];
  }

  ForwardTrace forward(std::span<const double> x) const;
  double score(std::span<const double> x) const;
  std::vector<double> score_all(std::span<const FeatureVector> xs) const;

  /// Gradient of upstream * score with respect to every parameter.
  ParameterGradient backward(const ForwardTrace& trace, double upstream) const;

  ParameterGradient zero_gradient() const { return {std::vector<double>(params_.size(), 0.0)}; }

  bool operator==(const ScoringModel& other) const {
    return layer_dims_ == other.layer_dims_ && params_ == other.params_ && seed_ == other.seed_;
  }

 private:
  void bump_version();

  std::vector<std::size_t> layer_dims_;
  std::vector<std::size_t> weight_offsets_;
  std::vector<double> params_;
  std::uint64_t seed_ = 0;
  std::uint64_t version_ = 0;
};

/// Glorot-uniform weights, zero biases, reproducible from `seed`.
ScoringModel init_model(std::vector<std::size_t> layer_dims, std::uint64_t seed);

inline const std::vector<std::size_t> kDefaultLayerDims{kFeatureDim, 16, 1};

nlohmann::json model_to_json(const ScoringModel& model);
ScoringModel model_from_json(const nlohmann::json& j);
void save_model(const ScoringModel& model, const std::string& path);
ScoringModel load_model(const std::string& path);

}  // namespace rankx
