#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace rankx {

struct Utterance {
  std::string meeting_id;
  std::size_t index = 0;
  std::string speaker;
  std::string text;

  bool operator==(const Utterance&) const = default;
};

/// Inclusive utterance index range [first, last].
using IndexSpan = std::pair<std::size_t, std::size_t>;

/// One query over one meeting transcript.
struct QueryInstance {
  std::string instance_id;
  std::string meeting_id;
  std::string query;
  std::vector<Utterance> utterances;
  std::string gold_summary;
  std::optional<std::vector<IndexSpan>> relevant_spans;

  bool operator==(const QueryInstance&) const = default;
};

enum class Split { kTrain, kValidation, kTest };

std::string_view to_string(Split split);
/// Accepts "train", "validation" and "test"; throws ValidationError otherwise.
Split parse_split(std::string_view name);

struct Corpus {
  std::vector<QueryInstance> instances;
  Split split = Split::kTrain;

  bool operator==(const Corpus&) const = default;
};

/// A contiguous group of utterances of one instance, the unit of pairwise
/// training. gold_relevance is aligned with member_indices.
struct RankSample {
  std::string instance_id;
  std::vector<std::size_t> member_indices;
  std::vector<double> gold_relevance;
};

inline constexpr std::size_t kDefaultSampleSize = 32;

/// Checks every QueryInstance invariant; throws ValidationError naming the
/// instance on the first violation.
void validate_instance(const QueryInstance& instance);

/// Checks every instance plus instance_id uniqueness.
void validate_corpus(const Corpus& corpus);

QueryInstance instance_from_json(const nlohmann::json& j);
nlohmann::json instance_to_json(const QueryInstance& instance);

/// Parses JSON-lines corpus text. Blank lines are skipped. Malformed lines
/// raise ParseError with the 1-based line number.
Corpus parse_corpus(std::string_view text, Split split);

Corpus load_corpus(const std::filesystem::path& path, Split split);

std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Splits an instance into contiguous transcript windows of `sample_size`.
/// A trailing window of one utterance is merged into the previous window.
std::vector<RankSample> partition_samples(const QueryInstance& instance, std::size_t sample_size,
                                          std::span<const double> gold_relevance);

}  // namespace rankx
