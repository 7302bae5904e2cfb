#include "rankx/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "rankx/error.hpp"
#include "rankx/rouge.hpp"

namespace rankx {

using nlohmann::json;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw ValidationError("unknown split '" + std::string(name) + "'");
}

void validate_instance(const QueryInstance& inst) {
  const std::string where = "instance '" + inst.instance_id + "': ";
  if (inst.instance_id.empty()) throw ValidationError("instance with empty instance_id");
  if (rouge::tokenize(inst.query).empty()) throw ValidationError(where + "empty query");
  if (rouge::tokenize(inst.gold_summary).empty())
    throw ValidationError(where + "empty gold_summary");

  const std::size_t n = inst.utterances.size();
  std::vector<bool> seen(n, false);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const Utterance& u = inst.utterances[pos];
    if (u.meeting_id != inst.meeting_id)
      throw ValidationError(where + "utterance " + std::to_string(u.index) +
                            " has meeting_id '" + u.meeting_id + "', expected '" +
                            inst.meeting_id + "'");
    if (u.index >= n || seen[u.index])
      throw ValidationError(where + "utterance indices must form 0.." + std::to_string(n - 1) +
                            " without gaps or duplicates (found " + std::to_string(u.index) +
                            ")");
    if (u.index != pos)
      throw ValidationError(where + "utterance index " + std::to_string(u.index) +
                            " out of transcript order at position " + std::to_string(pos));
    seen[u.index] = true;
    if (rouge::tokenize(u.text).empty())
      throw ValidationError(where + "utterance " + std::to_string(u.index) + " has empty text");
  }
  if (inst.relevant_spans) {
    for (const auto& [first, last] : *inst.relevant_spans) {
      if (first > last || last >= n)
        throw ValidationError(where + "relevant span [" + std::to_string(first) + "," +
                              std::to_string(last) + "] out of range");
    }
  }
}

void validate_corpus(const Corpus& corpus) {
  std::unordered_set<std::string> ids;
  for (const auto& inst : corpus.instances) {
    validate_instance(inst);
    if (!ids.insert(inst.instance_id).second)
      throw ValidationError("duplicate instance_id '" + inst.instance_id + "'");
  }
}

QueryInstance instance_from_json(const json& j) {
  QueryInstance inst;
  j.at("instance_id").get_to(inst.instance_id);
  j.at("meeting_id").get_to(inst.meeting_id);
  j.at("query").get_to(inst.query);
  j.at("gold_summary").get_to(inst.gold_summary);
  for (const auto& ju : j.at("utterances")) {
    Utterance u;
    u.meeting_id = inst.meeting_id;
    const auto index = ju.at("index").get<long long>();
    if (index < 0) throw ValidationError("negative utterance index " + std::to_string(index));
    u.index = static_cast<std::size_t>(index);
    ju.at("speaker").get_to(u.speaker);
    ju.at("text").get_to(u.text);
    inst.utterances.push_back(std::move(u));
  }
  if (auto it = j.find("relevant_spans"); it != j.end() && !it->is_null()) {
    std::vector<IndexSpan> spans;
    for (const auto& js : *it) {
      if (!js.is_array() || js.size() != 2)
        throw ValidationError("relevant_spans entries must be [start, end] pairs");
      const auto first = js[0].get<long long>();
      const auto last = js[1].get<long long>();
      if (first < 0 || last < 0) throw ValidationError("negative relevant span bound");
      spans.emplace_back(static_cast<std::size_t>(first), static_cast<std::size_t>(last));
    }
    inst.relevant_spans = std::move(spans);
  }
  return inst;
}

json instance_to_json(const QueryInstance& inst) {
  json j;
  j["instance_id"] = inst.instance_id;
  j["meeting_id"] = inst.meeting_id;
  j["query"] = inst.query;
  j["gold_summary"] = inst.gold_summary;
  json utts = json::array();
  for (const auto& u : inst.utterances) {
    utts.push_back({{"index", u.index}, {"speaker", u.speaker}, {"text", u.text}});
  }
  j["utterances"] = std::move(utts);
  if (inst.relevant_spans) {
    json spans = json::array();
    for (const auto& [first, last] : *inst.relevant_spans) spans.push_back({first, last});
    j["relevant_spans"] = std::move(spans);
  }
  return j;
}

Corpus parse_corpus(std::string_view text, Split split) {
  Corpus corpus;
  corpus.split = split;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    const std::string loc = "line " + std::to_string(line_no) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(loc + e.what());
    }
    if (!j.is_object()) throw ParseError(loc + "expected a JSON object");
    try {
      corpus.instances.push_back(instance_from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(loc + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(loc + e.what());
    }
    if (end == text.size()) break;
  }
  validate_corpus(corpus);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open corpus file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), split);
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& inst : corpus.instances) {
    out += instance_to_json(inst).dump();
    out.push_back('\n');
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write corpus file " + path.string());
  out << serialize_corpus(corpus);
}

std::vector<RankSample> partition_samples(const QueryInstance& instance, std::size_t sample_size,
                                          std::span<const double> gold_relevance) {
  const std::size_t n = instance.utterances.size();
  if (sample_size < 2) throw ValidationError("partition_samples: sample_size must be >= 2");
  if (n < 2)
    throw ValidationError("partition_samples: instance '" + instance.instance_id +
                          "' has fewer than 2 utterances");
  if (gold_relevance.size() != n)
    throw ValidationError("partition_samples: gold_relevance not aligned with utterances");

  std::vector<RankSample> samples;
  for (std::size_t begin = 0; begin < n; begin += sample_size) {
    const std::size_t end = std::min(begin + sample_size, n);
    if (end - begin == 1) {
      // Merge a trailing singleton into the previous window.
      samples.back().member_indices.push_back(begin);
      samples.back().gold_relevance.push_back(gold_relevance[begin]);
      break;
    }
    RankSample s;
    s.instance_id = instance.instance_id;
    for (std::size_t i = begin; i < end; ++i) {
      s.member_indices.push_back(i);
      s.gold_relevance.push_back(gold_relevance[i]);
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace rankx
