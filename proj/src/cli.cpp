#include "rankx/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "rankx/corpus.hpp"
#include "rankx/error.hpp"
#include "rankx/eval.hpp"
#include "rankx/manifest.hpp"
#include "rankx/pipeline.hpp"
#include "rankx/rouge.hpp"
#include "rankx/synth.hpp"
#include "rankx/trainer.hpp"

namespace rankx::cli {

namespace {

using nlohmann::json;

void setup_logging() {
  static bool done = false;
  if (!done) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("rankx"));
    done = true;
  }
  const char* level = std::getenv("RANKX_LOG_LEVEL");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << content;
}

/// Flags shared by train / extract / eval. Unset optionals leave the
/// config-file (or default) value in place.
struct SharedFlags {
  std::string config_path;
  std::optional<std::size_t> sample_size, per_sample_top, top_k, listwise_k, token_budget, epochs;
  std::optional<double> base_margin, learning_rate;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> optimizer, reranker_init;
  bool no_rerank = false;
  bool no_shuffle = false;

  void add_pipeline(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file; flags override it");
    app->add_option("--sample-size", sample_size, "Utterances per ranking sample");
    app->add_option("--per-sample-top", per_sample_top, "Top utterances pooled per sample");
    app->add_option("--K", top_k, "Utterances selected per instance");
    app->add_option("--listwise-k", listwise_k, "Prefix length of the listwise loss");
    app->add_option("--lambda", base_margin, "Base margin of the pairwise loss");
    app->add_option("--token-budget", token_budget, "Generator input budget (whitespace tokens)");
  }
  void add_train(CLI::App* app) {
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--lr", learning_rate, "Learning rate");
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--optimizer", optimizer, "gd or adam")->check(CLI::IsMember({"gd", "adam"}));
    app->add_option("--reranker-init", reranker_init, "ranker or fresh")
        ->check(CLI::IsMember({"ranker", "fresh"}));
    app->add_flag("--no-shuffle", no_shuffle, "Visit samples in corpus order");
  }

  void resolve(PipelineConfig& pc, TrainConfig& tc) const {
    if (!config_path.empty()) {
      json j;
      try {
        j = json::parse(read_file(config_path));
      } catch (const json::exception& e) {
        throw ParseError("config " + config_path + ": " + e.what());
      }
      if (j.contains("pipeline")) merge_json(pc, j["pipeline"]);
      if (j.contains("train")) merge_json(tc, j["train"]);
    }
    if (sample_size) pc.sample_size = *sample_size;
    if (per_sample_top) pc.per_sample_top = *per_sample_top;
    if (top_k) pc.top_k = *top_k;
    if (listwise_k) {
      pc.listwise_k = *listwise_k;
      tc.listwise_k = *listwise_k;
    }
    if (base_margin) {
      pc.base_margin = *base_margin;
      tc.base_margin = *base_margin;
    }
    if (token_budget) pc.token_budget = *token_budget;
    if (no_rerank) pc.rerank_enabled = false;
    if (epochs) tc.epochs = *epochs;
    if (learning_rate) tc.learning_rate = *learning_rate;
    if (seed) tc.seed = *seed;
    if (no_shuffle) tc.shuffle = false;
    if (optimizer) merge_json(tc, json{{"optimizer", *optimizer}});
    if (reranker_init) merge_json(tc, json{{"reranker_init", *reranker_init}});
    pc.validate();
    tc.validate();
  }
};

json full_config(const PipelineConfig& pc, const TrainConfig& tc) {
  return {{"pipeline", to_json(pc)}, {"train", to_json(tc)}};
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
  synth::SynthConfig config;
  std::size_t test_instances = 0;
  std::string out, test_out;
};

int run_synth(const SynthArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  synth::SynthConfig cfg = a.config;
  cfg.instances = a.config.instances + a.test_instances;
  auto all = synth::generate(cfg);
  Corpus train{{all.begin(), all.begin() + static_cast<std::ptrdiff_t>(a.config.instances)},
               Split::kTrain};
  save_corpus(train, a.out);
  if (a.test_instances > 0) {
    if (a.test_out.empty()) throw ValidationError("--test-instances needs --test-out");
    Corpus test{{all.begin() + static_cast<std::ptrdiff_t>(a.config.instances), all.end()},
                Split::kTest};
    save_corpus(test, a.test_out);
  }
  RunManifest m{"synth", argv,
                {{"instances", a.config.instances},
                 {"test_instances", a.test_instances},
                 {"utterances", a.config.utterances_per_instance},
                 {"noise", a.config.noise}},
                a.config.seed,
                {}};
  m.write(manifest_path_for(a.out));
  out << "wrote " << a.config.instances << " instances to " << a.out << '\n';
  return kExitOk;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  SharedFlags flags;
  std::string corpus, objective = "pairwise", ranker, out, history;
};

int run_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  PipelineConfig pc;
  TrainConfig tc;
  a.flags.resolve(pc, tc);
  tc.objective = parse_objective(a.objective);
  const Corpus corpus = load_corpus(a.corpus, Split::kTrain);
  std::optional<ScoringModel> stage1;
  std::vector<std::filesystem::path> inputs{a.corpus};
  if (tc.objective == Objective::kListwise) {
    if (a.ranker.empty()) throw ValidationError("--objective listwise needs --ranker");
    stage1 = load_model(a.ranker);
    inputs.emplace_back(a.ranker);
  }
  const TrainResult result = train(corpus, tc, pc, stage1 ? &*stage1 : nullptr);
  save_model(result.model, a.out);
  std::ostringstream csv;
  csv << "epoch,loss\n" << std::setprecision(17);
  for (std::size_t e = 0; e < result.loss_history.size(); ++e)
    csv << e + 1 << ',' << result.loss_history[e] << '\n';
  const std::string history = a.history.empty() ? a.out + ".loss.csv" : a.history;
  write_file(history, csv.str());
  RunManifest{"train", argv, full_config(pc, tc), tc.seed, inputs}.write(manifest_path_for(a.out));
  out << "trained " << to_string(tc.objective) << " model; final loss "
      << result.loss_history.back() << '\n';
  return kExitOk;
}

// --- extract ----------------------------------------------------------------

struct ExtractArgs {
  SharedFlags flags;
  std::string corpus, ranker, reranker, out;
};

int run_extract(const ExtractArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  PipelineConfig pc;
  TrainConfig tc;
  a.flags.resolve(pc, tc);
  const Corpus corpus = load_corpus(a.corpus, Split::kTest);
  const ScoringModel ranker = load_model(a.ranker);
  std::vector<std::filesystem::path> inputs{a.corpus, a.ranker};
  ScoringModel reranker = ranker;
  if (a.reranker.empty()) {
    pc.rerank_enabled = false;
  } else {
    reranker = load_model(a.reranker);
    inputs.emplace_back(a.reranker);
  }
  std::string lines;
  for (const auto& inst : corpus.instances)
    lines += to_json(run_pipeline(inst, ranker, reranker, pc)).dump() + "\n";
  write_file(a.out, lines);
  RunManifest{"extract", argv, full_config(pc, tc), tc.seed, inputs}.write(manifest_path_for(a.out));
  out << "extracted " << corpus.instances.size() << " instances to " << a.out << '\n';
  return kExitOk;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  SharedFlags flags;
  std::string train, test, objectives, out, table;
};

int run_eval(const EvalArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  eval::ComparisonConfig cc;
  a.flags.resolve(cc.pipeline, cc.train);
  const Corpus train = load_corpus(a.train, Split::kTrain);
  const Corpus test = load_corpus(a.test, Split::kTest);
  std::vector<std::string> objectives;
  if (a.objectives.empty()) {
    objectives = eval::kAllComparisonRows;
  } else {
    std::istringstream in(a.objectives);
    for (std::string item; std::getline(in, item, ',');)
      if (!item.empty()) objectives.push_back(item);
  }
  const auto report = eval::run_comparison(train, test, objectives, cc, sha256_file(a.test));
  write_file(a.out, eval::to_json(report).dump(2) + "\n");
  const std::string table = eval::format_table(report);
  write_file(a.table.empty() ? a.out + ".txt" : a.table, table);
  RunManifest{"eval", argv, eval::to_json(cc), cc.train.seed, {a.train, a.test}}.write(
      manifest_path_for(a.out));
  out << table;
  return kExitOk;
}

// --- rouge ------------------------------------------------------------------

struct RougeArgs {
  std::string tsv, candidates, references, out;
};

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

json score_json(const rouge::RougeScore& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

int run_rouge(const RougeArgs& a, std::ostream& out) {
  std::vector<std::pair<std::string, std::string>> pairs;
  if (!a.tsv.empty()) {
    std::size_t line_no = 0;
    for (const auto& line : split_lines(read_file(a.tsv))) {
      ++line_no;
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
        throw ParseError("line " + std::to_string(line_no) + ": expected two tab-separated columns");
      pairs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
  } else {
    if (a.candidates.empty() || a.references.empty())
      throw ValidationError("rouge needs --tsv or both --candidates and --references");
    const auto cand = split_lines(read_file(a.candidates));
    const auto ref = split_lines(read_file(a.references));
    if (cand.size() != ref.size())
      throw ValidationError("candidate and reference files differ in line count");
    for (std::size_t i = 0; i < cand.size(); ++i) pairs.emplace_back(cand[i], ref[i]);
  }
  json rows = json::array();
  rouge::RougeTriple mean;
  for (const auto& [c, r] : pairs) {
    const auto t = rouge::rouge_all(c, r);
    rows.push_back({{"rouge1", score_json(t.r1)}, {"rouge2", score_json(t.r2)},
                    {"rougeL", score_json(t.rl)}});
    for (auto [acc, v] : {std::pair{&mean.r1, &t.r1}, std::pair{&mean.r2, &t.r2},
                          std::pair{&mean.rl, &t.rl}}) {
      acc->precision += v->precision;
      acc->recall += v->recall;
      acc->f1 += v->f1;
    }
  }
  const double inv = pairs.empty() ? 0.0 : 1.0 / static_cast<double>(pairs.size());
  for (auto* s : {&mean.r1, &mean.r2, &mean.rl}) {
    s->precision *= inv;
    s->recall *= inv;
    s->f1 *= inv;
  }
  const json result{{"pairs", rows},
                    {"mean",
                     {{"rouge1", score_json(mean.r1)},
                      {"rouge2", score_json(mean.r2)},
                      {"rougeL", score_json(mean.rl)}}}};
  if (a.out.empty()) {
    out << result.dump(2) << '\n';
  } else {
    write_file(a.out, result.dump(2) + "\n");
  }
  return kExitOk;
}

// --- gradcheck --------------------------------------------------------------

struct GradcheckArgs {
  std::string objective = "all";
  std::size_t points = 50;
  std::uint64_t seed = 0;
  double epsilon = 1e-6;
};

int run_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  std::vector<Objective> objectives;
  if (a.objective == "all") {
    objectives = {Objective::kPairwise, Objective::kListwise, Objective::kBce, Objective::kMse};
  } else {
    objectives = {parse_objective(a.objective)};
  }
  std::mt19937_64 rng(a.seed);
  json rows = json::array();
  bool all_pass = true;
  for (Objective o : objectives) {
    double worst = 0.0;
    for (std::size_t p = 0; p < a.points; ++p) {
      const auto point = random_gradcheck_point(o, rng);
      const auto report = grad_check(
          [&](const ScoringModel& m) { return evaluate_term(m, point.term); }, point.model,
          a.epsilon);
      worst = std::max(worst, report.max_relative_error);
    }
    const bool pass = worst <= kGradCheckThreshold;
    all_pass = all_pass && pass;
    rows.push_back({{"objective", to_string(o)},
                    {"points", a.points},
                    {"max_relative_error", worst},
                    {"threshold", kGradCheckThreshold},
                    {"pass", pass}});
  }
  out << json{{"results", rows}, {"pass", all_pass}}.dump(2) << '\n';
  return all_pass ? kExitOk : kExitValidation;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  setup_logging();
  CLI::App app{"rankx: two-stage learning-to-rank utterance extraction", "rankx"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(toolkit_version()));

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a planted-order synthetic corpus");
  synth->add_option("--instances", synth_args.config.instances, "Training instances")
      ->capture_default_str();
  synth->add_option("--test-instances", synth_args.test_instances, "Held-out instances");
  synth->add_option("--utterances", synth_args.config.utterances_per_instance,
                    "Utterances per instance")
      ->capture_default_str();
  synth->add_option("--noise", synth_args.config.noise, "Label noise sigma")->capture_default_str();
  synth->add_option("--seed", synth_args.config.seed, "Random seed")->capture_default_str();
  synth->add_option("--out", synth_args.out, "Output corpus (JSONL)")->required();
  synth->add_option("--test-out", synth_args.test_out, "Held-out corpus (JSONL)");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a ranker, re-ranker or baseline");
  train->add_option("--corpus", train_args.corpus, "Training corpus (JSONL)")->required();
  train->add_option("--objective", train_args.objective, "pairwise, listwise, bce or mse")
      ->check(CLI::IsMember({"pairwise", "listwise", "bce", "mse"}))
      ->capture_default_str();
  train->add_option("--ranker", train_args.ranker, "Stage-1 checkpoint (listwise only)");
  train->add_option("--out", train_args.out, "Checkpoint path")->required();
  train->add_option("--history", train_args.history, "Loss history CSV");
  train_args.flags.add_pipeline(train);
  train_args.flags.add_train(train);

  ExtractArgs extract_args;
  auto* extract = app.add_subcommand("extract", "Select top utterances for each instance");
  extract->add_option("--corpus", extract_args.corpus, "Corpus (JSONL)")->required();
  extract->add_option("--ranker", extract_args.ranker, "Stage-1 checkpoint")->required();
  extract->add_option("--reranker", extract_args.reranker, "Stage-2 checkpoint");
  extract->add_option("--out", extract_args.out, "Output JSONL")->required();
  extract->add_flag("--no-rerank", extract_args.flags.no_rerank, "Skip stage-2 re-ranking");
  extract_args.flags.add_pipeline(extract);

  EvalArgs eval_args;
  auto* evalc = app.add_subcommand("eval", "Train and compare extractor objectives");
  evalc->add_option("--train", eval_args.train, "Training corpus")->required();
  evalc->add_option("--test", eval_args.test, "Test corpus")->required();
  evalc->add_option("--objectives", eval_args.objectives,
                    "Comma list of pairwise+listwise,pairwise-only,bce,mse,lead,gold");
  evalc->add_option("--out", eval_args.out, "Report JSON")->required();
  evalc->add_option("--table", eval_args.table, "Plain-text table (default <out>.txt)");
  eval_args.flags.add_pipeline(evalc);
  eval_args.flags.add_train(evalc);

  RougeArgs rouge_args;
  auto* rougec = app.add_subcommand("rouge", "ROUGE-1/2/L for candidate/reference pairs");
  rougec->add_option("--tsv", rouge_args.tsv, "Two-column TSV: candidate<TAB>reference");
  rougec->add_option("--candidates", rouge_args.candidates, "One candidate per line");
  rougec->add_option("--references", rouge_args.references, "One reference per line");
  rougec->add_option("--out", rouge_args.out, "Output JSON (default stdout)");

  GradcheckArgs gc_args;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of all objectives");
  gradcheck->add_option("--objective", gc_args.objective, "Objective or 'all'")
      ->check(CLI::IsMember({"all", "pairwise", "listwise", "bce", "mse"}));
  gradcheck->add_option("--points", gc_args.points, "Random points per objective");
  gradcheck->add_option("--seed", gc_args.seed, "Random seed");
  gradcheck->add_option("--epsilon", gc_args.epsilon, "Finite-difference step");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    if (args.empty()) throw CLI::CallForHelp();
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return args.empty() ? kExitUsage : kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << toolkit_version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  std::vector<std::string> argv{"rankx"};
  argv.insert(argv.end(), args.begin(), args.end());
  try {
    if (*synth) return run_synth(synth_args, argv, out);
    if (*train) return run_train(train_args, argv, out);
    if (*extract) return run_extract(extract_args, argv, out);
    if (*evalc) return run_eval(eval_args, argv, out);
    if (*rougec) return run_rouge(rouge_args, out);
    if (*gradcheck) return run_gradcheck(gc_args, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace rankx::cli
