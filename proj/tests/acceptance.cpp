// Acceptance suite: one pass/fail line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "quad_oracle.hpp"
#include "rankx/cli.hpp"
#include "rankx/eval.hpp"
#include "rankx/ordering.hpp"
#include "rankx/pipeline.hpp"
#include "rankx/ranklosses.hpp"
#include "rankx/rouge.hpp"
#include "rankx/synth.hpp"
#include "rankx/trainer.hpp"

using namespace rankx;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

template <typename F>
void criterion(int id, const char* title, F&& body) {
  const auto start = Clock::now();
  Outcome o{false, ""};
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("[%s] criterion %d: %s | %s | %.2fs\n", o.pass ? "PASS" : "FAIL", id, title,
              o.detail.c_str(), secs);
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// 200 train / 50 test, 40 utterances, the given noise, seed 7; the same split
// the `synth` subcommand writes.
std::pair<Corpus, Corpus> planted_corpus(double noise) {
  const auto all = synth::generate({250, 40, noise, 7});
  return {Corpus{{all.begin(), all.begin() + 200}, Split::kTrain},
          Corpus{{all.begin() + 200, all.end()}, Split::kTest}};
}

Outcome permutation_normalization() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto s = oracle::random_vector(rng, 5, -3.0, 3.0);
    double total = 0.0;
    oracle::for_each_permutation(5, [&](const std::vector<std::size_t>& pi) {
      total += losses::perm_prob(s, pi);
    });
    worst = std::max(worst, std::abs(total - 1.0));
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-9 && secs < 1.0, fmt("max |sum - 1| = %.3g, %.3fs (limit 1s)", worst, secs)};
}

Outcome topk_marginalization() {
  const auto start = Clock::now();
  std::mt19937_64 rng(102);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto s = oracle::random_vector(rng, 6, -3.0, 3.0);
    for (std::size_t k = 1; k <= 3; ++k) {
      std::map<std::vector<std::size_t>, double> marginal;
      oracle::for_each_permutation(6, [&](const std::vector<std::size_t>& pi) {
        marginal[{pi.begin(), pi.begin() + static_cast<std::ptrdiff_t>(k)}] +=
            oracle::naive_perm_prob(s, pi, 6);
      });
      oracle::for_each_permutation(6, [&](const std::vector<std::size_t>& pi) {
        const std::vector<std::size_t> prefix(pi.begin(), pi.begin() + static_cast<std::ptrdiff_t>(k));
        worst = std::max(worst, std::abs(losses::topk_perm_prob(s, pi, k) - marginal[prefix]));
      });
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-9 && secs < 5.0, fmt("max abs diff = %.3g, %.3fs (limit 5s)", worst, secs)};
}

Outcome gradient_oracles() {
  const auto start = Clock::now();
  std::mt19937_64 rng(103);
  std::string detail;
  bool pass = true;
  for (auto objective : {Objective::kPairwise, Objective::kListwise, Objective::kBce, Objective::kMse}) {
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
      const auto point = random_gradcheck_point(objective, rng);
      const auto analytic = evaluate_term(point.model, point.term).second.values;
      const auto numeric = oracle::quad_central_difference(point.model, point.term, 1e-6);
      for (std::size_t i = 0; i < analytic.size(); ++i)
        worst = std::max(worst, oracle::relative_error(analytic[i], numeric[i]));
    }
    pass = pass && worst <= 1e-4;
    detail += std::string(to_string(objective)) + fmt(" %.2e  ", worst);
  }
  const double secs = seconds_since(start);
  pass = pass && secs < 30.0;
  return {pass, "max rel err: " + detail + fmt("%.2fs (limit 30s)", secs)};
}

Outcome shift_invariance() {
  std::mt19937_64 rng(104);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 + rng() % 9;
    const std::size_t k = 1 + rng() % n;
    const auto gold = oracle::random_vector(rng, n, -2.0, 2.0);
    const double c = std::uniform_real_distribution<double>(-50.0, 50.0)(rng);
    std::vector<double> shifted = gold;
    for (double& v : shifted) v += c;
    worst = std::max(worst, std::abs(losses::kl_listwise_loss(shifted, gold, k).value));
  }
  return {worst <= 1e-9, fmt("max |loss| = %.3g", worst)};
}

Outcome rouge_fixtures() {
  bool pass = true;
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-15; };
  const auto r1 = rouge::rouge_n("the cat", "the cat sat", 1);
  pass = pass && near(r1.precision, 1.0) && near(r1.recall, 2.0 / 3.0) && near(r1.f1, 0.8);
  const auto rl = rouge::rouge_l("a b c", "a c");
  pass = pass && near(rl.precision, 2.0 / 3.0) && near(rl.recall, 1.0) && near(rl.f1, 0.8);
  const auto r2 = rouge::rouge_n("the cat sat", "the cat sat on the mat", 2);
  pass = pass && near(r2.precision, 1.0) && near(r2.recall, 0.4) && near(r2.f1, 4.0 / 7.0);
  const bool fixtures = pass;

  // Every pair of sequences of length <= 8 over a 3-symbol alphabet.
  oracle::SubsequenceLattice lattice(3, 8);
  const char* names[] = {"x", "y", "z"};
  std::vector<rouge::TokenSequence> seqs(lattice.size());
  for (std::size_t id = 0; id < lattice.size(); ++id)
    for (std::size_t v : lattice.sequence(id)) seqs[id].push_back(names[v]);
  std::size_t pairs = 0, mismatches = 0;
  for (std::size_t b = 0; b < lattice.size(); ++b) {
    const auto truth = lattice.lcs_against(b);
    for (std::size_t a = 0; a <= b; ++a) {
      ++pairs;
      if (rouge::lcs_length(seqs[a], seqs[b]) != truth[a]) ++mismatches;
    }
  }
  pass = pass && mismatches == 0;
  return {pass, std::string("fixtures ") + (fixtures ? "exact" : "MISMATCH") + ", LCS " +
                    std::to_string(pairs) + " unordered pairs, " + std::to_string(mismatches) +
                    " mismatches"};
}

double held_out_ndcg(const ScoringModel& model, const std::vector<PreparedInstance>& test) {
  double total = 0.0;
  for (const auto& p : test)
    total += eval::ndcg_at_k(argsort_descending(model.score_all(p.features)), p.gold_relevance, 10);
  return total / static_cast<double>(test.size());
}

Outcome planted_order_recovery() {
  const auto start = Clock::now();
  const auto [train_set, test_set] = planted_corpus(0.05);
  TrainConfig cfg;
  cfg.seed = 7;
  const auto ranker = train_ranker(train_set, cfg, PipelineConfig{});
  const double ndcg = held_out_ndcg(ranker.model, prepare_corpus(test_set));
  const double secs = seconds_since(start);
  return {ndcg >= 0.90 && secs < 120.0,
          fmt("held-out NDCG@10 = %.4f (need >= 0.90), %.1fs (limit 120s)", ndcg, secs)};
}

Outcome rerank_ablation() {
  const auto [train_set, test_set] = planted_corpus(0.05);
  PipelineConfig pipe;
  pipe.sample_size = 10;
  pipe.per_sample_top = 3;
  TrainConfig cfg;
  cfg.seed = 7;
  const auto ranker = train_ranker(train_set, cfg, pipe);
  TrainConfig rcfg = cfg;
  rcfg.objective = Objective::kListwise;
  rcfg.optimizer = OptimizerKind::kAdam;
  const auto reranker = train_reranker(train_set, ranker.model, rcfg, pipe);

  const auto test = prepare_corpus(test_set);
  double ndcg[2] = {0, 0}, overlap[2] = {0, 0};
  const std::size_t ks[] = {10};
  for (int enabled = 0; enabled < 2; ++enabled) {
    PipelineConfig c = pipe;
    c.rerank_enabled = enabled == 1;
    for (const auto& p : test) {
      const auto r = run_pipeline_traced(*p.instance, p.features, ranker.model, reranker.model, c).result;
      ndcg[enabled] += eval::ndcg_at_k(r.selected_indices, p.gold_relevance, 10);
      const auto o = eval::topk_rouge_overlap(r, *p.instance, ks)[0].scores;
      overlap[enabled] += (o.r1.f1 + o.r2.f1 + o.rl.f1) / 3.0;
    }
    ndcg[enabled] /= static_cast<double>(test.size());
    overlap[enabled] /= static_cast<double>(test.size());
  }
  return {ndcg[1] >= ndcg[0] && overlap[1] >= overlap[0],
          fmt("NDCG@10 rerank %.4f vs none %.4f; top-10 overlap rerank %.5f vs none %.5f", ndcg[1],
              ndcg[0], overlap[1], overlap[0])};
}

Outcome objective_comparison() {
  const auto [train_set, test_set] = planted_corpus(0.1);
  double ranker = 0, mse = 0, bce = 0, full = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    eval::ComparisonConfig cfg;
    cfg.train.seed = seed;
    const auto report = eval::run_comparison(
        train_set, test_set, {"pairwise+listwise", "pairwise-only", "bce", "mse"}, cfg, "planted-0.1");
    ranker += report.row("pairwise-only").mean_tau / 5.0;
    full += report.row("pairwise+listwise").mean_tau / 5.0;
    bce += report.row("bce").mean_tau / 5.0;
    mse += report.row("mse").mean_tau / 5.0;
  }
  return {ranker >= mse && ranker >= bce,
          fmt("mean tau over 5 seeds: pairwise %.4f, mse %.4f, bce %.4f", ranker, mse, bce) +
              fmt(" (pairwise+listwise %.4f)", full)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("rankx_accept_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  auto path = [&](const std::string& n) { return (dir / n).string(); };
  auto run = [](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::dispatch(args, out, err);
    if (code != cli::kExitOk) throw std::runtime_error("cli failed: " + err.str());
  };
  run({"synth", "--instances", "40", "--test-instances", "10", "--utterances", "30", "--seed", "7",
       "--out", path("train.jsonl"), "--test-out", path("test.jsonl")});
  const std::vector<std::string> shared{"--epochs", "3", "--seed", "11"};
  auto with = [&](std::vector<std::string> a) {
    if (a[0] != "extract") a.insert(a.end(), shared.begin(), shared.end());
    return a;
  };
  for (const std::string t : {"1", "2"}) {
    run(with({"train", "--corpus", path("train.jsonl"), "--objective", "pairwise", "--out", path("ranker" + t)}));
    run(with({"train", "--corpus", path("train.jsonl"), "--objective", "listwise", "--ranker",
              path("ranker" + t), "--out", path("reranker" + t)}));
    run(with({"train", "--corpus", path("train.jsonl"), "--objective", "bce", "--out", path("bce" + t)}));
    run(with({"extract", "--corpus", path("test.jsonl"), "--ranker", path("ranker" + t),
              "--reranker", path("reranker" + t), "--out", path("extract" + t)}));
    run(with({"eval", "--train", path("train.jsonl"), "--test", path("test.jsonl"), "--out", path("eval" + t)}));
  }
  std::size_t identical = 0, compared = 0;
  for (const std::string f : {"ranker", "ranker%.loss.csv", "reranker", "bce", "extract", "eval", "eval%.txt"}) {
    std::string a = f, b = f;
    const auto pct = f.find('%');
    if (pct == std::string::npos) {
      a += "1";
      b += "2";
    } else {
      a.replace(pct, 1, "1");
      b.replace(pct, 1, "2");
    }
    ++compared;
    const auto x = slurp(path(a)), y = slurp(path(b));
    if (!x.empty() && x == y) ++identical;
  }
  fs::remove_all(dir);
  return {identical == compared, std::to_string(identical) + "/" + std::to_string(compared) +
                                     " primary outputs byte-identical across repeated runs"};
}

// Transcripts with long, ragged utterances so the budget actually binds.
std::vector<QueryInstance> random_corpus(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto word = [&] { return synth::pseudo_word(rng() % 3000); };
  std::vector<QueryInstance> out;
  for (std::size_t i = 0; i < count; ++i) {
    QueryInstance inst;
    inst.instance_id = "rand-" + std::to_string(i);
    inst.meeting_id = "m" + std::to_string(i);
    for (std::size_t w = 0, n = 1 + rng() % 40; w < n; ++w) inst.query += (w ? " " : "") + word();
    const std::size_t utterances = 1 + rng() % 80;
    for (std::size_t u = 0; u < utterances; ++u) {
      std::string text;
      const std::size_t words = 1 + (rng() % 8 == 0 ? rng() % 1500 : rng() % 120);
      for (std::size_t w = 0; w < words; ++w) text += (w ? (rng() % 5 == 0 ? "\n  " : " ") : "") + word();
      inst.utterances.push_back({inst.meeting_id, u, "speaker" + std::to_string(rng() % 6), text});
    }
    for (std::size_t w = 0; w < 20; ++w) inst.gold_summary += (w ? " " : "") + word();
    out.push_back(std::move(inst));
  }
  return out;
}

std::size_t istream_tokens(const std::string& text) {
  std::istringstream in(text);
  std::size_t n = 0;
  for (std::string t; in >> t;) ++n;
  return n;
}

Outcome budget_contract() {
  const auto corpus = random_corpus(500, 105);
  const auto ranker = init_model(kDefaultLayerDims, 1);
  const auto reranker = init_model(kDefaultLayerDims, 2);
  const PipelineConfig cfg;
  std::size_t worst = 0, over = 0, truncated = 0;
  for (const auto& inst : corpus) {
    const auto r = run_pipeline(inst, ranker, reranker, cfg);
    const std::size_t tokens = istream_tokens(r.generator_input);
    worst = std::max(worst, tokens);
    if (tokens > 1024) ++over;
    if (r.truncated) ++truncated;
  }
  return {over == 0, "500 instances, max generator_input tokens " + std::to_string(worst) +
                         " (budget 1024), " + std::to_string(over) + " over, " +
                         std::to_string(truncated) + " truncated"};
}

}  // namespace

int main() {
  criterion(1, "permutation normalization", permutation_normalization);
  criterion(2, "top-k marginalization", topk_marginalization);
  criterion(3, "gradient oracles", gradient_oracles);
  criterion(4, "listwise shift invariance", shift_invariance);
  criterion(5, "ROUGE fixtures and exhaustive LCS", rouge_fixtures);
  criterion(6, "planted-order recovery", planted_order_recovery);
  criterion(7, "re-ranking ablation direction", rerank_ablation);
  criterion(8, "objective comparison direction", objective_comparison);
  criterion(9, "determinism", determinism);
  criterion(10, "budget contract", budget_contract);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
