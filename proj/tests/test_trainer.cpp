#include <gtest/gtest.h>

#include <random>

#include "quad_oracle.hpp"
#include "rankx/error.hpp"
#include "rankx/eval.hpp"
#include "rankx/pipeline.hpp"
#include "rankx/synth.hpp"
#include "rankx/trainer.hpp"

using namespace rankx;

namespace {

Corpus synth_corpus(std::size_t n, std::uint64_t seed, double noise = 0.05) {
  return {synth::generate({n, 24, noise, seed}), Split::kTrain};
}

PipelineConfig small_pipeline() {
  PipelineConfig p;
  p.sample_size = 8;
  p.per_sample_top = 3;
  p.top_k = 5;
  return p;
}

TrainConfig config_for(Objective o, std::size_t epochs = 10) {
  TrainConfig c;
  c.objective = o;
  c.epochs = epochs;
  c.seed = 17;
  return c;
}

}  // namespace

TEST(Objective, Names) {
  for (auto o : {Objective::kPairwise, Objective::kListwise, Objective::kBce, Objective::kMse})
    EXPECT_EQ(parse_objective(to_string(o)), o);
  EXPECT_THROW(parse_objective("hinge"), ValidationError);
}

TEST(Train, ZeroLearningRateLeavesModelUnchanged) {
  const auto corpus = synth_corpus(5, 1);
  auto cfg = config_for(Objective::kPairwise, 3);
  cfg.learning_rate = 0.0;
  const auto r = train(corpus, cfg, small_pipeline());
  EXPECT_EQ(r.model, init_model(cfg.layer_dims, cfg.seed));
}

TEST(Train, SameSeedSameParameters) {
  const auto corpus = synth_corpus(8, 2);
  for (auto o : {Objective::kPairwise, Objective::kBce, Objective::kMse}) {
    auto cfg = config_for(o, 3);
    const auto a = train(corpus, cfg, small_pipeline());
    const auto b = train(corpus, cfg, small_pipeline());
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(a.loss_history, b.loss_history);
    cfg.seed += 1;
    EXPECT_FALSE(train(corpus, cfg, small_pipeline()).model == a.model);
  }
}

TEST(Train, LossDecreasesOverTenEpochs) {
  const auto corpus = synth_corpus(30, 3);
  const auto pipe = small_pipeline();
  const auto ranker = train(corpus, config_for(Objective::kPairwise), pipe);
  ASSERT_EQ(ranker.loss_history.size(), 10u);
  EXPECT_LT(ranker.loss_history.back(), ranker.loss_history.front());
  for (auto o : {Objective::kBce, Objective::kMse}) {
    const auto r = train(corpus, config_for(o), pipe);
    EXPECT_LT(r.loss_history.back(), r.loss_history.front()) << to_string(o);
  }
  const auto rr = train(corpus, config_for(Objective::kListwise), pipe, &ranker.model);
  EXPECT_LT(rr.loss_history.back(), rr.loss_history.front());
}

TEST(Train, ListwiseNeedsStageOneModel) {
  EXPECT_THROW(train(synth_corpus(3, 4), config_for(Objective::kListwise), small_pipeline()),
               ValidationError);
  EXPECT_THROW(train_ranker(synth_corpus(3, 4), config_for(Objective::kMse), small_pipeline()),
               ValidationError);
}

TEST(Reranker, GoldPlusConstantHasZeroLoss) {
  // Linear scorer reading feature 0, fed gold relevance through that feature.
  ScoringModel m({kFeatureDim, 1});
  m.set_parameter(0, 1.0);
  ObjectiveTerm term;
  term.objective = Objective::kListwise;
  term.listwise_k = 4;
  for (double g : {0.9, 0.1, 0.4, 0.7, 0.2, 0.3}) {
    FeatureVector x(kFeatureDim, 0.0);
    x[0] = g;
    term.features.push_back(x);
    term.targets.push_back(g);
  }
  const auto [at_gold, grad_at_gold] = evaluate_term(m, term);
  m.set_parameter(kFeatureDim, 0.75);
  const auto [value, grad] = evaluate_term(m, term);
  EXPECT_NEAR(at_gold, 0.0, 1e-12);
  EXPECT_NEAR(value, 0.0, 1e-12);
  // The prefix loss is not stationary at equality, but the step taken there
  // does not depend on the shift, and it never moves the output bias.
  for (std::size_t i = 0; i < grad.values.size(); ++i)
    EXPECT_NEAR(grad.values[i], grad_at_gold.values[i], 1e-12);
  EXPECT_NEAR(grad.values[kFeatureDim], 0.0, 1e-15);
}

TEST(Reranker, ImprovesPoolNdcgOverStageOne) {
  const auto train_set = synth_corpus(80, 5, 0.1);
  const Corpus test_set{synth::generate({30, 24, 0.1, 55}), Split::kTest};
  const auto pipe = small_pipeline();
  const auto ranker = train(train_set, config_for(Objective::kPairwise), pipe);
  auto rcfg = config_for(Objective::kListwise);
  rcfg.optimizer = OptimizerKind::kAdam;
  const auto reranker = train(train_set, rcfg, pipe, &ranker.model);

  double stage1 = 0.0, stage2 = 0.0;
  for (const auto& p : prepare_corpus(test_set)) {
    PipelineConfig off = pipe;
    off.rerank_enabled = false;
    const auto t = run_pipeline_traced(*p.instance, p.features, ranker.model, ranker.model, off);
    std::vector<double> pool_gold;
    for (const auto& c : t.pool) pool_gold.push_back(p.gold_relevance[c.utterance_index]);
    auto local = [&](const GlobalOrder& g) {
      std::vector<std::size_t> order;
      for (std::size_t idx : g.utterance_indices)
        for (std::size_t q = 0; q < t.pool.size(); ++q)
          if (t.pool[q].utterance_index == idx) order.push_back(q);
      return eval::ndcg_at_k(order, pool_gold, pipe.top_k);
    };
    stage1 += local(order_by_stage1(t.pool));
    stage2 += local(stage2_rerank(t.pool, reranker.model, p.features));
  }
  EXPECT_GE(stage2, stage1);
}

TEST(Train, MseWithEqualTargetsDescendsMonotonically) {
  Corpus corpus = synth_corpus(6, 6);
  auto cfg = config_for(Objective::kMse, 15);
  cfg.learning_rate = 1e-3;
  cfg.shuffle = false;
  // Every utterance shares the same target through a corpus with a
  // single-word summary absent from all transcripts.
  for (auto& inst : corpus.instances) inst.gold_summary = "zzzzqqqq";
  const auto r = train(corpus, cfg, small_pipeline());
  for (std::size_t e = 1; e < r.loss_history.size(); ++e)
    EXPECT_LE(r.loss_history[e], r.loss_history[e - 1] + 1e-15);
}

TEST(Train, BceSeparatesLabelledFixture) {
  ScoringModel m = init_model(kDefaultLayerDims, 3);
  ObjectiveTerm term;
  term.objective = Objective::kBce;
  for (int i = 0; i < 8; ++i) {
    FeatureVector x(kFeatureDim, 0.1 * i);
    x[0] = i < 4 ? 1.0 : 0.0;
    term.features.push_back(x);
    term.targets.push_back(i < 4 ? 1.0 : 0.0);
  }
  double value = 0.0;
  for (int step = 0; step < 2000; ++step) {
    auto [v, g] = evaluate_term(m, term);
    value = v;
    m.apply_gradient(g, 0.5);
  }
  EXPECT_LT(value, 0.1);
}

TEST(GradCheck, PassesAtRandomPointsForEveryObjective) {
  std::mt19937_64 rng(31);
  for (auto o : {Objective::kPairwise, Objective::kListwise, Objective::kBce, Objective::kMse}) {
    for (int t = 0; t < 10; ++t) {
      const auto p = random_gradcheck_point(o, rng);
      const auto report = grad_check(
          [&](const ScoringModel& m) { return evaluate_term(m, p.term); }, p.model, 1e-6);
      EXPECT_TRUE(report.pass) << to_string(o) << " max rel err " << report.max_relative_error;
    }
  }
}

TEST(GradCheck, ShiftInvariantLossesLeaveOutputBiasUnresolved) {
  std::mt19937_64 rng(33);
  for (auto o : {Objective::kPairwise, Objective::kListwise}) {
    const auto p = random_gradcheck_point(o, rng);
    const auto report = grad_check(
        [&](const ScoringModel& m) { return evaluate_term(m, p.term); }, p.model, 1e-6);
    const std::size_t bias = p.model.bias_offset(p.model.num_layers() - 1);
    EXPECT_EQ(report.below_resolution, std::vector<std::size_t>{bias}) << to_string(o);
  }
}

TEST(GradCheck, AnalyticMatchesQuadPrecisionDifferences) {
  std::mt19937_64 rng(34);
  for (auto o : {Objective::kPairwise, Objective::kListwise, Objective::kBce, Objective::kMse}) {
    double worst = 0.0;
    for (int t = 0; t < 5; ++t) {
      const auto p = random_gradcheck_point(o, rng);
      const auto analytic = evaluate_term(p.model, p.term).second.values;
      const auto numeric = oracle::quad_central_difference(p.model, p.term, 1e-6);
      for (std::size_t i = 0; i < analytic.size(); ++i)
        worst = std::max(worst, oracle::relative_error(analytic[i], numeric[i]));
    }
    EXPECT_LE(worst, 1e-4) << to_string(o);
  }
}

TEST(GradCheck, FlagsACorruptedGradient) {
  std::mt19937_64 rng(32);
  const auto p = random_gradcheck_point(Objective::kMse, rng);
  const auto report = grad_check(
      [&](const ScoringModel& m) {
        auto r = evaluate_term(m, p.term);
        const std::size_t i = m.bias_offset(m.num_layers() - 1);
        r.second.values[i] *= 2.0;
        return r;
      },
      p.model, 1e-6);
  EXPECT_FALSE(report.pass);
  EXPECT_GT(report.max_relative_error, 0.3);
}

TEST(GradCheck, EmptyModelAndEpsilonRange) {
  const auto zero = [](const ScoringModel&) { return std::pair<double, ParameterGradient>{0.0, {}}; };
  EXPECT_TRUE(grad_check(zero, ScoringModel{}, 1e-6).pass);
  EXPECT_THROW(grad_check(zero, ScoringModel{}, 0.0), ValidationError);
  EXPECT_THROW(grad_check(zero, ScoringModel{}, 1e-2), ValidationError);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c = config_for(Objective::kBce, 4);
  c.optimizer = OptimizerKind::kAdam;
  TrainConfig d;
  merge_json(d, to_json(c));
  EXPECT_EQ(to_json(d), to_json(c));
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}
