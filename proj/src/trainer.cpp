#include "rankx/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "rankx/error.hpp"
#include "rankx/ordering.hpp"
#include "rankx/rouge.hpp"

namespace rankx {

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::kPairwise:
      return "pairwise";
    case Objective::kListwise:
      return "listwise";
    case Objective::kBce:
      return "bce";
    case Objective::kMse:
      return "mse";
  }
  return "pairwise";
}

Objective parse_objective(std::string_view name) {
  if (name == "pairwise") return Objective::kPairwise;
  if (name == "listwise") return Objective::kListwise;
  if (name == "bce") return Objective::kBce;
  if (name == "mse") return Objective::kMse;
  throw ValidationError("unknown objective '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("learning_rate must be a finite non-negative number");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (!(base_margin > 0.0)) throw ValidationError("base_margin must be positive");
  if (layer_dims.empty() || layer_dims.front() != kFeatureDim || layer_dims.back() != 1)
    throw ValidationError("layer_dims must start at the feature dimension and end at 1");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"objective", to_string(c.objective)},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"base_margin", c.base_margin},
          {"listwise_k", c.listwise_k},
          {"shuffle", c.shuffle},
          {"optimizer", c.optimizer == OptimizerKind::kAdam ? "adam" : "gd"},
          {"layer_dims", c.layer_dims},
          {"locator_positives", c.locator_positives},
          {"locator_use_spans", c.locator_use_spans},
          {"reranker_init", c.reranker_init == RerankerInit::kFresh ? "fresh" : "ranker"}};
}

void merge_json(TrainConfig& c, const nlohmann::json& j) {
  try {
    if (j.contains("objective")) c.objective = parse_objective(j["objective"].get<std::string>());
    if (j.contains("learning_rate")) j["learning_rate"].get_to(c.learning_rate);
    if (j.contains("epochs")) j["epochs"].get_to(c.epochs);
    if (j.contains("seed")) j["seed"].get_to(c.seed);
    if (j.contains("base_margin")) j["base_margin"].get_to(c.base_margin);
    if (j.contains("listwise_k")) j["listwise_k"].get_to(c.listwise_k);
    if (j.contains("shuffle")) j["shuffle"].get_to(c.shuffle);
    if (j.contains("optimizer")) {
      const auto name = j["optimizer"].get<std::string>();
      if (name == "gd") c.optimizer = OptimizerKind::kGradientDescent;
      else if (name == "adam") c.optimizer = OptimizerKind::kAdam;
      else throw ValidationError("unknown optimizer '" + name + "'");
    }
    if (j.contains("layer_dims")) j["layer_dims"].get_to(c.layer_dims);
    if (j.contains("locator_positives")) j["locator_positives"].get_to(c.locator_positives);
    if (j.contains("locator_use_spans")) j["locator_use_spans"].get_to(c.locator_use_spans);
    if (j.contains("reranker_init")) {
      const auto name = j["reranker_init"].get<std::string>();
      if (name == "ranker") c.reranker_init = RerankerInit::kFromRanker;
      else if (name == "fresh") c.reranker_init = RerankerInit::kFresh;
      else throw ValidationError("unknown reranker_init '" + name + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
}

std::vector<PreparedInstance> prepare_corpus(const Corpus& corpus) {
  std::vector<PreparedInstance> out;
  out.reserve(corpus.instances.size());
  for (const auto& inst : corpus.instances) {
    PreparedInstance p;
    p.instance = &inst;
    p.features = featurize_instance(inst);
    std::vector<std::string> texts;
    texts.reserve(inst.utterances.size());
    for (const auto& u : inst.utterances) texts.push_back(u.text);
    p.gold_relevance = rouge::gold_relevances(texts, inst.gold_summary);
    out.push_back(std::move(p));
  }
  return out;
}

std::pair<double, ParameterGradient> evaluate_term(const ScoringModel& model,
                                                   const ObjectiveTerm& term) {
  const std::size_t n = term.features.size();
  if (term.targets.size() != n) throw ValidationError("objective targets not aligned");
  std::vector<ForwardTrace> traces;
  std::vector<double> scores;
  traces.reserve(n);
  scores.reserve(n);
  for (const auto& x : term.features) {
    traces.push_back(model.forward(x));
    scores.push_back(traces.back().score);
  }

  losses::LossResult loss;
  switch (term.objective) {
    case Objective::kPairwise: {
      const auto gold = argsort_descending(term.targets);
      std::vector<double> ordered(n);
      for (std::size_t r = 0; r < n; ++r) ordered[r] = scores[gold[r]];
      const auto ranked = losses::pairwise_margin_loss(ordered, term.base_margin);
      loss.value = ranked.value;
      loss.grad.assign(n, 0.0);
      for (std::size_t r = 0; r < n; ++r) loss.grad[gold[r]] = ranked.grad[r];
      break;
    }
    case Objective::kListwise:
      loss = losses::kl_listwise_loss(scores, term.targets, std::min(term.listwise_k, n));
      break;
    case Objective::kBce:
      loss = losses::bce_locator_loss(scores, term.targets);
      break;
    case Objective::kMse:
      loss = losses::mse_simulator_loss(scores, term.targets);
      break;
  }

  ParameterGradient grad = model.zero_gradient();
  for (std::size_t i = 0; i < n; ++i) {
    if (loss.grad[i] == 0.0) continue;
    grad += model.backward(traces[i], loss.grad[i]);
  }
  return {loss.value, std::move(grad)};
}

namespace {

class Optimizer {
 public:
  Optimizer(const TrainConfig& config, std::size_t parameter_count)
      : kind_(config.optimizer), lr_(config.learning_rate) {
    if (kind_ == OptimizerKind::kAdam) {
      m_.assign(parameter_count, 0.0);
      v_.assign(parameter_count, 0.0);
    }
  }

  void step(ScoringModel& model, const ParameterGradient& grad) {
    if (kind_ == OptimizerKind::kGradientDescent) {
      model.apply_gradient(grad, lr_);
      return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    ParameterGradient direction{std::vector<double>(grad.values.size())};
    for (std::size_t i = 0; i < grad.values.size(); ++i) {
      m_[i] = b1 * m_[i] + (1 - b1) * grad.values[i];
      v_[i] = b2 * v_[i] + (1 - b2) * grad.values[i] * grad.values[i];
      direction.values[i] = (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
    }
    model.apply_gradient(direction, lr_);
  }

 private:
  OptimizerKind kind_;
  double lr_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

/// Seeded per-epoch visiting order.
class EpochOrder {
 public:
  EpochOrder(std::size_t size, const TrainConfig& config)
      : order_(size), shuffle_(config.shuffle), rng_(config.seed ^ 0x9e3779b97f4a7c15ULL) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  const std::vector<std::size_t>& next() {
    if (shuffle_) std::shuffle(order_.begin(), order_.end(), rng_);
    return order_;
  }

 private:
  std::vector<std::size_t> order_;
  bool shuffle_;
  std::mt19937_64 rng_;
};

/// Runs the epoch loop over prebuilt terms, one update per term.
TrainResult fit(ScoringModel model, const std::vector<ObjectiveTerm>& terms,
                const TrainConfig& config) {
  Optimizer opt(config, model.parameter_count());
  EpochOrder order(terms.size(), config);
  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t t : order.next()) {
      auto [value, grad] = evaluate_term(model, terms[t]);
      total += value;
      opt.step(model, grad);
    }
    result.loss_history.push_back(total / static_cast<double>(terms.size()));
    spdlog::debug("{} epoch {}: mean loss {:.6g}", to_string(config.objective), epoch + 1,
                  result.loss_history.back());
  }
  result.model = std::move(model);
  return result;
}

/// One term per RankSample, targets chosen per objective.
std::vector<ObjectiveTerm> sample_terms(const std::vector<PreparedInstance>& prepared,
                                        const TrainConfig& config,
                                        const PipelineConfig& pipeline_config) {
  std::vector<ObjectiveTerm> terms;
  for (const auto& p : prepared) {
    if (p.instance->utterances.size() < 2) continue;
    std::vector<double> targets = p.gold_relevance;
    if (config.objective == Objective::kBce) {
      targets = losses::locator_labels(
          p.gold_relevance, config.locator_positives,
          config.locator_use_spans ? p.instance->relevant_spans : std::nullopt);
    }
    for (const auto& s :
         partition_samples(*p.instance, pipeline_config.sample_size, p.gold_relevance)) {
      ObjectiveTerm term;
      term.objective = config.objective;
      term.base_margin = config.base_margin;
      for (std::size_t idx : s.member_indices) {
        term.features.push_back(p.features[idx]);
        term.targets.push_back(targets[idx]);
      }
      terms.push_back(std::move(term));
    }
  }
  if (terms.empty()) throw ValidationError("corpus has no instance with at least 2 utterances");
  return terms;
}

}  // namespace

TrainResult train_ranker(const Corpus& corpus, const TrainConfig& config,
                         const PipelineConfig& pipeline_config) {
  if (config.objective != Objective::kPairwise)
    throw ValidationError("train_ranker requires the pairwise objective");
  config.validate();
  pipeline_config.validate();
  const auto prepared = prepare_corpus(corpus);
  return fit(init_model(config.layer_dims, config.seed),
             sample_terms(prepared, config, pipeline_config), config);
}

TrainResult train_baseline(const Corpus& corpus, const TrainConfig& config,
                           const PipelineConfig& pipeline_config) {
  if (config.objective != Objective::kBce && config.objective != Objective::kMse)
    throw ValidationError("train_baseline requires the bce or mse objective");
  config.validate();
  pipeline_config.validate();
  const auto prepared = prepare_corpus(corpus);
  return fit(init_model(config.layer_dims, config.seed),
             sample_terms(prepared, config, pipeline_config), config);
}

TrainResult train_reranker(const Corpus& corpus, const ScoringModel& stage1_model,
                           const TrainConfig& config, const PipelineConfig& pipeline_config) {
  if (config.objective != Objective::kListwise)
    throw ValidationError("train_reranker requires the listwise objective");
  config.validate();
  pipeline_config.validate();
  const std::size_t k =
      config.listwise_k > 0 ? config.listwise_k : pipeline_config.effective_listwise_k();
  if (k < 1) throw ValidationError("listwise_k must be >= 1");

  const auto prepared = prepare_corpus(corpus);
  std::vector<ObjectiveTerm> terms;
  for (const auto& p : prepared) {
    if (p.instance->utterances.size() < 2) continue;
    PipelineConfig stage1_only = pipeline_config;
    stage1_only.rerank_enabled = false;
    const auto trace =
        run_pipeline_traced(*p.instance, p.features, stage1_model, stage1_model, stage1_only);
    if (trace.pool.size() < 2) {
      spdlog::warn("instance '{}': candidate pool of {} is too small, skipped",
                   p.instance->instance_id, trace.pool.size());
      continue;
    }
    ObjectiveTerm term;
    term.objective = Objective::kListwise;
    term.listwise_k = std::min(k, trace.pool.size());
    for (const auto& c : trace.pool) {
      term.features.push_back(p.features[c.utterance_index]);
      term.targets.push_back(p.gold_relevance[c.utterance_index]);
    }
    terms.push_back(std::move(term));
  }
  if (terms.empty()) throw ValidationError("no instance produced a candidate pool of size >= 2");

  ScoringModel start = init_model(config.layer_dims, config.seed);
  if (config.reranker_init == RerankerInit::kFromRanker) {
    if (stage1_model.layer_dims() != config.layer_dims)
      throw ValidationError("reranker_init=ranker needs matching layer_dims");
    start.set_parameters(stage1_model.parameters());
  }
  return fit(std::move(start), terms, config);
}

TrainResult train(const Corpus& corpus, const TrainConfig& config,
                  const PipelineConfig& pipeline_config, const ScoringModel* stage1_model) {
  switch (config.objective) {
    case Objective::kPairwise:
      return train_ranker(corpus, config, pipeline_config);
    case Objective::kListwise:
      if (stage1_model == nullptr)
        throw ValidationError("listwise training needs a stage-1 ranker");
      return train_reranker(corpus, *stage1_model, config, pipeline_config);
    case Objective::kBce:
    case Objective::kMse:
      return train_baseline(corpus, config, pipeline_config);
  }
  throw ValidationError("unknown objective");
}

nlohmann::json to_json(const GradCheckReport& r) {
  return {{"max_relative_error", r.max_relative_error},
          {"threshold", r.threshold},
          {"pass", r.pass},
          {"parameters", r.relative_errors.size()},
          {"below_resolution", r.below_resolution},
          {"relative_errors", r.relative_errors}};
}

GradCheckReport grad_check(const LossAssembly& loss, const ScoringModel& model, double epsilon,
                           double threshold) {
  if (!(epsilon > 0.0 && epsilon <= 1e-3))
    throw ValidationError("grad_check: epsilon must lie in (0, 1e-3]");
  GradCheckReport report;
  report.threshold = threshold;
  if (model.parameter_count() == 0) return report;

  report.analytic = loss(model).second.values;
  ScoringModel probe = model;
  const auto base = model.parameters();
  for (std::size_t i = 0; i < model.parameter_count(); ++i) {
    probe.set_parameter(i, base[i] + epsilon);
    const double up = loss(probe).first;
    probe.set_parameter(i, base[i] - epsilon);
    const double down = loss(probe).first;
    probe.set_parameter(i, base[i]);
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = report.analytic[i];
    const double err = std::abs(a - numeric) / std::max(1e-12, std::abs(a) + std::abs(numeric));
    report.numeric.push_back(numeric);
    report.relative_errors.push_back(err);
    const double floor = 256.0 * std::numeric_limits<double>::epsilon() *
                         std::max({1.0, std::abs(up), std::abs(down)}) / epsilon;
    if (std::max(std::abs(a), std::abs(numeric)) <= floor) {
      report.below_resolution.push_back(i);
      continue;
    }
    report.max_relative_error = std::max(report.max_relative_error, err);
  }
  report.pass = report.max_relative_error <= threshold;
  return report;
}

GradCheckPoint random_gradcheck_point(Objective objective, std::mt19937_64& rng,
                                      std::size_t items) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (;;) {
    GradCheckPoint p{init_model(kDefaultLayerDims, rng()), {}};
    // Spread the output layer so scores are not all near zero.
    for (std::size_t i = p.model.weight_offset(1); i < p.model.parameter_count(); ++i)
      p.model.set_parameter(i, 2.0 * unit(rng) - 1.0);
    p.term.objective = objective;
    p.term.base_margin = losses::kDefaultBaseMargin;
    p.term.listwise_k = 1 + static_cast<std::size_t>(unit(rng) * static_cast<double>(items));
    for (std::size_t i = 0; i < items; ++i) {
      FeatureVector x(kFeatureDim);
      for (double& v : x) v = unit(rng);
      x[static_cast<std::size_t>(Feature::kSpeakerInQuery)] = unit(rng) < 0.5 ? 0.0 : 1.0;
      p.term.features.push_back(std::move(x));
      p.term.targets.push_back(objective == Objective::kBce ? (unit(rng) < 0.5 ? 0.0 : 1.0)
                                                            : unit(rng));
    }
    if (objective != Objective::kPairwise) return p;
    const auto scores = p.model.score_all(p.term.features);
    const auto gold = argsort_descending(p.term.targets);
    double nearest = 1.0;
    for (std::size_t i = 0; i < items; ++i)
      for (std::size_t j = i + 1; j < items; ++j)
        nearest = std::min(nearest, std::abs(scores[gold[j]] - scores[gold[i]] +
                                             static_cast<double>(j - i) * p.term.base_margin));
    if (nearest > 1e-3) return p;
  }
}

}  // namespace rankx
