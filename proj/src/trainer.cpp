#include "clozeqa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "clozeqa/error.hpp"
#include "clozeqa/metrics.hpp"
#include "clozeqa/optimizer.hpp"

namespace clozeqa {

using nlohmann::json;

namespace {

constexpr std::uint64_t kShuffleSalt = 0x5851f42d4c957f2dULL;
constexpr std::uint64_t kKnowledgeSeed = 1;

std::string raw_text(const Passage& passage, Span s) {
  if (s.start < 1 || s.end < s.start) return {};
  const auto& offs = passage.char_offsets;
  const auto begin = offs[static_cast<std::size_t>(s.start - 1)].begin;
  const auto end = offs[static_cast<std::size_t>(s.end - 1)].end;
  return passage.raw.substr(begin, end - begin);
}

double parameter_norm(const Model& model) {
  double sq = 0.0;
  for (const auto& p : model.parameters()) sq += p.var.value().squaredNorm();
  return std::sqrt(sq);
}

double example_f1(const Model& model, const PreparedExample& p, const TrainConfig& config) {
  const auto pred = predict(model, p, config);
  if (pred.answer.empty()) return 0.0;
  return token_f1(p.example.passage.surface_slice(pred.span), p.example.answer_surfaces());
}

double mean_f1(const Model& model, const std::vector<PreparedExample>& set, const TrainConfig& config) {
  double total = 0.0;
  for (const auto& p : set) total += example_f1(model, p, config);
  return set.empty() ? 0.0 : total / static_cast<double>(set.size());
}

std::vector<PreparedExample> prepare_all(const std::vector<EqaExample>& examples,
                                         const TrainConfig& config, const Vocab& vocab,
                                         const KnowledgeTable& kb, int max_len,
                                         std::vector<std::string>* warnings) {
  std::vector<PreparedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(prepare_example(ex, config, vocab, kb, max_len, warnings));
  return out;
}

}  // namespace

PreparedExample prepare_example(const EqaExample& ex, const TrainConfig& config,
                                const Vocab& vocab, const KnowledgeTable& kb, int max_len,
                                std::vector<std::string>* warnings) {
  validate(ex);
  PreparedExample p;
  p.example = ex;
  p.answer = ex.answer_tokens();
  if (static_cast<int>(p.answer.size()) > config.l_mask - 1) {
    throw ContractError("example " + ex.id + ": answer of " + std::to_string(p.answer.size()) +
                        " tokens does not fit l_mask " + std::to_string(config.l_mask) +
                        " with [END]");
  }
  p.prompt = build_prompt(ex.question, config.l_mask, vocab);
  const bool kpe = config.use_kpe && config.ppi != PpiMode::Off;
  if (kpe) p.prompt = select_prompt_tokens(std::move(p.prompt), kb, config.selection, warnings);
  p.input = assemble_input(p.prompt, ex.passage, max_len, ex.id);
  if (config.use_kpe && !kb.empty()) p.knowledge = match_knowledge(ex.passage.surfaces, kb);

  const auto all = enumerate_spans(ex.passage, std::min(config.span_max_len(), config.l_mask - 1));
  FilterConfig rules;
  if (!config.filter_negatives) rules = {false, false, false};
  p.candidates = filter_spans(all, ex.passage, ex.answer, rules).kept;
  return p;
}

ExampleLoss example_loss(const Model& model, const PreparedExample& p, const TrainConfig& config,
                         SamplingCounter* counter) {
  const auto fwd = model.forward(p.input, p.knowledge);
  const auto& masks = p.input.prompt_mask_positions;
  ExampleLoss out;
  const auto mlm = mlm_loss(fwd.log_probs, masks, p.answer);
  out.l_mlm = mlm.scalar();
  out.objective = mlm;
  if (config.lambda <= 0.0) return out;

  if (counter) ++counter->calls;
  auto batch = sample_negatives(p.candidates, p.example.answer, config.num_negatives,
                                fwd.g.value(), config.dist_kernel);
  std::vector<ag::Var> scores;
  scores.push_back(span_score(p.answer, fwd.log_probs, masks, config.score_mode));
  batch.gold_score = scores.back().scalar();
  for (const auto& n : batch.negatives) {
    scores.push_back(span_score(p.example.passage.slice(n.span), fwd.log_probs, masks,
                                config.score_mode));
    batch.negative_scores.push_back(scores.back().scalar());
  }
  const auto scl = scl_loss(ag::concat_rows(scores));
  out.l_scl = scl.scalar();
  out.objective = ag::add(mlm, ag::scale(scl, config.lambda));
  out.batch = std::move(batch);
  return out;
}

ContrastiveBatch contrastive_batch(const Model& model, const PreparedExample& p,
                                   const TrainConfig& config) {
  TrainConfig c = config;
  if (c.lambda <= 0.0) c.lambda = 1.0;
  return *example_loss(model, p, c).batch;
}

TrainResult train(const TrainConfig& config, const FewShotSplit& split, const Vocab& vocab,
                  const KnowledgeTable& kb, const std::optional<std::filesystem::path>& dump_dir) {
  validate(config);
  if (split.train.empty()) throw ConfigError("train: empty training set");
  const auto mc = model_config_for(config, static_cast<int>(vocab.size()), kb.d_kb());
  TrainResult r{Model(mc, config.seed), {}, 0, 0, 0, 0, {}};
  Model& model = r.model;

  const auto train_set = prepare_all(split.train, config, vocab, kb, mc.max_len, &r.warnings);
  const auto dev_set = prepare_all(split.dev, config, vocab, kb, mc.max_len, &r.warnings);

  const long n = static_cast<long>(train_set.size());
  const long per_epoch = (n + config.batch_size - 1) / config.batch_size;
  AdamWConfig oc;
  oc.lr_backbone = config.lr_backbone;
  oc.lr_new_modules = config.lr_new_modules;
  oc.warmup_fraction = config.warmup_fraction;
  oc.weight_decay = config.gamma;
  oc.beta1 = config.adam_beta1;
  oc.beta2 = config.adam_beta2;
  oc.eps = config.adam_eps;
  oc.total_steps = std::max<long>(1, per_epoch * config.epochs);
  AdamW opt(model.parameters(), oc);

  const bool select_dev = config.model_selection == "best_dev_f1" && !dev_set.empty();
  std::optional<std::vector<Matrix>> best_state;
  double best_dev = -1.0;

  SamplingCounter counter;
  std::mt19937_64 rng(config.seed ^ kShuffleSalt);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    for (long b = 0; b < per_epoch; ++b) {
      const long lo = b * config.batch_size;
      const long hi = std::min(n, lo + config.batch_size);
      const double inv = 1.0 / static_cast<double>(hi - lo);
      model.zero_grad();
      for (long i = lo; i < hi; ++i) {
        const auto& p = train_set[order[static_cast<std::size_t>(i)]];
        const auto loss = example_loss(model, p, config, &counter);
        const double obj = loss.objective.scalar();
        if (!std::isfinite(obj)) {
          json dump = {{"epoch", epoch},         {"step", opt.steps_taken()},
                       {"example_id", p.example.id}, {"l_mlm", loss.l_mlm},
                       {"l_scl", loss.l_scl},     {"param_norm", parameter_norm(model)}};
          if (dump_dir) {
            std::filesystem::create_directories(*dump_dir);
            std::ofstream(*dump_dir / "numeric_dump.json") << dump.dump(2) << '\n';
          }
          throw NumericError("train: non-finite loss: " + dump.dump());
        }
        ag::backward(ag::scale(loss.objective, inv));
        log.l_mlm += loss.l_mlm / static_cast<double>(n);
        log.l_scl += loss.l_scl / static_cast<double>(n);
      }
      opt.step();
    }
    const auto report = total_loss(log.l_mlm, log.l_scl, config.lambda, config.gamma,
                                   parameter_norm(model));
    log.l_objective = report.l_objective;
    log.l_total = report.l_total;
    r.epochs_run = epoch;

    const bool eval_now = config.eval_every > 0 &&
                          (epoch % config.eval_every == 0 || epoch == config.epochs);
    if (eval_now && select_dev) {
      log.dev_f1 = mean_f1(model, dev_set, config);
      if (*log.dev_f1 > best_dev) {
        best_dev = *log.dev_f1;
        best_state = snapshot(model);
        r.selected_epoch = epoch;
      }
    }
    bool stop = false;
    if (config.target_train_f1 > 0.0) {
      log.train_f1 = mean_f1(model, train_set, config);
      stop = *log.train_f1 >= config.target_train_f1;
    }
    r.history.push_back(log);
    if (stop) break;
  }
  if (best_state) {
    restore(model, *best_state);
  } else {
    r.selected_epoch = r.epochs_run;
  }
  r.steps = opt.steps_taken();
  r.negative_sampling_calls = counter.calls;
  return r;
}

Checkpoint make_checkpoint(const TrainResult& r, const TrainConfig& config, const Vocab& vocab,
                           const KnowledgeTable& kb) {
  auto c = Checkpoint::capture(r.model, config, vocab, kb);
  json history = json::array();
  for (const auto& e : r.history) {
    json row = {{"epoch", e.epoch},
                {"l_mlm", e.l_mlm},
                {"l_scl", e.l_scl},
                {"l_objective", e.l_objective},
                {"l_total", e.l_total}};
    if (e.dev_f1) row["dev_f1"] = *e.dev_f1;
    if (e.train_f1) row["train_f1"] = *e.train_f1;
    history.push_back(row);
  }
  c.metadata = {{"history", history},
                {"steps", r.steps},
                {"epochs_run", r.epochs_run},
                {"selected_epoch", r.selected_epoch},
                {"negative_sampling_calls", r.negative_sampling_calls}};
  return c;
}

Prediction predict(const Model& model, const PreparedExample& p, const TrainConfig& config) {
  const auto fwd = model.forward(p.input, p.knowledge);
  const auto trie = PrefixTree::build(p.example.passage, config.l_mask - 1);
  Prediction out;
  out.decoded = decode(fwd.mlm(), trie, p.input.prompt_mask_positions, config.beam_width,
                       config.score_mode);
  out.span = {0, -1};
  if (!out.decoded.ranked.empty()) {
    const auto& best = out.decoded.best();
    out.answer = best.tokens;
    out.score = best.score;
    out.span = answer_to_span(best.tokens, p.example.passage);
  }
  return out;
}

EvalReport evaluate(const Model& model, const std::vector<EqaExample>& examples,
                    const TrainConfig& config, const Vocab& vocab, const KnowledgeTable& kb) {
  EvalReport r;
  std::vector<Span> preds, golds;
  double total = 0.0;
  for (const auto& ex : examples) {
    const auto p = prepare_example(ex, config, vocab, kb, model.config().max_len);
    const auto pred = predict(model, p, config);
    EvalRow row;
    row.id = ex.id;
    row.question = ex.question;
    row.predicted = raw_text(ex.passage, pred.span);
    row.gold = raw_text(ex.passage, ex.answer);
    row.predicted_span = pred.span;
    row.gold_span = ex.answer;
    row.score = pred.score;
    row.degraded = pred.decoded.degraded;
    row.f1 = pred.answer.empty() ? 0.0
                                 : token_f1(ex.passage.surface_slice(pred.span), ex.answer_surfaces());
    total += row.f1;
    if (row.degraded) ++r.degraded;
    preds.push_back(pred.span);
    golds.push_back(ex.answer);
    r.per_example.push_back(std::move(row));
  }
  r.examples = static_cast<int>(examples.size());
  r.f1 = examples.empty() ? 0.0 : total / static_cast<double>(examples.size());
  for (int w : kWindowSizes) r.window_accuracy[w] = examples.empty() ? 0.0 : window_accuracy(preds, golds, w);
  return r;
}

EvalReport aggregate_seeds(const std::vector<EvalReport>& runs) {
  if (runs.empty()) throw ContractError("aggregate_seeds: no runs");
  EvalReport r;
  std::vector<double> f1s;
  for (const auto& run : runs) {
    f1s.push_back(run.f1);
    r.examples += run.examples;
    r.degraded += run.degraded;
    for (const auto& [w, acc] : run.window_accuracy) r.window_accuracy[w] += acc / static_cast<double>(runs.size());
  }
  const auto ms = mean_std(f1s);
  r.f1 = ms.mean;
  r.f1_std = ms.stddev;
  r.seeds = static_cast<int>(runs.size());
  return r;
}

json to_json(const EvalReport& r) {
  json windows = json::object();
  for (const auto& [w, acc] : r.window_accuracy) windows[std::to_string(w)] = acc;
  json rows = json::array();
  for (const auto& e : r.per_example) {
    rows.push_back({{"id", e.id},
                    {"question", e.question},
                    {"predicted", e.predicted},
                    {"gold", e.gold},
                    {"predicted_span", {e.predicted_span.start, e.predicted_span.end}},
                    {"gold_span", {e.gold_span.start, e.gold_span.end}},
                    {"score", e.score},
                    {"f1", e.f1},
                    {"degraded", e.degraded}});
  }
  return {{"f1", r.f1},           {"f1_std", r.f1_std},     {"window_accuracy", windows},
          {"examples", r.examples}, {"degraded", r.degraded}, {"seeds", r.seeds},
          {"per_example", rows}};
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  try {
    j.at("f1").get_to(r.f1);
    j.at("f1_std").get_to(r.f1_std);
    for (const auto& [k, v] : j.at("window_accuracy").items()) r.window_accuracy[std::stoi(k)] = v.get<double>();
    j.at("examples").get_to(r.examples);
    j.at("degraded").get_to(r.degraded);
    j.at("seeds").get_to(r.seeds);
    for (const auto& e : j.at("per_example")) {
      EvalRow row;
      e.at("id").get_to(row.id);
      e.at("question").get_to(row.question);
      e.at("predicted").get_to(row.predicted);
      e.at("gold").get_to(row.gold);
      row.predicted_span = {e.at("predicted_span")[0].get<int>(), e.at("predicted_span")[1].get<int>()};
      row.gold_span = {e.at("gold_span")[0].get<int>(), e.at("gold_span")[1].get<int>()};
      e.at("score").get_to(row.score);
      e.at("f1").get_to(row.f1);
      e.at("degraded").get_to(row.degraded);
      r.per_example.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("eval report: ") + e.what());
  }
  return r;
}

std::string summary_line(const EvalReport& r) {
  std::ostringstream os;
  os << "F1 " << format_mean_std({r.f1, r.f1_std});
  for (const auto& [w, acc] : r.window_accuracy) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", acc * 100.0);
    os << "  win@" << w << " " << buf;
  }
  os << "  n=" << r.examples << "  degraded=" << r.degraded;
  if (r.seeds > 1) os << "  seeds=" << r.seeds;
  return os.str();
}

std::vector<SpanEmbeddingRow> dump_span_embeddings(const Model& model, const EqaExample& ex,
                                                   const TrainConfig& config, const Vocab& vocab,
                                                   const KnowledgeTable& kb) {
  const auto p = prepare_example(ex, config, vocab, kb, model.config().max_len);
  const auto batch = contrastive_batch(model, p, config);
  std::vector<SpanEmbeddingRow> rows;
  rows.push_back({"gold", batch.gold.span, batch.gold.boundary_repr});
  for (std::size_t i = 0; i < batch.negatives.size(); ++i) {
    rows.push_back({"neg" + std::to_string(i + 1), batch.negatives[i].span,
                    batch.negatives[i].boundary_repr});
  }
  return rows;
}

std::string span_embeddings_tsv(const std::vector<SpanEmbeddingRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "label\tstart\tend\tvector\n";
  for (const auto& r : rows) {
    os << r.label << '\t' << r.span.start << '\t' << r.span.end << '\t';
    for (Eigen::Index i = 0; i < r.vector.size(); ++i) os << (i ? " " : "") << r.vector[i];
    os << '\n';
  }
  return os.str();
}

KnowledgeTable resolve_knowledge(const TrainConfig& config, const Vocab& vocab,
                                 const std::optional<std::filesystem::path>& kb_path) {
  if (kb_path) return KnowledgeTable::load(*kb_path);
  if (!config.use_kpe) return KnowledgeTable(0);
  return generate_synthetic_kb(vocab, config.kb_coverage, config.d_kb, kKnowledgeSeed);
}

}  // namespace clozeqa
