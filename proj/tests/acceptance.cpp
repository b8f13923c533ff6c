// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Tolerances and budgets are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "clozeqa/checkpoint.hpp"
#include "clozeqa/config.hpp"
#include "clozeqa/knowledge.hpp"
#include "clozeqa/metrics.hpp"
#include "clozeqa/model.hpp"
#include "clozeqa/prompt.hpp"
#include "clozeqa/span.hpp"
#include "clozeqa/trainer.hpp"
#include "clozeqa/trie.hpp"
#include "decode_oracle.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace clozeqa;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Collects failed sub-checks so one criterion can report all of them.
struct Checks {
  std::vector<std::string> failures;
  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  Outcome outcome(std::string detail) const {
    if (!failures.empty()) {
      detail += "; failed: " + failures.front();
      if (failures.size() > 1) detail += " (+" + std::to_string(failures.size() - 1) + " more)";
    }
    return {failures.empty(), detail};
  }
};

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

bool is_substring(const std::vector<TokenId>& hay, const std::vector<TokenId>& needle) {
  return !needle.empty() &&
         std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

Vocab alphabet_vocab(int k) {
  std::string s;
  for (int i = 0; i < k; ++i) s += " w" + std::to_string(i);
  return build_vocab({s});
}

Passage random_passage(std::mt19937_64& rng, int n, int alphabet, const Vocab& vocab) {
  std::uniform_int_distribution<int> pick(0, alphabet - 1);
  std::string text;
  for (int i = 0; i < n; ++i) text += (i ? " w" : "w") + std::to_string(pick(rng));
  return make_passage(text, vocab);
}

MlmOutput random_mlm(std::mt19937_64& rng, int rows, int vocab) {
  std::uniform_real_distribution<double> temp(0.1, 5.0);
  std::normal_distribution<double> N(0.0, 1.0);
  const double t = temp(rng);
  Matrix lp(rows, vocab);
  for (Eigen::Index i = 0; i < lp.size(); ++i) lp.data()[i] = t * N(rng);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mx = lp.row(r).maxCoeff();
    lp.row(r).array() -= mx + std::log((lp.row(r).array() - mx).exp().sum());
  }
  return {lp};
}

std::vector<int> mask_slots(int l_mask, int offset = 1) {
  std::vector<int> m(static_cast<std::size_t>(l_mask));
  for (int j = 0; j < l_mask; ++j) m[static_cast<std::size_t>(j)] = offset + j;
  return m;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct Bundled {
  Vocab vocab;
  std::vector<EqaExample> examples;
};

Bundled bundled_dataset() {
  const auto path = testing::data_path("../data/synthetic.jsonl");
  const auto records = read_records(path, DatasetFormat::MrqaJson);
  Bundled b;
  b.vocab = build_vocab(corpus_texts(records));
  LoadStats stats;
  b.examples = align_records(records, b.vocab, stats);
  return b;
}

// Toy model with the protocol's loss/batch/mask settings. The from-scratch
// encoder uses lr 1e-3 in both groups and log-probability span scores.
TrainConfig toy_config() {
  TrainConfig c;
  c.k = 16;
  c.lr_backbone = 1e-3;
  c.lr_new_modules = 1e-3;
  c.score_mode = ScoreMode::SumLogProb;
  c.epochs = 200;
  c.model_selection = "last";
  c.eval_every = 0;
  c.target_train_f1 = 0.95;
  return c;
}

// ---------------------------------------------------------------------------

Outcome criterion_prompt_rules() {
  const auto t0 = Clock::now();
  Checks ck;
  const auto rows = testing::rule_table();
  ck.require(rows.size() == 5, "table has " + std::to_string(rows.size()) + " rows");
  int verbatim = 0;
  for (const auto& row : rows) {
    const auto r = rewrite_query(row.query, row.l_mask);
    const bool ok = rule_name(r.rule) == row.rule && r.text == row.prompt;
    verbatim += ok;
    ck.require(ok, row.rule + ": got " + rule_name(r.rule) + " \"" + r.text + "\"");
  }
  const auto questions = read_lines(testing::data_path("../data/questions.txt"));
  ck.require(questions.size() == 200, "question corpus has " + std::to_string(questions.size()));
  std::map<std::string, int> coverage;
  for (const auto& q : questions) {
    const auto r = rewrite_query(q, 10);
    ++coverage[rule_name(r.rule)];
    const auto masks = std::count(r.text.begin(), r.text.end(), '[');
    ck.require(masks == 10, "mask count for \"" + q + "\"");
  }
  std::ostringstream stats;
  for (const auto& [rule, n] : coverage) stats << " " << rule << "=" << n;
  const double secs = seconds_since(t0);
  ck.require(secs < 5.0, "runtime " + fmt(secs) + " s");
  return ck.outcome(std::to_string(verbatim) + "/5 rows verbatim; coverage over " +
                    std::to_string(questions.size()) + " questions:" + stats.str() + "; " +
                    fmt(secs) + " s");
}

Outcome criterion_substring_guarantee() {
  const auto t0 = Clock::now();
  Checks ck;
  std::mt19937_64 rng(20240);
  const auto vocab = alphabet_vocab(30);
  std::uniform_int_distribution<int> len_d(1, 50), alpha_d(2, 30), lmask_d(2, 10), beam_d(1, 10);
  int answers = 0, good = 0, degraded = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = random_passage(rng, len_d(rng), alpha_d(rng), vocab);
    const int l_mask = lmask_d(rng);
    const auto trie = PrefixTree::build(p, l_mask - 1);
    const auto mlm = random_mlm(rng, l_mask + 2, static_cast<int>(vocab.size()));
    const auto r = decode(mlm, trie, mask_slots(l_mask), beam_d(rng));
    degraded += r.degraded;
    for (const auto& a : r.ranked) {
      ++answers;
      const bool ok = is_substring(p.tokens, a.tokens) &&
                      answer_to_span(a.tokens, p).start == a.earliest_start;
      good += ok;
      if (!ok) ck.require(false, "trial " + std::to_string(trial));
    }
  }
  const double secs = seconds_since(t0);
  ck.require(secs < 30.0, "runtime " + fmt(secs) + " s");
  return ck.outcome("1000 decodes, " + std::to_string(good) + "/" + std::to_string(answers) +
                    " ranked answers are substrings, " + std::to_string(degraded) +
                    " degraded; " + fmt(secs) + " s");
}

Outcome criterion_beam_oracle() {
  Checks ck;
  std::mt19937_64 rng(31337);
  const auto vocab = alphabet_vocab(8);
  std::uniform_int_distribution<int> len_d(1, 20), alpha_d(2, 8), lmask_d(2, 6);
  int agree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_passage(rng, len_d(rng), alpha_d(rng), vocab);
    const int l_mask = lmask_d(rng);
    const auto trie = PrefixTree::build(p, l_mask - 1);
    const auto masks = mask_slots(l_mask);
    const auto mlm = random_mlm(rng, l_mask + 2, static_cast<int>(vocab.size()));
    // Every trie node below the root is a distinct candidate answer.
    const int beam = static_cast<int>(trie.node_count());
    const auto got = decode(mlm, trie, masks, beam, ScoreMode::SumProb).best();
    const auto want = testing::brute_force_best(p, mlm, masks, l_mask - 1, ScoreMode::SumProb);
    const bool ok = got.tokens == want.tokens && got.earliest_start == want.start &&
                    std::abs(got.score - want.score) <= 1e-12 * std::max(1.0, std::abs(want.score));
    agree += ok;
    if (!ok) ck.require(false, "trial " + std::to_string(trial));
  }
  return ck.outcome(std::to_string(agree) + "/200 argmax matches");
}

struct GradFixture {
  Vocab vocab = build_vocab({"the normans were famous fighting horsemen and avid crusaders",
                             "what were the normans famous as ?"});
  Passage passage =
      make_passage("The Normans were famous fighting horsemen and avid crusaders.", vocab);
  KnowledgeTable kb{6};
  PromptTemplate prompt;
  AssembledInput input;
  KnowledgeRows knowledge;
  Span gold{5, 6};

  GradFixture() {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N(0.0, 0.5);
    for (const char* lemma : {"normans", "horsemen", "crusaders"}) {
      Vector e(6);
      for (auto& x : e) x = N(rng);
      kb.add_entity(std::string("Q_") + lemma, lemma, e);
    }
    prompt = select_prompt_tokens(build_prompt("What were the Normans famous as?", 4, vocab), kb,
                                  SelectionPolicy::KbLinked);
    input = assemble_input(prompt, passage, 64);
    knowledge = match_knowledge(passage.surfaces, kb);
  }

  ModelConfig config() const {
    ModelConfig c;
    c.vocab_size = static_cast<int>(vocab.size());
    c.hidden = 16;
    c.layers = 2;
    c.heads = 2;
    c.ffn = 32;
    c.max_len = 64;
    c.use_pki = true;
    c.ppi = PpiMode::Attention;
    c.d_kb = 6;
    return c;
  }
};

Outcome criterion_gradients() {
  Checks ck;
  GradFixture f;
  ck.require(!f.input.selected_positions.empty(), "no prompt tokens selected");
  ck.require(f.knowledge.rows.size() == 3, "expected 3 KB-matched passage rows");
  Model model(f.config(), 17);
  const auto& masks = f.input.prompt_mask_positions;
  const auto answer = f.passage.slice(f.gold);
  // Negatives are fixed once so the finite differences see a smooth function.
  const auto g0 = model.forward(f.input, f.knowledge).g.value();
  const auto cands = enumerate_spans(f.passage, 3);
  const auto batch = sample_negatives(cands, f.gold, 5, g0);
  ck.require(batch.negatives.size() == 5, "negatives sampled");

  auto scl = [&](const ag::Var& lp) {
    std::vector<ag::Var> scores = {span_score(answer, lp, masks)};
    for (const auto& n : batch.negatives) scores.push_back(span_score(f.passage.slice(n.span), lp, masks));
    return scl_loss(ag::concat_rows(scores));
  };
  const double lambda = 0.5;
  const std::vector<std::pair<std::string, std::function<ag::Var()>>> objectives = {
      {"L_MLM", [&] { return mlm_loss(model.forward(f.input, f.knowledge).log_probs, masks, answer); }},
      {"L_SCL", [&] { return scl(model.forward(f.input, f.knowledge).log_probs); }},
      {"joint", [&] {
         const auto lp = model.forward(f.input, f.knowledge).log_probs;
         return ag::add(mlm_loss(lp, masks, answer), ag::scale(scl(lp), lambda));
       }}};
  std::ostringstream detail;
  for (const auto& [name, fn] : objectives) {
    const auto r = testing::grad_check(model, fn);
    detail << name << " max_rel=" << fmt(r.max_rel) << " (W_alpha " << fmt(r.per_param.at("ppi.w_alpha"))
           << ", KB proj " << fmt(r.per_param.at("kb.projection")) << "); ";
    ck.require(r.max_rel < 1e-4, name + " worst at " + r.worst);
    ck.require(r.grad_norm.at("ppi.w_alpha") > 0.0, name + " W_alpha gradient is zero");
    ck.require(r.grad_norm.at("kb.projection") > 0.0, name + " KB projection gradient is zero");
  }
  detail << "tolerance 1e-4, " << model.parameter_count() << " params each";
  return ck.outcome(detail.str());
}

Outcome criterion_scl() {
  Checks ck;
  const double s0 = scl_loss(3.2, std::vector<double>{});
  ck.require(s0 == 0.0, "S=0 loss " + fmt(s0, 17));
  const double eq = scl_loss(0.7, std::vector<double>(5, 0.7));
  const double eq_err = std::abs(eq - std::log(6.0) / 6.0);
  ck.require(eq_err < 1e-9, "equal scores error " + fmt(eq_err));
  // Oracle in long double with the log-sum-exp written out term by term.
  const long double z = 2.0L, a = 1.0L, b = 0.5L;
  const long double oracle = -std::log(std::exp(z) / (std::exp(z) + std::exp(a) + std::exp(b))) / 3.0L;
  const double hand = scl_loss(2.0, std::vector<double>{1.0, 0.5});
  const double hand_err = std::abs(hand - static_cast<double>(oracle));
  ck.require(hand_err < 1e-9, "hand case error " + fmt(hand_err));
  const std::vector<double> neg = {0.4, -0.3, 0.1};
  double prev = INFINITY;
  int steps = 0;
  for (int i = 0; i <= 1000; ++i) {
    const double margin = 10.0 * i / 1000.0;
    const double cur = scl_loss(0.4 + margin, neg);
    ck.require(cur < prev, "sweep not decreasing at margin " + fmt(margin));
    prev = cur;
    ++steps;
  }
  return ck.outcome("S=0 -> 0; equal-score error " + fmt(eq_err) + "; hand case " + fmt(hand, 12) +
                    " (oracle " + fmt(static_cast<double>(oracle), 12) + "); margin sweep " +
                    std::to_string(steps) + " points strictly decreasing");
}

Outcome criterion_locality() {
  Checks ck;
  GradFixture f;
  KnowledgeTable stub(6);
  Vector e = Vector::Constant(6, 0.25);
  stub.add_entity("Q1", "crusader", e);
  const auto k = match_knowledge(f.passage.surfaces, stub);
  ck.require(k.rows.size() == 1, "stub KB matched " + std::to_string(k.rows.size()) + " rows");
  Model model(f.config(), 23);
  const Matrix g = model.forward(f.input, k).g.value();
  const Matrix plain = model.forward_plain(f.input).g.value();
  std::vector<int> changed;
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    if (g.row(r) != plain.row(r)) changed.push_back(static_cast<int>(r));
  }
  ck.require(changed.size() == 1 && !k.rows.empty() && changed[0] == k.rows[0],
             std::to_string(changed.size()) + " rows of G changed");

  auto t = f.prompt;
  t.selected_positions.clear();
  const auto in = assemble_input(t, f.passage, 64);
  const auto none = match_knowledge(f.passage.surfaces, KnowledgeTable(6));
  const bool ident = model.forward(in, none).log_probs.value() == model.forward_plain(in).log_probs.value();
  ck.require(ident, "empty-KB forward differs from the plain path");
  return ck.outcome(std::to_string(changed.size()) + " of " + std::to_string(g.rows()) +
                    " passage rows changed; empty KB with r=0 bitwise identical: " +
                    (ident ? "yes" : "no"));
}

Outcome criterion_parameters() {
  Checks ck;
  GradFixture f;
  std::ostringstream detail;
  for (int h : {16, 32, 64}) {
    for (int d_kb : {6, 32}) {
      auto on = f.config();
      on.hidden = h;
      on.ffn = 2 * h;
      on.d_kb = d_kb;
      auto off = on;
      off.use_pki = false;
      off.ppi = PpiMode::Off;
      off.d_kb = 0;
      const auto diff = static_cast<long>(Model(on, 1).parameter_count()) -
                        static_cast<long>(Model(off, 1).parameter_count());
      const long want = static_cast<long>(h) * h + static_cast<long>(d_kb) * h;
      ck.require(diff == want, "h=" + std::to_string(h) + " d_kb=" + std::to_string(d_kb) +
                                   ": +" + std::to_string(diff));
      detail << "h=" << h << ",d_kb=" << d_kb << ": +" << diff << " ";
    }
  }
  return ck.outcome(detail.str() + "(expected h*h + d_kb*h)");
}

Outcome criterion_learnability() {
  const auto t0 = Clock::now();
  Checks ck;
  const auto data = bundled_dataset();
  auto c = toy_config();
  const auto split = sample_few_shot(data.examples, c.k, 42);
  const auto kb = resolve_knowledge(c, data.vocab, std::nullopt);
  const auto full = train(c, split, data.vocab, kb);
  const double train_f1 = evaluate(full.model, split.train, c, data.vocab, kb).f1;
  const double dev_full = evaluate(full.model, split.dev, c, data.vocab, kb).f1;
  const double full_secs = seconds_since(t0);
  ck.require(train_f1 >= 0.95, "train F1 " + fmt(train_f1));
  ck.require(full.epochs_run <= 200, "epochs " + std::to_string(full.epochs_run));
  ck.require(full_secs < 300.0, "runtime " + fmt(full_secs) + " s");

  auto c0 = c;
  c0.lambda = 0.0;
  const auto ablation = train(c0, split, data.vocab, kb);
  const auto dev0 = evaluate(ablation.model, split.dev, c0, data.vocab, kb);
  ck.require(ablation.negative_sampling_calls == 0, "lambda=0 sampled negatives");
  return ck.outcome("train F1 " + fmt(train_f1) + " after " + std::to_string(full.epochs_run) +
                    " epochs in " + fmt(full_secs) + " s; dev F1 full " + fmt(dev_full) +
                    ", lambda=0 " + fmt(dev0.f1) + " (" + std::to_string(ablation.epochs_run) +
                    " epochs)");
}

Outcome criterion_metrics() {
  Checks ck;
  auto near = [&](double got, double want, const std::string& what) {
    ck.require(std::abs(got - want) <= 1e-12, what + " = " + fmt(got, 17));
  };
  near(token_f1({"the", "cat"}, {"cat", "sat"}), 0.5, "partial hand case");
  near(token_f1({"a", "b", "c"}, {"a", "b", "c"}), 1.0, "identity");
  near(token_f1({"x", "y"}, {"a", "b"}), 0.0, "disjoint");
  near(token_f1({"a", "b", "c", "d"}, {"a", "b"}), 2.0 / 3.0, "partial precision");
  near(token_f1({"a"}, {"a", "b", "c"}), 0.5, "partial recall");

  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> pos(1, 40), count(1, 30);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Span> pred, gold;
    for (int i = count(rng); i > 0; --i) {
      const int a = pos(rng), b = pos(rng);
      pred.push_back({a, a});
      gold.push_back({b, b});
    }
    double prev = -1.0;
    for (int w = 1; w <= 45; ++w) {
      const double acc = window_accuracy(pred, gold, w);
      ck.require(acc >= prev, "window accuracy decreased at n_w=" + std::to_string(w));
      prev = acc;
    }
    ck.require(prev == 1.0, "widest window below 1");
    ++checked;
  }
  return ck.outcome("token_f1 cases within 1e-12; window accuracy non-decreasing on " +
                    std::to_string(checked) + " fuzzed sets");
}

Outcome criterion_reproducibility() {
  Checks ck;
  const auto j = to_json(TrainConfig{});
  ck.require(j.at("l_mask") == 10, "l_mask");
  ck.require(j.at("lambda") == 0.5, "lambda");
  ck.require(j.at("num_negatives") == 5, "S");
  ck.require(j.at("batch_size") == 8, "batch size");
  ck.require(j.at("epochs") == 64, "epochs");
  ck.require(j.at("warmup_fraction") == 0.1, "warm-up");
  ck.require(j.at("gamma") == 0.01, "gamma");
  ck.require(j.at("seeds") == nlohmann::json({12, 21, 42, 87, 100}), "seeds");

  const auto data = bundled_dataset();
  auto c = toy_config();
  c.epochs = 8;
  c.target_train_f1 = 0.0;
  c.model_selection = "best_dev_f1";
  c.eval_every = 2;
  c.seed = 42;
  const auto split = sample_few_shot(data.examples, c.k, c.seed);
  const auto kb = resolve_knowledge(c, data.vocab, std::nullopt);
  const auto dir = testing::scratch_dir("acceptance_repro");
  std::vector<EvalReport> reports;
  for (const char* name : {"run1.ckpt", "run2.ckpt"}) {
    const auto r = train(c, split, data.vocab, kb);
    make_checkpoint(r, c, data.vocab, kb).save(dir / name);
    reports.push_back(evaluate(r.model, split.dev, c, data.vocab, kb));
  }
  const auto a = slurp(dir / "run1.ckpt"), b = slurp(dir / "run2.ckpt");
  ck.require(!a.empty() && a == b, "checkpoint bytes differ");
  ck.require(reports[0] == reports[1], "eval reports differ");
  ck.require(to_json(reports[0]).dump() == to_json(reports[1]).dump(), "eval report JSON differs");
  return ck.outcome("defaults match the protocol; two seed-42 runs: checkpoints " +
                    std::to_string(a.size()) + " bytes " + (a == b ? "identical" : "differ") +
                    ", reports " + (reports[0] == reports[1] ? "identical" : "differ"));
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"prompt-rule golden suite", criterion_prompt_rules},
      {"decoder substring guarantee", criterion_substring_guarantee},
      {"beam-oracle equivalence", criterion_beam_oracle},
      {"gradient correctness", criterion_gradients},
      {"contrastive loss analytics", criterion_scl},
      {"knowledge-injection locality", criterion_locality},
      {"added-parameter accounting", criterion_parameters},
      {"learnability smoke", criterion_learnability},
      {"metric suite", criterion_metrics},
      {"protocol fidelity and reproducibility", criterion_reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << i + 1 << ". "
              << criteria[i].first << ": " << o.detail << "  [" << fmt(seconds_since(t0)) << " s]"
              << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
