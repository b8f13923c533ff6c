// Command-line front end: data generation, prompt inspection, training,
// evaluation and decoding.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "clozeqa/checkpoint.hpp"
#include "clozeqa/config.hpp"
#include "clozeqa/dataset.hpp"
#include "clozeqa/error.hpp"
#include "clozeqa/prompt.hpp"
#include "clozeqa/synthetic.hpp"
#include "clozeqa/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace clozeqa;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

TrainConfig load_config(const Globals& g) {
  TrainConfig c = g.config_path.empty() ? TrainConfig{} : load_train_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  validate(c);
  return c;
}

fs::path out_path(const Globals& g, const std::string& name) {
  const fs::path dir = g.out_dir.empty() ? fs::path(".") : fs::path(g.out_dir);
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write to " + path.string() + " failed");
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void print_warnings(const std::vector<std::string>& warnings) {
  std::set<std::string> seen;
  for (const auto& w : warnings) {
    if (seen.insert(w).second) std::cerr << "warning: " << w << '\n';
  }
}

// Example lookup by id, or by 0-based index when the argument is numeric.
const EqaExample& find_example(const std::vector<EqaExample>& ds, const std::string& key) {
  for (const auto& ex : ds) {
    if (ex.id == key) return ex;
  }
  try {
    std::size_t used = 0;
    const auto idx = std::stoul(key, &used);
    if (used == key.size() && idx < ds.size()) return ds[idx];
  } catch (const std::exception&) {
  }
  throw DataError("no example with id or index '" + key + "'");
}

json span_json(Span s) { return json::array({s.start, s.end}); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot extractive QA as cloze generation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON training configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "override the configuration seed");
  app.add_option("--out", g.out_dir, "output directory");

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "write the synthetic biography dataset");
  SyntheticOptions syn;
  int question_count = 200;
  gen->add_option("--passages", syn.passages, "number of passages")->capture_default_str();
  gen->add_option("--questions-per-passage", syn.questions_per_passage)->capture_default_str();
  gen->add_option("--question-corpus", question_count, "size of the question-only corpus")
      ->capture_default_str();

  // build-prompt
  auto* bp = app.add_subcommand("build-prompt", "rewrite questions into cloze templates");
  std::string query, batch_file;
  std::optional<int> l_mask_opt;
  bp->add_option("--query", query, "question text");
  bp->add_option("--batch", batch_file, "file with one question per line")->check(CLI::ExistingFile);
  bp->add_option("--l-mask", l_mask_opt, "number of mask slots (default from config)");

  // train
  auto* tr = app.add_subcommand("train", "train on a K-shot split");
  std::string data_file, format_name = "mrqa_json", kb_file;
  bool all_seeds = false;
  tr->add_option("--data", data_file, "dataset file")->required()->check(CLI::ExistingFile);
  tr->add_option("--format", format_name, "mrqa_json or squad_json")->capture_default_str();
  tr->add_option("--kb", kb_file, "knowledge table TSV (default: synthetic)")->check(CLI::ExistingFile);
  tr->add_flag("--all-seeds", all_seeds, "run every seed in the configuration and aggregate");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset");
  std::string ckpt_file;
  ev->add_option("--checkpoint", ckpt_file)->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data_file)->required()->check(CLI::ExistingFile);
  ev->add_option("--format", format_name)->capture_default_str();

  // decode
  auto* dc = app.add_subcommand("decode", "decode answers, one JSON line per question");
  std::string input_file;
  dc->add_option("--checkpoint", ckpt_file)->required()->check(CLI::ExistingFile);
  dc->add_option("--input", input_file, "dataset file")->required()->check(CLI::ExistingFile);
  dc->add_option("--format", format_name)->capture_default_str();

  // sample-negatives
  auto* sn = app.add_subcommand("sample-negatives", "dump an example's contrastive batch");
  std::string example_id;
  sn->add_option("--checkpoint", ckpt_file)->required()->check(CLI::ExistingFile);
  sn->add_option("--data", data_file)->required()->check(CLI::ExistingFile);
  sn->add_option("--format", format_name)->capture_default_str();
  sn->add_option("--example-id", example_id, "example id or 0-based index")->required();

  // dump-span-embeddings
  auto* de = app.add_subcommand("dump-span-embeddings", "write gold and negative boundary vectors");
  de->add_option("--checkpoint", ckpt_file)->required()->check(CLI::ExistingFile);
  de->add_option("--data", data_file)->required()->check(CLI::ExistingFile);
  de->add_option("--format", format_name)->capture_default_str();
  de->add_option("--example-id", example_id, "example id or 0-based index")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto path = out_path(g, "synthetic.jsonl");
      if (g.seed) syn.seed = *g.seed;
      write_records(path, generate_synthetic_records(syn));
      std::string qs;
      for (const auto& q : synthetic_question_corpus(question_count, syn.seed)) qs += q + '\n';
      write_text(out_path(g, "questions.txt"), qs);
      std::cout << path.string() << '\n';
      return 0;
    }

    if (bp->parsed()) {
      const auto config = load_config(g);
      const int l_mask = l_mask_opt.value_or(config.l_mask);
      if (!query.empty()) {
        const auto r = rewrite_query(query, l_mask);
        std::cout << rule_name(r.rule) << '\t' << r.text << '\n';
      }
      if (!batch_file.empty()) {
        std::map<std::string, int> counts;
        const auto lines = read_lines(batch_file);
        json rows = json::array();
        for (const auto& q : lines) {
          const auto r = rewrite_query(q, l_mask);
          ++counts[rule_name(r.rule)];
          rows.push_back({{"question", q}, {"rule", rule_name(r.rule)}, {"template", r.text}});
        }
        json stats = {{"questions", lines.size()}, {"rules", counts}};
        if (!g.out_dir.empty()) write_text(out_path(g, "prompts.json"), rows.dump(2) + "\n");
        std::cout << stats.dump(2) << '\n';
      }
      if (query.empty() && batch_file.empty()) throw ConfigError("build-prompt needs --query or --batch");
      return 0;
    }

    if (tr->parsed()) {
      const auto config = load_config(g);
      const auto format = parse_dataset_format(format_name);
      LoadStats stats;
      const auto records = read_records(data_file, format, &stats);
      const auto vocab = build_vocab(corpus_texts(records));
      const auto dataset = align_records(records, vocab, stats);
      print_warnings(stats.warnings);
      std::cerr << "loaded " << stats.loaded << " of " << stats.questions << " questions ("
                << stats.dropped_unaligned << " unaligned)\n";
      const auto kb = resolve_knowledge(config, vocab,
                                        kb_file.empty() ? std::nullopt : std::optional<fs::path>(kb_file));

      const std::vector<std::uint64_t> seeds =
          all_seeds ? config.seeds : std::vector<std::uint64_t>{config.seed};
      std::vector<EvalReport> reports;
      for (auto seed : seeds) {
        TrainConfig c = config;
        c.seed = seed;
        const auto split = sample_few_shot(dataset, c.k, seed);
        std::set<std::string> used;
        for (const auto& e : split.train) used.insert(e.id);
        for (const auto& e : split.dev) used.insert(e.id);
        std::vector<EqaExample> held_out;
        for (const auto& e : dataset) {
          if (!used.count(e.id)) held_out.push_back(e);
        }
        const auto dir = out_path(g, "");
        auto result = train(c, split, vocab, kb, dir);
        print_warnings(result.warnings);
        const std::string tag = all_seeds ? "_seed" + std::to_string(seed) : "";
        const auto ckpt = make_checkpoint(result, c, vocab, kb);
        ckpt.save(out_path(g, "model" + tag + ".ckpt"));
        auto report = evaluate(result.model, held_out, c, vocab, kb);
        write_text(out_path(g, "eval" + tag + ".json"), to_json(report).dump(2) + "\n");
        std::cerr << "seed " << seed << ": epochs " << result.epochs_run << ", selected "
                  << result.selected_epoch << ", " << summary_line(report) << '\n';
        reports.push_back(std::move(report));
      }
      const auto agg = aggregate_seeds(reports);
      if (all_seeds) write_text(out_path(g, "eval_summary.json"), to_json(agg).dump(2) + "\n");
      std::cout << summary_line(agg) << '\n';
      return 0;
    }

    // The remaining subcommands start from a checkpoint.
    const auto ckpt = Checkpoint::load(ckpt_file);
    const auto model = ckpt.restore();
    TrainConfig config = ckpt.train_config;
    if (!g.config_path.empty()) config = load_config(g);
    const KnowledgeTable kb = ckpt.kb.value_or(KnowledgeTable(0));
    const auto format = parse_dataset_format(format_name);
    const auto& data = dc->parsed() ? input_file : data_file;
    LoadStats stats;
    const auto dataset = load_dataset(data, format, ckpt.vocab, &stats);
    print_warnings(stats.warnings);

    if (ev->parsed()) {
      const auto report = evaluate(model, dataset, config, ckpt.vocab, kb);
      if (!g.out_dir.empty()) write_text(out_path(g, "eval.json"), to_json(report).dump(2) + "\n");
      std::cerr << summary_line(report) << '\n';
      std::cout << to_json(report).dump() << '\n';
      return 0;
    }

    if (dc->parsed()) {
      for (const auto& ex : dataset) {
        const auto p = prepare_example(ex, config, ckpt.vocab, kb, model.config().max_len);
        const auto pred = predict(model, p, config);
        std::string text;
        if (!pred.answer.empty()) {
          const auto& offs = ex.passage.char_offsets;
          const auto b = offs[static_cast<std::size_t>(pred.span.start - 1)].begin;
          text = ex.passage.raw.substr(b, offs[static_cast<std::size_t>(pred.span.end - 1)].end - b);
        }
        json line = {{"question", ex.question},
                     {"predicted_answer", text},
                     {"score", pred.score},
                     {"span", span_json(pred.span)}};
        if (pred.decoded.degraded) line["degraded"] = true;
        std::cout << line.dump() << '\n';
      }
      return 0;
    }

    const auto& ex = find_example(dataset, example_id);
    if (sn->parsed()) {
      const auto p = prepare_example(ex, config, ckpt.vocab, kb, model.config().max_len);
      const auto batch = contrastive_batch(model, p, config);
      json negs = json::array();
      for (std::size_t i = 0; i < batch.negatives.size(); ++i) {
        const auto& n = batch.negatives[i];
        negs.push_back({{"span", span_json(n.span)},
                        {"tokens", ex.passage.surface_slice(n.span)},
                        {"sim", n.similarity},
                        {"score", batch.negative_scores[i]}});
      }
      json out = {{"example_id", ex.id},
                  {"gold", {{"span", span_json(batch.gold.span)},
                            {"tokens", ex.passage.surface_slice(batch.gold.span)},
                            {"score", batch.gold_score}}},
                  {"negatives", negs},
                  {"requested", batch.requested},
                  {"shortfall", batch.shortfall},
                  {"l_scl", scl_loss(batch)}};
      std::cout << out.dump(2) << '\n';
      return 0;
    }

    if (de->parsed()) {
      const auto tsv = span_embeddings_tsv(dump_span_embeddings(model, ex, config, ckpt.vocab, kb));
      if (!g.out_dir.empty()) {
        write_text(out_path(g, "span_embeddings.tsv"), tsv);
      } else {
        std::cout << tsv;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
