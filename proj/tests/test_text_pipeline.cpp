#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>

#include "clozeqa/dataset.hpp"
#include "clozeqa/error.hpp"
#include "clozeqa/synthetic.hpp"
#include "clozeqa/vocab.hpp"

using namespace clozeqa;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "clozeqa_text_pipeline";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Reference alignment: walk the tokens and match the answer's character range.
std::optional<Span> naive_align(const Passage& p, std::size_t begin, std::size_t end) {
  int k = -1, l = -1;
  for (int i = 0; i < p.size(); ++i) {
    if (p.char_offsets[static_cast<std::size_t>(i)].begin == begin) k = i + 1;
    if (p.char_offsets[static_cast<std::size_t>(i)].end == end) l = i + 1;
  }
  if (k < 0 || l < k) return std::nullopt;
  return Span{k, l};
}

}  // namespace

TEST_CASE("build_vocab enumerates surfaces by first occurrence") {
  const auto v = build_vocab({"a b", "b c"});
  CHECK(v.size() == 9);
  CHECK(v.id("a") == 6);
  CHECK(v.id("b") == 7);
  CHECK(v.id("c") == 8);
  CHECK(v.token(special::kMask) == "[MASK]");
  CHECK(v.token(special::kEnd) == "[END]");
  CHECK(build_vocab({"a b", "b c"}).serialize() == v.serialize());
  CHECK_THROWS_AS(build_vocab({}), ConfigError);
}

TEST_CASE("unknown words map to UNK") {
  const auto v = build_vocab({"x"});
  CHECK(v.tokenize("x y").ids == std::vector<TokenId>{v.id("x"), special::kUnk});
}

TEST_CASE("tokenizer folds case and splits punctuation") {
  const auto v = build_vocab({"Fighting horsemen", "a, b."});
  CHECK(v.tokenize("Fighting horsemen").ids == std::vector<TokenId>{v.id("fighting"), v.id("horsemen")});
  CHECK(v.tokenize("").ids.empty());
  CHECK(v.tokenize("a, b.").ids == std::vector<TokenId>{v.id("a"), v.id(","), v.id("b"), v.id(".")});

  const auto words = split_words("Norman's well-known [MASK] x-");
  REQUIRE(words.size() == 5);
  CHECK(words[0].text == "norman's");
  CHECK(words[1].text == "well-known");
  CHECK(words[2].text == "[MASK]");
  CHECK(words[3].text == "x");
  CHECK(words[4].text == "-");
  CHECK(words[1].offsets == CharSpan{9, 19});
}

TEST_CASE("vocab bijection and serialization round trip") {
  const auto v = build_vocab({"The Normans were famous.", "Who ruled Normandy?"});
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.id(v.token(static_cast<TokenId>(i))) == static_cast<TokenId>(i));
  const auto back = Vocab::deserialize(v.serialize());
  CHECK(back == v);
  const auto path = scratch("vocab.txt");
  v.save(path);
  CHECK(Vocab::load(path) == v);
  CHECK_THROWS_AS(Vocab::deserialize("[CLS]\n[PAD]\n"), DataError);
}

TEST_CASE("detokenize recovers text up to case and whitespace") {
  const auto recs = generate_synthetic_records({20, 2, 3});
  const auto v = build_vocab(corpus_texts(recs));
  auto collapse = [](const std::string& s) {
    std::string out;
    bool space = false;
    for (char ch : s) {
      if (std::isspace(static_cast<unsigned char>(ch))) {
        space = !out.empty();
        continue;
      }
      if (space) out += ' ';
      space = false;
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    return out;
  };
  for (const auto& text : corpus_texts(recs)) {
    CHECK(v.detokenize(v.tokenize(text)) == collapse(text));
  }
  CHECK(v.detokenize(v.tokenize("  Spaced   out,\ttext ")) == "spaced out, text");
}

TEST_CASE("answers align from character offsets") {
  const std::string ctx = "In 911 the Normans gave their name to Normandy in France.";
  const auto path = scratch("aligned.jsonl");
  // tokens: in 911 the normans gave their name to normandy in france .
  //         1  2   3   4       5    6     7    8  9        10 11     12
  write_file(path,
             R"({"context": ")" + ctx + R"(", "qas": [)"
             R"({"id": "q1", "question": "Who gave their name?", "answers": [{"text": "the Normans", "char_start": 7}]},)"
             R"({"id": "q2", "question": "Where?", "answers": [{"text": "Normandy in", "char_start": -1}]},)"
             R"({"id": "q3", "question": "What?", "answers": [{"text": "Paris", "char_start": -1}]},)"
             R"({"id": "q4", "question": "Partial?", "answers": [{"text": "orman", "char_start": 12}]}]})"
             "\n");
  LoadStats stats;
  const auto records = read_records(path, DatasetFormat::MrqaJson, &stats);
  const auto v = build_vocab(corpus_texts(records));
  const auto ds = align_records(records, v, stats);
  REQUIRE(ds.size() == 2);
  CHECK(ds[0].answer == Span{3, 4});
  CHECK(ds[1].answer == Span{9, 10});
  CHECK(stats.questions == 4);
  CHECK(stats.loaded == 2);
  CHECK(stats.dropped_unaligned == 2);
  CHECK(naive_align(ds[0].passage, 7, 18) == Span{3, 4});
  for (const auto& ex : ds) CHECK_NOTHROW(validate(ex));
}

TEST_CASE("alignment matches a character-level reference on synthetic data") {
  const auto recs = generate_synthetic_records({40, 3, 11});
  const auto v = build_vocab(corpus_texts(recs));
  LoadStats stats;
  const auto ds = align_records(recs, v, stats);
  CHECK(stats.dropped_unaligned == 0);
  std::size_t q = 0;
  for (const auto& r : recs) {
    for (const auto& qa : r.qas) {
      const auto& ex = ds[q++];
      const auto& a = qa.answers.front();
      const auto begin = static_cast<std::size_t>(a.char_start);
      CHECK(naive_align(ex.passage, begin, begin + a.text.size()) == ex.answer);
      std::string joined;
      for (const auto& s : ex.answer_surfaces()) joined += (joined.empty() ? "" : " ") + s;
      std::string expected;
      for (const auto& w : split_words(a.text)) expected += (expected.empty() ? "" : " ") + w.text;
      CHECK(joined == expected);
    }
  }
}

TEST_CASE("squad layout, malformed records and empty files") {
  const auto squad = scratch("squad.json");
  write_file(squad, R"({"data": [{"title": "t", "paragraphs": [{"context": "Rollo was a Viking leader.",
      "qas": [{"id": "s1", "question": "Who was Rollo?", "answers": [{"text": "a Viking leader", "answer_start": 10}]}]}]}]})");
  const auto recs = read_records(squad, DatasetFormat::SquadJson);
  const auto v = build_vocab(corpus_texts(recs));
  const auto ds = load_dataset(squad, DatasetFormat::SquadJson, v);
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].answer == Span{3, 5});

  const auto bad = scratch("bad.jsonl");
  write_file(bad, "{\"context\": \"x\", \"qas\": []}\n{\"context\": 5}\n");
  try {
    read_records(bad, DatasetFormat::MrqaJson);
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("bad.jsonl:2:") != std::string::npos);
  }

  const auto empty = scratch("empty.jsonl");
  write_file(empty, "");
  LoadStats stats;
  CHECK(read_records(empty, DatasetFormat::MrqaJson, &stats).empty());
  CHECK(stats.warnings.size() == 1);
  CHECK_THROWS_AS(parse_dataset_format("csv"), ConfigError);
}

TEST_CASE("write_records round trips through the reader") {
  const auto recs = generate_synthetic_records({5, 2, 5});
  const auto path = scratch("roundtrip.jsonl");
  write_records(path, recs);
  const auto back = read_records(path, DatasetFormat::MrqaJson);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].context == recs[i].context);
    REQUIRE(back[i].qas.size() == recs[i].qas.size());
    CHECK(back[i].qas[1].question == recs[i].qas[1].question);
    CHECK(back[i].qas[1].answers[0].char_start == recs[i].qas[1].answers[0].char_start);
  }
}

TEST_CASE("few-shot sampling is seeded and disjoint") {
  const auto recs = generate_synthetic_records({64, 1, 7});
  const auto v = build_vocab(corpus_texts(recs));
  LoadStats stats;
  const auto ds = align_records(recs, v, stats);
  const auto a = sample_few_shot(ds, 16, 42);
  const auto b = sample_few_shot(ds, 16, 42);
  REQUIRE(a.train.size() == 16);
  REQUIRE(a.dev.size() == 16);
  std::set<std::string> train_ids;
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(a.train[i].id == b.train[i].id);
    CHECK(a.dev[i].id == b.dev[i].id);
    train_ids.insert(a.train[i].id);
  }
  for (const auto& e : a.dev) CHECK(train_ids.count(e.id) == 0);
  const auto c = sample_few_shot(ds, 16, 12);
  bool differs = false;
  for (std::size_t i = 0; i < 16; ++i) differs |= c.train[i].id != a.train[i].id;
  CHECK(differs);

  const std::vector<EqaExample> ten(ds.begin(), ds.begin() + 10);
  CHECK_THROWS_AS(sample_few_shot(ten, 16, 42), ConfigError);
}
