#include "clozeqa/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "clozeqa/error.hpp"

namespace clozeqa {

using nlohmann::json;

std::vector<TokenId> Passage::slice(Span s) const {
  return {tokens.begin() + (s.start - 1), tokens.begin() + s.end};
}

std::vector<std::string> Passage::surface_slice(Span s) const {
  return {surfaces.begin() + (s.start - 1), surfaces.begin() + s.end};
}

Passage make_passage(std::string raw, const Vocab& vocab) {
  Passage p;
  auto t = vocab.tokenize(raw);
  p.tokens = std::move(t.ids);
  p.surfaces = std::move(t.surfaces);
  p.char_offsets = std::move(t.offsets);
  p.raw = std::move(raw);
  return p;
}

void validate(const EqaExample& ex) {
  const int n = ex.passage.size();
  if (n < 1) throw ContractError("example " + ex.id + ": empty passage");
  if (!(1 <= ex.answer.start && ex.answer.start <= ex.answer.end && ex.answer.end <= n)) {
    throw ContractError("example " + ex.id + ": answer span out of range");
  }
  for (std::size_t i = 1; i < ex.passage.char_offsets.size(); ++i) {
    if (ex.passage.char_offsets[i].begin < ex.passage.char_offsets[i - 1].end) {
      throw ContractError("example " + ex.id + ": overlapping char offsets");
    }
  }
}

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "mrqa_json") return DatasetFormat::MrqaJson;
  if (name == "squad_json") return DatasetFormat::SquadJson;
  throw ConfigError("unknown dataset format: " + name);
}

namespace {

RawQuestion parse_question(const json& q, const char* start_key) {
  RawQuestion out;
  out.question = q.at("question").get<std::string>();
  if (q.contains("id")) {
    out.id = q["id"].is_string() ? q["id"].get<std::string>() : q["id"].dump();
  } else if (q.contains("qid")) {
    out.id = q["qid"].get<std::string>();
  }
  for (const auto& a : q.at("answers")) {
    RawAnswer ans;
    ans.text = a.at("text").get<std::string>();
    if (a.contains(start_key)) ans.char_start = a[start_key].get<long long>();
    out.answers.push_back(std::move(ans));
  }
  return out;
}

RawRecord parse_record(const json& r, const char* start_key) {
  RawRecord out;
  out.context = r.at("context").get<std::string>();
  for (const auto& q : r.at("qas")) out.qas.push_back(parse_question(q, start_key));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<RawRecord> read_records(const std::filesystem::path& path, DatasetFormat format,
                                    LoadStats* stats) {
  const std::string text = read_file(path);
  std::vector<RawRecord> out;
  const bool blank = std::all_of(text.begin(), text.end(),
                                 [](unsigned char c) { return std::isspace(c); });
  if (blank) {
    if (stats) stats->warnings.push_back(path.string() + ": empty dataset file");
    return out;
  }

  if (format == DatasetFormat::SquadJson) {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    std::size_t article = 0;
    for (const auto& a : doc.at("data")) {
      std::size_t para = 0;
      for (const auto& p : a.at("paragraphs")) {
        try {
          out.push_back(parse_record(p, "answer_start"));
        } catch (const json::exception& e) {
          throw DataError(path.string() + ": article " + std::to_string(article) + " paragraph " +
                          std::to_string(para) + ": " + e.what());
        }
        ++para;
      }
      ++article;
    }
    return out;
  }

  const auto first = text.find_first_not_of(" \t\r\n");
  if (text[first] == '[') {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    for (std::size_t i = 0; i < doc.size(); ++i) {
      try {
        out.push_back(parse_record(doc[i], "char_start"));
      } catch (const json::exception& e) {
        throw DataError(path.string() + ": record " + std::to_string(i) + ": " + e.what());
      }
    }
    return out;
  }

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json r = json::parse(line);
      if (r.contains("header")) continue;
      out.push_back(parse_record(r, "char_start"));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::string> corpus_texts(const std::vector<RawRecord>& records) {
  std::vector<std::string> out;
  for (const auto& r : records) {
    out.push_back(r.context);
    for (const auto& q : r.qas) out.push_back(q.question);
  }
  return out;
}

std::vector<EqaExample> align_records(const std::vector<RawRecord>& records, const Vocab& vocab,
                                      LoadStats& stats) {
  std::vector<EqaExample> out;
  std::size_t record_no = 0;
  for (const auto& r : records) {
    const Passage passage = make_passage(r.context, vocab);
    std::size_t q_no = 0;
    for (const auto& q : r.qas) {
      ++stats.questions;
      const std::string qid =
          q.id.empty() ? std::to_string(record_no) + "-" + std::to_string(q_no) : q.id;
      ++q_no;
      if (q.answers.empty() || passage.size() == 0) {
        ++stats.dropped_unaligned;
        continue;
      }
      const RawAnswer& ans = q.answers.front();
      std::size_t begin = 0;
      if (ans.char_start >= 0) {
        begin = static_cast<std::size_t>(ans.char_start);
        if (r.context.compare(begin, ans.text.size(), ans.text) != 0) begin = std::string::npos;
      } else {
        begin = r.context.find(ans.text);
      }
      if (begin == std::string::npos || ans.text.empty()) {
        ++stats.dropped_unaligned;
        continue;
      }
      // Strip surrounding whitespace of the answer text before alignment.
      std::size_t end = begin + ans.text.size();
      while (begin < end && std::isspace(static_cast<unsigned char>(r.context[begin]))) ++begin;
      while (end > begin && std::isspace(static_cast<unsigned char>(r.context[end - 1]))) --end;

      int k = 0;
      int l = 0;
      for (int i = 0; i < passage.size(); ++i) {
        const auto& off = passage.char_offsets[static_cast<std::size_t>(i)];
        if (off.begin == begin) k = i + 1;
        if (off.end == end) l = i + 1;
      }
      if (k == 0 || l == 0 || k > l) {
        ++stats.dropped_unaligned;
        continue;
      }
      EqaExample ex;
      ex.id = qid;
      ex.passage = passage;
      ex.question = q.question;
      ex.query = vocab.tokenize(q.question).ids;
      ex.answer = {k, l};
      validate(ex);
      out.push_back(std::move(ex));
      ++stats.loaded;
    }
    ++record_no;
  }
  if (stats.dropped_unaligned > 0) {
    stats.warnings.push_back(std::to_string(stats.dropped_unaligned) +
                             " question(s) dropped: answer not aligned to token boundaries");
  }
  return out;
}

std::vector<EqaExample> load_dataset(const std::filesystem::path& path, DatasetFormat format,
                                     const Vocab& vocab, LoadStats* stats) {
  LoadStats local;
  LoadStats& s = stats ? *stats : local;
  auto records = read_records(path, format, &s);
  return align_records(records, vocab, s);
}

void write_records(const std::filesystem::path& path, const std::vector<RawRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset " + path.string());
  for (const auto& r : records) {
    json rec;
    rec["context"] = r.context;
    rec["qas"] = json::array();
    for (const auto& q : r.qas) {
      json jq;
      jq["id"] = q.id;
      jq["question"] = q.question;
      jq["answers"] = json::array();
      for (const auto& a : q.answers) jq["answers"].push_back({{"text", a.text}, {"char_start", a.char_start}});
      rec["qas"].push_back(std::move(jq));
    }
    out << rec.dump() << '\n';
  }
}

FewShotSplit sample_few_shot(const std::vector<EqaExample>& dataset, int k, std::uint64_t seed) {
  if (k <= 0) throw ContractError("sample_few_shot: K must be positive");
  if (dataset.size() < 2 * static_cast<std::size_t>(k)) {
    throw ConfigError("sample_few_shot: dataset has " + std::to_string(dataset.size()) +
                      " examples, need at least 2K = " + std::to_string(2 * k));
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FewShotSplit split;
  split.seed = seed;
  for (int i = 0; i < k; ++i) split.train.push_back(dataset[order[static_cast<std::size_t>(i)]]);
  for (int i = k; i < 2 * k; ++i) split.dev.push_back(dataset[order[static_cast<std::size_t>(i)]]);
  return split;
}

}  // namespace clozeqa
