#include "clozeqa/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include "clozeqa/error.hpp"

namespace clozeqa {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'C', 'L', 'Z', 'Q', 'C', 'K', 'P', '1'};
}

std::vector<Matrix> snapshot(const Model& model) {
  std::vector<Matrix> out;
  for (const auto& p : model.parameters()) out.push_back(p.var.value());
  return out;
}

void restore(Model& model, const std::vector<Matrix>& state) {
  auto& params = model.parameters();
  if (state.size() != params.size()) throw ShapeError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i].var.node()->value = state[i];
}

Checkpoint Checkpoint::capture(const Model& model, const TrainConfig& tc, const Vocab& vocab,
                               const std::optional<KnowledgeTable>& kb) {
  Checkpoint c;
  c.train_config = tc;
  c.model_config = model.config();
  c.vocab = vocab;
  c.kb = kb;
  for (const auto& p : model.parameters()) c.tensors.emplace_back(p.name, p.var.value());
  return c;
}

Model Checkpoint::restore(std::uint64_t seed) const {
  Model m(model_config, seed);
  std::set<std::string> seen;
  for (const auto& [name, value] : tensors) {
    Parameter* p = m.find(name);
    if (!p) throw ShapeError("checkpoint: unexpected tensor '" + name + "'");
    if (p->var.rows() != value.rows() || p->var.cols() != value.cols()) {
      throw ShapeError("checkpoint: tensor '" + name + "' is " + std::to_string(value.rows()) +
                       "x" + std::to_string(value.cols()) + ", model expects " +
                       std::to_string(p->var.rows()) + "x" + std::to_string(p->var.cols()));
    }
    p->var.node()->value = value;
    seen.insert(name);
  }
  for (const auto& p : m.parameters()) {
    if (!seen.count(p.name)) throw ShapeError("checkpoint: missing tensor '" + p.name + "'");
  }
  return m;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  json header;
  header["train_config"] = to_json(train_config);
  header["model_config"] = to_json(model_config);
  header["vocab"] = vocab.tokens();
  header["kb_tsv"] = kb ? json(kb->to_tsv()) : json(nullptr);
  header["kb_dim"] = kb ? kb->d_kb() : 0;
  header["metadata"] = metadata;
  json index = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, value] : tensors) {
    index.push_back({{"name", name}, {"rows", value.rows()}, {"cols", value.cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(value.size());
  }
  header["tensors"] = index;
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto& [name, value] : tensors) {
    out.write(reinterpret_cast<const char*>(value.data()),
              static_cast<std::streamsize>(value.size() * sizeof(double)));
  }
  out.flush();
  if (!out) throw DataError("checkpoint: write to " + path.string() + " failed");
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("checkpoint: " + path.string() + " is not a checkpoint file");
  }
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw DataError("checkpoint: truncated header");
  Checkpoint c;
  json header;
  try {
    header = json::parse(htext);
    c.train_config = train_config_from_json(header.at("train_config"));
    c.model_config = model_config_from_json(header.at("model_config"));
    c.vocab = Vocab::from_tokens(std::vector<std::string>(
        header.at("vocab").begin() + special::kCount, header.at("vocab").end()));
    if (!header.at("kb_tsv").is_null()) {
      c.kb = KnowledgeTable::from_tsv(header["kb_tsv"].get<std::string>());
      if (c.kb->empty()) c.kb = KnowledgeTable(header.at("kb_dim").get<int>());
    }
    c.metadata = header.value("metadata", json::object());
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  }
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw DataError("checkpoint: truncated tensor " + t.at("name").get<std::string>());
    c.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
  }
  return c;
}

}  // namespace clozeqa
