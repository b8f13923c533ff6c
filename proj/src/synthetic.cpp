#include "clozeqa/synthetic.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <set>

#include "clozeqa/error.hpp"

namespace clozeqa {

namespace {

constexpr std::array<const char*, 24> kSyllables = {
    "ka", "lo", "ven", "dar", "mi", "sol", "tra", "ber", "nal", "qui", "ros", "tem",
    "fa", "gor", "li", "mun", "pe", "sha", "tor", "vi", "zel", "an", "dre", "hul"};

constexpr std::array<const char*, 16> kCities = {
    "Varnholm", "Oskeby", "Trellis Point", "Mardova", "Quensfield", "Alvarre",
    "Port Serin", "Dunmere", "Kelsworth", "Brackenridge", "Solvay", "Emberton",
    "Halcyon Bay", "Rothmoor", "Lindqvist", "Vey"};

constexpr std::array<const char*, 12> kCompanies = {
    "Corvane Works", "Halberd Mills", "Nettle Lane Press", "Orbis Foundry",
    "Greywater Optics", "Lumen Company", "Sable Rail", "Tarrow Instruments",
    "Brightwell Labs", "Ostrander Textiles", "Pell Engines", "Wexford Glass"};

constexpr std::array<const char*, 10> kProfessions = {
    "engineer", "chemist", "cartographer", "watchmaker", "surveyor",
    "printer", "architect", "metallurgist", "botanist", "machinist"};

constexpr std::array<const char*, 12> kInventions = {
    "steam loom", "pocket barometer", "folding lens", "rotary press", "copper valve",
    "signal lamp", "tide gauge", "spring balance", "glass kiln", "wind meter",
    "paper drill", "rail coupler"};

constexpr std::array<const char*, 10> kReasons = {
    "a dispute over wages", "poor health", "a fire at the workshop",
    "a move to the coast", "a quarrel with the owner", "the death of a partner",
    "an offer from a rival", "a lack of funding", "a flood in the valley",
    "a new family business"};

template <class Rng>
std::string capitalized_word(Rng& rng, int syllables) {
  std::uniform_int_distribution<std::size_t> pick(0, kSyllables.size() - 1);
  std::string w;
  for (int i = 0; i < syllables; ++i) w += kSyllables[pick(rng)];
  w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

template <class Rng, class Arr>
std::string choose(Rng& rng, const Arr& arr) {
  std::uniform_int_distribution<std::size_t> pick(0, arr.size() - 1);
  return arr[pick(rng)];
}

struct Person {
  std::string name;
  std::string city;
  std::string year;
  std::string company;
  std::string profession;
  std::string invention;
  std::string reason;
};

template <class Rng>
Person make_person(Rng& rng, std::set<std::string>& used_names) {
  Person p;
  do {
    p.name = capitalized_word(rng, 2) + " " + capitalized_word(rng, 3);
  } while (!used_names.insert(p.name).second);
  p.city = choose(rng, kCities);
  p.year = std::to_string(std::uniform_int_distribution<int>(1780, 1910)(rng));
  p.company = choose(rng, kCompanies);
  p.profession = choose(rng, kProfessions);
  p.invention = choose(rng, kInventions);
  p.reason = choose(rng, kReasons);
  return p;
}

// Passage assembly that records where every planted value lands.
class PassageWriter {
 public:
  std::size_t put(const std::string& s) {
    const std::size_t at = text_.size();
    text_ += s;
    return at;
  }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

struct Planted {
  std::size_t city, year, company, profession, invention, reason, founder;
};

Planted write_passage(PassageWriter& w, const Person& p, const Person& d) {
  Planted at{};
  w.put(p.name + " was born in ");
  at.city = w.put(p.city);
  w.put(" in ");
  at.year = w.put(p.year);
  w.put(". As a young ");
  at.profession = w.put(p.profession);
  w.put(", " + p.name.substr(0, p.name.find(' ')) + " worked for ");
  at.company = w.put(p.company);
  w.put(" for several years. " + p.name + " invented the ");
  at.invention = w.put(p.invention);
  w.put(" while living in " + d.city + ". " + p.name + " left " + p.company + " because of ");
  at.reason = w.put(p.reason);
  w.put(". The company had been founded by ");
  at.founder = w.put(d.name);
  w.put(", a " + d.profession + " born in " + d.year + ". " + d.name + " later invented the " +
        d.invention + ".");
  return at;
}

std::string question_text(SyntheticQuestion kind, const Person& p, const Person& d) {
  (void)d;
  switch (kind) {
    case SyntheticQuestion::WhereBorn: return "Where was " + p.name + " born?";
    case SyntheticQuestion::WhenBorn: return "When was " + p.name + " born?";
    case SyntheticQuestion::WhatInvent: return "What did " + p.name + " invent?";
    case SyntheticQuestion::WhichCompany: return "Which company did " + p.name + " work for?";
    case SyntheticQuestion::WhyLeave: return "Why did " + p.name + " leave " + p.company + "?";
    case SyntheticQuestion::BornInWhich: return p.name + " was born in which city?";
    case SyntheticQuestion::WhoFounded: return "Who founded " + p.company + "?";
    case SyntheticQuestion::WhatProfession: return "What was the profession of " + p.name + "?";
  }
  throw ContractError("synthetic: unknown question kind");
}

RawAnswer answer_for(SyntheticQuestion kind, const Person& p, const Person& d, const Planted& at) {
  switch (kind) {
    case SyntheticQuestion::WhereBorn:
    case SyntheticQuestion::BornInWhich: return {p.city, static_cast<long long>(at.city)};
    case SyntheticQuestion::WhenBorn: return {p.year, static_cast<long long>(at.year)};
    case SyntheticQuestion::WhatInvent: return {p.invention, static_cast<long long>(at.invention)};
    case SyntheticQuestion::WhichCompany: return {p.company, static_cast<long long>(at.company)};
    case SyntheticQuestion::WhyLeave: return {p.reason, static_cast<long long>(at.reason)};
    case SyntheticQuestion::WhoFounded: return {d.name, static_cast<long long>(at.founder)};
    case SyntheticQuestion::WhatProfession:
      return {p.profession, static_cast<long long>(at.profession)};
  }
  throw ContractError("synthetic: unknown question kind");
}

template <class Rng>
Person distractor_for(Rng& rng, const Person& p, std::set<std::string>& used) {
  Person d = make_person(rng, used);
  while (d.city == p.city) d.city = choose(rng, kCities);
  while (d.invention == p.invention) d.invention = choose(rng, kInventions);
  while (d.year == p.year) d.year = std::to_string(std::uniform_int_distribution<int>(1780, 1910)(rng));
  return d;
}

}  // namespace

std::vector<RawRecord> generate_synthetic_records(const SyntheticOptions& options) {
  if (options.passages < 1 || options.questions_per_passage < 1) {
    throw ConfigError("synthetic: passages and questions_per_passage must be positive");
  }
  if (options.questions_per_passage > kSyntheticQuestionKinds) {
    throw ConfigError("synthetic: at most " + std::to_string(kSyntheticQuestionKinds) +
                      " questions per passage");
  }
  std::mt19937_64 rng(options.seed);
  std::set<std::string> used;
  std::vector<RawRecord> out;
  int counter = 0;
  for (int i = 0; i < options.passages; ++i) {
    const Person p = make_person(rng, used);
    const Person d = distractor_for(rng, p, used);
    PassageWriter w;
    const Planted at = write_passage(w, p, d);
    RawRecord rec;
    rec.context = w.text();
    std::array<int, kSyntheticQuestionKinds> kinds{};
    for (int k = 0; k < kSyntheticQuestionKinds; ++k) kinds[static_cast<std::size_t>(k)] = k;
    std::shuffle(kinds.begin(), kinds.end(), rng);
    for (int q = 0; q < options.questions_per_passage; ++q) {
      const auto kind = static_cast<SyntheticQuestion>(kinds[static_cast<std::size_t>(q)]);
      RawQuestion rq;
      rq.id = "syn-" + std::to_string(counter++);
      rq.question = question_text(kind, p, d);
      rq.answers.push_back(answer_for(kind, p, d, at));
      rec.qas.push_back(std::move(rq));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<std::string> synthetic_question_corpus(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::set<std::string> used;
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) {
    const Person p = make_person(rng, used);
    const Person d = distractor_for(rng, p, used);
    out.push_back(question_text(static_cast<SyntheticQuestion>(i % kSyntheticQuestionKinds), p, d));
  }
  return out;
}

}  // namespace clozeqa
