#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "depcause/corpus.hpp"
#include "depcause/errors.hpp"
#include "depcause/rng.hpp"
#include "json.hpp"

// Synthetic causal corpus: templated active/passive sentences over a
// medical-flavored phrase lexicon, with dependency trees built from each
// template's hand-written scaffold.

namespace depcause {

enum class Voice { kActive, kPassive };

inline constexpr const char* kCauseSlot = "CAUSE";
inline constexpr const char* kEffectSlot = "EFFECT";

/// A sentence pattern over scaffold words plus one CAUSE and one EFFECT slot.
///
/// `scaffold_pos`, `scaffold_heads` and `scaffold_deprels` run parallel to
/// the pattern tokens. Heads index pattern tokens (-1 for the root). At a
/// slot, the head entry is the slot's anchor: the scaffold token the
/// phrase's head word attaches to, and the deprel is that attachment's
/// label. Inside a phrase every word attaches to the phrase's last word.
struct Template {
  std::string pattern;
  Voice voice = Voice::kActive;
  std::vector<std::string> scaffold_pos;
  std::vector<int> scaffold_heads;
  std::vector<std::string> scaffold_deprels;

  std::vector<std::string> tokens() const {
    std::vector<std::string> out;
    std::istringstream in(pattern);
    for (std::string w; in >> w;) out.push_back(w);
    return out;
  }
};

struct Phrase {
  std::vector<std::string> words;
  std::vector<std::string> pos;

  std::string text() const {
    std::string s;
    for (std::size_t i = 0; i < words.size(); ++i) s += (i ? " " : "") + words[i];
    return s;
  }
};

struct Lexicon {
  std::vector<Phrase> causes;
  std::vector<Phrase> effects;
};

// ---------------------------------------------------------------------------
// Defaults

namespace detail {

inline Template make_template(std::string pattern, Voice voice, std::vector<std::string> pos,
                              std::vector<int> heads, std::vector<std::string> rels) {
  return Template{std::move(pattern), voice, std::move(pos), std::move(heads), std::move(rels)};
}

inline Phrase make_phrase(const std::string& text, const std::string& tags) {
  Phrase p;
  std::istringstream w(text), t(tags);
  for (std::string s; w >> s;) p.words.push_back(s);
  for (std::string s; t >> s;) p.pos.push_back(s);
  return p;
}

}  // namespace detail

/// Six active and four passive scaffolds.
inline std::vector<Template> default_templates() {
  using detail::make_template;
  const auto A = Voice::kActive;
  const auto P = Voice::kPassive;
  return {
      make_template("CAUSE can lead to EFFECT", A, {"_", "AUX", "VERB", "ADP", "_"},
                    {2, 2, -1, 2, 3}, {"nsubj", "aux", "ROOT", "prep", "pobj"}),
      make_template("CAUSE causes EFFECT", A, {"_", "VERB", "_"}, {1, -1, 1},
                    {"nsubj", "ROOT", "dobj"}),
      make_template("CAUSE often results in EFFECT", A, {"_", "ADV", "VERB", "ADP", "_"},
                    {2, 2, -1, 2, 3}, {"nsubj", "advmod", "ROOT", "prep", "pobj"}),
      make_template("CAUSE may trigger EFFECT", A, {"_", "AUX", "VERB", "_"}, {2, 2, -1, 2},
                    {"nsubj", "aux", "ROOT", "dobj"}),
      make_template("CAUSE is a major risk factor for EFFECT", A,
                    {"_", "AUX", "DET", "ADJ", "NOUN", "NOUN", "ADP", "_"},
                    {1, -1, 5, 5, 5, 1, 5, 6},
                    {"nsubj", "ROOT", "det", "amod", "compound", "attr", "prep", "pobj"}),
      make_template("CAUSE contributes to the development of EFFECT", A,
                    {"_", "VERB", "ADP", "DET", "NOUN", "ADP", "_"}, {1, -1, 1, 4, 2, 4, 5},
                    {"nsubj", "ROOT", "prep", "det", "pobj", "prep", "pobj"}),
      make_template("EFFECT is caused by CAUSE", P, {"_", "AUX", "VERB", "ADP", "_"},
                    {2, 2, -1, 2, 3}, {"nsubjpass", "auxpass", "ROOT", "agent", "pobj"}),
      make_template("EFFECT can be triggered by CAUSE", P, {"_", "AUX", "AUX", "VERB", "ADP", "_"},
                    {3, 3, 3, -1, 3, 4}, {"nsubjpass", "aux", "auxpass", "ROOT", "agent", "pobj"}),
      make_template("EFFECT is often induced by CAUSE", P, {"_", "AUX", "ADV", "VERB", "ADP", "_"},
                    {3, 3, 3, -1, 3, 4}, {"nsubjpass", "auxpass", "advmod", "ROOT", "agent", "pobj"}),
      make_template("EFFECT may be brought on by CAUSE", P,
                    {"_", "AUX", "AUX", "VERB", "ADP", "ADP", "_"}, {3, 3, 3, -1, 3, 3, 5},
                    {"nsubjpass", "aux", "auxpass", "ROOT", "prt", "agent", "pobj"}),
  };
}

/// Illustrative medical phrases; not clinical claims.
inline Lexicon default_lexicon() {
  using detail::make_phrase;
  Lexicon lex;
  lex.causes = {
      make_phrase("smoking", "NOUN"),
      make_phrase("obesity", "NOUN"),
      make_phrase("diabetes", "NOUN"),
      make_phrase("hypertension", "NOUN"),
      make_phrase("vitamin D deficiency", "NOUN NOUN NOUN"),
      make_phrase("high cholesterol", "ADJ NOUN"),
      make_phrase("excessive alcohol consumption", "ADJ NOUN NOUN"),
      make_phrase("chronic stress", "ADJ NOUN"),
      make_phrase("poor diet", "ADJ NOUN"),
      make_phrase("physical inactivity", "ADJ NOUN"),
      make_phrase("air pollution", "NOUN NOUN"),
      make_phrase("sleep deprivation", "NOUN NOUN"),
      make_phrase("iron deficiency", "NOUN NOUN"),
      make_phrase("bacterial infection", "ADJ NOUN"),
      make_phrase("asbestos exposure", "NOUN NOUN"),
      make_phrase("excessive sun exposure", "ADJ NOUN NOUN"),
      make_phrase("high blood pressure", "ADJ NOUN NOUN"),
      make_phrase("chronic inflammation", "ADJ NOUN"),
      make_phrase("genetic mutations", "ADJ NOUN"),
      make_phrase("high sodium intake", "ADJ NOUN NOUN"),
      make_phrase("radiation exposure", "NOUN NOUN"),
      make_phrase("viral infection", "ADJ NOUN"),
      make_phrase("dehydration", "NOUN"),
      make_phrase("insulin resistance", "NOUN NOUN"),
      make_phrase("prolonged sitting", "ADJ NOUN"),
      make_phrase("head trauma", "NOUN NOUN"),
      make_phrase("lead poisoning", "NOUN NOUN"),
      make_phrase("uncontrolled blood sugar", "ADJ NOUN NOUN"),
      make_phrase("hormonal imbalance", "ADJ NOUN"),
      make_phrase("excessive sugar consumption", "ADJ NOUN NOUN"),
      make_phrase("long term steroid use", "ADJ NOUN NOUN NOUN"),
      make_phrase("untreated sleep apnea", "ADJ NOUN NOUN"),
      make_phrase("heavy metal exposure", "ADJ NOUN NOUN"),
      make_phrase("calcium deficiency", "NOUN NOUN"),
      make_phrase("poor oral hygiene", "ADJ ADJ NOUN"),
      make_phrase("autoimmune disease", "ADJ NOUN"),
      make_phrase("kidney disease", "NOUN NOUN"),
      make_phrase("secondhand smoke", "ADJ NOUN"),
      make_phrase("processed meat consumption", "ADJ NOUN NOUN"),
      make_phrase("low vitamin B12 intake", "ADJ NOUN NOUN NOUN"),
  };
  lex.effects = {
      make_phrase("blindness", "NOUN"),
      make_phrase("osteoporosis", "NOUN"),
      make_phrase("lung cancer", "NOUN NOUN"),
      make_phrase("heart disease", "NOUN NOUN"),
      make_phrase("type 2 diabetes", "NOUN NUM NOUN"),
      make_phrase("stroke", "NOUN"),
      make_phrase("liver cirrhosis", "NOUN NOUN"),
      make_phrase("kidney failure", "NOUN NOUN"),
      make_phrase("anemia", "NOUN"),
      make_phrase("skin cancer", "NOUN NOUN"),
      make_phrase("chronic fatigue", "ADJ NOUN"),
      make_phrase("hypertension", "NOUN"),
      make_phrase("tooth decay", "NOUN NOUN"),
      make_phrase("cognitive decline", "ADJ NOUN"),
      make_phrase("asthma attacks", "NOUN NOUN"),
      make_phrase("nerve damage", "NOUN NOUN"),
      make_phrase("memory loss", "NOUN NOUN"),
      make_phrase("mesothelioma", "NOUN"),
      make_phrase("heart attacks", "NOUN NOUN"),
      make_phrase("fatty liver disease", "ADJ NOUN NOUN"),
      make_phrase("joint pain", "NOUN NOUN"),
      make_phrase("depression", "NOUN"),
      make_phrase("insomnia", "NOUN"),
      make_phrase("muscle weakness", "NOUN NOUN"),
      make_phrase("peripheral neuropathy", "ADJ NOUN"),
      make_phrase("gum disease", "NOUN NOUN"),
      make_phrase("respiratory problems", "ADJ NOUN"),
      make_phrase("developmental delays", "ADJ NOUN"),
      make_phrase("obesity", "NOUN"),
      make_phrase("diabetes", "NOUN"),
      make_phrase("chronic inflammation", "ADJ NOUN"),
      make_phrase("kidney stones", "NOUN NOUN"),
      make_phrase("vision problems", "NOUN NOUN"),
      make_phrase("severe headaches", "ADJ NOUN"),
      make_phrase("brittle bones", "ADJ NOUN"),
      make_phrase("weakened immune function", "ADJ ADJ NOUN"),
      make_phrase("coronary artery disease", "ADJ NOUN NOUN"),
      make_phrase("irregular heart rhythm", "ADJ NOUN NOUN"),
      make_phrase("early onset dementia", "ADJ NOUN NOUN"),
      make_phrase("chronic obstructive pulmonary disease", "ADJ ADJ ADJ NOUN"),
  };
  return lex;
}

// ---------------------------------------------------------------------------
// Validation and instantiation

inline void validate_template(const Template& t) {
  const auto toks = t.tokens();
  const std::size_t n = toks.size();
  auto fail = [&](const std::string& why) {
    throw ValidationError("template '" + t.pattern + "': " + why);
  };
  if (t.scaffold_pos.size() != n || t.scaffold_heads.size() != n || t.scaffold_deprels.size() != n) {
    fail("scaffold_pos, scaffold_heads and scaffold_deprels must have one entry per pattern token");
  }
  if (std::count(toks.begin(), toks.end(), kCauseSlot) != 1 ||
      std::count(toks.begin(), toks.end(), kEffectSlot) != 1) {
    fail("CAUSE and EFFECT must each appear exactly once");
  }
  AnnotatedSentence probe;
  for (std::size_t i = 0; i < n; ++i) {
    probe.tokens.push_back(AnnotatedToken{toks[i], "X", t.scaffold_heads[i], ""});
  }
  if (auto p = tree_problem(probe)) fail(*p);
  for (std::size_t i = 0; i < n; ++i) {
    const bool slot = toks[i] == kCauseSlot || toks[i] == kEffectSlot;
    if (!slot && (t.scaffold_pos[i].empty() || t.scaffold_pos[i] == "_")) {
      fail("scaffold token '" + toks[i] + "' has no POS tag");
    }
  }
}

inline void validate_phrase(const Phrase& p) {
  if (p.words.empty()) throw ValidationError("lexicon phrase is empty");
  if (p.pos.size() != p.words.size()) {
    throw ValidationError("lexicon phrase '" + p.text() + "' needs one POS tag per word");
  }
}

inline std::string phrase_deprel(const std::string& pos) {
  if (pos == "ADJ") return "amod";
  if (pos == "NUM") return "nummod";
  if (pos == "DET") return "det";
  return "compound";
}

/// Fills the slots of `t`. Gold spans cover exactly the inserted phrases.
inline AnnotatedSentence instantiate(const Template& t, const Phrase& cause, const Phrase& effect,
                                     std::string id = {}) {
  const auto toks = t.tokens();
  // Sentence index that represents each pattern token as a head: the token
  // itself, or the last word of the slot phrase.
  std::vector<std::size_t> head_index(toks.size()), start_index(toks.size());
  std::size_t pos = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    start_index[i] = pos;
    if (toks[i] == kCauseSlot) pos += cause.words.size();
    else if (toks[i] == kEffectSlot) pos += effect.words.size();
    else pos += 1;
    head_index[i] = pos - 1;
  }
  AnnotatedSentence s;
  s.id = std::move(id);
  auto attach = [&](std::size_t i) {
    return t.scaffold_heads[i] < 0 ? kRootHead
                                   : static_cast<int>(head_index[static_cast<std::size_t>(t.scaffold_heads[i])]);
  };
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const bool is_cause = toks[i] == kCauseSlot;
    if (is_cause || toks[i] == kEffectSlot) {
      const Phrase& ph = is_cause ? cause : effect;
      const std::size_t first = start_index[i], last = head_index[i];
      for (std::size_t w = 0; w < ph.words.size(); ++w) {
        const bool phrase_head = first + w == last;
        s.tokens.push_back(AnnotatedToken{ph.words[w], ph.pos[w],
                                          phrase_head ? attach(i) : static_cast<int>(last),
                                          phrase_head ? t.scaffold_deprels[i] : phrase_deprel(ph.pos[w])});
      }
      (is_cause ? s.cause : s.effect) = Span{first, last};
    } else {
      s.tokens.push_back(AnnotatedToken{toks[i], t.scaffold_pos[i], attach(i), t.scaffold_deprels[i]});
    }
  }
  auto& first_form = s.tokens.front().form;
  first_form[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(first_form[0])));
  return s;
}

inline std::string surface(const AnnotatedSentence& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? " " : "") + s.tokens[i].form;
  return out;
}

/// Number of distinct sentences the inputs can produce.
inline std::size_t generation_capacity(const std::vector<Template>& templates, const Lexicon& lexicon) {
  std::unordered_set<std::string> seen;
  for (const auto& t : templates) {
    for (const auto& c : lexicon.causes) {
      for (const auto& e : lexicon.effects) seen.insert(surface(instantiate(t, c, e)));
    }
  }
  return seen.size();
}

struct GenerationResult {
  std::vector<AnnotatedSentence> sentences;
  std::size_t active = 0;
  std::size_t passive = 0;
  std::size_t capacity = 0;
  std::size_t resampled = 0;  // duplicate draws discarded
};

/// Seeded sampling of (template, cause, effect) triples. The voice is drawn
/// first (0.5 each when both exist), then a template of that voice, then
/// the phrases. Exact duplicates are discarded and redrawn.
inline GenerationResult generate(const std::vector<Template>& templates, const Lexicon& lexicon,
                                 std::size_t n, std::uint64_t seed) {
  if (n == 0) throw PreconditionError("generate: n must be positive");
  if (templates.empty()) throw PreconditionError("generate: no templates");
  if (lexicon.causes.empty() || lexicon.effects.empty()) {
    throw PreconditionError("generate: lexicon needs cause and effect phrases");
  }
  for (const auto& t : templates) validate_template(t);
  for (const auto& p : lexicon.causes) validate_phrase(p);
  for (const auto& p : lexicon.effects) validate_phrase(p);

  GenerationResult result;
  result.capacity = generation_capacity(templates, lexicon);
  if (n > result.capacity) {
    throw ValidationError("cannot generate " + std::to_string(n) +
                          " distinct sentences; templates and lexicon allow at most " +
                          std::to_string(result.capacity));
  }
  std::vector<std::size_t> active, passive;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    (templates[i].voice == Voice::kActive ? active : passive).push_back(i);
  }
  Rng rng(seed);
  std::unordered_set<std::string> seen;
  char id[32];
  while (result.sentences.size() < n) {
    const std::vector<std::size_t>* pool = &active;
    if (active.empty()) pool = &passive;
    else if (!passive.empty() && rng.bernoulli(0.5)) pool = &passive;
    const auto& t = templates[(*pool)[rng.index(pool->size())]];
    const auto& c = lexicon.causes[rng.index(lexicon.causes.size())];
    const auto& e = lexicon.effects[rng.index(lexicon.effects.size())];
    std::snprintf(id, sizeof id, "gen-%06zu", result.sentences.size());
    auto s = instantiate(t, c, e, id);
    if (!seen.insert(surface(s)).second) {
      ++result.resampled;
      continue;
    }
    (t.voice == Voice::kActive ? result.active : result.passive) += 1;
    result.sentences.push_back(std::move(s));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Corpus checks

struct CorpusReport {
  std::size_t sentences = 0;
  std::size_t tree_violations = 0;
  std::size_t span_violations = 0;
  std::size_t pos_violations = 0;
  std::vector<std::string> details;

  std::size_t total() const { return tree_violations + span_violations + pos_violations; }
};

inline CorpusReport validate_corpus(const std::vector<AnnotatedSentence>& sentences) {
  CorpusReport r;
  r.sentences = sentences.size();
  for (const auto& s : sentences) {
    if (auto p = tree_problem(s)) {
      ++r.tree_violations;
      r.details.push_back(s.id + ": tree: " + *p);
    }
    if (auto p = span_problem(s)) {
      ++r.span_violations;
      r.details.push_back(s.id + ": spans: " + *p);
    }
    if (auto p = pos_problem(s)) {
      ++r.pos_violations;
      r.details.push_back(s.id + ": pos: " + *p);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Files

inline nlohmann::ordered_json to_json(const Template& t) {
  nlohmann::ordered_json j;
  j["pattern"] = t.pattern;
  j["voice"] = t.voice == Voice::kActive ? "active" : "passive";
  j["scaffold_pos"] = t.scaffold_pos;
  j["scaffold_heads"] = t.scaffold_heads;
  j["scaffold_deprels"] = t.scaffold_deprels;
  const auto toks = t.tokens();
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i] == kCauseSlot) j["anchors"]["cause"] = t.scaffold_heads[i];
    if (toks[i] == kEffectSlot) j["anchors"]["effect"] = t.scaffold_heads[i];
  }
  return j;
}

inline nlohmann::ordered_json to_json(const Lexicon& lex) {
  nlohmann::ordered_json j;
  for (auto [key, list] : {std::pair{"causes", &lex.causes}, std::pair{"effects", &lex.effects}}) {
    j[key] = nlohmann::ordered_json::array();
    for (const auto& p : *list) j[key].push_back({{"text", p.text()}, {"pos", p.pos}});
  }
  return j;
}

/// Template file: JSON array of {pattern, voice, scaffold_pos, scaffold_heads,
/// [scaffold_deprels], [anchors: {cause, effect}]}. Anchors, when given,
/// override the head entries at the slots.
inline std::vector<Template> templates_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw SchemaError(0, "<templates>", "expected a JSON array");
  std::vector<Template> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    const std::size_t line = i + 1;
    auto need = [&](const char* f) -> const nlohmann::json& {
      if (!e.is_object() || !e.contains(f)) throw SchemaError(line, f, "missing in template " + std::to_string(i));
      return e[f];
    };
    Template t;
    try {
      t.pattern = need("pattern").get<std::string>();
      const auto voice = need("voice").get<std::string>();
      if (voice != "active" && voice != "passive") throw SchemaError(line, "voice", "must be active or passive");
      t.voice = voice == "active" ? Voice::kActive : Voice::kPassive;
      t.scaffold_pos = need("scaffold_pos").get<std::vector<std::string>>();
      t.scaffold_heads = need("scaffold_heads").get<std::vector<int>>();
      if (e.contains("scaffold_deprels")) {
        t.scaffold_deprels = e["scaffold_deprels"].get<std::vector<std::string>>();
      } else {
        t.scaffold_deprels.assign(t.scaffold_pos.size(), "dep");
      }
    } catch (const nlohmann::json::exception& ex) {
      throw SchemaError(line, "<template>", ex.what());
    }
    if (e.contains("anchors")) {
      const auto toks = t.tokens();
      for (std::size_t k = 0; k < toks.size() && k < t.scaffold_heads.size(); ++k) {
        if (toks[k] == kCauseSlot && e["anchors"].contains("cause")) t.scaffold_heads[k] = e["anchors"]["cause"].get<int>();
        if (toks[k] == kEffectSlot && e["anchors"].contains("effect")) t.scaffold_heads[k] = e["anchors"]["effect"].get<int>();
      }
    }
    validate_template(t);
    out.push_back(std::move(t));
  }
  return out;
}

inline Lexicon lexicon_from_json(const nlohmann::json& j) {
  Lexicon lex;
  for (auto [key, list] : {std::pair{"causes", &lex.causes}, std::pair{"effects", &lex.effects}}) {
    if (!j.contains(key) || !j[key].is_array()) throw SchemaError(0, key, "expected an array");
    for (const auto& e : j[key]) {
      try {
        Phrase p = detail::make_phrase(e.at("text").get<std::string>(), "");
        p.pos = e.at("pos").get<std::vector<std::string>>();
        validate_phrase(p);
        list->push_back(std::move(p));
      } catch (const nlohmann::json::exception& ex) {
        throw SchemaError(0, key, ex.what());
      }
    }
  }
  return lex;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
}

/// FNV-1a over a string, rendered as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string templates_hash(const std::vector<Template>& templates) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& t : templates) j.push_back(to_json(t));
  return fnv1a_hex(j.dump());
}

inline std::string lexicon_hash(const Lexicon& lex) { return fnv1a_hex(to_json(lex).dump()); }

}  // namespace depcause
