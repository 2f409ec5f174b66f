#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "depcause/corpus.hpp"
#include "depcause/errors.hpp"
#include "json.hpp"

// Corpus ingestion and export: CoNLL-U with span comments, and JSONL.

namespace depcause {

namespace detail {

inline std::vector<std::string_view> split_view(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                   : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_int(std::string_view s, long long& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end && !s.empty();
}

// "i..j" with 0-based inclusive indices.
inline Span parse_span(std::string_view text, std::size_t line) {
  text = trim(text);
  const auto dots = text.find("..");
  long long a = 0, b = 0;
  if (dots == std::string_view::npos || !parse_int(trim(text.substr(0, dots)), a) ||
      !parse_int(trim(text.substr(dots + 2)), b) || a < 0 || b < 0) {
    throw ParseError(line, "bad span '" + std::string(text) + "', expected i..j");
  }
  return Span{static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CoNLL-U

struct ConlluResult {
  std::vector<AnnotatedSentence> sentences;
  std::size_t skipped = 0;  // blocks without cause/effect comments
  std::vector<std::string> warnings;
};

/// Reads blank-line separated CoNLL-U blocks. Spans come from comment lines
/// `# cause = i..j` and `# effect = k..l`; `# sent_id` sets the id.
/// Multi-word token ranges and empty nodes are skipped. Without
/// `require_spans`, blocks lacking span comments are kept (spans left at
/// 0..0) for prediction-only use.
inline ConlluResult parse_conllu(std::istream& in, bool require_spans = true) {
  ConlluResult result;
  std::string raw;
  std::size_t line_no = 0, block_index = 0, block_line = 0;

  AnnotatedSentence current;
  bool has_cause = false, has_effect = false, has_id = false, in_block = false;

  auto finish = [&]() {
    if (!in_block) return;
    ++block_index;
    if (current.tokens.empty()) {
      // Comment-only block.
    } else if (require_spans && (!has_cause || !has_effect)) {
      ++result.skipped;
      result.warnings.push_back("block at line " + std::to_string(block_line) +
                                " has no cause/effect span comments; skipped");
    } else {
      if (!has_id) current.id = "conllu-" + std::to_string(block_index);
      if (auto problem = tree_problem(current)) {
        throw ValidationError("block at line " + std::to_string(block_line) + " ('" + current.id +
                              "'): " + *problem);
      }
      result.sentences.push_back(std::move(current));
    }
    current = AnnotatedSentence{};
    has_cause = has_effect = has_id = in_block = false;
  };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (detail::trim(line).empty()) {
      finish();
      continue;
    }
    if (!in_block) {
      in_block = true;
      block_line = line_no;
    }
    if (line.front() == '#') {
      auto body = detail::trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = detail::trim(body.substr(0, eq));
      const auto value = detail::trim(body.substr(eq + 1));
      if (key == "cause") {
        current.cause = detail::parse_span(value, line_no);
        has_cause = true;
      } else if (key == "effect") {
        current.effect = detail::parse_span(value, line_no);
        has_effect = true;
      } else if (key == "sent_id") {
        current.id = std::string(value);
        has_id = true;
      }
      continue;
    }
    const auto cols = detail::split_view(line, '\t');
    if (cols.size() != 10) {
      throw ParseError(line_no, "expected 10 tab-separated columns, found " +
                                    std::to_string(cols.size()));
    }
    const auto id = cols[0];
    if (id.find('-') != std::string_view::npos || id.find('.') != std::string_view::npos) continue;
    long long word_id = 0;
    if (!detail::parse_int(id, word_id)) throw ParseError(line_no, "bad ID '" + std::string(id) + "'");
    if (word_id != static_cast<long long>(current.tokens.size()) + 1) {
      throw ParseError(line_no, "word ID " + std::string(id) + " out of sequence");
    }
    long long head = 0;
    if (!detail::parse_int(cols[6], head) || head < 0) {
      throw ParseError(line_no, "bad HEAD '" + std::string(cols[6]) + "'");
    }
    AnnotatedToken tok;
    tok.form = std::string(cols[1]);
    tok.pos = std::string(cols[3]);
    tok.head = head == 0 ? kRootHead : static_cast<int>(head - 1);
    tok.deprel = cols[7] == "_" ? std::string() : std::string(cols[7]);
    current.tokens.push_back(std::move(tok));
  }
  finish();
  return result;
}

inline ConlluResult parse_conllu_text(const std::string& text, bool require_spans = true) {
  std::istringstream in(text);
  return parse_conllu(in, require_spans);
}

inline ConlluResult read_conllu_file(const std::filesystem::path& path, bool require_spans = true) {
  auto in = detail::open_input(path);
  return parse_conllu(in, require_spans);
}

inline void write_conllu(std::ostream& out, const std::vector<AnnotatedSentence>& sentences) {
  for (const auto& s : sentences) {
    out << "# sent_id = " << s.id << '\n';
    out << "# text =";
    for (const auto& t : s.tokens) out << ' ' << t.form;
    out << '\n';
    out << "# cause = " << s.cause.begin << ".." << s.cause.end << '\n';
    out << "# effect = " << s.effect.begin << ".." << s.effect.end << '\n';
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& t = s.tokens[i];
      out << (i + 1) << '\t' << t.form << "\t_\t" << (t.pos.empty() ? "_" : t.pos) << "\t_\t_\t"
          << (t.head == kRootHead ? 0 : t.head + 1) << '\t' << (t.deprel.empty() ? "_" : t.deprel)
          << "\t_\t_\n";
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// JSONL

inline nlohmann::ordered_json sentence_to_json(const AnnotatedSentence& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  auto tokens = nlohmann::ordered_json::array(), tags = tokens, heads = tokens, rels = tokens;
  for (const auto& t : s.tokens) {
    tokens.push_back(t.form);
    tags.push_back(t.pos);
    heads.push_back(t.head);
    rels.push_back(t.deprel);
  }
  // ordered_json stores keys in a vector; build arrays before inserting.
  j["tokens"] = std::move(tokens);
  j["pos_tags"] = std::move(tags);
  j["heads"] = std::move(heads);
  j["deprels"] = std::move(rels);
  j["cause"] = {s.cause.begin, s.cause.end};
  j["effect"] = {s.effect.begin, s.effect.end};
  return j;
}

/// Schema-checks one JSONL record. Reports the offending field by name.
inline AnnotatedSentence sentence_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw SchemaError(line, "<record>", "expected a JSON object");
  auto require = [&](const char* field) -> const nlohmann::json& {
    auto it = j.find(field);
    if (it == j.end()) throw SchemaError(line, field, "missing");
    return *it;
  };
  auto string_array = [&](const char* field) {
    const auto& v = require(field);
    if (!v.is_array()) throw SchemaError(line, field, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) throw SchemaError(line, field, "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  };
  auto span = [&](const char* field) {
    const auto& v = require(field);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer() ||
        v[0].get<long long>() < 0 || v[1].get<long long>() < 0) {
      throw SchemaError(line, field, "expected [begin, end] with non-negative integers");
    }
    return Span{v[0].get<std::size_t>(), v[1].get<std::size_t>()};
  };

  AnnotatedSentence s;
  const auto& id = require("id");
  if (!id.is_string()) throw SchemaError(line, "id", "expected a string");
  s.id = id.get<std::string>();
  const auto tokens = string_array("tokens");
  const auto tags = string_array("pos_tags");
  const auto rels = string_array("deprels");
  const auto& heads = require("heads");
  if (!heads.is_array()) throw SchemaError(line, "heads", "expected an array of integers");
  if (tags.size() != tokens.size()) throw SchemaError(line, "pos_tags", "length differs from tokens");
  if (rels.size() != tokens.size()) throw SchemaError(line, "deprels", "length differs from tokens");
  if (heads.size() != tokens.size()) throw SchemaError(line, "heads", "length differs from tokens");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!heads[i].is_number_integer()) throw SchemaError(line, "heads", "expected integers");
    const long long h = heads[i].get<long long>();
    if (h < -1) throw SchemaError(line, "heads", "head below -1");
    s.tokens.push_back(AnnotatedToken{tokens[i], tags[i], static_cast<int>(h), rels[i]});
  }
  s.cause = span("cause");
  s.effect = span("effect");
  return s;
}

inline std::vector<AnnotatedSentence> read_jsonl(std::istream& in) {
  std::vector<AnnotatedSentence> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (detail::trim(raw).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    out.push_back(sentence_from_json(j, line_no));
  }
  return out;
}

inline void write_jsonl(std::ostream& out, const std::vector<AnnotatedSentence>& sentences) {
  for (const auto& s : sentences) out << sentence_to_json(s).dump() << '\n';
}

inline std::vector<AnnotatedSentence> read_jsonl_file(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_jsonl(in);
}

/// Writes through a temporary sibling file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline void write_jsonl_file(const std::filesystem::path& path,
                             const std::vector<AnnotatedSentence>& sentences) {
  std::ostringstream os;
  write_jsonl(os, sentences);
  write_file_atomic(path, os.str());
}

/// Loads a corpus by extension: `.conllu` as CoNLL-U, anything else as JSONL.
inline ConlluResult read_corpus_file(const std::filesystem::path& path) {
  if (path.extension() == ".conllu") return read_conllu_file(path);
  ConlluResult r;
  r.sentences = read_jsonl_file(path);
  return r;
}

}  // namespace depcause
