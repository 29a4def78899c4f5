// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/text.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "vdub/error.hpp"

namespace vdub {
namespace {

const std::vector<std::string>& phones_by_frequency() {
  static const std::vector<std::string> kPhones = {
      "AH", "N",  "T",  "IH", "R",  "S",  "D",  "L",  "K",  "EH", "IY", "M",  "Z",
      "AE", "ER", "DH", "W",  "P",  "B",  "EY", "AA", "AY", "F",  "HH", "UW", "V",
      "OW", "AO", "NG", "G",  "SH", "Y",  "TH", "JH", "CH", "AW", "UH", "OY", "ZH"};
  return kPhones;
}

}  // namespace

PhonemeVocabulary::PhonemeVocabulary(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.size() < 2 || symbols_[kPad] != kPadSymbol || symbols_[kUnk] != kUnkSymbol) {
    throw ConfigError("vocabulary must start with <pad>, <unk>");
  }
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!lookup_.emplace(symbols_[i], static_cast<int>(i)).second) {
      throw ConfigError("duplicate vocabulary symbol: " + symbols_[i]);
    }
  }
}

PhonemeVocabulary PhonemeVocabulary::arpabet() {
  std::vector<std::string> s = {kPadSymbol, kUnkSymbol, kWordBoundary};
  const auto& phones = phones_by_frequency();
  s.insert(s.end(), phones.begin(), phones.end());
  return PhonemeVocabulary(std::move(s));
}

std::vector<std::string> PhonemeVocabulary::frequent_phones(std::size_t count) {
  const auto& phones = phones_by_frequency();
  if (count > phones.size()) {
    throw ConfigError("at most " + std::to_string(phones.size()) + " phones are available");
  }
  return {phones.begin(), phones.begin() + static_cast<std::ptrdiff_t>(count)};
}

int PhonemeVocabulary::id(const std::string& symbol) const {
  auto it = lookup_.find(symbol);
  return it == lookup_.end() ? -1 : it->second;
}

const std::string& PhonemeVocabulary::symbol(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size()) {
    throw DataError("phoneme id out of range: " + std::to_string(id));
  }
  return symbols_[static_cast<std::size_t>(id)];
}

std::vector<int> PhonemeVocabulary::encode(const std::vector<std::string>& symbols, bool allow_unk) const {
  if (symbols.empty()) throw DataError("cannot encode an empty phoneme sequence");
  std::vector<int> ids;
  ids.reserve(symbols.size());
  for (const auto& s : symbols) {
    int i = id(s);
    if (i < 0) {
      if (!allow_unk) throw OovError("unknown phoneme symbol: " + s);
      i = kUnk;
    }
    ids.push_back(i);
  }
  return ids;
}

std::vector<std::string> PhonemeVocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(symbol(i));
  return out;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon: " + path.string());
  Lexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.rfind(";;", 0) == 0) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": expected word<TAB>phonemes");
    }
    std::string word = normalize_text(line.substr(0, tab));
    auto phones = split_symbols(line.substr(tab + 1));
    if (word.empty() || phones.empty()) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": empty entry");
    }
    lex[word] = std::move(phones);
  }
  return lex;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  auto is_alpha = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (is_alpha(c) || std::isdigit(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (c == '\'' && i > 0 && i + 1 < text.size() && is_alpha(text[i - 1]) && is_alpha(text[i + 1])) {
      out.push_back(c);
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      out.push_back(' ');
    } else {
      out.push_back(' ');
    }
  }
  // Collapse whitespace.
  std::string collapsed;
  for (char c : out) {
    if (c == ' ' && (collapsed.empty() || collapsed.back() == ' ')) continue;
    collapsed.push_back(c);
  }
  if (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
  return collapsed;
}

PhonemeSequence text_to_phonemes(std::string_view text, const Lexicon& lexicon, OovPolicy policy) {
  const std::string norm = normalize_text(text);
  if (norm.empty()) throw DataError("text is empty after normalization");
  PhonemeSequence seq;
  seq.source_text = std::string(text);
  std::istringstream words(norm);
  std::string word;
  bool first = true;
  while (words >> word) {
    if (!first) seq.symbols.push_back(PhonemeVocabulary::kWordBoundary);
    first = false;
    auto it = lexicon.find(word);
    if (it != lexicon.end()) {
      seq.symbols.insert(seq.symbols.end(), it->second.begin(), it->second.end());
      continue;
    }
    if (policy == OovPolicy::kError) throw OovError("word not in lexicon: '" + word + "'");
    for (char c : word) {
      if (c == '\'') continue;
      seq.symbols.emplace_back(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
  }
  return seq;
}

std::vector<std::string> split_symbols(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string join_symbols(const std::vector<std::string>& symbols) {
  std::string out;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i) out.push_back(' ');
    out += symbols[i];
  }
  return out;
}

}  // namespace vdub
