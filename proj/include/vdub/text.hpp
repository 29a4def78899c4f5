// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vdub {

// Ordered symbol inventory. Ids are contiguous from 0; <pad> is 0, <unk> is 1.
class PhonemeVocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static inline const std::string kPadSymbol = "<pad>";
  static inline const std::string kUnkSymbol = "<unk>";
  static inline const std::string kWordBoundary = "<wb>";

  explicit PhonemeVocabulary(std::vector<std::string> symbols);

  // <pad>, <unk>, <wb> followed by 39 ARPAbet phones, most frequent first.
  static PhonemeVocabulary arpabet();
  // The first `count` phones of arpabet() in frequency order.
  static std::vector<std::string> frequent_phones(std::size_t count);

  std::size_t size() const { return symbols_.size(); }
  // -1 when absent.
  int id(const std::string& symbol) const;
  const std::string& symbol(int id) const;
  const std::vector<std::string>& symbols() const { return symbols_; }

  std::vector<int> encode(const std::vector<std::string>& symbols, bool allow_unk) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> lookup_;
};

struct PhonemeSequence {
  std::vector<std::string> symbols;
  std::string source_text;
};

using Lexicon = std::unordered_map<std::string, std::vector<std::string>>;

enum class OovPolicy { kError, kLetters };

// Lines of "word<TAB>PH PH ...". Blank lines and lines starting with ';;' are skipped.
Lexicon load_lexicon(const std::filesystem::path& path);

// Lowercases and strips punctuation, keeping apostrophes that sit between letters.
std::string normalize_text(std::string_view text);

PhonemeSequence text_to_phonemes(std::string_view text, const Lexicon& lexicon,
                                 OovPolicy policy = OovPolicy::kError);

std::vector<std::string> split_symbols(std::string_view s);
std::string join_symbols(const std::vector<std::string>& symbols);

}  // namespace vdub
