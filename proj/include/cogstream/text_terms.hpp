#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cogstream::terms {

// Lowercases ASCII letters and splits on anything that is not [a-z0-9].
std::vector<std::string> tokenize(std::string_view text);

// Tokens re-joined with single spaces; whitespace and punctuation variants of
// the same text normalize to the same string.
std::string normalize(std::string_view text);

using TermCounts = std::map<std::string, double>;

TermCounts term_frequencies(std::string_view text);

// Cosine between term-frequency vectors; 0 when either side has no terms.
double tf_cosine(const TermCounts& a, const TermCounts& b);
double tf_cosine(std::string_view a, std::string_view b);

// Whole-word phrase containment on normalized text.
bool contains_phrase(std::string_view text, std::string_view phrase);

} // namespace cogstream::terms
