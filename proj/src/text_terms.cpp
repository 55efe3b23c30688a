#include "cogstream/text_terms.hpp"

#include <cmath>

namespace cogstream::terms {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char raw : text) {
        char c = raw;
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        const bool word = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
        if (word) {
            current.push_back(c);
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

std::string normalize(std::string_view text) {
    std::string out;
    for (const auto& tok : tokenize(text)) {
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

TermCounts term_frequencies(std::string_view text) {
    TermCounts counts;
    for (auto& tok : tokenize(text)) counts[std::move(tok)] += 1.0;
    return counts;
}

double tf_cosine(const TermCounts& a, const TermCounts& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [term, count] : a) {
        na += count * count;
        if (auto it = b.find(term); it != b.end()) dot += count * it->second;
    }
    for (const auto& [term, count] : b) nb += count * count;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double tf_cosine(std::string_view a, std::string_view b) {
    return tf_cosine(term_frequencies(a), term_frequencies(b));
}

bool contains_phrase(std::string_view text, std::string_view phrase) {
    const std::string hay = " " + normalize(text) + " ";
    const std::string needle = " " + normalize(phrase) + " ";
    if (needle.size() <= 2) return false;
    return hay.find(needle) != std::string::npos;
}

} // namespace cogstream::terms
