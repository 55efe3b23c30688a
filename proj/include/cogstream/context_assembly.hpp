#pragma once

#include "cogstream/providers.hpp"
#include "cogstream/stream_compress.hpp"

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace cogstream {

struct TextUnit {
    int qa_id = 0;
    std::string question;
    std::string answer;
    double ask_time = 0.0;
};

struct ContextUnit {
    std::variant<VisualUnit, TextUnit> content;

    bool is_visual() const { return std::holds_alternative<VisualUnit>(content); }
    // Visual units sort by their event's start time, text by ask time.
    double time() const;
};

struct ContextPackage {
    std::vector<ContextUnit> units;
    int delta = 0;
    std::string current_question;

    std::size_t visual_token_count() const;
    // Word count of every QA text plus the current question.
    std::size_t text_token_count() const;
    std::set<int> qa_ids() const;
    std::vector<std::size_t> visual_event_ids() const;
};

// Merges both lists into one time-ordered sequence; at equal times visual
// comes before text, then lower id first. delta = 1 drops all visual units.
ContextPackage assemble(std::span<const VisualUnit> visual, std::span<const TextUnit> retrieved, int delta,
                        std::string question);

struct LayoutTemplate {
    std::string visual_tag = "video";
    std::string question_label = "Question: ";
    std::string answer_label = "A: ";
    std::string history_question_label = "Q: ";
};

// Generator payload: structured unit list plus a rendered text layout that
// ends with the current question. Deterministic for a given package.
nlohmann::json render_layout(const ContextPackage& package, const LayoutTemplate& layout = {});

struct AnswerRecord {
    int qa_id = 0;
    std::string answer;
    std::size_t visual_tokens = 0;
    std::size_t text_tokens = 0;
    std::string provider;
};

inline constexpr std::string_view kEchoGeneratorId = "fallback-echo";

// Deterministic stand-in answer listing the question and the context ids.
std::string echo_digest(const ContextPackage& package);

AnswerRecord answer(const ContextPackage& package, int qa_id, AnswerGenerator* generator = nullptr,
                    const LayoutTemplate& layout = {});

} // namespace cogstream
