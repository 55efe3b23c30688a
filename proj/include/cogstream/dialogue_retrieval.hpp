#pragma once

#include "cogstream/providers.hpp"

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cogstream {

struct HistoryItem {
    int qa_id = 0;
    std::string question;
    std::string answer;
    double ask_time = 0.0;
};

class DialogueHistory {
public:
    // Throws invalid_argument on a repeated id or a timestamp that goes back.
    void append(HistoryItem item);

    const std::vector<HistoryItem>& items() const noexcept { return items_; }
    std::set<int> ids() const;
    bool empty() const noexcept { return items_.empty(); }
    std::size_t size() const noexcept { return items_.size(); }
    const HistoryItem* find(int qa_id) const;

private:
    std::vector<HistoryItem> items_;
};

struct RetrievalOutput {
    std::set<int> selected_ids;
    int delta = 0;

    friend bool operator==(const RetrievalOutput&, const RetrievalOutput&) = default;
};

// Grammar: delta=<0|1>;selected=<id(,id)*> with an empty list (or U+2205)
// meaning no selection. Whitespace is allowed between tokens; duplicates
// collapse. When `allowed` is given, ids outside it are rejected.
RetrievalOutput parse_constrained(std::string_view text, const std::set<int>* allowed = nullptr);
std::string render_constrained(const RetrievalOutput& output);

struct LexicalRetrievalConfig {
    double threshold = 0.3;
    double recall_overlap = 0.8;
};

// Phrases that mark a question as asking about the dialogue itself.
const std::vector<std::string>& recall_cues();

RetrievalOutput lexical_fallback(const DialogueHistory& history, std::string_view question,
                                 const LexicalRetrievalConfig& config = {});

// Provider request body: numbered history, current question, rendered prompt.
nlohmann::json retrieval_request(const DialogueHistory& history, std::string_view question);

// Uses the model when given (one retry on an unparseable reply), otherwise
// the lexical fallback.
RetrievalOutput retrieve(const DialogueHistory& history, std::string_view question, RetrievalModel* model = nullptr,
                         const LexicalRetrievalConfig& config = {});

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    std::size_t total() const { return tp + fp + fn + tn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct RetrievalMetrics {
    double accuracy = 1.0;
    double precision = 1.0;
    double recall = 1.0;
    double f1 = 1.0;
    ConfusionCounts counts;
};

ConfusionCounts confusion(const std::set<int>& predicted, const std::set<int>& gold, const std::set<int>& history_ids);

// Precision with no predictions is 1 only if nothing was missed (and
// symmetrically for recall), so an empty prediction against an empty gold
// set scores 1 everywhere.
RetrievalMetrics metrics_from(const ConfusionCounts& counts);

RetrievalMetrics score_retrieval(const RetrievalOutput& predicted, const std::set<int>& gold,
                                 const std::set<int>& history_ids);

nlohmann::json to_json(const RetrievalOutput& output);
nlohmann::json to_json(const RetrievalMetrics& metrics);

} // namespace cogstream
