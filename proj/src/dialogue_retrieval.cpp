#include "cogstream/dialogue_retrieval.hpp"

#include "cogstream/error.hpp"
#include "cogstream/log.hpp"
#include "cogstream/text_terms.hpp"

#include <cctype>
#include <iomanip>
#include <limits>
#include <sstream>

namespace cogstream {

void DialogueHistory::append(HistoryItem item) {
    if (find(item.qa_id))
        throw Error(ErrorKind::invalid_argument, "dialogue history already holds qa " + std::to_string(item.qa_id));
    if (!items_.empty() && item.ask_time < items_.back().ask_time)
        throw Error(ErrorKind::invalid_argument, "dialogue history ask times must not decrease");
    items_.push_back(std::move(item));
}

std::set<int> DialogueHistory::ids() const {
    std::set<int> out;
    for (const auto& it : items_) out.insert(it.qa_id);
    return out;
}

const HistoryItem* DialogueHistory::find(int qa_id) const {
    for (const auto& it : items_)
        if (it.qa_id == qa_id) return &it;
    return nullptr;
}

// --- constrained reply grammar ---------------------------------------------

namespace {

class ReplyParser {
public:
    ReplyParser(std::string_view text, const std::set<int>* allowed) : text_(text), allowed_(allowed) {}

    RetrievalOutput parse() {
        RetrievalOutput out;
        skip_ws();
        expect("delta");
        skip_ws();
        expect("=");
        skip_ws();
        if (peek() == '0' || peek() == '1') {
            out.delta = peek() - '0';
            ++pos_;
        } else {
            fail("delta must be 0 or 1");
        }
        skip_ws();
        expect(";");
        skip_ws();
        expect("selected");
        skip_ws();
        expect("=");
        skip_ws();
        if (at_end()) return out;
        if (text_.substr(pos_).starts_with("\xE2\x88\x85")) {
            pos_ += 3;
        } else {
            add_id(out);
            skip_ws();
            while (!at_end() && peek() == ',') {
                ++pos_;
                skip_ws();
                add_id(out);
                skip_ws();
            }
        }
        skip_ws();
        if (!at_end()) fail("unexpected trailing text");
        return out;
    }

private:
    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return at_end() ? '\0' : text_[pos_]; }

    void skip_ws() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    void expect(std::string_view token) {
        if (text_.substr(pos_, token.size()) != token) fail("expected '" + std::string(token) + "'");
        pos_ += token.size();
    }

    void add_id(RetrievalOutput& out) {
        if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("expected a qa id");
        long long value = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) {
            value = value * 10 + (peek() - '0');
            if (value > std::numeric_limits<int>::max()) fail("qa id too large");
            ++pos_;
        }
        const int id = static_cast<int>(value);
        if (allowed_ && !allowed_->count(id)) fail("qa id " + std::to_string(id) + " is not in the history");
        out.selected_ids.insert(id);
    }

    [[noreturn]] void fail(const std::string& why) const {
        throw Error(ErrorKind::parse, "constrained reply at offset " + std::to_string(pos_) + ": " + why +
                                          " in \"" + std::string(text_) + "\"");
    }

    std::string_view text_;
    const std::set<int>* allowed_;
    std::size_t pos_ = 0;
};

} // namespace

RetrievalOutput parse_constrained(std::string_view text, const std::set<int>* allowed) {
    return ReplyParser(text, allowed).parse();
}

std::string render_constrained(const RetrievalOutput& output) {
    std::string out = "delta=" + std::to_string(output.delta) + ";selected=";
    bool first = true;
    for (int id : output.selected_ids) {
        if (!first) out.push_back(',');
        out += std::to_string(id);
        first = false;
    }
    return out;
}

// --- retrieval --------------------------------------------------------------

const std::vector<std::string>& recall_cues() {
    static const std::vector<std::string> cues{"what did i ask", "how did you respond", "you said"};
    return cues;
}

RetrievalOutput lexical_fallback(const DialogueHistory& history, std::string_view question,
                                 const LexicalRetrievalConfig& config) {
    RetrievalOutput out;
    const auto q_terms = terms::term_frequencies(question);
    double top = 0.0;
    for (const auto& item : history.items()) {
        const double overlap = terms::tf_cosine(q_terms, terms::term_frequencies(item.question + " " + item.answer));
        if (overlap >= config.threshold) out.selected_ids.insert(item.qa_id);
        top = std::max(top, overlap);
    }
    bool cue = false;
    for (const auto& c : recall_cues()) cue = cue || terms::contains_phrase(question, c);
    out.delta = (cue && top > config.recall_overlap) ? 1 : 0;
    return out;
}

nlohmann::json retrieval_request(const DialogueHistory& history, std::string_view question) {
    nlohmann::json items = nlohmann::json::array();
    std::ostringstream prompt;
    prompt << "Historical dialogue:\n";
    for (const auto& it : history.items()) {
        items.push_back(
            {{"id", it.qa_id}, {"question", it.question}, {"answer", it.answer}, {"ask_time", it.ask_time}});
        prompt << '[' << it.qa_id << "] (t=" << std::fixed << std::setprecision(2) << it.ask_time << "s) Q: "
               << it.question << " A: " << it.answer << '\n';
    }
    prompt << "Current question: " << question << '\n'
           << "Select the ids of the historical pairs needed to answer it and set delta=1 if the dialogue alone "
              "answers it.\nReply exactly as delta=<0|1>;selected=<comma-separated ids>";
    return {{"history", std::move(items)}, {"question", std::string(question)}, {"prompt", prompt.str()}};
}

RetrievalOutput retrieve(const DialogueHistory& history, std::string_view question, RetrievalModel* model,
                         const LexicalRetrievalConfig& config) {
    if (!model) {
        if (history.empty()) return {};
        return lexical_fallback(history, question, config);
    }

    const auto request = retrieval_request(history, question);
    const auto allowed = history.ids();
    std::string reply;
    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            reply = model->complete(request);
        } catch (const std::exception& e) {
            throw Error(ErrorKind::retrieval, model->id() + " failed: " + e.what());
        }
        try {
            return parse_constrained(reply, &allowed);
        } catch (const Error& e) {
            log::warn("retrieval reply rejected (attempt " + std::to_string(attempt + 1) + "): " + e.what());
        }
    }
    throw Error(ErrorKind::retrieval, "unparseable retrieval reply after retry; raw reply: \"" + reply + "\"");
}

// --- metrics ----------------------------------------------------------------

ConfusionCounts confusion(const std::set<int>& predicted, const std::set<int>& gold, const std::set<int>& history_ids) {
    for (int id : predicted)
        if (!history_ids.count(id))
            throw Error(ErrorKind::invalid_argument, "predicted id " + std::to_string(id) + " is not in the history");
    for (int id : gold)
        if (!history_ids.count(id))
            throw Error(ErrorKind::invalid_argument, "gold id " + std::to_string(id) + " is not in the history");

    ConfusionCounts c;
    for (int id : history_ids) {
        const bool p = predicted.count(id) > 0;
        const bool g = gold.count(id) > 0;
        if (p && g) ++c.tp;
        else if (p) ++c.fp;
        else if (g) ++c.fn;
        else ++c.tn;
    }
    return c;
}

RetrievalMetrics metrics_from(const ConfusionCounts& c) {
    RetrievalMetrics m;
    m.counts = c;
    const auto ratio = [](std::size_t num, std::size_t den) {
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.accuracy = c.total() == 0 ? 1.0 : ratio(c.tp + c.tn, c.total());
    m.precision = (c.tp + c.fp) > 0 ? ratio(c.tp, c.tp + c.fp) : (c.fn == 0 ? 1.0 : 0.0);
    m.recall = (c.tp + c.fn) > 0 ? ratio(c.tp, c.tp + c.fn) : (c.fp == 0 ? 1.0 : 0.0);
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

RetrievalMetrics score_retrieval(const RetrievalOutput& predicted, const std::set<int>& gold,
                                 const std::set<int>& history_ids) {
    return metrics_from(confusion(predicted.selected_ids, gold, history_ids));
}

nlohmann::json to_json(const RetrievalOutput& output) {
    return {{"selected_ids", output.selected_ids}, {"delta", output.delta}};
}

nlohmann::json to_json(const RetrievalMetrics& m) {
    return {{"accuracy", m.accuracy},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"tp", m.counts.tp},
            {"fp", m.counts.fp},
            {"fn", m.counts.fn},
            {"tn", m.counts.tn}};
}

} // namespace cogstream
