#pragma once

#include "cogstream/feature_store.hpp"

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cogstream {

// Model endpoints the engine can call. Every stage that uses one also has a
// deterministic local fallback, so a null provider is always valid.

class EventSummarizer {
public:
    virtual ~EventSummarizer() = default;
    virtual std::string id() const = 0;
    // Final-layer hidden states (tokens x hidden) for the concatenated event
    // features followed by the summarization prompt.
    virtual std::vector<Vector> hidden_states(const FeatureMatrix& tokens, std::string_view prompt) = 0;
};

class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual std::string id() const = 0;
    virtual Vector embed(std::string_view text) = 0;
};

class RetrievalModel {
public:
    virtual ~RetrievalModel() = default;
    virtual std::string id() const = 0;
    // Returns the raw constrained reply, e.g. "delta=0;selected=2,5".
    virtual std::string complete(const nlohmann::json& request) = 0;
};

class RelevanceScorer {
public:
    virtual ~RelevanceScorer() = default;
    virtual std::string id() const = 0;
    virtual double score(const QARecord& current, const QARecord& prior) = 0;
};

class AnswerGenerator {
public:
    virtual ~AnswerGenerator() = default;
    virtual std::string id() const = 0;
    virtual std::string generate(const nlohmann::json& payload) = 0;
};

// Judge-model grading of generated answers is not implemented by the engine;
// the interface exists so a grader can be plugged in by callers.
class AnswerJudge {
public:
    virtual ~AnswerJudge() = default;
    virtual std::string id() const = 0;
    virtual double grade(std::string_view metric, const nlohmann::json& sample) = 0;
};

// POSTs a JSON body to an endpoint and returns the parsed JSON reply.
using JsonTransport = std::function<nlohmann::json(const std::string& endpoint, const nlohmann::json& body)>;

// cpp-httplib backed transport for "http://host[:port]/path" endpoints.
JsonTransport http_transport(std::chrono::milliseconds timeout = std::chrono::seconds(60));

std::unique_ptr<EventSummarizer> make_remote_summarizer(std::string endpoint, JsonTransport transport);
std::unique_ptr<TextEmbedder> make_remote_embedder(std::string endpoint, JsonTransport transport);
std::unique_ptr<RetrievalModel> make_remote_retriever(std::string endpoint, JsonTransport transport);
std::unique_ptr<RelevanceScorer> make_remote_scorer(std::string endpoint, JsonTransport transport);
std::unique_ptr<AnswerGenerator> make_remote_generator(std::string endpoint, JsonTransport transport);

inline constexpr std::string_view kEventSummaryPrompt =
    "Summarize the events shown in these video frames: the objects present, the actions taking place, "
    "and how they change over time.";

inline constexpr std::string_view kRelevancePrompt =
    "Rate from 0 to 7 how much the prior question-answer pair helps answer the current one. "
    "Consider shared content (objects, events) and logical support (causal or multi-step chains). "
    "0-2: unrelated; 2-4: loosely related; 4-6: supportive; 6-7: essential.";

} // namespace cogstream
