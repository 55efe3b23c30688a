#include "cogstream/providers.hpp"

#include "cogstream/error.hpp"

#include <cmath>

namespace cogstream {

using nlohmann::json;

namespace {

json call(const JsonTransport& transport, const std::string& endpoint, const json& body) {
    try {
        return transport(endpoint, body);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::provider, endpoint + ": " + e.what());
    }
}

template <typename T>
T field(const json& reply, const char* name, const std::string& endpoint) {
    try {
        return reply.at(name).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::provider, endpoint + ": reply lacks a valid '" + name + "' field (" + e.what() + ")");
    }
}

json matrix_json(const FeatureMatrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        rows.push_back(std::vector<float>(row.begin(), row.end()));
    }
    return rows;
}

class RemoteSummarizer final : public EventSummarizer {
public:
    RemoteSummarizer(std::string endpoint, JsonTransport t) : endpoint_(std::move(endpoint)), transport_(std::move(t)) {}
    std::string id() const override { return "remote:" + endpoint_; }
    std::vector<Vector> hidden_states(const FeatureMatrix& tokens, std::string_view prompt) override {
        const json body{{"task", "summarize_event"},
                        {"prompt", std::string(prompt)},
                        {"rows", tokens.rows()},
                        {"cols", tokens.cols()},
                        {"features", matrix_json(tokens)}};
        return field<std::vector<Vector>>(call(transport_, endpoint_, body), "hidden_states", endpoint_);
    }

private:
    std::string endpoint_;
    JsonTransport transport_;
};

class RemoteEmbedder final : public TextEmbedder {
public:
    RemoteEmbedder(std::string endpoint, JsonTransport t) : endpoint_(std::move(endpoint)), transport_(std::move(t)) {}
    std::string id() const override { return "remote:" + endpoint_; }
    Vector embed(std::string_view text) override {
        const json body{{"task", "embed_text"}, {"text", std::string(text)}};
        return field<Vector>(call(transport_, endpoint_, body), "embedding", endpoint_);
    }

private:
    std::string endpoint_;
    JsonTransport transport_;
};

class RemoteRetriever final : public RetrievalModel {
public:
    RemoteRetriever(std::string endpoint, JsonTransport t) : endpoint_(std::move(endpoint)), transport_(std::move(t)) {}
    std::string id() const override { return "remote:" + endpoint_; }
    std::string complete(const json& request) override {
        json body = request;
        body["task"] = "retrieve";
        return field<std::string>(call(transport_, endpoint_, body), "reply", endpoint_);
    }

private:
    std::string endpoint_;
    JsonTransport transport_;
};

class RemoteScorer final : public RelevanceScorer {
public:
    RemoteScorer(std::string endpoint, JsonTransport t) : endpoint_(std::move(endpoint)), transport_(std::move(t)) {}
    std::string id() const override { return "remote:" + endpoint_; }
    double score(const QARecord& current, const QARecord& prior) override {
        const json body{{"task", "score_relevance"},
                        {"prompt", std::string(kRelevancePrompt)},
                        {"current", {{"qa_id", current.qa_id}, {"question", current.question}, {"answer", current.answer}}},
                        {"prior", {{"qa_id", prior.qa_id}, {"question", prior.question}, {"answer", prior.answer}}}};
        const double s = field<double>(call(transport_, endpoint_, body), "score", endpoint_);
        if (!std::isfinite(s)) throw Error(ErrorKind::provider, endpoint_ + ": non-finite score");
        return s;
    }

private:
    std::string endpoint_;
    JsonTransport transport_;
};

class RemoteGenerator final : public AnswerGenerator {
public:
    RemoteGenerator(std::string endpoint, JsonTransport t) : endpoint_(std::move(endpoint)), transport_(std::move(t)) {}
    std::string id() const override { return "remote:" + endpoint_; }
    std::string generate(const json& payload) override {
        json body = payload;
        body["task"] = "answer";
        return field<std::string>(call(transport_, endpoint_, body), "answer", endpoint_);
    }

private:
    std::string endpoint_;
    JsonTransport transport_;
};

} // namespace

std::unique_ptr<EventSummarizer> make_remote_summarizer(std::string endpoint, JsonTransport transport) {
    return std::make_unique<RemoteSummarizer>(std::move(endpoint), std::move(transport));
}
std::unique_ptr<TextEmbedder> make_remote_embedder(std::string endpoint, JsonTransport transport) {
    return std::make_unique<RemoteEmbedder>(std::move(endpoint), std::move(transport));
}
std::unique_ptr<RetrievalModel> make_remote_retriever(std::string endpoint, JsonTransport transport) {
    return std::make_unique<RemoteRetriever>(std::move(endpoint), std::move(transport));
}
std::unique_ptr<RelevanceScorer> make_remote_scorer(std::string endpoint, JsonTransport transport) {
    return std::make_unique<RemoteScorer>(std::move(endpoint), std::move(transport));
}
std::unique_ptr<AnswerGenerator> make_remote_generator(std::string endpoint, JsonTransport transport) {
    return std::make_unique<RemoteGenerator>(std::move(endpoint), std::move(transport));
}

} // namespace cogstream
