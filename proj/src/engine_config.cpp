#include "cogstream/engine_config.hpp"

#include "cogstream/error.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

namespace cogstream {

using nlohmann::json;

std::string_view to_string(RetrievalMode mode) {
    switch (mode) {
    case RetrievalMode::fallback: return "fallback";
    case RetrievalMode::provider: return "provider";
    case RetrievalMode::oracle: return "oracle";
    }
    return "unknown";
}

RetrievalMode parse_retrieval_mode(std::string_view name) {
    if (name == "fallback") return RetrievalMode::fallback;
    if (name == "provider") return RetrievalMode::provider;
    if (name == "oracle") return RetrievalMode::oracle;
    throw Error(ErrorKind::invalid_config, "unknown retrieval mode '" + std::string(name) + "'");
}

void validate(const EngineConfig& c) {
    if (c.cluster_ratio.num == 0 || c.cluster_ratio.den == 0)
        throw Error(ErrorKind::invalid_config, "cluster ratio must be a positive fraction");
    if (!(c.alpha_time >= 0.0) || !std::isfinite(c.alpha_time))
        throw Error(ErrorKind::invalid_config, "alpha_time must be finite and >= 0");
    if (!(c.epsilon >= 0.0)) throw Error(ErrorKind::invalid_config, "epsilon must be >= 0");
    if (c.max_iters < 1) throw Error(ErrorKind::invalid_config, "max_iters must be >= 1");
    validate(c.compression);
    validate(c.paths);
    if (!(c.lexical.threshold >= 0.0 && c.lexical.threshold <= 1.0))
        throw Error(ErrorKind::invalid_config, "retrieval threshold must lie in [0, 1]");
    if (c.retrieval_mode == RetrievalMode::provider && c.providers.retriever.empty())
        throw Error(ErrorKind::invalid_config, "retrieval mode 'provider' needs providers.retriever");
    if (c.providers.timeout_ms <= 0) throw Error(ErrorKind::invalid_config, "provider timeout must be positive");
}

json to_json(const EngineConfig& c) {
    return {
        {"cluster",
         {{"ratio", {{"num", c.cluster_ratio.num}, {"den", c.cluster_ratio.den}}},
          {"alpha_time", c.alpha_time},
          {"epsilon", c.epsilon},
          {"max_iters", c.max_iters}}},
        {"compression", {{"theta", c.compression.theta}}},
        {"retrieval",
         {{"mode", std::string(to_string(c.retrieval_mode))},
          {"threshold", c.lexical.threshold},
          {"recall_overlap", c.lexical.recall_overlap},
          {"history_uses_gold_answers", c.history_uses_gold_answers}}},
        {"paths",
         {{"alpha_len", c.paths.alpha_len},
          {"num_paths", c.paths.num_paths},
          {"basic_per_segment", c.paths.basic_per_segment},
          {"complex_per_segment", c.paths.complex_per_segment},
          {"force_global_inclusion", c.paths.force_global_inclusion}}},
        {"seed", c.seed},
        {"providers",
         {{"summarizer", c.providers.summarizer},
          {"embedder", c.providers.embedder},
          {"retriever", c.providers.retriever},
          {"scorer", c.providers.scorer},
          {"generator", c.providers.generator},
          {"fallback_on_failure", c.providers.fallback_on_failure},
          {"timeout_ms", c.providers.timeout_ms}}},
        {"record_timing", c.record_timing},
    };
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    if (!obj.is_object()) throw Error(ErrorKind::invalid_config, where + " must be an object");
    for (const auto& [key, value] : obj.items())
        if (!known.count(key)) throw Error(ErrorKind::invalid_config, "unknown config key " + where + "." + key);
}

template <typename T>
void read(const json& obj, const char* key, T& target) {
    if (obj.contains(key)) target = obj.at(key).get<T>();
}

} // namespace

EngineConfig config_from_json(const json& doc) {
    EngineConfig c;
    try {
        reject_unknown(doc, {"cluster", "compression", "retrieval", "paths", "seed", "providers", "record_timing"},
                       "config");
        if (doc.contains("cluster")) {
            const auto& j = doc.at("cluster");
            reject_unknown(j, {"ratio", "alpha_time", "epsilon", "max_iters"}, "cluster");
            if (j.contains("ratio")) {
                const auto& r = j.at("ratio");
                reject_unknown(r, {"num", "den"}, "cluster.ratio");
                read(r, "num", c.cluster_ratio.num);
                read(r, "den", c.cluster_ratio.den);
            }
            read(j, "alpha_time", c.alpha_time);
            read(j, "epsilon", c.epsilon);
            read(j, "max_iters", c.max_iters);
        }
        if (doc.contains("compression")) {
            const auto& j = doc.at("compression");
            reject_unknown(j, {"theta"}, "compression");
            read(j, "theta", c.compression.theta);
        }
        if (doc.contains("retrieval")) {
            const auto& j = doc.at("retrieval");
            reject_unknown(j, {"mode", "threshold", "recall_overlap", "history_uses_gold_answers"}, "retrieval");
            if (j.contains("mode")) c.retrieval_mode = parse_retrieval_mode(j.at("mode").get<std::string>());
            read(j, "threshold", c.lexical.threshold);
            read(j, "recall_overlap", c.lexical.recall_overlap);
            read(j, "history_uses_gold_answers", c.history_uses_gold_answers);
        }
        if (doc.contains("paths")) {
            const auto& j = doc.at("paths");
            reject_unknown(j, {"alpha_len", "num_paths", "basic_per_segment", "complex_per_segment",
                               "force_global_inclusion"},
                           "paths");
            read(j, "alpha_len", c.paths.alpha_len);
            read(j, "num_paths", c.paths.num_paths);
            read(j, "basic_per_segment", c.paths.basic_per_segment);
            read(j, "complex_per_segment", c.paths.complex_per_segment);
            read(j, "force_global_inclusion", c.paths.force_global_inclusion);
        }
        read(doc, "seed", c.seed);
        if (doc.contains("providers")) {
            const auto& j = doc.at("providers");
            reject_unknown(j, {"summarizer", "embedder", "retriever", "scorer", "generator", "fallback_on_failure",
                               "timeout_ms"},
                           "providers");
            read(j, "summarizer", c.providers.summarizer);
            read(j, "embedder", c.providers.embedder);
            read(j, "retriever", c.providers.retriever);
            read(j, "scorer", c.providers.scorer);
            read(j, "generator", c.providers.generator);
            read(j, "fallback_on_failure", c.providers.fallback_on_failure);
            read(j, "timeout_ms", c.providers.timeout_ms);
        }
        read(doc, "record_timing", c.record_timing);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::invalid_config, std::string("config: ") + e.what());
    }
    c.paths.seed = c.seed;
    validate(c);
    return c;
}

EngineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    try {
        return config_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::parse, "config " + path.string() + ": " + e.what());
    }
}

ProviderSet make_providers(const ProviderEndpoints& ep, JsonTransport transport) {
    ProviderSet set;
    set.fallback_on_failure = ep.fallback_on_failure;
    if (!ep.summarizer.empty()) set.summarizer = make_remote_summarizer(ep.summarizer, transport);
    if (!ep.embedder.empty()) set.embedder = make_remote_embedder(ep.embedder, transport);
    if (!ep.retriever.empty()) set.retriever = make_remote_retriever(ep.retriever, transport);
    if (!ep.scorer.empty()) set.scorer = make_remote_scorer(ep.scorer, transport);
    if (!ep.generator.empty()) set.generator = make_remote_generator(ep.generator, transport);
    return set;
}

ProviderSet make_providers(const ProviderEndpoints& ep) {
    return make_providers(ep, http_transport(std::chrono::milliseconds(ep.timeout_ms)));
}

} // namespace cogstream
