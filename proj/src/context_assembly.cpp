#include "cogstream/context_assembly.hpp"

#include "cogstream/error.hpp"
#include "cogstream/text_terms.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace cogstream {

double ContextUnit::time() const {
    if (const auto* v = std::get_if<VisualUnit>(&content)) return v->start_time;
    return std::get<TextUnit>(content).ask_time;
}

std::size_t ContextPackage::visual_token_count() const {
    std::size_t n = 0;
    for (const auto& u : units)
        if (const auto* v = std::get_if<VisualUnit>(&u.content)) n += v->token_count();
    return n;
}

namespace {

std::size_t word_count(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : s) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

std::string time_tag(double t) {
    std::ostringstream out;
    out << "[t=" << std::fixed << std::setprecision(2) << t << "s]";
    return out.str();
}

} // namespace

std::size_t ContextPackage::text_token_count() const {
    std::size_t n = word_count(current_question);
    for (const auto& u : units)
        if (const auto* t = std::get_if<TextUnit>(&u.content)) n += word_count(t->question) + word_count(t->answer);
    return n;
}

std::set<int> ContextPackage::qa_ids() const {
    std::set<int> out;
    for (const auto& u : units)
        if (const auto* t = std::get_if<TextUnit>(&u.content)) out.insert(t->qa_id);
    return out;
}

std::vector<std::size_t> ContextPackage::visual_event_ids() const {
    std::vector<std::size_t> out;
    for (const auto& u : units)
        if (const auto* v = std::get_if<VisualUnit>(&u.content)) out.push_back(v->event_id);
    return out;
}

ContextPackage assemble(std::span<const VisualUnit> visual, std::span<const TextUnit> retrieved, int delta,
                        std::string question) {
    if (delta != 0 && delta != 1) throw Error(ErrorKind::invalid_argument, "delta must be 0 or 1");
    std::set<int> seen;
    for (const auto& t : retrieved)
        if (!seen.insert(t.qa_id).second)
            throw Error(ErrorKind::invalid_argument, "qa " + std::to_string(t.qa_id) + " retrieved twice");

    ContextPackage pkg;
    pkg.delta = delta;
    pkg.current_question = std::move(question);
    if (delta == 0)
        for (const auto& v : visual) pkg.units.push_back({v});
    for (const auto& t : retrieved) pkg.units.push_back({t});

    auto key_id = [](const ContextUnit& u) -> long long {
        if (const auto* v = std::get_if<VisualUnit>(&u.content)) return static_cast<long long>(v->event_id);
        return std::get<TextUnit>(u.content).qa_id;
    };
    std::sort(pkg.units.begin(), pkg.units.end(), [&](const ContextUnit& a, const ContextUnit& b) {
        if (a.time() != b.time()) return a.time() < b.time();
        if (a.is_visual() != b.is_visual()) return a.is_visual();
        return key_id(a) < key_id(b);
    });
    return pkg;
}

nlohmann::json render_layout(const ContextPackage& package, const LayoutTemplate& layout) {
    nlohmann::json units = nlohmann::json::array();
    std::ostringstream text;
    for (const auto& u : package.units) {
        text << time_tag(u.time()) << ' ';
        if (const auto* v = std::get_if<VisualUnit>(&u.content)) {
            const char* mode = v->preserved() ? "preserved" : "pooled";
            units.push_back({{"kind", "visual"},
                             {"time", u.time()},
                             {"event_id", v->event_id},
                             {"mode", mode},
                             {"frames", v->frame_count()},
                             {"tokens", v->token_count()}});
            text << '<' << layout.visual_tag << " event=" << v->event_id << " mode=" << mode
                 << " tokens=" << v->token_count() << "/>\n";
        } else {
            const auto& t = std::get<TextUnit>(u.content);
            units.push_back({{"kind", "text"},
                             {"time", u.time()},
                             {"qa_id", t.qa_id},
                             {"question", t.question},
                             {"answer", t.answer}});
            text << layout.history_question_label << t.question << ' ' << layout.answer_label << t.answer << '\n';
        }
    }
    text << layout.question_label << package.current_question;
    return {{"delta", package.delta},
            {"units", std::move(units)},
            {"question", package.current_question},
            {"layout", text.str()}};
}

std::string echo_digest(const ContextPackage& package) {
    std::ostringstream out;
    out << "echo|q=" << terms::normalize(package.current_question) << "|delta=" << package.delta << "|visual=";
    bool first = true;
    for (std::size_t id : package.visual_event_ids()) {
        out << (first ? "" : ",") << id;
        first = false;
    }
    out << "|text=";
    first = true;
    for (const auto& u : package.units) {
        if (const auto* t = std::get_if<TextUnit>(&u.content)) {
            out << (first ? "" : ",") << t->qa_id;
            first = false;
        }
    }
    return out.str();
}

AnswerRecord answer(const ContextPackage& package, int qa_id, AnswerGenerator* generator,
                    const LayoutTemplate& layout) {
    AnswerRecord rec;
    rec.qa_id = qa_id;
    rec.visual_tokens = package.visual_token_count();
    rec.text_tokens = package.text_token_count();
    if (!generator) {
        rec.answer = echo_digest(package);
        rec.provider = std::string(kEchoGeneratorId);
        return rec;
    }
    rec.provider = generator->id();
    auto stats = [&] {
        std::ostringstream s;
        s << " [package: " << package.units.size() << " units, " << rec.visual_tokens << " visual tokens, "
          << rec.text_tokens << " text tokens, delta=" << package.delta << "]";
        return s.str();
    };
    try {
        rec.answer = generator->generate(render_layout(package, layout));
    } catch (const std::exception& e) {
        throw Error(ErrorKind::provider, generator->id() + " failed: " + e.what() + stats());
    }
    if (rec.answer.empty()) throw Error(ErrorKind::provider, generator->id() + " returned an empty answer" + stats());
    return rec;
}

} // namespace cogstream
