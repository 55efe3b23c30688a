#include "cogstream/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace cogstream::log {
namespace {

std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;
Sink g_sink;

const char* tag(Level level) {
    switch (level) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
    case Level::off: break;
    }
    return "";
}

} // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void set_sink(Sink sink) {
    std::lock_guard lock(g_mutex);
    g_sink = std::move(sink);
}

void write(Level lvl, std::string_view message) {
    if (lvl < g_level.load() || lvl == Level::off) return;
    std::lock_guard lock(g_mutex);
    if (g_sink) {
        g_sink(lvl, message);
        return;
    }
    std::clog << "[cogstream " << tag(lvl) << "] " << message << '\n';
}

} // namespace cogstream::log
