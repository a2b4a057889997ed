#include "fecl/log.hpp"

#include <iostream>
#include <mutex>

namespace fecl::log {

namespace {
std::mutex g_mutex;
Sink& sink_ref() {
    static Sink sink = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
    return sink;
}
}  // namespace

Sink set_warning_sink(Sink sink) {
    std::lock_guard lock(g_mutex);
    Sink previous = std::move(sink_ref());
    sink_ref() = std::move(sink);
    return previous;
}

void warn(const std::string& message) {
    std::lock_guard lock(g_mutex);
    if (sink_ref()) sink_ref()(message);
}

ScopedWarningCapture::ScopedWarningCapture()
    : previous_(set_warning_sink([this](const std::string& m) { messages_.push_back(m); })) {}

ScopedWarningCapture::~ScopedWarningCapture() { set_warning_sink(std::move(previous_)); }

bool ScopedWarningCapture::contains(const std::string& needle) const {
    for (const auto& m : messages_) {
        if (m.find(needle) != std::string::npos) return true;
    }
    return false;
}

}  // namespace fecl::log
