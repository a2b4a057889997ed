#pragma once

#include <functional>
#include <string>
#include <vector>

namespace fecl::log {

using Sink = std::function<void(const std::string&)>;

/// Routes warnings; the default writes "warning: ..." to stderr. Returns the previous sink.
Sink set_warning_sink(Sink sink);
void warn(const std::string& message);

/// Collects warnings for the lifetime of the object, restoring the previous sink afterwards.
class ScopedWarningCapture {
public:
    ScopedWarningCapture();
    ~ScopedWarningCapture();
    ScopedWarningCapture(const ScopedWarningCapture&) = delete;
    ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }
    bool contains(const std::string& needle) const;

private:
    std::vector<std::string> messages_;
    Sink previous_;
};

}  // namespace fecl::log
