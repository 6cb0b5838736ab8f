#pragma once

#include <stdexcept>
#include <string>

namespace isotropica {

// Refusal raised by a numerical guard (resolution, step size, window
// completeness, ...). Carries the guard's name so callers (and the CLI,
// which maps these to exit code 3) can report which guard fired.
class guard_error : public std::runtime_error {
public:
    guard_error(std::string guard, const std::string& msg)
        : std::runtime_error(guard + ": " + msg), guard_(std::move(guard)) {}
    const std::string& guard() const noexcept { return guard_; }

private:
    std::string guard_;
};

// Parameter / schema violations map to std::invalid_argument (CLI exit 2).
inline void require_arg(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

inline void require_guard(bool ok, const std::string& guard, const std::string& msg) {
    if (!ok) throw guard_error(guard, msg);
}

} // namespace isotropica
