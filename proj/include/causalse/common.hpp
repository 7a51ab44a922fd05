#pragma once

#include <stdexcept>
#include <string>

namespace causalse {

inline constexpr const char* kVersion = "0.1.0";

/// Error type thrown by every module. The message is meant to be shown
/// to the CLI user verbatim, so keep it self-contained.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

} // namespace causalse
