#pragma once

#include <charconv>
#include <string>

namespace tmdp {

/// Shortest decimal text that reads back to exactly `x`. Locale independent,
/// so CSV output is byte-identical across runs.
inline std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

} // namespace tmdp
