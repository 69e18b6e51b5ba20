#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace ttrk {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Violated precondition or contract (bad shapes, invalid arguments, missing
/// inputs). The CLI maps these to exit code 2.
class invalid_input : public error {
public:
    explicit invalid_input(const std::string& msg) : error(msg) {}
};

/// Malformed file content (container, image, config). The CLI maps these to
/// exit code 3.
class format_error : public error {
public:
    explicit format_error(const std::string& msg) : error(msg) {}
};

// Rounding mode used throughout: round half away from zero. std::llround
// implements exactly this for floating input.
inline std::int64_t round_half_away(double x) {
    return std::llround(x);
}

/// Integer division with round-half-away-from-zero, denominator > 0.
inline std::int64_t div_round_half_away(std::int64_t num, std::int64_t den) {
    return num >= 0 ? (2 * num + den) / (2 * den) : (2 * num - den) / (2 * den);
}

inline std::int32_t saturate_i32(std::int64_t v) {
    if (v > std::numeric_limits<std::int32_t>::max()) return std::numeric_limits<std::int32_t>::max();
    if (v < std::numeric_limits<std::int32_t>::min()) return std::numeric_limits<std::int32_t>::min();
    return static_cast<std::int32_t>(v);
}

inline std::int8_t clamp_i8(std::int64_t v) {
    if (v > 127) return 127;
    if (v < -128) return -128;
    return static_cast<std::int8_t>(v);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw invalid_input(msg);
}

} // namespace ttrk
