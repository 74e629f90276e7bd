#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vdiff {

using i64 = std::int64_t;
using u8 = std::uint8_t;
using u16 = std::uint16_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;

[[noreturn]] inline void fail_arg(const std::string& msg) {
    throw std::invalid_argument(msg);
}

inline void check_arg(bool ok, const std::string& msg) {
    if (!ok) fail_arg(msg);
}

[[noreturn]] inline void fail_runtime(const std::string& msg) {
    throw std::runtime_error(msg);
}

inline void check_runtime(bool ok, const std::string& msg) {
    if (!ok) fail_runtime(msg);
}

}  // namespace vdiff
