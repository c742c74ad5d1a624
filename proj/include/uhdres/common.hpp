#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace uhdres {

#ifdef UHDRES_DEFAULT_REAL_DOUBLE
using real_t = double;
#else
using real_t = float;
#endif

// Shape/contract violations caused by caller-supplied tensors or arguments.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Precondition violations that are not shape related (out-of-range step,
// empty dataset, non-scalar loss, ...).
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration values (invalid channel plan, unknown config key, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / stream failures.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file contents (bad magic, bad header fields, truncation).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<int64_t>;

inline int64_t numel_of(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    out += ")";
    return out;
}

inline void check_shape(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

inline void check_contract(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

// Number of worker threads used by the spatial loops. Reads UHDRES_THREADS on
// first use; results are bitwise independent of this value because parallel
// loops only ever partition disjoint output slabs.
int thread_count();

}  // namespace uhdres
