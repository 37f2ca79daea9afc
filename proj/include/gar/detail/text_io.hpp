#pragma once

#include <cstdlib>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "gar/error.hpp"

namespace gar::detail {

// Sequential line reader that tracks the 1-based line number for errors.
class LineReader {
public:
    LineReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

    std::string next(const char* what) {
        std::string line;
        if (!std::getline(in_, line)) {
            throw ParseError(name_ + ": expected " + std::string(what) + ", hit end of file",
                             line_ + 1);
        }
        ++line_;
        return line;
    }

    bool try_next(std::string& line) {
        if (!std::getline(in_, line)) return false;
        ++line_;
        return true;
    }

    std::size_t line() const { return line_; }
    const std::string& name() const { return name_; }

private:
    std::istream& in_;
    std::string name_;
    std::size_t line_ = 0;
};

inline std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

inline std::size_t parse_count(const std::string& tok, const LineReader& r, const char* what) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ParseError(r.name() + ": bad " + std::string(what) + " '" + tok + "'", r.line());
    }
}

inline double parse_real(const std::string& tok, const LineReader& r) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || tok.empty()) {
        throw ParseError(r.name() + ": bad real '" + tok + "'", r.line());
    }
    return v;
}

inline void expect_magic(const std::string& line, const char* magic, int version,
                         const LineReader& r) {
    auto toks = split_tokens(line);
    if (toks.size() != 2 || toks[0] != magic) {
        throw ParseError(r.name() + ": expected header '" + magic + " <version>'", r.line());
    }
    if (toks[1] != std::to_string(version)) {
        throw ParseError(r.name() + ": unsupported format version " + toks[1], r.line());
    }
}

} // namespace gar::detail
