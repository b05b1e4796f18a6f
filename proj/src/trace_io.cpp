#include "qdpj/trace_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

namespace qdpj {

namespace {

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17e", v);
    return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

double parse_real(const std::string& s, std::size_t line_no) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') {
        throw InvalidArgument("trace: bad number '" + s + "' on line " + std::to_string(line_no));
    }
    return v;
}

std::uint64_t parse_count(const std::string& s, std::size_t line_no) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0') {
        throw InvalidArgument("trace: bad integer '" + s + "' on line " + std::to_string(line_no));
    }
    return v;
}

std::optional<double> parse_optional(const std::string& s, std::size_t line_no) {
    if (s.empty()) return std::nullopt;
    return parse_real(s, line_no);
}

}  // namespace

void write_trace_csv(std::ostream& out, std::span<const IterationTrace> trace) {
    out << kTraceHeader << '\n';
    for (const auto& r : trace) {
        out << r.k << ',' << format_real(r.residual_norm) << ',' << format_optional(r.lagrangian_gap) << ','
            << format_optional(r.l1_error) << ',' << r.consensus_rounds << ',' << format_optional(r.merit) << ','
            << format_real(r.wallclock_ms) << ',' << r.pieces_sent << ',' << r.bits_estimate << '\n';
    }
}

std::vector<IterationTrace> read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw InvalidArgument("trace: empty file");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTraceHeader) {
        throw InvalidArgument("trace: unexpected header '" + line + "'");
    }
    std::vector<IterationTrace> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 9) {
            throw InvalidArgument("trace: expected 9 fields on line " + std::to_string(line_no));
        }
        IterationTrace r;
        r.k = parse_count(f[0], line_no);
        r.residual_norm = parse_real(f[1], line_no);
        r.lagrangian_gap = parse_optional(f[2], line_no);
        r.l1_error = parse_optional(f[3], line_no);
        r.consensus_rounds = parse_count(f[4], line_no);
        r.merit = parse_optional(f[5], line_no);
        r.wallclock_ms = parse_real(f[6], line_no);
        r.pieces_sent = parse_count(f[7], line_no);
        r.bits_estimate = parse_count(f[8], line_no);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace qdpj
