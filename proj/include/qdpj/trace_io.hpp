#ifndef QDPJ_TRACE_IO_HPP_
#define QDPJ_TRACE_IO_HPP_

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qdpj/admm.hpp"

namespace qdpj {

/// Header row of every trace file. Missing gap metrics are written as empty
/// fields; wallclock_ms is 0 unless timing was requested.
inline constexpr const char* kTraceHeader =
    "k,residual_norm,lagrangian_gap,l1_error,consensus_rounds,merit,wallclock_ms,pieces_sent,bits_estimate";

void write_trace_csv(std::ostream& out, std::span<const IterationTrace> trace);

/// Throws InvalidArgument on an empty stream, a foreign header or a malformed row.
std::vector<IterationTrace> read_trace_csv(std::istream& in);

}  // namespace qdpj

#endif  // QDPJ_TRACE_IO_HPP_
