#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "benign/model.hpp"

namespace benign {

/// 17 significant digits, "%.17g" style; "nan" / "inf" / "-inf" otherwise.
std::string format_double(double x);

inline constexpr const char* kTraceHeader =
    "t,train_loss,resid_norm,test_loss_l2,test_loss_sq,signal_error_inf,v_norm,v_s_norm,second_order_norm,"
    "w_off_inf,u_off_inf,a_t,b_t,gamma_inf,zeta_inf";

void write_trace_row(std::ostream& out, const TraceRecord& rec);
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRecord>& trace);

/// Parses a trace CSV written by write_trace_csv.
std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path);

/// Splits one CSV line on commas (no quoting; none of our fields need it).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace benign
