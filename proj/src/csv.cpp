#include "benign/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace benign {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_trace_row(std::ostream& out, const TraceRecord& rec) {
  out << rec.t << ',' << format_double(rec.train_loss) << ',' << format_double(rec.resid_norm) << ','
      << format_double(rec.test_loss_l2) << ',' << format_double(rec.test_loss_l2 * rec.test_loss_l2) << ','
      << format_double(rec.signal_error_inf) << ',' << format_double(rec.v_norm) << ','
      << format_double(rec.v_s_norm) << ',' << format_double(rec.second_order_norm) << ','
      << format_double(rec.w_off_inf) << ',' << format_double(rec.u_off_inf) << ',' << format_double(rec.a_t)
      << ',' << format_double(rec.b_t) << ',' << format_double(rec.gamma_inf) << ','
      << format_double(rec.zeta_inf) << '\n';
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << kTraceHeader << '\n';
  for (const TraceRecord& rec : trace) write_trace_row(out, rec);
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRecord>& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_trace_csv(out, trace);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw std::runtime_error("unexpected trace header");
  std::vector<TraceRecord> trace;
  while (std::getline(in, line)) {
    const auto f = split_csv_line(line);
    if (f.size() != 15) throw std::runtime_error("malformed trace row: " + line);
    auto num = [&](int i) { return std::stod(f[i]); };
    TraceRecord rec;
    rec.t = std::stoll(f[0]);
    rec.train_loss = num(1);
    rec.resid_norm = num(2);
    rec.test_loss_l2 = num(3);
    rec.signal_error_inf = num(5);
    rec.v_norm = num(6);
    rec.v_s_norm = num(7);
    rec.second_order_norm = num(8);
    rec.w_off_inf = num(9);
    rec.u_off_inf = num(10);
    rec.a_t = num(11);
    rec.b_t = num(12);
    rec.gamma_inf = num(13);
    rec.zeta_inf = num(14);
    trace.push_back(rec);
  }
  return trace;
}

}  // namespace benign
