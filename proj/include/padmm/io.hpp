#pragma once

#include <bit>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "padmm/engine.hpp"
#include "padmm/types.hpp"

namespace padmm {

// Shortest representation that round-trips a double exactly.
inline std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Write-to-temp-then-rename so readers never observe a half-written file.
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot open " + tmp.string() +
                               " for writing");
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Trace files
//
// CSV with a fixed header; per-block step norms are stored as their sum.
// Scalars carry 17 significant digits, so written values parse back
// bit-identically.
// ---------------------------------------------------------------------------

inline constexpr const char* kTraceHeader =
    "k,L_alpha,L_bar,residual,step_x_total,step_y,step_z,d_norm,objective";

inline std::string trace_to_csv(std::span<const TraceRecord> trace) {
  std::string out = kTraceHeader;
  out += '\n';
  for (const TraceRecord& rec : trace) {
    out += std::to_string(rec.k);
    out += ',';
    out += format_full(rec.L_alpha);
    out += ',';
    out += format_full(rec.L_bar);
    out += ',';
    out += format_full(rec.residual_norm);
    out += ',';
    out += format_full(rec.step_x_total());
    out += ',';
    out += format_full(rec.step_y);
    out += ',';
    out += format_full(rec.step_z);
    out += ',';
    out += format_full(rec.d_norm);
    out += ',';
    out += format_full(rec.objective);
    out += '\n';
  }
  return out;
}

inline void write_trace_csv(const std::filesystem::path& path,
                            std::span<const TraceRecord> trace) {
  atomic_write_file(path, trace_to_csv(trace));
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str())
    throw std::runtime_error("cannot parse number: '" + s + "'");
  return v;
}

}  // namespace detail

// Read a trace written by write_trace_csv.  Columns are located by header
// name; the per-block step breakdown is not recoverable, so step_x holds
// the stored total as a single entry.
inline std::vector<TraceRecord> read_trace_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty trace file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = detail::split_csv_line(line);
  auto col = [&](const char* name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error("trace file missing column '" +
                             std::string(name) + "': " + path.string());
  };
  const std::size_t ck = col("k"), cla = col("L_alpha"), clb = col("L_bar"),
                    cr = col("residual"), csx = col("step_x_total"),
                    csy = col("step_y"), csz = col("step_z"),
                    cd = col("d_norm"), co = col("objective");
  std::vector<TraceRecord> trace;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = detail::split_csv_line(line);
    if (f.size() < header.size())
      throw std::runtime_error("short row in trace file: " + path.string());
    TraceRecord rec;
    rec.k = static_cast<int>(detail::parse_double(f[ck]));
    rec.L_alpha = detail::parse_double(f[cla]);
    rec.L_bar = detail::parse_double(f[clb]);
    rec.residual_norm = detail::parse_double(f[cr]);
    rec.step_x = {detail::parse_double(f[csx])};
    rec.step_y = detail::parse_double(f[csy]);
    rec.step_z = detail::parse_double(f[csz]);
    rec.d_norm = detail::parse_double(f[cd]);
    rec.objective = detail::parse_double(f[co]);
    trace.push_back(std::move(rec));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Matrix files
//
// Two formats, chosen by extension: ".csv" is dense comma-separated text;
// anything else is the binary layout int64 rows, int64 cols, then the
// doubles column-major, everything little-endian.
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "binary matrix IO assumes a little-endian host");

inline void write_matrix_csv(const std::filesystem::path& path,
                             const MatrixXd& M) {
  std::string out;
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j) out += ',';
      out += format_full(M(i, j));
    }
    out += '\n';
  }
  atomic_write_file(path, out);
}

inline MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = detail::split_csv_line(line);
    std::vector<double> row;
    row.reserve(f.size());
    for (const std::string& s : f) row.push_back(detail::parse_double(s));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty matrix in " + path.string());
  MatrixXd M(static_cast<Index>(rows.size()),
             static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j)
      M(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return M;
}

inline void write_matrix_binary(const std::filesystem::path& path,
                                const MatrixXd& M) {
  std::string out;
  const std::int64_t dims[2] = {static_cast<std::int64_t>(M.rows()),
                                static_cast<std::int64_t>(M.cols())};
  out.append(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.append(reinterpret_cast<const char*>(M.data()),
             static_cast<std::size_t>(M.size()) * sizeof(double));
  atomic_write_file(path, out);
}

inline MatrixXd read_matrix_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::int64_t dims[2];
  if (!in.read(reinterpret_cast<char*>(dims), sizeof(dims)))
    throw std::runtime_error("truncated matrix file: " + path.string());
  if (dims[0] < 0 || dims[1] < 0 || dims[0] > (1 << 26) || dims[1] > (1 << 26))
    throw std::runtime_error("implausible dimensions in " + path.string());
  MatrixXd M(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
  if (!in.read(reinterpret_cast<char*>(M.data()),
               static_cast<std::streamsize>(M.size() * sizeof(double))))
    throw std::runtime_error("truncated matrix file: " + path.string());
  return M;
}

inline bool has_csv_extension(const std::filesystem::path& path) {
  return path.extension() == ".csv";
}

inline MatrixXd load_matrix(const std::filesystem::path& path) {
  return has_csv_extension(path) ? read_matrix_csv(path)
                                 : read_matrix_binary(path);
}

inline void save_matrix(const std::filesystem::path& path, const MatrixXd& M) {
  if (has_csv_extension(path))
    write_matrix_csv(path, M);
  else
    write_matrix_binary(path, M);
}

inline VectorXd load_vector(const std::filesystem::path& path) {
  const MatrixXd M = load_matrix(path);
  if (M.cols() == 1) return M.col(0);
  if (M.rows() == 1) return M.row(0).transpose();
  throw std::runtime_error("expected a vector in " + path.string());
}

}  // namespace padmm
