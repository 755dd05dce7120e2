#pragma once

// Matrix Market coordinate files (real or integer, general) as a replayable
// entry stream, plus a writer.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sketchstream/core_types.hpp"

namespace sketchstream {

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::uint64_t parse_index(std::string_view tok, std::size_t line, const char* what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, std::string("invalid ") + what + " '" + std::string(tok) + "'");
  }
  return v;
}

inline double parse_value(std::string_view tok, std::size_t line) {
  const std::string s(tok);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty()) throw ParseError(line, "invalid value '" + s + "'");
  if (!std::isfinite(v)) throw ParseError(line, "non-finite value '" + s + "'");
  return v;
}

inline bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

}  // namespace detail

/// Streams entries of a Matrix Market coordinate file on every `for_each`
/// call. Indices are converted to 0-based. Explicit zeros are dropped and
/// counted in `zeros_dropped()`. Pattern, complex and non-general files are
/// rejected.
class MatrixMarketStream {
 public:
  explicit MatrixMarketStream(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) throw Error("cannot open " + path_.string());
    std::string line;
    std::size_t no = 0;
    if (!std::getline(in, line)) throw ParseError(1, "empty file");
    ++no;
    const auto head = detail::split_ws(line);
    if (head.size() < 5 || detail::lower(head[0]) != "%%matrixmarket") {
      throw ParseError(no, "missing %%MatrixMarket banner");
    }
    if (detail::lower(head[1]) != "matrix") throw ParseError(no, "object must be 'matrix'");
    if (detail::lower(head[2]) != "coordinate") throw ParseError(no, "only coordinate format is supported");
    const std::string field = detail::lower(head[3]);
    if (field == "pattern" || field == "complex") throw ParseError(no, "field '" + field + "' is not supported");
    if (field != "real" && field != "integer" && field != "double") throw ParseError(no, "unknown field '" + field + "'");
    if (detail::lower(head[4]) != "general") throw ParseError(no, "only general symmetry is supported");

    while (std::getline(in, line)) {
      ++no;
      if (!line.empty() && line[0] == '%') continue;
      if (detail::blank(line)) continue;
      const auto tok = detail::split_ws(line);
      if (tok.size() != 3) throw ParseError(no, "size line must hold rows, columns and entry count");
      dims_.m = detail::parse_index(tok[0], no, "row count");
      dims_.n = detail::parse_index(tok[1], no, "column count");
      dims_.nnz = detail::parse_index(tok[2], no, "entry count");
      try {
        dims_.validate();
      } catch (const Error& e) {
        throw ParseError(no, e.what());
      }
      data_line_ = no;
      return;
    }
    throw ParseError(no, "missing size line");
  }

  MatrixDims dims() const noexcept { return dims_; }
  const std::filesystem::path& path() const noexcept { return path_; }

  /// Zero-valued entries skipped during the most recent pass.
  std::uint64_t zeros_dropped() const noexcept { return zeros_; }

  template <class F>
  void for_each(F&& f) const {
    std::ifstream in(path_);
    if (!in) throw Error("cannot open " + path_.string());
    std::string line;
    std::size_t no = 0;
    while (no < data_line_ && std::getline(in, line)) ++no;
    std::uint64_t seen = 0;
    zeros_ = 0;
    while (std::getline(in, line)) {
      ++no;
      if (!line.empty() && line[0] == '%') continue;
      if (detail::blank(line)) continue;
      const auto tok = detail::split_ws(line);
      if (tok.size() != 3) throw ParseError(no, "entry line must hold row, column and value");
      if (seen == dims_.nnz) throw ParseError(no, "more entries than declared");
      const std::uint64_t i = detail::parse_index(tok[0], no, "row index");
      const std::uint64_t j = detail::parse_index(tok[1], no, "column index");
      if (i < 1 || i > dims_.m || j < 1 || j > dims_.n) throw ParseError(no, "index outside the declared shape");
      const double v = detail::parse_value(tok[2], no);
      ++seen;
      if (v == 0.0) {
        ++zeros_;
        continue;
      }
      f(EntryTriplet{i - 1, j - 1, v});
    }
    if (seen != dims_.nnz) {
      throw ParseError(no, "declared " + std::to_string(dims_.nnz) + " entries, found " + std::to_string(seen));
    }
  }

 private:
  std::filesystem::path path_;
  MatrixDims dims_;
  std::size_t data_line_ = 0;
  mutable std::uint64_t zeros_ = 0;
};

/// Reads every entry into memory.
inline std::vector<EntryTriplet> read_matrix_market(const std::filesystem::path& path, MatrixDims* dims = nullptr) {
  MatrixMarketStream st(path);
  std::vector<EntryTriplet> out;
  st.for_each([&](const EntryTriplet& e) { out.push_back(e); });
  if (dims) {
    *dims = st.dims();
    dims->nnz = out.size();
  }
  return out;
}

/// Writes a stream as "coordinate real general" with 17 significant digits.
/// The entry count is taken from a first pass so the stream is read twice.
template <EntryStream S>
void write_matrix_market(const std::filesystem::path& path, const S& stream) {
  std::uint64_t count = 0;
  stream.for_each([&](const EntryTriplet&) { ++count; });
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!file) throw Error("cannot create " + path.string());
  std::FILE* f = file.get();
  const MatrixDims d = stream.dims();
  std::fprintf(f, "%%%%MatrixMarket matrix coordinate real general\n%llu %llu %llu\n",
               static_cast<unsigned long long>(d.m), static_cast<unsigned long long>(d.n),
               static_cast<unsigned long long>(count));
  stream.for_each([&](const EntryTriplet& e) {
    std::fprintf(f, "%llu %llu %.17g\n", static_cast<unsigned long long>(e.row + 1),
                 static_cast<unsigned long long>(e.col + 1), e.value);
  });
  if (std::fclose(file.release()) != 0) throw Error("write failed for " + path.string());
}

}  // namespace sketchstream
