#include "io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "error.hpp"

namespace coevo::io {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k) text_ += ',';
    text_ += header[k];
  }
  text_ += '\n';
}

void CsvWriter::separator() {
  if (filled_) text_ += ',';
  ++filled_;
}

CsvWriter& CsvWriter::cell(double x) {
  separator();
  text_ += format_double(x);
  return *this;
}

CsvWriter& CsvWriter::cell(long long x) {
  separator();
  text_ += std::to_string(x);
  return *this;
}

CsvWriter& CsvWriter::cell(std::string_view s) {
  separator();
  text_ += s;
  return *this;
}

void CsvWriter::end_row() {
  if (filled_ != width_)
    throw Error(ErrorCode::invariant, "CSV row has " + std::to_string(filled_) + " cells, header has " +
                                          std::to_string(width_));
  text_ += '\n';
  filled_ = 0;
  ++rows_;
}

void CsvWriter::row(std::initializer_list<double> values) {
  for (double v : values) cell(v);
  end_row();
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::config, "cannot write " + tmp.string(), "output");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::config, "write failed for " + tmp.string(), "output");
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorCode::config, "cannot rename onto " + path.string() + ": " + ec.message(), "output");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::config, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int k = 15; k >= 0; --k) {
    buf[k] = digits[h & 0xf];
    h >>= 4;
  }
  buf[16] = 0;
  return buf;
}

}  // namespace coevo::io
