#pragma once

// Artifact output: full-precision CSV text, atomic file replacement and
// content hashes for manifests.

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace coevo::io {

/// Shortest form is not used on purpose: always 17 significant digits, so a
/// value round-trips and equal doubles always print identically.
std::string format_double(double x);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  CsvWriter& cell(double x);
  CsvWriter& cell(long long x);
  CsvWriter& cell(std::size_t x) { return cell(static_cast<long long>(x)); }
  CsvWriter& cell(int x) { return cell(static_cast<long long>(x)); }
  CsvWriter& cell(std::string_view text);
  /// Terminates the current row; throws if its width differs from the header.
  void end_row();
  void row(std::initializer_list<double> values);

  const std::string& text() const { return text_; }
  std::size_t rows() const { return rows_; }

 private:
  void separator();
  std::size_t width_;
  std::size_t filled_ = 0;
  std::size_t rows_ = 0;
  std::string text_;
};

/// Writes to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t h);

}  // namespace coevo::io
