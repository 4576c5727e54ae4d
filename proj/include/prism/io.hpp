#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "prism/acquisition.hpp"

namespace prism::io {

// Shortest text that round-trips the double exactly (printf %.17g trimmed).
// All CSV emitters share this so reruns are byte-identical.
std::string format_double(double v);

// Write `content` to `path` via a temp file + rename, creating parent
// directories. Readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Whole-file read. Throws parse_error when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// FNV-1a content digest, and its fixed-width hex rendering.
std::uint64_t content_digest(std::string_view content);
std::string digest_hex(std::uint64_t digest);

// Record CSV codec: header `time_s,mx,my,frame`, one row per sample.
std::string record_to_csv(const acquisition_record& rec);

// Inverse of record_to_csv for externally supplied records. Requires the
// exact header, strictly increasing times, and frame tags in {0, 1};
// sample_rate is recovered from the time span. Throws parse_error with the
// offending 1-based line number.
acquisition_record record_from_csv(const std::string& text);

struct target_samples {
  std::vector<double> t;
  std::vector<double> v;
};

// Target-field table: header `time_s,value`, strictly increasing times,
// values in tesla. Throws parse_error with the offending line number.
target_samples target_from_csv(const std::string& text);

}  // namespace prism::io
