#include "prism/io.hpp"

#include <cerrno>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "prism/errors.hpp"
#include "prism/rng.hpp"

namespace prism::io {

namespace {

// Split into lines on '\n', tolerating a trailing '\r' per line and a
// missing final newline.
std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(',', start);
    if (end == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, end - start));
    start = end + 1;
  }
}

double parse_number(const std::string& field, int line_no) {
  const char* begin = field.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || (end && *end != '\0') || errno == ERANGE) {
    throw parse_error("malformed number '" + field + "'", line_no, 1);
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // %.17g always round-trips; prefer the shortest rendering that still does,
  // so the files stay readable (and deterministic: the choice depends only on
  // the value). Once a precision round-trips, a few more digits can flip %g
  // from exponent to fixed notation and get SHORTER (1e+02 -> 100), so scan a
  // small window past the first hit and keep the shortest string.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) != v) continue;
    std::string best = shorter;
    for (int extra = prec + 1; extra <= std::min(prec + 4, 17); ++extra) {
      char alt[40];
      std::snprintf(alt, sizeof(alt), "%.*g", extra, v);
      if (std::strtod(alt, nullptr) == v && std::strlen(alt) < best.size()) best = alt;
    }
    return best;
  }
  return buf;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path parent = path.parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw engine_error("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw engine_error("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::uint64_t content_digest(std::string_view content) { return fnv1a(content); }

std::string digest_hex(std::uint64_t digest) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, digest);
  return buf;
}

std::string record_to_csv(const acquisition_record& rec) {
  std::string out = "time_s,mx,my,frame\n";
  for (std::size_t k = 0; k < rec.times.size(); ++k) {
    out += format_double(rec.times[k]);
    out += ',';
    out += format_double(rec.mx[k]);
    out += ',';
    out += format_double(rec.my[k]);
    out += ',';
    out += std::to_string(rec.frame[k]);
    out += '\n';
  }
  return out;
}

acquisition_record record_from_csv(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw parse_error("empty record file", 1, 1);
  if (lines[0] != "time_s,mx,my,frame") {
    throw parse_error("expected header 'time_s,mx,my,frame', got '" + lines[0] + "'", 1, 1);
  }
  acquisition_record rec;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const int line_no = static_cast<int>(i + 1);
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 4) {
      throw parse_error("expected 4 comma-separated fields", line_no, 1);
    }
    const double t = parse_number(fields[0], line_no);
    rec.times.push_back(t);
    rec.mx.push_back(parse_number(fields[1], line_no));
    rec.my.push_back(parse_number(fields[2], line_no));
    const double frame = parse_number(fields[3], line_no);
    if (frame != 0.0 && frame != 1.0) {
      throw parse_error("frame tag must be 0 or 1", line_no, 1);
    }
    rec.frame.push_back(static_cast<int>(frame));
    if (rec.times.size() >= 2 && !(t > rec.times[rec.times.size() - 2])) {
      throw parse_error("times must be strictly increasing", line_no, 1);
    }
  }
  if (rec.times.size() < 2) throw parse_error("record needs at least 2 samples", 1, 1);
  rec.sample_rate =
      static_cast<double>(rec.times.size() - 1) / (rec.times.back() - rec.times.front());
  return rec;
}

target_samples target_from_csv(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw parse_error("empty target file", 1, 1);
  if (lines[0] != "time_s,value") {
    throw parse_error("expected header 'time_s,value', got '" + lines[0] + "'", 1, 1);
  }
  target_samples out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const int line_no = static_cast<int>(i + 1);
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 2) {
      throw parse_error("expected 2 comma-separated fields", line_no, 1);
    }
    const double t = parse_number(fields[0], line_no);
    if (!out.t.empty() && !(t > out.t.back())) {
      throw parse_error("times must be strictly increasing", line_no, 1);
    }
    out.t.push_back(t);
    out.v.push_back(parse_number(fields[1], line_no));
  }
  if (out.t.empty()) throw parse_error("target file has no samples", 1, 1);
  return out;
}

}  // namespace prism::io
