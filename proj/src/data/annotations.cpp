#include "data/annotations.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "common/error.hpp"

namespace srdet {

std::string format_number(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

void write_records(const std::string& path, const std::vector<ImageRecord>& records,
                   bool with_score) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail_io("cannot open " + path + " for writing");
  for (const ImageRecord& r : records) {
    f << r.path << "\n" << r.boxes.size() << "\n";
    for (const Box& b : r.boxes) {
      f << format_number(b.x1) << " " << format_number(b.y1) << " " << format_number(b.x2) << " "
        << format_number(b.y2);
      if (with_score) f << " " << format_number(b.score);
      f << "\n";
    }
  }
  if (!f) fail_io("short write to " + path);
}

std::vector<ImageRecord> read_records(const std::string& path, bool with_score) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail_io("cannot open " + path);
  std::vector<ImageRecord> out;
  std::string line;
  int lineno = 0;
  auto bad = [&](const std::string& what) {
    fail_format(path + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    ImageRecord rec;
    rec.path = line;
    if (!std::getline(f, line)) bad("missing box count");
    ++lineno;
    long n = -1;
    try {
      n = std::stol(line);
    } catch (const std::exception&) {
      bad("malformed box count '" + line + "'");
    }
    if (n < 0) bad("negative box count");
    for (long i = 0; i < n; ++i) {
      if (!std::getline(f, line)) bad("truncated record, expected " + std::to_string(n) + " boxes");
      ++lineno;
      std::istringstream ss(line);
      Box b;
      if (!(ss >> b.x1 >> b.y1 >> b.x2 >> b.y2)) bad("malformed box line '" + line + "'");
      if (with_score && !(ss >> b.score)) bad("missing detection score");
      rec.boxes.push_back(b);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

void write_annotations(const std::string& path, const std::vector<ImageRecord>& records) {
  write_records(path, records, false);
}
std::vector<ImageRecord> read_annotations(const std::string& path) {
  return read_records(path, false);
}
void write_detections(const std::string& path, const std::vector<ImageRecord>& records) {
  write_records(path, records, true);
}
std::vector<ImageRecord> read_detections(const std::string& path) {
  return read_records(path, true);
}

}  // namespace srdet
