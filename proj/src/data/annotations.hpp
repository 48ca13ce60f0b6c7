#pragma once

#include <string>
#include <vector>

#include "anchors/anchors.hpp"

namespace srdet {

struct ImageRecord {
  std::string path;
  std::vector<Box> boxes;
};

// Annotation grammar, one record per image:
//   <path>\n
//   <n>\n
//   <x1> <y1> <x2> <y2>\n        (n lines, space-separated numbers)
// The detection variant appends a fifth <score> field per line.
void write_annotations(const std::string& path, const std::vector<ImageRecord>& records);
std::vector<ImageRecord> read_annotations(const std::string& path);

void write_detections(const std::string& path, const std::vector<ImageRecord>& records);
std::vector<ImageRecord> read_detections(const std::string& path);

// Shortest round-trip decimal form, shared by every writer for stable output.
std::string format_number(double v);

}  // namespace srdet
