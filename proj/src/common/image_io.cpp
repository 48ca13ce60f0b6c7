#include "common/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "common/error.hpp"

namespace srdet {

void write_image(const std::string& path, const Tensor& img) {
  if (img.c != 1 && img.c != 3) fail_invalid("write_image: channel count must be 1 or 3");
  std::ofstream f(path, std::ios::binary);
  if (!f) fail_io("write_image: cannot open " + path);
  f << (img.c == 1 ? "P5" : "P6") << "\n" << img.w << " " << img.h << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.w) * img.c);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      for (int ci = 0; ci < img.c; ++ci) {
        double v = std::clamp(img.at(ci, y, x), 0.0, 1.0);
        row[static_cast<size_t>(x) * img.c + ci] = static_cast<uint8_t>(std::lround(v * 255.0));
      }
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) fail_io("write_image: short write to " + path);
}

namespace {

int read_pnm_int(std::istream& in) {
  // skips whitespace and '#' comments per the PNM grammar
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (!std::isspace(ch)) {
      break;
    }
    ch = in.get();
  }
  if (ch == EOF) fail_format("read_image: truncated header");
  int val = 0;
  bool any = false;
  while (ch != EOF && std::isdigit(ch)) {
    val = val * 10 + (ch - '0');
    any = true;
    ch = in.get();
  }
  if (!any) fail_format("read_image: malformed header");
  return val;
}

}  // namespace

Tensor read_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail_io("read_image: cannot open " + path);
  char m0 = 0, m1 = 0;
  f.get(m0);
  f.get(m1);
  int channels;
  if (m0 == 'P' && m1 == '5') {
    channels = 1;
  } else if (m0 == 'P' && m1 == '6') {
    channels = 3;
  } else {
    fail_format("read_image: " + path + " is not a binary PGM/PPM file");
  }
  int w = read_pnm_int(f);
  int h = read_pnm_int(f);
  int maxval = read_pnm_int(f);
  if (maxval != 255) fail_format("read_image: only 8-bit images are supported");
  Tensor img(channels, h, w);
  std::vector<uint8_t> row(static_cast<size_t>(w) * channels);
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!f) fail_format("read_image: truncated pixel data in " + path);
    for (int x = 0; x < w; ++x)
      for (int ci = 0; ci < channels; ++ci)
        img.at(ci, y, x) = row[static_cast<size_t>(x) * channels + ci] / 255.0;
  }
  return img;
}

}  // namespace srdet
