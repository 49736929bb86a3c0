#include "gradsurf/depth_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <png.h>

#include "gradsurf/error.hpp"
#include "ply.hpp"

namespace gradsurf {

namespace {

constexpr char kDepthMagic[] = "GRADSURF-DEPTH v1\n";

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool is_png(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = char(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".png";
}

DepthImage load_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorCode::IoError, "libpng init failed");
  }
  // Owned through a pointer fixed before setjmp so a longjmp leaves it valid.
  struct Buffers {
    DepthImage img;
    std::vector<std::uint16_t> row;
  };
  const auto buf = std::make_unique<Buffers>();
  auto& img = buf->img;
  auto& row = buf->row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::ParseError, "corrupt PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const auto w = png_get_image_width(png, info);
  const auto h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth != 16 || color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::UnsupportedFormat, "depth PNG must be 16-bit grayscale: " + path.string());
  }
  png_set_swap(png);  // PNG stores big endian samples
  img = DepthImage(int(w), int(h));
  row.resize(w);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, reinterpret_cast<png_bytep>(row.data()), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) img.at(int(x), int(y)) = row[x] * 1e-3;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return std::move(img);
}

void save_png(const DepthImage& d, const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::IoError, "libpng init failed");
  }
  const auto row_buf = std::make_unique<std::vector<std::uint16_t>>(std::size_t(d.width));
  auto& row = *row_buf;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "PNG write failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, png_uint_32(d.width), png_uint_32(d.height), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const double mm = std::round(d.at(x, y) * 1e3);
      row[std::size_t(x)] = std::isfinite(mm) && mm > 0.0 ? std::uint16_t(std::min(mm, 65535.0)) : 0;
    }
    png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

DepthImage load_depth(const std::filesystem::path& path) {
  if (is_png(path)) return load_png(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string magic(sizeof(kDepthMagic) - 1, '\0');
  in.read(magic.data(), std::streamsize(magic.size()));
  if (!in || magic != kDepthMagic) throw Error(ErrorCode::ParseError, "not a depth file: " + path.string());
  std::int32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || w <= 0 || h <= 0) throw Error(ErrorCode::ParseError, "bad depth image size in " + path.string());
  std::vector<float> buf(std::size_t(w) * std::size_t(h));
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
  if (!in) throw Error(ErrorCode::ParseError, "truncated depth file " + path.string());
  DepthImage img(w, h);
  for (std::size_t i = 0; i < buf.size(); ++i) img.values[i] = buf[i];
  return img;
}

void save_depth(const DepthImage& depth, const std::filesystem::path& path) {
  if (depth.width <= 0 || depth.height <= 0) throw Error(ErrorCode::InvalidArgument, "empty depth image");
  if (is_png(path)) return save_png(depth, path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kDepthMagic, sizeof(kDepthMagic) - 1);
  ply::write_le<std::int32_t>(out, depth.width);
  ply::write_le<std::int32_t>(out, depth.height);
  for (double v : depth.values) ply::write_le(out, float(v));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<CameraView> load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  CameraView base;
  bool header = false;
  std::vector<CameraView> views;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ss(line);
    if (!header) {
      double fx, fy, cx, cy;
      if (!(ss >> fx >> fy >> cx >> cy >> base.width >> base.height)) {
        throw Error(ErrorCode::ParseError, "bad trajectory header in " + path.string());
      }
      base.intrinsics << fx, 0, cx, 0, fy, cy, 0, 0, 1;
      header = true;
      continue;
    }
    CameraView v = base;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        if (!(ss >> v.pose(r, c))) throw Error(ErrorCode::ParseError, "pose needs 16 numbers: " + line);
      }
    }
    v.validate();
    views.push_back(v);
  }
  if (!header) throw Error(ErrorCode::ParseError, "empty trajectory " + path.string());
  return views;
}

void save_trajectory(const std::vector<CameraView>& views, const std::filesystem::path& path) {
  if (views.empty()) throw Error(ErrorCode::InvalidArgument, "no views to save");
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.precision(17);
  const auto& k = views.front().intrinsics;
  out << k(0, 0) << ' ' << k(1, 1) << ' ' << k(0, 2) << ' ' << k(1, 2) << ' ' << views.front().width << ' '
      << views.front().height << '\n';
  for (const auto& v : views) {
    for (int i = 0; i < 16; ++i) out << (i ? " " : "") << v.pose(i / 4, i % 4);
    out << '\n';
  }
}

}  // namespace gradsurf
