#pragma once

// Minimal PLY reader/writer shared by the mesh, point cloud and heat map code.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace gradsurf::ply {

static_assert(std::endian::native == std::endian::little, "binary I/O assumes little endian");

enum class Type { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

struct Property {
  std::string name;
  Type type = Type::Float32;
  bool is_list = false;
  Type count_type = Type::UInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

enum class Format { Ascii, BinaryLittleEndian };

// Scalar properties are widened to double; list properties are stored flat
// with offsets (list_offsets has count+1 entries).
struct ElementData {
  Element element;
  std::vector<std::vector<double>> scalars;       // per property, empty for lists
  std::vector<std::vector<std::int64_t>> lists;   // per property, empty for scalars
  std::vector<std::vector<std::size_t>> list_offsets;

  int find(const std::string& name) const;
};

struct File {
  Format format = Format::Ascii;
  std::vector<ElementData> elements;

  const ElementData* find(const std::string& name) const;
};

// Throws ParseError / UnsupportedFormat / IoError.
File read(const std::filesystem::path& path);

template <class T>
void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace gradsurf::ply
