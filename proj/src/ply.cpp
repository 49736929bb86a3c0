#include "ply.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gradsurf/error.hpp"

namespace gradsurf::ply {

namespace {

Type parse_type(const std::string& s) {
  if (s == "char" || s == "int8") return Type::Int8;
  if (s == "uchar" || s == "uint8") return Type::UInt8;
  if (s == "short" || s == "int16") return Type::Int16;
  if (s == "ushort" || s == "uint16") return Type::UInt16;
  if (s == "int" || s == "int32") return Type::Int32;
  if (s == "uint" || s == "uint32") return Type::UInt32;
  if (s == "float" || s == "float32") return Type::Float32;
  if (s == "double" || s == "float64") return Type::Float64;
  throw Error(ErrorCode::ParseError, "unknown PLY type '" + s + "'");
}

template <class T>
T read_raw(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::ParseError, "unexpected end of binary PLY data");
  return v;
}

double read_binary(std::istream& in, Type t) {
  switch (t) {
    case Type::Int8: return read_raw<std::int8_t>(in);
    case Type::UInt8: return read_raw<std::uint8_t>(in);
    case Type::Int16: return read_raw<std::int16_t>(in);
    case Type::UInt16: return read_raw<std::uint16_t>(in);
    case Type::Int32: return read_raw<std::int32_t>(in);
    case Type::UInt32: return read_raw<std::uint32_t>(in);
    case Type::Float32: return read_raw<float>(in);
    case Type::Float64: return read_raw<double>(in);
  }
  return 0.0;
}

bool is_integral(Type t) { return t != Type::Float32 && t != Type::Float64; }

class AsciiTokens {
 public:
  explicit AsciiTokens(std::istream& in) : in_(in) {}

  double next(Type t) {
    std::string tok;
    if (!(in_ >> tok)) throw Error(ErrorCode::ParseError, "unexpected end of ASCII PLY data");
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (is_integral(t)) {
      long long iv = 0;
      auto [p, ec] = std::from_chars(first, last, iv);
      if (ec != std::errc() || p != last) {
        throw Error(ErrorCode::ParseError, "bad integer '" + tok + "' in PLY data");
      }
      v = double(iv);
    } else {
      auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || p != last) {
        throw Error(ErrorCode::ParseError, "bad number '" + tok + "' in PLY data");
      }
    }
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

int ElementData::find(const std::string& name) const {
  for (std::size_t i = 0; i < element.properties.size(); ++i) {
    if (element.properties[i].name == name) return int(i);
  }
  return -1;
}

const ElementData* File::find(const std::string& name) const {
  for (const auto& e : elements) {
    if (e.element.name == name) return &e;
  }
  return nullptr;
}

File read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());

  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ply") throw Error(ErrorCode::ParseError, path.string() + " is not a PLY file");

  File file;
  bool have_format = false;
  std::vector<Element> elements;
  while (true) {
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "PLY header not terminated");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key.empty() || key == "comment" || key == "obj_info") continue;
    if (key == "end_header") break;
    if (key == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") {
        file.format = Format::Ascii;
      } else if (fmt == "binary_little_endian") {
        file.format = Format::BinaryLittleEndian;
      } else {
        throw Error(ErrorCode::UnsupportedFormat, "PLY format '" + fmt + "'");
      }
      have_format = true;
    } else if (key == "element") {
      Element e;
      long long count = -1;
      ls >> e.name >> count;
      if (e.name.empty() || count < 0) throw Error(ErrorCode::ParseError, "bad element line");
      e.count = std::size_t(count);
      elements.push_back(std::move(e));
    } else if (key == "property") {
      if (elements.empty()) throw Error(ErrorCode::ParseError, "property before element");
      Property p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_type(ct);
        p.type = parse_type(it);
      } else {
        p.type = parse_type(type);
        ls >> p.name;
      }
      if (p.name.empty()) throw Error(ErrorCode::ParseError, "property without a name");
      elements.back().properties.push_back(p);
    } else {
      throw Error(ErrorCode::ParseError, "unexpected PLY header line '" + line + "'");
    }
  }
  if (!have_format) throw Error(ErrorCode::ParseError, "PLY header has no format line");

  AsciiTokens tokens(in);
  for (const Element& e : elements) {
    ElementData data;
    data.element = e;
    const std::size_t np = e.properties.size();
    data.scalars.resize(np);
    data.lists.resize(np);
    data.list_offsets.resize(np);
    for (std::size_t p = 0; p < np; ++p) {
      if (e.properties[p].is_list) {
        data.list_offsets[p].reserve(e.count + 1);
        data.list_offsets[p].push_back(0);
      } else {
        data.scalars[p].reserve(e.count);
      }
    }
    for (std::size_t row = 0; row < e.count; ++row) {
      for (std::size_t p = 0; p < np; ++p) {
        const Property& prop = e.properties[p];
        auto value = [&](Type t) {
          return file.format == Format::Ascii ? tokens.next(t) : read_binary(in, t);
        };
        if (prop.is_list) {
          const double n = value(prop.count_type);
          if (n < 0) throw Error(ErrorCode::ParseError, "negative list length");
          for (std::size_t m = 0; m < std::size_t(n); ++m) {
            data.lists[p].push_back(std::int64_t(value(prop.type)));
          }
          data.list_offsets[p].push_back(data.lists[p].size());
        } else {
          data.scalars[p].push_back(value(prop.type));
        }
      }
    }
    file.elements.push_back(std::move(data));
  }
  return file;
}

}  // namespace gradsurf::ply
