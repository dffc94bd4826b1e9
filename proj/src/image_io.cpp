#include "geoshape/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace geoshape {

static_assert(std::endian::native == std::endian::little,
              "GSF1 serialization assumes a little-endian host");

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::string& path, const char* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(data, static_cast<std::streamsize>(n));
  if (!out) throw IoError("short write to " + path);
}

std::uint32_t read_u32(const std::string& buf, std::size_t& pos, const std::string& path,
                       const char* what) {
  if (pos + 4 > buf.size())
    throw FormatError(path, static_cast<long>(pos), std::string("file ends inside ") + what);
  std::uint32_t v;
  std::memcpy(&v, buf.data() + pos, 4);
  pos += 4;
  return v;
}

}  // namespace

GsfData read_gsf(const std::string& path) {
  std::string buf = slurp(path);
  std::size_t pos = 0;
  if (buf.size() < 4 || buf.compare(0, 4, "GSF1") != 0)
    throw FormatError(path, 0, "bad magic, expected \"GSF1\"");
  pos = 4;
  std::uint32_t rank = read_u32(buf, pos, path, "rank field");
  if (rank == 0 || rank > 8)
    throw FormatError(path, 4, "rank " + std::to_string(rank) + " out of range [1,8]");
  GsfData g;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    std::size_t at = pos;
    std::uint32_t d = read_u32(buf, pos, path, "dimension field");
    if (d == 0) throw FormatError(path, static_cast<long>(at), "zero dimension");
    g.dims.push_back(d);
    count *= d;
  }
  if (buf.size() - pos < count * 4) {
    std::size_t have = (buf.size() - pos) / 4;
    throw FormatError(path, static_cast<long>(buf.size()),
                      "payload truncated: expected " + std::to_string(count) +
                          " float values, found " + std::to_string(have));
  }
  g.values.resize(count);
  std::memcpy(g.values.data(), buf.data() + pos, count * 4);
  return g;
}

void write_gsf(const std::string& path, const std::vector<std::uint32_t>& dims,
               const std::vector<float>& values) {
  if (dims.empty() || dims.size() > 8) throw ContractViolation("write_gsf: rank out of range");
  std::size_t count = 1;
  for (std::uint32_t d : dims) {
    if (d == 0) throw ContractViolation("write_gsf: zero dimension");
    count *= d;
  }
  if (count != values.size()) throw ContractViolation("write_gsf: payload size does not match dims");
  std::string buf;
  buf.reserve(8 + dims.size() * 4 + values.size() * 4);
  buf.append("GSF1", 4);
  std::uint32_t rank = static_cast<std::uint32_t>(dims.size());
  buf.append(reinterpret_cast<const char*>(&rank), 4);
  buf.append(reinterpret_cast<const char*>(dims.data()), dims.size() * 4);
  buf.append(reinterpret_cast<const char*>(values.data()), values.size() * 4);
  spill(path, buf.data(), buf.size());
}

ScalarGrid read_pgm(const std::string& path) {
  std::string buf = slurp(path);
  std::size_t pos = 0;
  auto skip_space = [&]() {
    while (pos < buf.size()) {
      if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) -> long {
    skip_space();
    std::size_t at = pos;
    long v = 0;
    bool any = false;
    while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
      v = v * 10 + (buf[pos] - '0');
      ++pos;
      any = true;
    }
    if (!any) throw FormatError(path, static_cast<long>(at), std::string("expected ") + what);
    return v;
  };
  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '5')
    throw FormatError(path, 0, "bad magic, expected \"P5\"");
  pos = 2;
  long w = read_int("width");
  long h = read_int("height");
  std::size_t maxval_at = pos;
  long maxval = read_int("maxval");
  if (w <= 0 || h <= 0) throw FormatError(path, 2, "non-positive dimensions");
  if (maxval != 255)
    throw FormatError(path, static_cast<long>(maxval_at), "unsupported maxval " + std::to_string(maxval) + ", expected 255");
  if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos])))
    throw FormatError(path, static_cast<long>(pos), "expected single whitespace before pixel data");
  ++pos;
  std::size_t need = static_cast<std::size_t>(w) * h;
  if (buf.size() - pos < need)
    throw FormatError(path, static_cast<long>(buf.size()),
                      "pixel data truncated: expected " + std::to_string(need) + " bytes, found " +
                          std::to_string(buf.size() - pos));
  ScalarGrid img(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < need; ++i)
    img.data[i] = static_cast<unsigned char>(buf[pos + i]) / 255.0;
  return img;
}

void write_pgm(const ScalarGrid& img, const std::string& path) {
  std::string buf = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  buf.reserve(buf.size() + img.size());
  for (double v : img.data) {
    double c = std::clamp(v, 0.0, 1.0);
    buf.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
  }
  spill(path, buf.data(), buf.size());
}

ScalarGrid read_scalar_gsf(const std::string& path) {
  GsfData g = read_gsf(path);
  if (g.dims.size() != 2)
    throw FormatError(path, 4, "expected rank 2 for a scalar grid, got " + std::to_string(g.dims.size()));
  ScalarGrid img(static_cast<int>(g.dims[1]), static_cast<int>(g.dims[0]));
  for (std::size_t i = 0; i < g.values.size(); ++i) img.data[i] = g.values[i];
  return img;
}

void write_scalar_gsf(const ScalarGrid& img, const std::string& path) {
  std::vector<float> vals(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) vals[i] = static_cast<float>(img.data[i]);
  write_gsf(path, {static_cast<std::uint32_t>(img.height), static_cast<std::uint32_t>(img.width)}, vals);
}

ScalarGrid read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  in.close();
  if (magic[0] == 'P' && magic[1] == '5') return read_pgm(path);
  if (std::memcmp(magic, "GSF1", 4) == 0) return read_scalar_gsf(path);
  throw FormatError(path, 0, "unrecognized image format (expected PGM P5 or GSF1)");
}

void write_image(const ScalarGrid& img, const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pgm") == 0)
    write_pgm(img, path);
  else
    write_scalar_gsf(img, path);
}

void write_text_file(const std::string& path, const std::string& contents) {
  spill(path, contents.data(), contents.size());
}

std::string read_text_file(const std::string& path) { return slurp(path); }

}  // namespace geoshape
