#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "geoshape/grid.hpp"

namespace geoshape {

// Native tensor container: magic "GSF1", little-endian u32 rank, u32 dims,
// then float32 payload in row-major order (outermost dimension first).
struct GsfData {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

GsfData read_gsf(const std::string& path);
void write_gsf(const std::string& path, const std::vector<std::uint32_t>& dims,
               const std::vector<float>& values);

ScalarGrid read_pgm(const std::string& path);
void write_pgm(const ScalarGrid& img, const std::string& path);

ScalarGrid read_scalar_gsf(const std::string& path);
void write_scalar_gsf(const ScalarGrid& img, const std::string& path);

// Sniffs the magic bytes to pick the format.
ScalarGrid read_image(const std::string& path);
// Picks the format from the extension: ".pgm" writes 8-bit PGM (values are
// clamped to [0,1] and quantized), anything else writes GSF1.
void write_image(const ScalarGrid& img, const std::string& path);

void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

}  // namespace geoshape
