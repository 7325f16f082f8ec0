#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "stcseg/grid.hpp"

namespace stcseg {

// STCGRID v1 text format:
//
//   STCGRID <channels> <height> <width>
//   <height*width*channels numbers, row-major, channels interleaved per pixel>
//
// Readers accept arbitrary whitespace between numbers. Writers emit one grid
// row per line using 9 significant digits, so write(read(x)) reproduces a
// canonical file byte for byte.

VectorGrid read_grid(std::istream& in);
VectorGrid read_grid(const std::filesystem::path& path);

void write_grid(std::ostream& out, const VectorGrid& g);
void write_grid(std::ostream& out, const ScalarGrid& g);
void write_grid(std::ostream& out, const BinaryMask& m);
void write_grid(const std::filesystem::path& path, const VectorGrid& g);
void write_grid(const std::filesystem::path& path, const ScalarGrid& g);
void write_grid(const std::filesystem::path& path, const BinaryMask& m);

// Typed views over a decoded grid; throw on channel-count or value mismatch.
ScalarGrid as_scalar(const VectorGrid& g);
BinaryMask as_mask(const VectorGrid& g);
VectorGrid as_vector(const ScalarGrid& g);

ScalarGrid read_scalar_grid(const std::filesystem::path& path);
BinaryMask read_mask(const std::filesystem::path& path);

}  // namespace stcseg
