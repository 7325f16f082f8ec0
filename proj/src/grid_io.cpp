#include "stcseg/grid_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace stcseg {

namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::size_t parse_dim(const std::string& tok, const char* what, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v == 0) {
    throw Error("line " + std::to_string(line) + ": bad " + what + " '" + tok + "'");
  }
  return v;
}

void write_rows(std::ostream& out, std::size_t channels, std::size_t height, std::size_t width,
                std::span<const double> values) {
  out << "STCGRID " << channels << ' ' << height << ' ' << width << '\n';
  const std::size_t per_row = width * channels;
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t k = 0; k < per_row; ++k) {
      if (k) out << ' ';
      out << format_value(values[i * per_row + k]);
    }
    out << '\n';
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  return f;
}

}  // namespace

VectorGrid read_grid(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  // Header: first non-empty line.
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    for (std::string t; ls >> t;) header.push_back(t);
  }
  if (header.empty()) throw Error("line " + std::to_string(line_no) + ": missing STCGRID header");
  if (header.size() != 4 || header[0] != "STCGRID") {
    throw Error("line " + std::to_string(line_no) +
                ": malformed header, expected 'STCGRID <channels> <height> <width>'");
  }
  const std::size_t c = parse_dim(header[1], "channel count", line_no);
  const std::size_t h = parse_dim(header[2], "height", line_no);
  const std::size_t w = parse_dim(header[3], "width", line_no);
  const std::size_t expected = c * h * w;

  std::vector<double> values;
  values.reserve(expected);
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    for (std::string t; ls >> t;) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw Error("line " + std::to_string(line_no) + ": bad number '" + t + "'");
      }
      if (values.size() == expected) {
        throw Error("line " + std::to_string(line_no) + ": expected " +
                    std::to_string(expected) + " values, found more");
      }
      values.push_back(v);
    }
  }
  if (values.size() != expected) {
    throw Error("line " + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                " values, got " + std::to_string(values.size()));
  }
  return VectorGrid(h, w, c, std::move(values));
}

VectorGrid read_grid(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open grid '" + path.string() + "'");
  try {
    return read_grid(f);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_grid(std::ostream& out, const VectorGrid& g) {
  write_rows(out, g.channels(), g.height(), g.width(), g.values());
}

void write_grid(std::ostream& out, const ScalarGrid& g) {
  write_rows(out, 1, g.height(), g.width(), g.values());
}

void write_grid(std::ostream& out, const BinaryMask& m) {
  write_grid(out, to_scalar(m));
}

void write_grid(const std::filesystem::path& path, const VectorGrid& g) {
  auto f = open_out(path);
  write_grid(f, g);
}

void write_grid(const std::filesystem::path& path, const ScalarGrid& g) {
  auto f = open_out(path);
  write_grid(f, g);
}

void write_grid(const std::filesystem::path& path, const BinaryMask& m) {
  auto f = open_out(path);
  write_grid(f, m);
}

ScalarGrid as_scalar(const VectorGrid& g) {
  if (g.channels() != 1) {
    throw Error("expected a 1-channel grid, got " + std::to_string(g.channels()) + " channels");
  }
  auto v = g.values();
  return ScalarGrid(g.height(), g.width(), std::vector<double>(v.begin(), v.end()));
}

BinaryMask as_mask(const VectorGrid& g) {
  const ScalarGrid s = as_scalar(g);
  BinaryMask m(s.height(), s.width());
  for (std::size_t i = 0; i < s.height(); ++i) {
    for (std::size_t j = 0; j < s.width(); ++j) {
      const double v = s(i, j);
      if (v != 0.0 && v != 1.0) throw Error("mask grid values must be 0 or 1");
      m.set(i, j, v == 1.0);
    }
  }
  return m;
}

VectorGrid as_vector(const ScalarGrid& g) {
  auto v = g.values();
  return VectorGrid(g.height(), g.width(), 1, std::vector<double>(v.begin(), v.end()));
}

ScalarGrid read_scalar_grid(const std::filesystem::path& path) {
  return as_scalar(read_grid(path));
}

BinaryMask read_mask(const std::filesystem::path& path) { return as_mask(read_grid(path)); }

}  // namespace stcseg
