#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "xnorattn/matrix.hpp"

namespace xnorattn::io {

// Headerless CSV, one matrix row per line, every value printed "%.17g" so a
// read-back is bit-exact.
void write_csv(std::ostream& out, const DenseMatrix& m);
DenseMatrix read_csv(std::istream& in);
void save_csv(const std::filesystem::path& path, const DenseMatrix& m);
DenseMatrix load_csv(const std::filesystem::path& path);

// Binary layout, all little-endian: rows:u64, cols:u64, data:f64[rows*cols].
void write_binary(std::ostream& out, const DenseMatrix& m);
DenseMatrix read_binary(std::istream& in);
void save_binary(const std::filesystem::path& path, const DenseMatrix& m);
DenseMatrix load_binary(const std::filesystem::path& path);

/// printf("%.17g") of a double; shared by every CSV writer in the project.
std::string format_double(double v);

}  // namespace xnorattn::io
