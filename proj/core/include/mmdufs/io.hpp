#pragma once

#include "mmdufs/tensor.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mmdufs {

struct CsvTable {
  std::vector<std::string> header;  ///< empty for headerless files
  Matrix values;
};

/// Reads a numeric CSV. A first line containing any non-numeric cell is taken
/// as the header; every later cell must parse as a finite-or-not double.
/// Ragged rows and bad cells raise IngestionError naming file and line.
CsvTable read_csv(const std::filesystem::path& path);

/// Writes with 17 significant digits so a read returns identical doubles.
void write_csv(const std::filesystem::path& path, const Matrix& values,
               const std::vector<std::string>& header = {});

/// One zero-based index per line; blank lines ignored.
std::vector<Eigen::Index> read_index_file(const std::filesystem::path& path);
void write_index_file(const std::filesystem::path& path, const std::vector<Eigen::Index>& indices);

std::string format_double(double v);

}  // namespace mmdufs
