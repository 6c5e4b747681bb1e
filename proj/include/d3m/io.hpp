#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace d3m {

/// Writes through a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// solution.bin holds raw little-endian doubles, column major; solution.json
/// describes them. `extra_json` (an object) is merged into the header.
void save_solution(const std::filesystem::path& dir, const Eigen::MatrixXd& x, const std::string& extra_json = "{}");
Eigen::MatrixXd load_solution(const std::filesystem::path& dir);

}  // namespace d3m
