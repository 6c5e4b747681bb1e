#include "d3m/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "d3m/error.hpp"

namespace d3m {

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename onto " + path.string());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void save_solution(const std::filesystem::path& dir, const Eigen::MatrixXd& x, const std::string& extra_json) {
    std::string bytes(reinterpret_cast<const char*>(x.data()), sizeof(double) * static_cast<std::size_t>(x.size()));
    write_file_atomic(dir / "solution.bin", bytes);
    nlohmann::json j = nlohmann::json::parse(extra_json);
    j["file"] = "solution.bin";
    j["dtype"] = "float64";
    j["byte_order"] = "little";
    j["layout"] = "column_major";
    j["rows"] = x.rows();
    j["cols"] = x.cols();
    write_file_atomic(dir / "solution.json", j.dump(2) + "\n");
}

Eigen::MatrixXd load_solution(const std::filesystem::path& dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(dir / "solution.json"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("solution.json: ") + e.what(), 0);
    }
    const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
    const std::string bytes = read_file(dir / j.at("file").get<std::string>());
    if (bytes.size() != sizeof(double) * static_cast<std::size_t>(rows * cols))
        throw ParseError("solution.bin has " + std::to_string(bytes.size()) + " bytes, header expects " +
                             std::to_string(sizeof(double) * rows * cols),
                         0);
    Eigen::MatrixXd x(rows, cols);
    std::memcpy(x.data(), bytes.data(), bytes.size());
    return x;
}

}  // namespace d3m
