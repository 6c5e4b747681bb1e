#pragma once

// Shared setup for tests: synthetic calibration tables and the 5-DOF chain.

#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "d3m/costmodel.hpp"
#include "d3m/pipeline.hpp"
#include "d3m/problem.hpp"

namespace fixture {

/// Cubic-cost tables on {8, 16, ..., 512}; no measurement involved.
inline d3m::Calibration synthetic_calibration(double scale = 1e-9) {
    d3m::Calibration c;
    c.fingerprint = "synthetic";
    c.timestamp = "1970-01-01T00:00:00Z";
    c.repetitions = 3;
    const double factor[3] = {1.0 / 3.0, 1.0, 2.0};
    for (int k = 0; k < 3; ++k) {
        d3m::KernelTable t;
        t.kind = static_cast<d3m::KernelKind>(k);
        for (int s = 8; s <= 512; s *= 2) {
            t.sizes.push_back(s);
            t.seconds.push_back(scale * factor[k] * std::pow(s, 3.0) + 1e-7);
        }
        c.tables.push_back(t);
    }
    return c;
}

/// 1-D Laplacian on 5 DOFs, owner = [0,0,0,1,1].
inline d3m::Partition chain_partition() {
    d3m::Partition p;
    p.num_domains = 2;
    p.owner = {0, 0, 0, 1, 1};
    return p;
}

inline d3m::PreparedProblem chain_problem(d3m::AgglomerationPolicy pol = d3m::AgglomerationPolicy::per_block_column) {
    d3m::PipelineOptions o;
    o.agglomerate = pol;
    return d3m::prepare_problem(d3m::generate_grid_problem({5}, d3m::Stencil::laplacian()), chain_partition(), o);
}

/// Fresh directory under the system temp dir, removed by the destructor.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("d3m_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    static int& counter() {
        static int c = 0;
        return c;
    }
};

}  // namespace fixture
