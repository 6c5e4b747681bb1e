#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "d3m/taskgraph.hpp"

namespace d3m {

enum class KernelKind { factorize, trisolve, update };

const char* to_string(KernelKind k);

/// Median seconds of one dense kernel on square operands of each grid size.
struct KernelTable {
    KernelKind kind = KernelKind::factorize;
    std::vector<int> sizes;  // strictly increasing
    std::vector<double> seconds;

    void validate() const;
};

/// Linear transfer model for edges between workers.
struct CommModel {
    double bandwidth = 1e10;  // bytes / s
    double latency = 1e-6;    // s

    double cost(std::int64_t bytes) const { return bytes > 0 ? latency + static_cast<double>(bytes) / bandwidth : 0.0; }
};

struct Calibration {
    std::vector<KernelTable> tables;
    std::string fingerprint;
    std::string timestamp;
    int repetitions = 0;
    CommModel comm;

    bool empty() const { return tables.empty(); }
    /// Throws NotCalibratedError when the kernel has no table.
    const KernelTable& table(KernelKind k) const;
};

/// CPU model, hardware threads and compiler.
std::string machine_fingerprint();

/// Times every kernel at every size and measures the comm proxy. Warnings
/// (timer granularity) go to `log` when given.
Calibration calibrate_kernels(const std::vector<int>& sizes, int repetitions, std::ostream* log = nullptr);

std::string calibration_to_json(const Calibration& c);
Calibration calibration_from_json(const std::string& text);
/// A fingerprint different from this machine's is reported on `log`, not thrown.
Calibration load_calibration(const std::filesystem::path& path, std::ostream* log = nullptr);
void save_calibration(const Calibration& c, const std::filesystem::path& path);

/// Size of the square problem with the same flop count:
/// factorize(n) -> n, trisolve(m, n) -> (m n^2)^{1/3}, update(m, n, k) -> (m n k)^{1/3}.
double effective_size(KernelKind kind, const std::vector<double>& dims);

/// Log-log interpolation in the kernel table, slope of the end interval
/// outside it. Zero in any dimension costs 0.
double estimate_dense_cost(const Calibration& c, KernelKind kind, const std::vector<double>& dims);

struct KnnSamples {
    std::vector<std::vector<double>> features;
    std::vector<double> seconds;

    std::size_t size() const { return seconds.size(); }
    void add(std::vector<double> f, double t);
};

/// Inverse-distance weighted mean over the k nearest samples in standardized
/// feature space. Requires at least one sample.
double knn_estimate(const KnnSamples& samples, const std::vector<double>& query, int k = 3);

/// Samples measured on earlier solves. Features are
/// (interior DOFs, interior nonzeros, interface size).
struct CostSamples {
    KnnSamples primal;
    KnnSamples recovery;
};

std::vector<double> domain_features(const DomainStats& s);

/// JSON lines; a missing file yields empty sample sets.
CostSamples load_cost_samples(const std::filesystem::path& path);
void append_cost_samples(const std::filesystem::path& path, const CostSamples& fresh);

/// Fills ptask and task weights. Primal tasks use KNN when samples exist and
/// otherwise the dense estimate of their dominant ptask.
TaskGraph weigh_graph(const TaskGraph& g, const Calibration& c, const CostSamples& samples);

}  // namespace d3m
