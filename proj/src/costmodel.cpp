#include "d3m/costmodel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <deque>
#include <fstream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "d3m/blockmat.hpp"
#include "d3m/error.hpp"
#include "d3m/io.hpp"

namespace d3m {

namespace {

constexpr const char* kKernelNames[] = {"factorize", "trisolve", "update"};

KernelKind kernel_from_string(const std::string& s) {
    for (int i = 0; i < 3; ++i)
        if (s == kKernelNames[i]) return static_cast<KernelKind>(i);
    throw ParseError("unknown kernel '" + s + "'", 0);
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double clock_granularity() {
    double best = 1.0;
    for (int i = 0; i < 50; ++i) {
        const auto t0 = Clock::now();
        auto t1 = Clock::now();
        while (t1 == t0) t1 = Clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

template <class F>
double time_kernel(F&& run, int repetitions, double granularity, const char* name, int size, std::ostream* log) {
    run();  // warm up
    const auto t0 = Clock::now();
    run();
    const double once = seconds_since(t0);
    int batch = 1;
    if (once < 10.0 * granularity) {
        batch = static_cast<int>(std::ceil(10.0 * granularity / std::max(once, granularity * 0.1)));
        if (log)
            *log << "warning: " << name << " at size " << size << " runs below timer resolution, batching "
                 << batch << " calls per sample\n";
    }
    std::vector<double> samples;
    for (int r = 0; r < repetitions; ++r) {
        const auto t = Clock::now();
        for (int b = 0; b < batch; ++b) run();
        samples.push_back(seconds_since(t) / batch);
    }
    return std::max(median(samples), granularity / batch);
}

Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

CommModel measure_comm() {
    CommModel c;
    const std::size_t bytes = std::size_t{32} << 20;
    std::vector<char> src(bytes, 1), dst(bytes, 0);
    std::vector<double> t;
    for (int r = 0; r < 5; ++r) {
        const auto t0 = Clock::now();
        std::memcpy(dst.data(), src.data(), bytes);
        t.push_back(seconds_since(t0));
        src[r] = dst[bytes - 1 - r];
    }
    c.bandwidth = static_cast<double>(bytes) / std::max(median(t), 1e-9);

    std::mutex m;
    std::deque<double> q;
    const int rounds = 20000;
    double sink = 0.0;
    const auto t0 = Clock::now();
    for (int i = 0; i < rounds; ++i) {
        {
            std::lock_guard lk(m);
            q.push_back(i);
        }
        std::lock_guard lk(m);
        sink += q.front();
        q.pop_front();
    }
    c.latency = std::max(seconds_since(t0) / rounds, 1e-9) + (sink < 0 ? 1.0 : 0.0);
    return c;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

const char* to_string(KernelKind k) { return kKernelNames[static_cast<int>(k)]; }

void KernelTable::validate() const {
    if (sizes.empty() || sizes.size() != seconds.size())
        throw ParseError(std::string("kernel table ") + to_string(kind) + " is empty or ragged", 0);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] <= 0 || (i > 0 && sizes[i] <= sizes[i - 1]))
            throw ParseError(std::string("kernel table ") + to_string(kind) + " sizes are not strictly increasing", 0);
        if (!(seconds[i] > 0.0) || !std::isfinite(seconds[i]))
            throw ParseError(std::string("kernel table ") + to_string(kind) + " has a nonpositive time", 0);
    }
}

const KernelTable& Calibration::table(KernelKind k) const {
    for (const auto& t : tables)
        if (t.kind == k) return t;
    throw NotCalibratedError(std::string("no calibration for kernel ") + to_string(k));
}

std::string machine_fingerprint() {
    std::string cpu = "unknown-cpu";
    std::ifstream in("/proc/cpuinfo");
    for (std::string line; std::getline(in, line);) {
        if (line.rfind("model name", 0) == 0) {
            auto pos = line.find(':');
            if (pos != std::string::npos) cpu = line.substr(line.find_first_not_of(' ', pos + 1));
            break;
        }
    }
    return cpu + "|threads=" + std::to_string(std::thread::hardware_concurrency()) + "|gcc " + __VERSION__;
}

Calibration calibrate_kernels(const std::vector<int>& sizes, int repetitions, std::ostream* log) {
    if (sizes.empty()) throw InvalidArgument("calibration needs at least one size");
    if (repetitions < 3) throw InvalidArgument("calibration needs at least 3 repetitions");
    std::vector<int> grid = sizes;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.front() <= 0) throw InvalidArgument("calibration sizes must be positive");

    Calibration c;
    c.fingerprint = machine_fingerprint();
    c.timestamp = utc_timestamp();
    c.repetitions = repetitions;
    const double gran = clock_granularity();
    std::mt19937_64 rng(12345);

    KernelTable fac{KernelKind::factorize, grid, {}}, tri{KernelKind::trisolve, grid, {}},
        upd{KernelKind::update, grid, {}};
    for (int n : grid) {
        Eigen::MatrixXd a = random_matrix(n, n, rng);
        a = (a + a.transpose()).eval();
        a.diagonal().array() += 2.0 * n;
        fac.seconds.push_back(time_kernel([&] { (void)kernel_factorize_block(a); }, repetitions, gran, "factorize",
                                          n, log));
        const DenseLdlt f = kernel_factorize_block(a);
        const Eigen::MatrixXd k = random_matrix(n, n, rng);
        tri.seconds.push_back(time_kernel([&] { (void)kernel_trisolve_block(k, f); }, repetitions, gran, "trisolve",
                                          n, log));
        const Eigen::MatrixXd w = random_matrix(n, n, rng), l = random_matrix(n, n, rng);
        Eigen::MatrixXd dst = random_matrix(n, n, rng);
        upd.seconds.push_back(time_kernel([&] { kernel_update_block(dst, w, l, false); }, repetitions, gran,
                                          "update", n, log));
    }
    c.tables = {fac, tri, upd};
    c.comm = measure_comm();
    for (auto& t : c.tables) {
        for (std::size_t i = 1; i < t.sizes.size(); ++i)
            if (log && t.seconds[i] <= t.seconds[i - 1])
                *log << "warning: " << to_string(t.kind) << " time does not grow from size " << t.sizes[i - 1]
                     << " to " << t.sizes[i] << "\n";
    }
    return c;
}

std::string calibration_to_json(const Calibration& c) {
    nlohmann::json j;
    j["fingerprint"] = c.fingerprint;
    j["timestamp"] = c.timestamp;
    j["repetitions"] = c.repetitions;
    j["comm"] = {{"bandwidth_bytes_per_s", c.comm.bandwidth}, {"latency_s", c.comm.latency}};
    j["kernels"] = nlohmann::json::array();
    for (const auto& t : c.tables)
        j["kernels"].push_back({{"kind", to_string(t.kind)}, {"sizes", t.sizes}, {"seconds", t.seconds}});
    return j.dump(2);
}

Calibration calibration_from_json(const std::string& text) {
    Calibration c;
    try {
        const auto j = nlohmann::json::parse(text);
        c.fingerprint = j.at("fingerprint").get<std::string>();
        c.timestamp = j.value("timestamp", "");
        c.repetitions = j.value("repetitions", 0);
        if (j.contains("comm")) {
            c.comm.bandwidth = j["comm"].at("bandwidth_bytes_per_s").get<double>();
            c.comm.latency = j["comm"].at("latency_s").get<double>();
        }
        for (const auto& k : j.at("kernels")) {
            KernelTable t;
            t.kind = kernel_from_string(k.at("kind").get<std::string>());
            t.sizes = k.at("sizes").get<std::vector<int>>();
            t.seconds = k.at("seconds").get<std::vector<double>>();
            t.validate();
            c.tables.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("calibration json: ") + e.what(), 0);
    }
    return c;
}

Calibration load_calibration(const std::filesystem::path& path, std::ostream* log) {
    Calibration c = calibration_from_json(read_file(path));
    if (log && c.fingerprint != machine_fingerprint())
        *log << "warning: calibration " << path.string() << " has fingerprint " << c.fingerprint
             << ", this machine is " << machine_fingerprint() << "\n";
    return c;
}

void save_calibration(const Calibration& c, const std::filesystem::path& path) {
    write_file_atomic(path, calibration_to_json(c) + "\n");
}

double effective_size(KernelKind kind, const std::vector<double>& dims) {
    const std::size_t want = kind == KernelKind::factorize ? 1 : kind == KernelKind::trisolve ? 2 : 3;
    if (dims.size() != want) throw InvalidArgument(std::string("wrong number of dimensions for ") + to_string(kind));
    for (double d : dims)
        if (!(d >= 0.0)) throw InvalidArgument("negative kernel dimension");
    if (std::all_of(dims.begin(), dims.end(), [&](double d) { return d == dims.front(); })) return dims.front();
    if (kind == KernelKind::trisolve) return std::exp((std::log(dims[0]) + 2.0 * std::log(dims[1])) / 3.0);
    return std::exp((std::log(dims[0]) + std::log(dims[1]) + std::log(dims[2])) / 3.0);
}

double estimate_dense_cost(const Calibration& c, KernelKind kind, const std::vector<double>& dims) {
    const KernelTable& t = c.table(kind);
    const double s = effective_size(kind, dims);
    if (s == 0.0) return 0.0;
    const auto& g = t.sizes;
    const int n = static_cast<int>(g.size());
    if (n == 1) return t.seconds[0] * std::pow(s / g[0], 3.0);

    auto hit = std::lower_bound(g.begin(), g.end(), s, [](int a, double b) { return a < b; });
    if (hit != g.end() && *hit == s) return t.seconds[hit - g.begin()];
    int lo = static_cast<int>(hit - g.begin()) - 1;
    lo = std::clamp(lo, 0, n - 2);
    const double w = (std::log(s) - std::log(static_cast<double>(g[lo]))) /
                     (std::log(static_cast<double>(g[lo + 1])) - std::log(static_cast<double>(g[lo])));
    return t.seconds[lo] * std::pow(t.seconds[lo + 1] / t.seconds[lo], w);
}

void KnnSamples::add(std::vector<double> f, double t) {
    if (!features.empty() && f.size() != features.front().size())
        throw InvalidArgument("knn sample has the wrong feature count");
    features.push_back(std::move(f));
    seconds.push_back(t);
}

double knn_estimate(const KnnSamples& samples, const std::vector<double>& query, int k) {
    const std::size_t ns = samples.size();
    if (ns == 0) throw InvalidArgument("knn_estimate needs at least one sample");
    if (k < 1) throw InvalidArgument("knn_estimate needs k >= 1");
    const std::size_t nf = query.size();
    if (samples.features.front().size() != nf) throw InvalidArgument("knn query has the wrong feature count");

    std::vector<double> mean(nf, 0.0), scale(nf, 0.0);
    for (const auto& f : samples.features)
        for (std::size_t c = 0; c < nf; ++c) mean[c] += f[c];
    for (double& m : mean) m /= static_cast<double>(ns);
    for (const auto& f : samples.features)
        for (std::size_t c = 0; c < nf; ++c) scale[c] += (f[c] - mean[c]) * (f[c] - mean[c]);
    for (double& s : scale) {
        s = std::sqrt(s / static_cast<double>(ns));
        if (s == 0.0) s = 1.0;
    }

    std::vector<double> dist(ns);
    for (std::size_t i = 0; i < ns; ++i) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < nf; ++c) {
            const double d = (samples.features[i][c] - query[c]) / scale[c];
            d2 += d * d;
        }
        dist[i] = std::sqrt(d2);
    }

    double exact_sum = 0.0;
    int exact = 0;
    for (std::size_t i = 0; i < ns; ++i)
        if (dist[i] == 0.0) exact_sum += samples.seconds[i], ++exact;
    if (exact > 0) return exact_sum / exact;

    std::vector<std::size_t> idx(ns);
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t kk = std::min<std::size_t>(k, ns);
    std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(),
                      [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
    double num = 0.0, den = 0.0;
    for (std::size_t r = 0; r < kk; ++r) {
        const double w = 1.0 / dist[idx[r]];
        num += w * samples.seconds[idx[r]];
        den += w;
    }
    return num / den;
}

std::vector<double> domain_features(const DomainStats& s) {
    return {static_cast<double>(s.n_interior), static_cast<double>(s.interior_nnz), static_cast<double>(s.n_interface)};
}

CostSamples load_cost_samples(const std::filesystem::path& path) {
    CostSamples out;
    std::ifstream in(path);
    if (!in) return out;
    std::int64_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            auto f = j.at("features").get<std::vector<double>>();
            const double t = j.at("seconds").get<double>();
            if (f.size() != 3 || !(t > 0.0) || std::any_of(f.begin(), f.end(), [](double x) { return x < 0; }))
                throw ParseError("invalid sample", lineno);
            const auto kind = j.at("kind").get<std::string>();
            if (kind == "primal") out.primal.add(std::move(f), t);
            else if (kind == "recovery") out.recovery.add(std::move(f), t);
            else throw ParseError("unknown sample kind '" + kind + "'", lineno);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("sample json: ") + e.what(), lineno);
        }
    }
    return out;
}

void append_cost_samples(const std::filesystem::path& path, const CostSamples& fresh) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot append to " + path.string());
    auto dump = [&](const char* kind, const KnnSamples& s) {
        for (std::size_t i = 0; i < s.size(); ++i)
            out << nlohmann::json{{"kind", kind}, {"features", s.features[i]}, {"seconds", s.seconds[i]}}.dump()
                << "\n";
    };
    dump("primal", fresh.primal);
    dump("recovery", fresh.recovery);
    if (!out) throw IoError("write to " + path.string() + " failed");
}

TaskGraph weigh_graph(const TaskGraph& g, const Calibration& c, const CostSamples& samples) {
    if (c.empty()) throw NotCalibratedError("cost model has no kernel tables");
    TaskGraph out = g;
    const double nrhs = g.nrhs;
    auto r = [&](int b) { return static_cast<double>(g.block_sizes[b]); };
    for (auto& p : out.ptasks) {
        double w = 0.0;
        switch (p.kind) {
        case PTaskKind::interior_factor: {
            const auto& s = g.domains[p.domain];
            const double ni = s.n_interior, nb = s.n_interface;
            if (s.n_interior == 0) break;
            if (samples.primal.size() > 0) w = knn_estimate(samples.primal, domain_features(s));
            else
                w = std::max({estimate_dense_cost(c, KernelKind::factorize, {ni}),
                              estimate_dense_cost(c, KernelKind::trisolve, {nb, ni}),
                              estimate_dense_cost(c, KernelKind::trisolve, {nrhs, ni})});
            break;
        }
        case PTaskKind::dtn:
        case PTaskKind::rhs_reduce:
            break;  // priced with the interior factorization
        case PTaskKind::recover: {
            const auto& s = g.domains[p.domain];
            if (s.n_interior == 0) break;
            if (samples.recovery.size() > 0) w = knn_estimate(samples.recovery, domain_features(s));
            else w = estimate_dense_cost(c, KernelKind::trisolve, {nrhs, static_cast<double>(s.n_interior)});
            break;
        }
        case PTaskKind::blk_factorize:
            w = estimate_dense_cost(c, KernelKind::factorize, {r(p.pivot)});
            break;
        case PTaskKind::blk_trisolve:
            w = estimate_dense_cost(c, KernelKind::trisolve, {r(p.row), r(p.pivot)});
            break;
        case PTaskKind::blk_update:
            w = estimate_dense_cost(c, KernelKind::update, {r(p.row), r(p.col), r(p.pivot)});
            break;
        case PTaskKind::fwd_solve_blk:
        case PTaskKind::bwd_solve_blk:
            if (p.row == p.col) w = estimate_dense_cost(c, KernelKind::trisolve, {nrhs, r(p.row)});
            else w = estimate_dense_cost(c, KernelKind::update, {r(p.row), nrhs, r(p.col)});
            break;
        case PTaskKind::diag_solve_blk:
            w = estimate_dense_cost(c, KernelKind::update, {r(p.row), nrhs, 1.0});
            break;
        }
        p.weight = w;
    }
    out.refresh_task_weights();
    return out;
}

}  // namespace d3m
