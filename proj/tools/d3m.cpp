// d3m: domain-decomposition direct solver front end.
//
//   d3m calibrate [--sizes 8,16,...] [--repetitions R] [--calibration FILE]
//   d3m solve     (--generate dx[,dy[,dz]] | --matrix FILE) [options]
//   d3m scaling   (--generate ... | --matrix ...) --worker-list 1,2,4 [options]
//
// Exit codes: 0 success, 1 bad arguments, 2 I/O failure, 3 residual or
// determinism failure, 4 singular domain or block.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "d3m/costmodel.hpp"
#include "d3m/error.hpp"
#include "d3m/executor.hpp"
#include "d3m/io.hpp"
#include "d3m/pipeline.hpp"
#include "d3m/scheduler.hpp"

namespace fs = std::filesystem;
using namespace d3m;

namespace {

constexpr int kExitArgs = 1;
constexpr int kExitIo = 2;
constexpr int kExitResidual = 3;
constexpr int kExitSingular = 4;
constexpr double kResidualTol = 1e-8;

const std::vector<int> kDefaultSizes = {8, 16, 32, 64, 128, 256};

struct RunConfig {
    std::vector<int> generate;
    std::string matrix;
    std::string stencil = "laplacian";
    std::string rhs = "ones";
    int domains = 2;
    std::string partitioner = "auto";  // grid for generated lattices, bfs otherwise
    int workers = 0;  // 0: D3M_WORKERS or 1
    std::string memory_mode = "compact";
    std::string agglomerate = "column";
    std::string calibration = "calibration.json";
    std::string out = "d3m_out";
    std::uint64_t seed = 0;
    std::string debug_trace;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void add_problem_options(CLI::App& app, RunConfig& c) {
    auto* gen = app.add_option("--generate", c.generate, "grid extents, e.g. 40,40")->delimiter(',');
    auto* mat = app.add_option("--matrix", c.matrix, "Matrix Market file");
    gen->excludes(mat);
    app.add_option("--stencil", c.stencil, "laplacian | helmholtz:<k>");
    app.add_option("--rhs", c.rhs, "ones | random (generated problems)");
    app.add_option("--domains", c.domains, "number of domains")->check(CLI::PositiveNumber);
    app.add_option("--partitioner", c.partitioner, "auto | grid | bfs")->check(CLI::IsMember({"auto", "grid", "bfs"}));
    app.add_option("--workers", c.workers, "worker threads (default: D3M_WORKERS or 1)")->check(CLI::PositiveNumber);
    app.add_option("--memory-mode", c.memory_mode, "fast | compact")->check(CLI::IsMember({"fast", "compact"}));
    app.add_option("--agglomerate", c.agglomerate, "column | none")->check(CLI::IsMember({"column", "none"}));
    app.add_option("--calibration", c.calibration, "calibration file");
    app.add_option("--out", c.out, "output directory");
    app.add_option("--seed", c.seed, "seed for random right-hand sides");
    app.add_option("--debug-trace", c.debug_trace, "write executor events as JSON lines to this file");
}

Stencil parse_stencil(const std::string& s) {
    if (s == "laplacian") return Stencil::laplacian();
    if (s.rfind("helmholtz:", 0) == 0) {
        try {
            return Stencil::helmholtz(std::stod(s.substr(10)));
        } catch (const std::exception&) {
        }
    }
    throw UsageError("bad --stencil '" + s + "'");
}

SparseSystem load_problem(const RunConfig& c) {
    if (c.generate.empty() == c.matrix.empty()) throw UsageError("give exactly one of --generate and --matrix");
    if (!c.matrix.empty()) return load_system(c.matrix);
    if (c.generate.size() > 3) throw UsageError("--generate takes 1 to 3 extents");
    if (c.rhs != "ones" && c.rhs != "random") throw UsageError("bad --rhs '" + c.rhs + "'");
    try {
        return generate_grid_problem(c.generate, parse_stencil(c.stencil), c.seed,
                                     c.rhs == "random" ? RhsKind::random : RhsKind::ones);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
}

PipelineOptions pipeline_options(const RunConfig& c, const SparseSystem& sys) {
    PipelineOptions o;
    o.num_domains = c.domains;
    const bool bfs = c.partitioner == "bfs" || (c.partitioner == "auto" && sys.grid_dims.empty());
    o.partitioner = bfs ? PartitionStrategy::greedy_bfs : PartitionStrategy::grid;
    o.agglomerate = c.agglomerate == "none" ? AgglomerationPolicy::none : AgglomerationPolicy::per_block_column;
    return o;
}

fs::path samples_path(const RunConfig& c) {
    fs::path p(c.calibration);
    return p.parent_path() / "knn_samples.jsonl";
}

Calibration ensure_calibration(const RunConfig& c) {
    if (fs::exists(c.calibration)) return load_calibration(c.calibration, &std::cerr);
    std::cerr << "warning: no calibration at " << c.calibration << ", calibrating now\n";
    Calibration cal = calibrate_kernels(kDefaultSizes, 5, &std::cerr);
    save_calibration(cal, c.calibration);
    return cal;
}

void make_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
}

struct Prepared {
    PreparedProblem pp;
    TaskGraph weighted;
    Calibration cal;
};

Prepared prepare(const RunConfig& c) {
    if (c.domains < 1) throw UsageError("--domains must be positive");
    SparseSystem sys = load_problem(c);
    if (c.domains > sys.n) throw UsageError("more domains than DOFs");
    const PipelineOptions opts = pipeline_options(c, sys);
    Prepared p{prepare_problem(std::move(sys), opts), {}, ensure_calibration(c)};
    p.weighted = weigh_graph(p.pp.graph, p.cal, load_cost_samples(samples_path(c)));
    return p;
}

int resolved_workers(const RunConfig& c) { return c.workers > 0 ? c.workers : workers_from_env(1); }

int cmd_calibrate(const std::vector<int>& sizes, int repetitions, const std::string& path) {
    const Calibration cal = calibrate_kernels(sizes, repetitions, &std::cerr);
    save_calibration(cal, path);
    std::cout << "calibration written to " << path << "\n" << "fingerprint: " << cal.fingerprint << "\n";
    std::printf("%8s %14s %14s %14s\n", "size", "factorize_s", "trisolve_s", "update_s");
    for (std::size_t i = 0; i < cal.tables[0].sizes.size(); ++i)
        std::printf("%8d %14.6e %14.6e %14.6e\n", cal.tables[0].sizes[i], cal.tables[0].seconds[i],
                    cal.tables[1].seconds[i], cal.tables[2].seconds[i]);
    std::printf("comm: bandwidth %.3e B/s, latency %.3e s\n", cal.comm.bandwidth, cal.comm.latency);
    return 0;
}

int cmd_solve(const RunConfig& c) {
    Prepared p = prepare(c);
    make_out_dir(c.out);
    const int workers = resolved_workers(c);
    const fs::path out(c.out);

    const Schedule s = list_schedule(p.weighted, workers, p.cal.comm);
    ExecOptions eo;
    eo.memory_mode = memory_mode_from_string(c.memory_mode);
    std::ofstream trace_file;
    if (!c.debug_trace.empty()) {
        trace_file.open(c.debug_trace);
        if (!trace_file) throw IoError("cannot open " + c.debug_trace);
        eo.debug_trace = &trace_file;
    }
    const RunResult r = execute_parallel(p.pp, p.weighted, s, eo);
    const double res = relative_residual(p.pp.sys, r.x);

    const Timeline tl = collect_timeline(r.trace, p.weighted, s);
    nlohmann::json header{{"residual", res}, {"n", p.pp.sys.n}, {"workers", workers}, {"domains", c.domains}};
    save_solution(out, r.x, header.dump());
    write_file_atomic(out / "gantt.csv", tl.gantt_csv);
    write_file_atomic(out / "breakdown.json", tl.breakdown_json + "\n");
    write_file_atomic(out / "schedule.json", schedule_to_json(s) + "\n");
    write_file_atomic(out / "taskgraph.dot", p.weighted.to_dot());
    append_cost_samples(samples_path(c), samples_from_trace(p.weighted, r.trace));

    std::printf("n=%d domains=%d blocks=%d tasks=%d workers=%d\n", p.pp.sys.n, c.domains,
                p.pp.layout.num_blocks(), p.weighted.num_tasks(), workers);
    std::printf("predicted makespan %.6f s, actual %.6f s\n", s.makespan(), r.trace.makespan);
    std::printf("relative residual %.3e\n", res);
    if (!(res <= kResidualTol)) {
        std::cerr << "error: residual " << res << " exceeds " << kResidualTol << "\n";
        return kExitResidual;
    }
    return 0;
}

int cmd_scaling(const RunConfig& c, std::vector<int> worker_list, int repetitions) {
    if (worker_list.empty()) throw UsageError("--worker-list is empty");
    Prepared p = prepare(c);
    make_out_dir(c.out);
    const fs::path out(c.out);
    ExecOptions eo;
    eo.memory_mode = memory_mode_from_string(c.memory_mode);

    auto timed = [&](int workers, Eigen::MatrixXd& x, std::int64_t& peak) {
        const Schedule s = list_schedule(p.weighted, workers, p.cal.comm);
        double best = 0.0;
        for (int r = 0; r < repetitions; ++r) {
            RunResult run = execute_parallel(p.pp, p.weighted, s, eo);
            if (r == 0 || run.trace.makespan < best) best = run.trace.makespan;
            x = std::move(run.x);
            peak = run.trace.peak_block_bytes;
        }
        return best;
    };

    Eigen::MatrixXd x1;
    std::int64_t peak1 = 0;
    const double t1 = timed(1, x1, peak1);
    bool identical = true;
    std::ostringstream csv;
    csv << "P,wall_s,speedup,efficiency,peak_bytes\n";
    std::printf("%4s %12s %8s %10s %12s\n", "P", "wall_s", "speedup", "efficiency", "peak_bytes");
    for (int w : worker_list) {
        if (w <= 0) throw UsageError("worker counts must be positive");
        Eigen::MatrixXd x;
        std::int64_t peak = 0;
        const double t = w == 1 ? t1 : timed(w, x, peak);
        if (w == 1) x = x1, peak = peak1;
        if (x.size() != x1.size() || std::memcmp(x.data(), x1.data(), sizeof(double) * x.size()) != 0)
            identical = false;
        const double speedup = t1 / t;
        char line[160];
        std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%lld\n", w, t, speedup, speedup / w,
                      static_cast<long long>(peak));
        csv << line;
        std::printf("%4d %12.6f %8.3f %10.3f %12lld\n", w, t, speedup, speedup / w, static_cast<long long>(peak));
    }
    write_file_atomic(out / "scaling.csv", csv.str());
    const double res = relative_residual(p.pp.sys, x1);
    std::printf("relative residual %.3e, solutions %s across P\n", res, identical ? "identical" : "DIFFER");
    if (!identical) {
        std::cerr << "error: solutions differ across worker counts\n";
        return kExitResidual;
    }
    return res <= kResidualTol ? 0 : kExitResidual;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"d3m: domain-decomposition direct solver"};
    app.require_subcommand(1);

    std::vector<int> sizes = kDefaultSizes;
    int repetitions = 5;
    std::string cal_path = "calibration.json";
    auto* calib = app.add_subcommand("calibrate", "time the dense kernels and write a calibration file");
    calib->add_option("--sizes", sizes, "grid sizes")->delimiter(',');
    calib->add_option("--repetitions", repetitions, "repetitions per size (>= 3)");
    calib->add_option("--calibration", cal_path, "output file");

    RunConfig solve_cfg;
    auto* solve = app.add_subcommand("solve", "solve one problem and write reports");
    add_problem_options(*solve, solve_cfg);

    RunConfig scale_cfg;
    std::vector<int> worker_list = {1, 2, 4};
    int scale_reps = 3;
    auto* scaling = app.add_subcommand("scaling", "strong-scaling series over worker counts");
    add_problem_options(*scaling, scale_cfg);
    scaling->add_option("--worker-list", worker_list, "worker counts, e.g. 1,2,4,8")->delimiter(',');
    scaling->add_option("--repetitions", scale_reps, "runs per worker count; the fastest is kept")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitArgs;
    }

    try {
        if (*calib) {
            if (repetitions < 3) throw UsageError("--repetitions must be at least 3");
            return cmd_calibrate(sizes, repetitions, cal_path);
        }
        if (*solve) return cmd_solve(solve_cfg);
        return cmd_scaling(scale_cfg, worker_list, scale_reps);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitArgs;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitArgs;
    } catch (const SingularDomainError& e) {
        std::cerr << "error: " << e.what() << " (domain " << e.domain() << ")\n";
        return kExitSingular;
    } catch (const SingularBlockError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSingular;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}
