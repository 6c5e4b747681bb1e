#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "d3m/costmodel.hpp"
#include "d3m/pipeline.hpp"
#include "d3m/scheduler.hpp"
#include "d3m/taskgraph.hpp"

namespace d3m {

enum class MemoryMode { fast, compact };

const char* to_string(MemoryMode m);
MemoryMode memory_mode_from_string(const std::string& s);

struct ExecOptions {
    MemoryMode memory_mode = MemoryMode::compact;
    /// A worker blocked this long without any message arriving aborts the run.
    double deadlock_timeout_s = 60.0;
    /// Randomizes how much of the outbox is flushed at each task boundary and
    /// the order in which received messages are unpacked.
    std::optional<std::uint64_t> shuffle_seed;
    /// JSON lines {event, task, worker, t}; written under a lock.
    std::ostream* debug_trace = nullptr;
};

struct RunTrace {
    int num_workers = 0;
    std::vector<int> worker;      // per task
    std::vector<double> start;    // seconds since the run started
    std::vector<double> finish;
    std::vector<double> ptask_seconds;
    std::array<double, 3> phase_seconds{};  // indexed by Phase
    double makespan = 0.0;
    std::int64_t peak_block_bytes = 0;
    std::int64_t bytes_communicated = 0;
    MemoryMode memory_mode = MemoryMode::compact;
};

struct RunResult {
    Eigen::MatrixXd x;  // n x nrhs
    RunTrace trace;
};

/// Runs `s` on s.num_workers threads that exchange block copies through
/// per-worker mailboxes.
RunResult execute_parallel(const PreparedProblem& pp, const TaskGraph& g, const Schedule& s,
                           const ExecOptions& opts = {});

/// One worker, ready tasks in ascending id order.
RunResult execute_sequential(const PreparedProblem& pp, const TaskGraph& g, const ExecOptions& opts = {});

/// Schedule with one worker running the tasks in ascending-id topological order.
Schedule sequential_schedule(const TaskGraph& g);

struct Timeline {
    std::string gantt_csv;
    std::string breakdown_json;
};

/// `t1` is the single-worker time used for parallel efficiency.
Timeline collect_timeline(const RunTrace& trace, const TaskGraph& g, const Schedule& s,
                          std::optional<double> t1 = std::nullopt);

/// Measured primal and recovery task times, ready to append to the sample file.
CostSamples samples_from_trace(const TaskGraph& g, const RunTrace& trace);

/// D3M_WORKERS when set to a positive integer, else `fallback`.
int workers_from_env(int fallback);

}  // namespace d3m
