#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "d3m/costmodel.hpp"
#include "d3m/taskgraph.hpp"

namespace d3m {

struct CommEvent {
    int producer = 0;
    int consumer = 0;
    std::int64_t bytes = 0;
    double send = 0.0;
    double recv = 0.0;
};

struct Schedule {
    int num_workers = 0;
    std::vector<int> worker;              // task -> worker
    std::vector<std::vector<int>> order;  // per worker, in execution order
    std::vector<double> start;
    std::vector<double> finish;
    std::vector<CommEvent> comm;
    CommModel comm_model;

    int num_tasks() const { return static_cast<int>(worker.size()); }
    double makespan() const;
};

/// Transfers cost nothing.
CommModel zero_comm();

/// Upward-rank list scheduling with earliest-finish-time placement and
/// insertion into idle gaps. Ties go to the lower task id, then the lower
/// worker id.
Schedule list_schedule(const TaskGraph& g, int num_workers, const CommModel& comm);

/// Upward ranks; edge costs count only when num_workers > 1.
std::vector<double> upward_ranks(const TaskGraph& g, int num_workers, const CommModel& comm);

/// Throws SchedulingError on a precedence or overlap violation.
void validate_schedule(const TaskGraph& g, const Schedule& s);

struct MakespanBounds {
    double lower = 0.0;
    double work = 0.0;
    double cp = 0.0;
};

MakespanBounds makespan_bounds(const TaskGraph& g, int num_workers);

struct GanttRow {
    int worker = 0;
    int task = 0;
    std::string kind;
    std::string phase;
    double predicted_start = 0.0;
    double predicted_finish = 0.0;
    bool has_actual = false;
    double actual_start = 0.0;
    double actual_finish = 0.0;
};

/// Rows grouped by worker in execution order. Actual columns are left blank
/// when `actual_start` is empty.
std::string gantt_csv(const TaskGraph& g, const Schedule& s, const std::vector<double>& actual_start = {},
                      const std::vector<double>& actual_finish = {});
void export_gantt(const TaskGraph& g, const Schedule& s, const std::filesystem::path& path);
std::vector<GanttRow> parse_gantt(const std::string& csv);

std::string schedule_to_json(const Schedule& s);
Schedule schedule_from_json(const std::string& text);

}  // namespace d3m
