#include "d3m/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "d3m/error.hpp"
#include "d3m/io.hpp"

namespace d3m {

double Schedule::makespan() const {
    double m = 0.0;
    for (double f : finish) m = std::max(m, f);
    return m;
}

CommModel zero_comm() { return {std::numeric_limits<double>::infinity(), 0.0}; }

std::vector<double> upward_ranks(const TaskGraph& g, int num_workers, const CommModel& comm) {
    const auto order = g.topological_order();
    std::vector<double> rank(g.num_tasks(), 0.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int v = *it;
        double tail = 0.0;
        for (int e : g.succ[v]) {
            const double c = num_workers > 1 ? comm.cost(g.edges[e].bytes) : 0.0;
            tail = std::max(tail, c + rank[g.edges[e].to]);
        }
        rank[v] = g.tasks[v].weight + tail;
    }
    return rank;
}

Schedule list_schedule(const TaskGraph& g, int num_workers, const CommModel& comm) {
    if (num_workers <= 0) throw InvalidArgument("number of workers must be positive");
    const int n = g.num_tasks();
    const auto rank = upward_ranks(g, num_workers, comm);

    Schedule s;
    s.num_workers = num_workers;
    s.comm_model = comm;
    s.worker.assign(n, -1);
    s.order.assign(num_workers, {});
    s.start.assign(n, 0.0);
    s.finish.assign(n, 0.0);

    auto higher = [&](int a, int b) { return rank[a] < rank[b] || (rank[a] == rank[b] && a > b); };
    std::vector<int> ready, missing(n, 0);
    for (int v = 0; v < n; ++v) {
        missing[v] = static_cast<int>(g.pred[v].size());
        if (missing[v] == 0) ready.push_back(v);
    }
    std::make_heap(ready.begin(), ready.end(), higher);

    while (!ready.empty()) {
        std::pop_heap(ready.begin(), ready.end(), higher);
        const int v = ready.back();
        ready.pop_back();
        const double w = g.tasks[v].weight;

        int best_worker = -1;
        double best_start = 0.0, best_finish = std::numeric_limits<double>::infinity();
        std::size_t best_pos = 0;
        for (int p = 0; p < num_workers; ++p) {
            double avail = 0.0;
            for (int e : g.pred[v]) {
                const int u = g.edges[e].from;
                const double c = s.worker[u] == p ? 0.0 : comm.cost(g.edges[e].bytes);
                avail = std::max(avail, s.finish[u] + c);
            }
            // first idle gap on p that fits
            const auto& lane = s.order[p];
            double t = avail;
            std::size_t pos = lane.size();
            double prev_end = 0.0;
            for (std::size_t q = 0; q < lane.size(); ++q) {
                const double cand = std::max(avail, prev_end);
                const double next = s.start[lane[q]];
                if (cand + w <= next && (w > 0.0 || cand < next)) {
                    t = cand;
                    pos = q;
                    break;
                }
                prev_end = std::max(prev_end, s.finish[lane[q]]);
            }
            if (pos == lane.size()) t = std::max(avail, prev_end);
            if (t + w < best_finish) {
                best_finish = t + w;
                best_start = t;
                best_worker = p;
                best_pos = pos;
            }
        }
        s.worker[v] = best_worker;
        s.start[v] = best_start;
        s.finish[v] = best_finish;
        s.order[best_worker].insert(s.order[best_worker].begin() + static_cast<std::ptrdiff_t>(best_pos), v);

        for (int e : g.succ[v]) {
            const int c = g.edges[e].to;
            if (--missing[c] == 0) {
                ready.push_back(c);
                std::push_heap(ready.begin(), ready.end(), higher);
            }
        }
    }
    for (int v = 0; v < n; ++v)
        if (s.worker[v] < 0) throw GraphError("task graph has a cycle");

    for (const auto& e : g.edges)
        if (s.worker[e.from] != s.worker[e.to])
            s.comm.push_back({e.from, e.to, e.bytes, s.finish[e.from], s.finish[e.from] + comm.cost(e.bytes)});
    validate_schedule(g, s);
    return s;
}

void validate_schedule(const TaskGraph& g, const Schedule& s) {
    const int n = g.num_tasks();
    if (s.num_tasks() != n || static_cast<int>(s.start.size()) != n || static_cast<int>(s.finish.size()) != n)
        throw SchedulingError("schedule does not cover the task graph");
    if (static_cast<int>(s.order.size()) != s.num_workers) throw SchedulingError("schedule has a bad worker count");
    std::vector<int> seen(n, 0);
    for (int p = 0; p < s.num_workers; ++p)
        for (int v : s.order[p]) {
            if (v < 0 || v >= n || s.worker[v] != p || seen[v]++)
                throw SchedulingError("task " + std::to_string(v) + " is misplaced in the worker lists");
        }
    for (int v = 0; v < n; ++v)
        if (!seen[v]) throw SchedulingError("task " + std::to_string(v) + " is not scheduled");

    const double eps = 1e-9 * std::max(1.0, s.makespan());
    for (int v = 0; v < n; ++v)
        if (s.finish[v] + eps < s.start[v] + g.tasks[v].weight || s.start[v] < -eps)
            throw SchedulingError("task " + std::to_string(v) + " has an inconsistent interval");
    for (const auto& e : g.edges) {
        const double c = s.worker[e.from] == s.worker[e.to] ? 0.0 : s.comm_model.cost(e.bytes);
        if (s.start[e.to] + eps < s.finish[e.from] + c)
            throw SchedulingError("edge " + std::to_string(e.from) + " -> " + std::to_string(e.to) +
                                  " violates precedence");
    }
    for (const auto& lane : s.order)
        for (std::size_t q = 1; q < lane.size(); ++q)
            if (s.start[lane[q]] + eps < s.finish[lane[q - 1]])
                throw SchedulingError("tasks " + std::to_string(lane[q - 1]) + " and " + std::to_string(lane[q]) +
                                      " overlap");
}

MakespanBounds makespan_bounds(const TaskGraph& g, int num_workers) {
    if (num_workers <= 0) throw InvalidArgument("number of workers must be positive");
    MakespanBounds b;
    b.cp = critical_path(g).length;
    b.work = g.total_work();
    b.lower = std::max(b.cp, b.work / num_workers);
    return b;
}

namespace {

std::string task_kind(const TaskGraph& g, int v) {
    const auto& t = g.tasks[v];
    return t.ptasks.empty() ? "task" : to_string(g.ptasks[t.ptasks.front()].kind);
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

std::string gantt_csv(const TaskGraph& g, const Schedule& s, const std::vector<double>& actual_start,
                      const std::vector<double>& actual_finish) {
    const bool actual = !actual_start.empty();
    if (actual && (static_cast<int>(actual_start.size()) != s.num_tasks() ||
                   static_cast<int>(actual_finish.size()) != s.num_tasks()))
        throw InvalidArgument("actual times do not match the schedule");
    std::ostringstream os;
    os << "worker,task_id,kind,phase,predicted_start,predicted_finish,actual_start,actual_finish\n";
    for (int p = 0; p < s.num_workers; ++p)
        for (int v : s.order[p]) {
            os << p << ',' << v << ',' << task_kind(g, v) << ',' << to_string(g.tasks[v].phase) << ','
               << fmt(s.start[v]) << ',' << fmt(s.finish[v]) << ',';
            if (actual) os << fmt(actual_start[v]) << ',' << fmt(actual_finish[v]);
            else os << ',';
            os << '\n';
        }
    return os.str();
}

void export_gantt(const TaskGraph& g, const Schedule& s, const std::filesystem::path& path) {
    write_file_atomic(path, gantt_csv(g, s));
}

std::vector<GanttRow> parse_gantt(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::int64_t lineno = 1;
    if (!std::getline(in, line) || line.rfind("worker,task_id,kind,phase", 0) != 0)
        throw ParseError("missing gantt header", 1);
    std::vector<GanttRow> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 8) throw ParseError("expected 8 columns", lineno);
        try {
            GanttRow r;
            r.worker = std::stoi(f[0]);
            r.task = std::stoi(f[1]);
            r.kind = f[2];
            r.phase = f[3];
            r.predicted_start = std::stod(f[4]);
            r.predicted_finish = std::stod(f[5]);
            if (!f[6].empty()) {
                r.has_actual = true;
                r.actual_start = std::stod(f[6]);
                r.actual_finish = std::stod(f[7]);
            }
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw ParseError("bad number", lineno);
        }
    }
    return rows;
}

std::string schedule_to_json(const Schedule& s) {
    nlohmann::json j;
    j["num_workers"] = s.num_workers;
    j["makespan"] = s.makespan();
    j["comm_model"] = {{"bandwidth_bytes_per_s", std::isfinite(s.comm_model.bandwidth) ? s.comm_model.bandwidth : -1.0},
                       {"latency_s", s.comm_model.latency}};
    j["order"] = s.order;
    j["tasks"] = nlohmann::json::array();
    for (int v = 0; v < s.num_tasks(); ++v)
        j["tasks"].push_back({{"id", v}, {"worker", s.worker[v]}, {"start", s.start[v]}, {"finish", s.finish[v]}});
    j["comm"] = nlohmann::json::array();
    for (const auto& c : s.comm)
        j["comm"].push_back(
            {{"producer", c.producer}, {"consumer", c.consumer}, {"bytes", c.bytes}, {"send", c.send}, {"recv", c.recv}});
    return j.dump(1);
}

Schedule schedule_from_json(const std::string& text) {
    Schedule s;
    try {
        const auto j = nlohmann::json::parse(text);
        s.num_workers = j.at("num_workers").get<int>();
        const double bw = j.at("comm_model").at("bandwidth_bytes_per_s").get<double>();
        s.comm_model.bandwidth = bw < 0 ? std::numeric_limits<double>::infinity() : bw;
        s.comm_model.latency = j.at("comm_model").at("latency_s").get<double>();
        s.order = j.at("order").get<std::vector<std::vector<int>>>();
        const auto& tasks = j.at("tasks");
        s.worker.resize(tasks.size());
        s.start.resize(tasks.size());
        s.finish.resize(tasks.size());
        for (const auto& t : tasks) {
            const auto id = t.at("id").get<std::size_t>();
            if (id >= tasks.size()) throw ParseError("task id out of range", 0);
            s.worker[id] = t.at("worker").get<int>();
            s.start[id] = t.at("start").get<double>();
            s.finish[id] = t.at("finish").get<double>();
        }
        for (const auto& c : j.at("comm"))
            s.comm.push_back({c.at("producer").get<int>(), c.at("consumer").get<int>(),
                              c.at("bytes").get<std::int64_t>(), c.at("send").get<double>(),
                              c.at("recv").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("schedule json: ") + e.what(), 0);
    }
    return s;
}

}  // namespace d3m
