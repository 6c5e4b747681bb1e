#include "d3m/executor.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "d3m/error.hpp"

namespace d3m {

const char* to_string(MemoryMode m) { return m == MemoryMode::fast ? "fast" : "compact"; }

MemoryMode memory_mode_from_string(const std::string& s) {
    if (s == "fast") return MemoryMode::fast;
    if (s == "compact") return MemoryMode::compact;
    throw InvalidArgument("unknown memory mode '" + s + "'");
}

int workers_from_env(int fallback) {
    const char* v = std::getenv("D3M_WORKERS");
    if (!v || !*v) return fallback;
    char* end = nullptr;
    const long p = std::strtol(v, &end, 10);
    if (*end != '\0' || p <= 0 || p > 4096) return fallback;
    return static_cast<int>(p);
}

Schedule sequential_schedule(const TaskGraph& g) {
    Schedule s;
    s.num_workers = 1;
    s.comm_model = zero_comm();
    s.order = {g.topological_order()};
    s.worker.assign(g.num_tasks(), 0);
    s.start.assign(g.num_tasks(), 0.0);
    s.finish.assign(g.num_tasks(), 0.0);
    double t = 0.0;
    for (int v : s.order[0]) {
        s.start[v] = t;
        t += g.tasks[v].weight;
        s.finish[v] = t;
    }
    return s;
}

namespace {

using Clock = std::chrono::steady_clock;

enum PartMask : int { mask_whole = 1, mask_l = 2, mask_w = 4 };

int mask_of(int part) { return part == part_l ? mask_l : part == part_w ? mask_w : mask_whole; }

struct Item {
    InteriorFactor ifactor;
    DenseLdlt bfactor;
    Eigen::MatrixXd a;  // S, g, a block of K or L, or a RHS segment
    Eigen::MatrixXd w;  // W = L D from trisolve

    std::int64_t bytes() const {
        return (ifactor.size() > 0 ? ifactor.bytes() : 0) + bfactor.bytes() + 8 * (a.size() + w.size());
    }

    Item copy_parts(int mask) const {
        if (mask & mask_whole) return *this;
        Item c;
        if (mask & mask_l) c.a = a;
        if (mask & mask_w) c.w = w;
        return c;
    }
};

struct Message {
    int ptask = 0;
    Item item;
};

struct Mailbox {
    std::mutex m;
    std::condition_variable cv;
    std::deque<Message> q;
};

struct MemoryMeter {
    std::atomic<std::int64_t> current{0};
    std::atomic<std::int64_t> peak{0};

    void add(std::int64_t b) {
        const std::int64_t now = current.fetch_add(b) + b;
        std::int64_t p = peak.load();
        while (now > p && !peak.compare_exchange_weak(p, now)) {
        }
    }
    void sub(std::int64_t b) { current.fetch_sub(b); }
};

bool kept_after_use(PTaskKind k) {
    return k == PTaskKind::interior_factor || k == PTaskKind::blk_factorize || k == PTaskKind::recover ||
           k == PTaskKind::blk_trisolve;
}

bool is_final_x(const PTask& p) { return p.kind == PTaskKind::bwd_solve_blk && p.row == p.col; }

struct Shared {
    const PreparedProblem& pp;
    const TaskGraph& g;
    const Schedule& s;
    const ExecOptions& opts;

    std::vector<int> ptask_worker;
    /// Per ptask: (remote worker, part mask) pairs.
    std::vector<std::vector<std::pair<int, int>>> remote;
    /// Per task: external producer ptasks.
    std::vector<std::vector<int>> task_deps;

    std::vector<Mailbox> mail;
    MemoryMeter meter;
    std::atomic<std::int64_t> bytes_sent{0};
    std::atomic<bool> abort{false};
    std::mutex err_mutex;
    std::vector<std::pair<int, std::exception_ptr>> errors;
    std::mutex trace_mutex;
    Clock::time_point t0;

    RunTrace trace;

    Shared(const PreparedProblem& pp_, const TaskGraph& g_, const Schedule& s_, const ExecOptions& o)
        : pp(pp_), g(g_), s(s_), opts(o), mail(s_.num_workers) {}

    double now() const { return std::chrono::duration<double>(Clock::now() - t0).count(); }

    void log(const char* event, int task, int worker) {
        if (!opts.debug_trace) return;
        const double t = now();
        std::lock_guard lk(trace_mutex);
        *opts.debug_trace << nlohmann::json{{"event", event}, {"task", task}, {"worker", worker}, {"t", t}}.dump()
                          << "\n";
    }

    void fail(int task, std::exception_ptr e) {
        {
            std::lock_guard lk(err_mutex);
            errors.emplace_back(task, e);
        }
        abort = true;
        for (auto& mb : mail) {
            std::lock_guard lk(mb.m);
            mb.cv.notify_all();
        }
    }
};

class Worker {
public:
    Worker(Shared& sh, int id) : sh_(sh), id_(id), rng_(sh.opts.shuffle_seed.value_or(0) + 7919 * id) {
        const int np = static_cast<int>(sh.g.ptasks.size());
        uses_.assign(np, 0);
        uses_w_.assign(np, 0);
        produced_.assign(np, 0);
        waiting_.resize(np);
        const auto& order = sh.s.order[id];
        remaining_.assign(sh.g.num_tasks(), 0);
        for (int t : order) {
            remaining_[t] = static_cast<int>(sh.task_deps[t].size());
            for (int q : sh.task_deps[t]) waiting_[q].push_back(t);
            for (int p : sh.g.tasks[t].ptasks)
                for (const auto& in : sh.g.ptasks[p].inputs) {
                    ++uses_[in.ptask];
                    if (in.part == part_w) ++uses_w_[in.ptask];
                }
        }
        fast_ = sh.opts.memory_mode == MemoryMode::fast;
        if (fast_) preallocate();
    }

    void run() {
        for (int t : sh_.s.order[id_]) {
            if (!wait_for(t)) break;
            const double t_start = sh_.now();
            sh_.log("start", t, id_);
            try {
                for (int p : sh_.g.tasks[t].ptasks) {
                    const auto p0 = Clock::now();
                    execute(sh_.g.ptasks[p]);
                    sh_.trace.ptask_seconds[p] = std::chrono::duration<double>(Clock::now() - p0).count();
                }
            } catch (...) {
                sh_.fail(t, std::current_exception());
                break;
            }
            const double t_end = sh_.now();
            sh_.log("finish", t, id_);
            sh_.trace.start[t] = t_start;
            sh_.trace.finish[t] = t_end;
            sh_.trace.worker[t] = id_;
            progress(false);
        }
        flush(true);
    }

    /// Items left in the store after the run.
    std::unordered_map<int, Item>& store() { return store_; }

private:
    Shared& sh_;
    int id_;
    std::mt19937_64 rng_;
    bool fast_ = false;
    std::vector<int> uses_, uses_w_;
    std::vector<char> produced_;
    std::vector<std::vector<int>> waiting_;
    std::vector<int> remaining_;
    std::unordered_map<int, Item> store_;
    std::unordered_map<int, std::int64_t> recorded_;
    std::unordered_map<int, Eigen::MatrixXd> prealloc_;
    std::vector<Message> outbox_;

    const PreparedProblem& pp() const { return sh_.pp; }
    const TaskGraph& g() const { return sh_.g; }

    bool metered(int p) const { return phase_of(g().ptasks[p].kind) == Phase::dual; }

    void record(int p) {
        if (!metered(p)) return;
        const std::int64_t b = store_.at(p).bytes();
        auto& r = recorded_[p];
        if (b > r) sh_.meter.add(b - r);
        else sh_.meter.sub(r - b);
        r = b;
    }

    void erase(int p) {
        store_.erase(p);
        auto it = recorded_.find(p);
        if (it != recorded_.end()) {
            sh_.meter.sub(it->second);
            recorded_.erase(it);
        }
    }

    // Fill blocks and trisolve workspaces for every local ptask, up front.
    void preallocate() {
        const auto& bs = g().block_sizes;
        for (int t : sh_.s.order[id_])
            for (int p : g().tasks[t].ptasks) {
                const auto& pt = g().ptasks[p];
                Eigen::MatrixXd m;
                if (pt.kind == PTaskKind::blk_trisolve) m = Eigen::MatrixXd::Zero(bs[pt.row], bs[pt.col]);
                else if ((pt.kind == PTaskKind::blk_update || pt.kind == PTaskKind::blk_factorize) &&
                         pt.chain_prev < 0 && pt.assemble_from.empty())
                    m = Eigen::MatrixXd::Zero(bs[pt.row], bs[pt.col]);
                else continue;
                sh_.meter.add(8 * m.size());
                prealloc_.emplace(p, std::move(m));
            }
    }

    Eigen::MatrixXd take_prealloc(int p, int rows, int cols) {
        auto it = prealloc_.find(p);
        if (it == prealloc_.end()) return Eigen::MatrixXd::Zero(rows, cols);
        Eigen::MatrixXd m = std::move(it->second);
        sh_.meter.sub(8 * m.size());
        prealloc_.erase(it);
        return m;
    }

    void insert(int p, Item item) {
        store_[p] = std::move(item);
        record(p);
        for (int t : waiting_[p]) --remaining_[t];
    }

    const Item& get(int q) const {
        auto it = store_.find(q);
        if (it == store_.end())
            throw SchedulingError("ptask " + std::to_string(q) + " read before it was available on worker " +
                                  std::to_string(id_));
        return it->second;
    }

    Item take_chain(int q) {
        const Item& src = get(q);
        if (--uses_[q] == 0 && !kept_after_use(g().ptasks[q].kind) && !is_final_x(g().ptasks[q])) {
            Item moved = std::move(store_.at(q));
            erase(q);
            return moved;
        }
        return src;
    }

    void release(int q, int part) {
        if (part == part_w) --uses_w_[q];
        --uses_[q];
        dispose(q);
    }

    void dispose(int q) {
        auto it = store_.find(q);
        if (it == store_.end()) return;
        const auto& pt = g().ptasks[q];
        if (!produced_[q]) {
            if (uses_[q] == 0) erase(q);
            return;
        }
        if (pt.kind == PTaskKind::blk_trisolve) {
            if (!fast_ && uses_w_[q] == 0 && it->second.w.size() > 0) {
                it->second.w = Eigen::MatrixXd();
                record(q);
            }
            return;
        }
        if (uses_[q] == 0 && !kept_after_use(pt.kind) && !is_final_x(pt)) erase(q);
    }

    int input_of(const PTask& p, PTaskKind kind, int part = part_whole) const {
        for (const auto& in : p.inputs) {
            if (in.ptask == p.chain_prev) continue;
            if (std::find(p.assemble_from.begin(), p.assemble_from.end(), in.ptask) != p.assemble_from.end()) continue;
            if (g().ptasks[in.ptask].kind == kind && in.part == part) return in.ptask;
        }
        throw GraphError("ptask " + std::to_string(p.id) + " lacks a " + to_string(kind) + " input");
    }

    Eigen::MatrixXd block_head(const PTask& p, int row, int col) {
        if (p.chain_prev >= 0) return std::move(take_chain(p.chain_prev).a);
        const auto& bs = g().block_sizes;
        Eigen::MatrixXd b = take_prealloc(p.id, bs[row], bs[col]);
        for (int q : p.assemble_from)
            add_block_contribution(b, row, col, pp().layout.domains[g().ptasks[q].domain], get(q).a);
        return b;
    }

    Eigen::MatrixXd segment_head(const PTask& p, int row) {
        if (p.chain_prev >= 0) return std::move(take_chain(p.chain_prev).a);
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(g().block_sizes[row], g().nrhs);
        for (int q : p.assemble_from)
            add_rhs_contribution(c, row, pp().layout.domains[g().ptasks[q].domain], get(q).a);
        return c;
    }

    void execute(const PTask& p) {
        Item out;
        switch (p.kind) {
        case PTaskKind::interior_factor:
            out.ifactor = factor_interior(pp().domains[p.domain], pp().factor);
            break;
        case PTaskKind::dtn:
            out.a = compute_schur(pp().domains[p.domain], get(input_of(p, PTaskKind::interior_factor)).ifactor);
            break;
        case PTaskKind::rhs_reduce: {
            const auto& dp = pp().domains[p.domain];
            out.a = reduce_rhs(dp, get(input_of(p, PTaskKind::interior_factor)).ifactor,
                               gather_rows(pp().rhs, dp.interior), gather_rows(pp().rhs, dp.interface));
            break;
        }
        case PTaskKind::blk_factorize: {
            const Eigen::MatrixXd k = block_head(p, p.row, p.col);
            try {
                out.bfactor = kernel_factorize_block(k);
            } catch (const ZeroPivotError& e) {
                throw SingularBlockError(p.row, e.pivot());
            }
            break;
        }
        case PTaskKind::blk_trisolve: {
            Eigen::MatrixXd k = block_head(p, p.row, p.col);
            auto tr = kernel_trisolve_block(std::move(k), get(input_of(p, PTaskKind::blk_factorize)).bfactor);
            out.a = std::move(tr.l);
            auto it = prealloc_.find(p.id);
            if (it != prealloc_.end()) {
                out.w = take_prealloc(p.id, 0, 0);
                out.w = tr.w;
            } else {
                out.w = std::move(tr.w);
            }
            break;
        }
        case PTaskKind::blk_update: {
            Eigen::MatrixXd k = block_head(p, p.row, p.col);
            const int wi = input_of(p, PTaskKind::blk_trisolve, part_w);
            const int lj = input_of(p, PTaskKind::blk_trisolve, part_l);
            kernel_update_block(k, get(wi).w, get(lj).a, p.row == p.col);
            out.a = std::move(k);
            break;
        }
        case PTaskKind::fwd_solve_blk: {
            Eigen::MatrixXd c = segment_head(p, p.row);
            if (p.row == p.col) {
                solve_fwd_diag(get(input_of(p, PTaskKind::blk_factorize)).bfactor, c);
            } else {
                solve_fwd_offdiag(c, get(input_of(p, PTaskKind::blk_trisolve, part_l)).a,
                                  get(input_of(p, PTaskKind::fwd_solve_blk)).a);
            }
            out.a = std::move(c);
            break;
        }
        case PTaskKind::diag_solve_blk: {
            Eigen::MatrixXd z = std::move(take_chain(p.chain_prev).a);
            get(input_of(p, PTaskKind::blk_factorize)).bfactor.apply_d_inverse(z);
            out.a = std::move(z);
            break;
        }
        case PTaskKind::bwd_solve_blk: {
            Eigen::MatrixXd e = std::move(take_chain(p.chain_prev).a);
            if (p.row == p.col) {
                solve_bwd_diag(get(input_of(p, PTaskKind::blk_factorize)).bfactor, e);
            } else {
                solve_bwd_offdiag(e, get(input_of(p, PTaskKind::blk_trisolve, part_l)).a,
                                  get(input_of(p, PTaskKind::bwd_solve_blk)).a);
            }
            out.a = std::move(e);
            break;
        }
        case PTaskKind::recover: {
            const auto& dp = pp().domains[p.domain];
            const auto& dm = pp().layout.domains[p.domain];
            Eigen::MatrixXd ub = Eigen::MatrixXd::Zero(dp.num_interface(), g().nrhs);
            for (const auto& in : p.inputs) {
                const auto& src = g().ptasks[in.ptask];
                if (src.kind != PTaskKind::bwd_solve_blk) continue;
                const int slot = static_cast<int>(std::find(dm.rows.begin(), dm.rows.end(), src.row) - dm.rows.begin());
                const Eigen::MatrixXd& x = get(in.ptask).a;
                for (std::size_t q = 0; q < dm.positions[slot].size(); ++q)
                    ub.row(dm.positions[slot][q]) = x.row(dm.offsets[slot][q]);
            }
            out.a = recover_primal(dp, get(input_of(p, PTaskKind::interior_factor)).ifactor, ub,
                                   gather_rows(pp().rhs, dp.interior));
            break;
        }
        }

        produced_[p.id] = 1;
        for (const auto& [w, mask] : sh_.remote[p.id]) {
            Message m{p.id, out.copy_parts(mask)};
            sh_.bytes_sent += m.item.bytes();
            outbox_.push_back(std::move(m));
            target_.push_back(w);
        }
        insert(p.id, std::move(out));
        for (const auto& in : p.inputs)
            if (in.ptask != p.chain_prev) release(in.ptask, in.part);
        dispose(p.id);
    }

    std::vector<int> target_;  // destination worker per outbox message

    void flush(bool all) {
        if (outbox_.empty()) return;
        std::size_t count = outbox_.size();
        if (!all && sh_.opts.shuffle_seed) {
            std::vector<std::size_t> idx(outbox_.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            std::shuffle(idx.begin(), idx.end(), rng_);
            std::vector<Message> ob;
            std::vector<int> tg;
            for (std::size_t i : idx) ob.push_back(std::move(outbox_[i])), tg.push_back(target_[i]);
            outbox_ = std::move(ob);
            target_ = std::move(tg);
            count = std::uniform_int_distribution<std::size_t>(0, outbox_.size())(rng_);
        }
        for (std::size_t i = 0; i < count; ++i) {
            auto& mb = sh_.mail[target_[i]];
            sh_.log("send", g().ptasks[outbox_[i].ptask].task, id_);
            {
                std::lock_guard lk(mb.m);
                mb.q.push_back(std::move(outbox_[i]));
            }
            mb.cv.notify_all();
        }
        outbox_.erase(outbox_.begin(), outbox_.begin() + static_cast<std::ptrdiff_t>(count));
        target_.erase(target_.begin(), target_.begin() + static_cast<std::ptrdiff_t>(count));
    }

    bool drain() {
        std::deque<Message> got;
        {
            auto& mb = sh_.mail[id_];
            std::lock_guard lk(mb.m);
            got.swap(mb.q);
        }
        if (got.empty()) return false;
        if (sh_.opts.shuffle_seed) std::shuffle(got.begin(), got.end(), rng_);
        for (auto& m : got) {
            sh_.log("recv", g().ptasks[m.ptask].task, id_);
            insert(m.ptask, std::move(m.item));
            dispose(m.ptask);
        }
        return true;
    }

    void progress(bool blocked) {
        flush(blocked);
        drain();
    }

    bool wait_for(int t) {
        progress(false);
        auto last = Clock::now();
        const auto timeout = std::chrono::duration<double>(sh_.opts.deadlock_timeout_s);
        while (remaining_[t] > 0) {
            if (sh_.abort) return false;
            flush(true);
            auto& mb = sh_.mail[id_];
            {
                std::unique_lock lk(mb.m);
                mb.cv.wait_for(lk, std::chrono::milliseconds(50), [&] { return !mb.q.empty() || sh_.abort.load(); });
            }
            if (drain()) last = Clock::now();
            else if (Clock::now() - last > timeout) {
                sh_.fail(t, std::make_exception_ptr(SchedulingError(
                                "worker " + std::to_string(id_) + " made no progress waiting for task " +
                                std::to_string(t))));
                return false;
            }
        }
        return !sh_.abort;
    }
};

void prepare_shared(Shared& sh) {
    const auto& g = sh.g;
    const auto& s = sh.s;
    // Structure only: timing is not needed to execute, and a lane order that
    // contradicts the dependencies is left for the deadlock detector.
    if (s.num_tasks() != g.num_tasks() || static_cast<int>(s.order.size()) != s.num_workers)
        throw InvalidArgument("schedule does not match the task graph");
    std::vector<int> seen(g.num_tasks(), 0);
    for (int w = 0; w < s.num_workers; ++w)
        for (int t : s.order[w])
            if (t < 0 || t >= g.num_tasks() || s.worker[t] != w || seen[t]++)
                throw InvalidArgument("task " + std::to_string(t) + " is misplaced in the schedule");
    for (int t = 0; t < g.num_tasks(); ++t)
        if (!seen[t]) throw InvalidArgument("task " + std::to_string(t) + " is not scheduled");
    const int np = static_cast<int>(g.ptasks.size());
    sh.ptask_worker.assign(np, -1);
    for (const auto& p : g.ptasks) sh.ptask_worker[p.id] = s.worker[p.task];

    std::vector<std::map<int, int>> masks(np);
    sh.task_deps.assign(g.num_tasks(), {});
    for (const auto& t : g.tasks) {
        std::vector<int> deps;
        for (int p : t.ptasks)
            for (const auto& in : g.ptasks[p].inputs) {
                if (g.ptasks[in.ptask].task == t.id) continue;
                deps.push_back(in.ptask);
                const int w = s.worker[t.id];
                if (sh.ptask_worker[in.ptask] != w) masks[in.ptask][w] |= mask_of(in.part);
            }
        std::sort(deps.begin(), deps.end());
        deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
        sh.task_deps[t.id] = std::move(deps);
    }
    sh.remote.assign(np, {});
    for (int p = 0; p < np; ++p)
        for (const auto& [w, m] : masks[p]) sh.remote[p].emplace_back(w, m);

    const int nt = g.num_tasks();
    sh.trace.num_workers = s.num_workers;
    sh.trace.worker.assign(nt, -1);
    sh.trace.start.assign(nt, 0.0);
    sh.trace.finish.assign(nt, 0.0);
    sh.trace.ptask_seconds.assign(np, 0.0);
    sh.trace.memory_mode = sh.opts.memory_mode;
}

}  // namespace

RunResult execute_parallel(const PreparedProblem& pp, const TaskGraph& g, const Schedule& s, const ExecOptions& opts) {
    if (s.num_workers <= 0) throw InvalidArgument("schedule has no workers");
    Shared sh(pp, g, s, opts);
    prepare_shared(sh);

    RunResult res;
    res.x = Eigen::MatrixXd::Zero(pp.sys.n, pp.rhs.cols());
    if (g.num_tasks() == 0) {
        res.trace = std::move(sh.trace);
        return res;
    }

    std::vector<std::unique_ptr<Worker>> workers;
    for (int w = 0; w < s.num_workers; ++w) workers.push_back(std::make_unique<Worker>(sh, w));
    sh.t0 = Clock::now();
    std::vector<std::thread> threads;
    for (int w = 0; w < s.num_workers; ++w) threads.emplace_back([&, w] { workers[w]->run(); });
    for (auto& t : threads) t.join();

    if (!sh.errors.empty()) {
        auto first = std::min_element(sh.errors.begin(), sh.errors.end(),
                                       [](const auto& a, const auto& b) { return a.first < b.first; });
        std::rethrow_exception(first->second);
    }

    auto& tr = sh.trace;
    tr.makespan = 0.0;
    for (int t = 0; t < g.num_tasks(); ++t) {
        tr.makespan = std::max(tr.makespan, tr.finish[t]);
        tr.phase_seconds[static_cast<int>(g.tasks[t].phase)] += tr.finish[t] - tr.start[t];
    }
    tr.peak_block_bytes = sh.meter.peak.load();
    tr.bytes_communicated = sh.bytes_sent.load();

    for (const auto& p : g.ptasks) {
        const auto& st = workers[sh.ptask_worker[p.id]]->store();
        if (is_final_x(p)) {
            const auto& x = st.at(p.id).a;
            const auto& dofs = pp.layout.block_dofs[p.row];
            for (std::size_t o = 0; o < dofs.size(); ++o) res.x.row(dofs[o]) = x.row(o);
        } else if (p.kind == PTaskKind::recover) {
            const auto& u = st.at(p.id).a;
            const auto& dofs = pp.domains[p.domain].interior;
            for (std::size_t o = 0; o < dofs.size(); ++o) res.x.row(dofs[o]) = u.row(o);
        }
    }
    res.trace = std::move(sh.trace);
    return res;
}

RunResult execute_sequential(const PreparedProblem& pp, const TaskGraph& g, const ExecOptions& opts) {
    return execute_parallel(pp, g, sequential_schedule(g), opts);
}

Timeline collect_timeline(const RunTrace& trace, const TaskGraph& g, const Schedule& s, std::optional<double> t1) {
    if (static_cast<int>(trace.start.size()) != g.num_tasks() || s.num_tasks() != g.num_tasks() ||
        trace.num_workers != s.num_workers)
        throw InvalidArgument("trace does not match the schedule");
    for (int t = 0; t < g.num_tasks(); ++t)
        if (trace.worker[t] != s.worker[t]) throw InvalidArgument("trace ran a task on an unscheduled worker");
    Timeline tl;
    tl.gantt_csv = gantt_csv(g, s, trace.start, trace.finish);
    nlohmann::json j;
    j["primal_reduction_s"] = trace.phase_seconds[0];
    j["dual_factor_solve_s"] = trace.phase_seconds[1];
    j["recovery_s"] = trace.phase_seconds[2];
    j["peak_block_bytes"] = trace.peak_block_bytes;
    j["bytes_communicated"] = trace.bytes_communicated;
    j["makespan_actual_s"] = trace.makespan;
    j["makespan_predicted_s"] = s.makespan();
    j["workers"] = trace.num_workers;
    j["memory_mode"] = to_string(trace.memory_mode);
    if (trace.num_workers == 1) j["parallel_efficiency"] = 1.0;
    else if (t1 && trace.makespan > 0.0) j["parallel_efficiency"] = *t1 / (trace.num_workers * trace.makespan);
    else j["parallel_efficiency"] = nullptr;
    tl.breakdown_json = j.dump(2);
    return tl;
}

CostSamples samples_from_trace(const TaskGraph& g, const RunTrace& trace) {
    CostSamples out;
    for (const auto& t : g.tasks) {
        if (t.ptasks.empty()) continue;
        const auto& p = g.ptasks[t.ptasks.front()];
        if (p.domain < 0 || g.domains[p.domain].n_interior == 0) continue;
        const double sec = std::max(trace.finish[t.id] - trace.start[t.id], 1e-9);
        if (t.phase == Phase::primal_reduction) out.primal.add(domain_features(g.domains[p.domain]), sec);
        else if (t.phase == Phase::primal_recovery) out.recovery.add(domain_features(g.domains[p.domain]), sec);
    }
    return out;
}

}  // namespace d3m
