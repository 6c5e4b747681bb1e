#include "d3m/problem.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

#include "d3m/error.hpp"
#include "d3m/io.hpp"

namespace d3m {

double SparseSystem::coeff(int i, int j) const {
    if (i < j) std::swap(i, j);
    auto first = col_idx.begin() + row_ptr[i];
    auto last = col_idx.begin() + row_ptr[i + 1];
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return 0.0;
    return values[static_cast<std::size_t>(it - col_idx.begin())];
}

Eigen::SparseMatrix<double> SparseSystem::full() const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(2 * col_idx.size());
    for (int i = 0; i < n; ++i) {
        for (auto p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
            int j = col_idx[p];
            t.emplace_back(i, j, values[p]);
            if (j != i) t.emplace_back(j, i, values[p]);
        }
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(t.begin(), t.end());
    return a;
}

Eigen::MatrixXd SparseSystem::rhs_matrix() const {
    Eigen::MatrixXd b(n, num_rhs());
    for (int r = 0; r < num_rhs(); ++r) b.col(r) = rhs[r];
    return b;
}

void SparseSystem::validate() const {
    if (n < 1) throw InvalidArgument("system must have at least one DOF");
    if (static_cast<int>(row_ptr.size()) != n + 1 || row_ptr.front() != 0 ||
        row_ptr.back() != nnz_lower() || values.size() != col_idx.size())
        throw InvalidArgument("inconsistent CSR arrays");
    for (int i = 0; i < n; ++i) {
        if (row_ptr[i + 1] <= row_ptr[i]) throw InvalidArgument("row " + std::to_string(i) + " is empty");
        for (auto p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
            if (col_idx[p] < 0 || col_idx[p] > i)
                throw InvalidArgument("entry outside lower triangle in row " + std::to_string(i));
            if (p > row_ptr[i] && col_idx[p] <= col_idx[p - 1])
                throw InvalidArgument("unsorted or duplicate entry in row " + std::to_string(i));
        }
        if (col_idx[row_ptr[i + 1] - 1] != i)
            throw InvalidArgument("missing diagonal in row " + std::to_string(i));
    }
    for (const auto& b : rhs)
        if (b.size() != n) throw InvalidArgument("rhs length does not match n");
}

SparseSystem SparseSystem::from_lower_triplets(int n, const std::vector<Eigen::Triplet<double>>& lower) {
    if (n < 1) throw InvalidArgument("system must have at least one DOF");
    std::vector<Eigen::Triplet<double>> t(lower);
    for (const auto& e : t) {
        if (e.row() < 0 || e.row() >= n || e.col() < 0 || e.col() > e.row())
            throw InvalidArgument("triplet outside lower triangle");
    }
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, 0.0);
    std::stable_sort(t.begin(), t.end(), [](const auto& a, const auto& b) {
        return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
    });
    SparseSystem sys;
    sys.n = n;
    sys.row_ptr.assign(n + 1, 0);
    int prev_row = -1, prev_col = -1;
    for (const auto& e : t) {
        if (e.row() == prev_row && e.col() == prev_col) {
            sys.values.back() += e.value();
            continue;
        }
        sys.col_idx.push_back(e.col());
        sys.values.push_back(e.value());
        ++sys.row_ptr[e.row() + 1];
        prev_row = e.row();
        prev_col = e.col();
    }
    std::partial_sum(sys.row_ptr.begin(), sys.row_ptr.end(), sys.row_ptr.begin());
    sys.rhs.assign(1, Eigen::VectorXd::Ones(n));
    return sys;
}

bool operator==(const SparseSystem& a, const SparseSystem& b) {
    if (a.n != b.n || a.row_ptr != b.row_ptr || a.col_idx != b.col_idx || a.values != b.values ||
        a.shift != b.shift || a.rhs.size() != b.rhs.size())
        return false;
    for (std::size_t r = 0; r < a.rhs.size(); ++r)
        if (a.rhs[r] != b.rhs[r]) return false;
    return true;
}

std::vector<int> Partition::sizes() const {
    std::vector<int> s(num_domains, 0);
    for (int d : owner) ++s[d];
    return s;
}

void Partition::validate(int n) const {
    if (num_domains < 1) throw InvalidArgument("partition needs at least one domain");
    if (static_cast<int>(owner.size()) != n) throw InvalidArgument("partition length does not match n");
    std::vector<int> count(num_domains, 0);
    for (int d : owner) {
        if (d < 0 || d >= num_domains) throw InvalidArgument("domain id out of range");
        ++count[d];
    }
    for (int d = 0; d < num_domains; ++d)
        if (count[d] == 0) throw InvalidArgument("domain " + std::to_string(d) + " owns no DOF");
}

SparseSystem generate_grid_problem(const std::vector<int>& dims, Stencil stencil, std::uint64_t seed, RhsKind rhs) {
    if (dims.empty() || dims.size() > 3) throw InvalidArgument("grid must have 1, 2 or 3 dimensions");
    for (int d : dims)
        if (d < 2) throw InvalidArgument("grid dimension must be >= 2, got " + std::to_string(d));
    const int nx = dims[0];
    const int ny = dims.size() > 1 ? dims[1] : 1;
    const int nz = dims.size() > 2 ? dims[2] : 1;
    const std::int64_t total = static_cast<std::int64_t>(nx) * ny * nz;
    if (total > std::numeric_limits<int>::max()) throw InvalidArgument("grid too large");
    const int n = static_cast<int>(total);

    double diag = 2.0 * static_cast<double>(dims.size());
    if (stencil.kind == StencilKind::helmholtz) diag -= stencil.wavenumber * stencil.wavenumber;

    SparseSystem sys;
    sys.n = n;
    sys.row_ptr.reserve(n + 1);
    sys.row_ptr.push_back(0);
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                const int i = x + nx * (y + ny * z);
                // ascending column order: z-1, y-1, x-1, self
                if (z > 0) sys.col_idx.push_back(i - nx * ny), sys.values.push_back(-1.0);
                if (y > 0) sys.col_idx.push_back(i - nx), sys.values.push_back(-1.0);
                if (x > 0) sys.col_idx.push_back(i - 1), sys.values.push_back(-1.0);
                sys.col_idx.push_back(i);
                sys.values.push_back(diag);
                sys.row_ptr.push_back(static_cast<std::int64_t>(sys.col_idx.size()));
            }
        }
    }
    if (rhs == RhsKind::ones) {
        sys.rhs.assign(1, Eigen::VectorXd::Ones(n));
    } else {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) b[i] = dist(rng);
        sys.rhs.assign(1, b);
    }
    sys.grid_dims = dims;
    return sys;
}

namespace {

std::string lower_case(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

SparseSystem load_system(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::string line;
    std::int64_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty file", 1);
    ++lineno;
    {
        std::istringstream hs(lower_case(line));
        std::string banner, object, format, field, symmetry;
        hs >> banner >> object >> format >> field >> symmetry;
        if (banner != "%%matrixmarket" || object != "matrix")
            throw ParseError("missing %%MatrixMarket matrix banner", lineno);
        if (format != "coordinate") throw ParseError("only coordinate format is supported", lineno);
        if (field != "real" && field != "integer" && field != "double")
            throw ParseError("unsupported field '" + field + "'", lineno);
        if (symmetry != "symmetric") throw ParseError("expected symmetric qualifier, got '" + symmetry + "'", lineno);
    }

    std::int64_t rows = -1, cols = -1, nnz = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '%' || blank(line)) continue;
        std::istringstream ss(line);
        if (!(ss >> rows >> cols >> nnz) || rows < 1 || cols < 1 || nnz < 0)
            throw ParseError("malformed size line", lineno);
        break;
    }
    if (rows < 0) throw ParseError("missing size line", lineno);
    if (rows != cols) throw ParseError("matrix is not square", lineno);
    if (rows > std::numeric_limits<int>::max()) throw ParseError("matrix too large", lineno);
    const int n = static_cast<int>(rows);

    // Folded position -> (value, orientation bits: 1 = as lower, 2 = as upper).
    std::map<std::pair<int, int>, std::pair<double, int>> entries;
    std::int64_t read = 0;
    while (read < nnz && std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '%' || blank(line)) continue;
        std::istringstream ss(line);
        std::int64_t i = 0, j = 0;
        double v = 0.0;
        if (!(ss >> i >> j >> v)) throw ParseError("malformed entry", lineno);
        if (i < 1 || i > n || j < 1 || j > n)
            throw ParseError("index (" + std::to_string(i) + "," + std::to_string(j) + ") out of range", lineno);
        int r = static_cast<int>(i - 1), c = static_cast<int>(j - 1);
        int orient = r >= c ? 1 : 2;
        if (r < c) std::swap(r, c);
        auto [it, inserted] = entries.try_emplace({r, c}, v, orient);
        if (!inserted) {
            if (r != c && (it->second.second & orient) == 0)
                throw ParseError("entry (" + std::to_string(i) + "," + std::to_string(j) +
                                     ") duplicates its transpose in symmetric storage",
                                 lineno);
            it->second.first += v;
        }
        ++read;
    }
    if (read < nnz)
        throw ParseError("expected " + std::to_string(nnz) + " entries, found " + std::to_string(read), lineno);

    std::vector<Eigen::Triplet<double>> t;
    t.reserve(entries.size());
    for (const auto& [pos, val] : entries) t.emplace_back(pos.first, pos.second, val.first);
    return SparseSystem::from_lower_triplets(n, t);
}

void save_system(const SparseSystem& sys, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    out << sys.n << " " << sys.n << " " << sys.nnz_lower() << "\n";
    char buf[64];
    for (int i = 0; i < sys.n; ++i) {
        for (auto p = sys.row_ptr[i]; p < sys.row_ptr[i + 1]; ++p) {
            std::snprintf(buf, sizeof buf, "%.17g", sys.values[p]);
            out << (i + 1) << " " << (sys.col_idx[p] + 1) << " " << buf << "\n";
        }
    }
    write_file_atomic(path, out.str());
}

namespace {

// Per-axis box counts whose product is num_domains: smallest largest box first,
// then the smallest total cut area. Empty when no such split exists.
std::vector<int> box_counts(const std::vector<int>& dims, int num_domains) {
    const std::size_t na = dims.size();
    long long n = 1;
    for (int e : dims) n *= e;
    std::vector<int> best, cur(na, 1);
    long long best_box = 0, best_cut = 0;
    auto search = [&](auto&& self, std::size_t a, int rest) -> void {
        if (a + 1 == na) {
            if (rest > dims[a]) return;
            cur[a] = rest;
            long long box = 1, cut = 0;
            for (std::size_t i = 0; i < na; ++i) {
                box *= (dims[i] + cur[i] - 1) / cur[i];
                cut += static_cast<long long>(cur[i] - 1) * (n / dims[i]);
            }
            if (best.empty() || box < best_box || (box == best_box && cut < best_cut))
                best = cur, best_box = box, best_cut = cut;
            return;
        }
        for (int c = 1; c <= rest && c <= dims[a]; ++c)
            if (rest % c == 0) {
                cur[a] = c;
                self(self, a + 1, rest / c);
            }
    };
    search(search, 0, num_domains);
    return best;
}

Partition grid_partition(const SparseSystem& sys, int num_domains) {
    const auto& dims = sys.grid_dims;
    if (dims.empty()) throw InvalidArgument("grid partitioner requires a generated lattice problem");
    auto counts = box_counts(dims, num_domains);
    Partition part;
    part.num_domains = num_domains;
    part.owner.resize(sys.n);
    long long largest = 1;
    for (std::size_t a = 0; a < counts.size(); ++a) largest *= (dims[a] + counts[a] - 1) / counts[a];
    const double cap = std::ceil(static_cast<double>(sys.n) / num_domains) * (1.0 + 0.25);
    if (counts.empty() || static_cast<double>(largest) > cap) {
        // No balanced box split: contiguous slabs in lexicographic order.
        for (int i = 0; i < sys.n; ++i)
            part.owner[i] = static_cast<int>(static_cast<long long>(i) * num_domains / sys.n);
        return part;
    }
    const int nx = dims[0];
    const int ny = dims.size() > 1 ? dims[1] : 1;
    const int nz = dims.size() > 2 ? dims[2] : 1;
    const int cx = counts[0];
    const int cy = counts.size() > 1 ? counts[1] : 1;
    const int cz = counts.size() > 2 ? counts[2] : 1;
    // box b covers [floor(b*e/c), floor((b+1)*e/c))
    auto box = [](int coord, int extent, int count) {
        int b = 0;
        while (b + 1 < count && static_cast<long long>(b + 1) * extent / count <= coord) ++b;
        return b;
    };
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                part.owner[x + nx * (y + ny * z)] = box(x, nx, cx) + cx * (box(y, ny, cy) + cy * box(z, nz, cz));
    return part;
}

Partition bfs_partition(const SparseSystem& sys, int num_domains) {
    const auto a = sys.full();
    Partition part;
    part.num_domains = num_domains;
    part.owner.assign(sys.n, -1);
    int assigned = 0;
    int next_seed = 0;
    for (int d = 0; d < num_domains; ++d) {
        const int remaining = sys.n - assigned;
        const int target = (remaining + (num_domains - d) - 1) / (num_domains - d);
        int grown = 0;
        std::queue<int> frontier;
        while (grown < target) {
            if (frontier.empty()) {
                while (part.owner[next_seed] != -1) ++next_seed;
                part.owner[next_seed] = d;
                ++grown;
                frontier.push(next_seed);
                continue;
            }
            const int v = frontier.front();
            frontier.pop();
            for (Eigen::SparseMatrix<double>::InnerIterator it(a, v); it && grown < target; ++it) {
                const int u = static_cast<int>(it.row());
                if (part.owner[u] != -1 || it.value() == 0.0) continue;
                part.owner[u] = d;
                ++grown;
                frontier.push(u);
            }
        }
        assigned += grown;
    }
    return part;
}

}  // namespace

Partition partition_domains(const SparseSystem& sys, int num_domains, PartitionStrategy strategy) {
    if (num_domains < 1 || num_domains > sys.n)
        throw InvalidArgument("num_domains must lie in [1, n], got " + std::to_string(num_domains));
    Partition part = strategy == PartitionStrategy::grid ? grid_partition(sys, num_domains)
                                                         : bfs_partition(sys, num_domains);
    part.validate(sys.n);
    return part;
}

bool partition_balanced(const Partition& part, double imbalance_tol) {
    const auto sizes = part.sizes();
    const int n = static_cast<int>(part.owner.size());
    const double cap = std::ceil(static_cast<double>(n) / part.num_domains) * (1.0 + imbalance_tol);
    return *std::max_element(sizes.begin(), sizes.end()) <= cap;
}

std::vector<char> separator_mask(const SparseSystem& sys, const Partition& part) {
    std::vector<char> sep(sys.n, 0);
    for (int i = 0; i < sys.n; ++i) {
        for (auto p = sys.row_ptr[i]; p < sys.row_ptr[i + 1]; ++p) {
            const int j = sys.col_idx[p];
            if (j == i || sys.values[p] == 0.0) continue;
            const int oi = part.owner[i], oj = part.owner[j];
            if (oi < oj) sep[i] = 1;
            if (oj < oi) sep[j] = 1;
        }
    }
    return sep;
}

std::vector<DomainProblem> split_domain_dofs(const SparseSystem& sys, const Partition& part) {
    part.validate(sys.n);
    const auto a = sys.full();
    const auto sep = separator_mask(sys, part);
    const int D = part.num_domains;

    // Domains that see each separator DOF: its owner plus owners of its neighbors.
    std::vector<std::vector<int>> seen_by(sys.n);
    for (int s = 0; s < sys.n; ++s) {
        if (!sep[s]) continue;
        auto& v = seen_by[s];
        v.push_back(part.owner[s]);
        for (Eigen::SparseMatrix<double>::InnerIterator it(a, s); it; ++it)
            if (it.value() != 0.0) v.push_back(part.owner[it.row()]);
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    auto shared_count = [&](int s, int t) {
        const auto& x = seen_by[s];
        const auto& y = seen_by[t];
        int c = 0;
        for (std::size_t i = 0, j = 0; i < x.size() && j < y.size();) {
            if (x[i] == y[j]) ++c, ++i, ++j;
            else if (x[i] < y[j]) ++i;
            else ++j;
        }
        return c;
    };

    std::vector<DomainProblem> out(D);
    for (int d = 0; d < D; ++d) out[d].domain_id = d;
    for (int i = 0; i < sys.n; ++i) {
        if (!sep[i]) {
            out[part.owner[i]].interior.push_back(i);
        } else {
            for (int d : seen_by[i]) out[d].interface.push_back(i);
        }
    }

    std::vector<int> local(sys.n, -1);
    for (auto& dp : out) {
        const int ni = dp.num_interior(), nb = dp.num_interface();
        for (int p = 0; p < ni; ++p) local[dp.interior[p]] = p;
        for (int p = 0; p < nb; ++p) local[dp.interface[p]] = p;

        std::vector<Eigen::Triplet<double>> tii, tib;
        for (int p = 0; p < ni; ++p) {
            const int g = dp.interior[p];
            for (Eigen::SparseMatrix<double>::InnerIterator it(a, g); it; ++it) {
                const int h = static_cast<int>(it.row());
                // Explicit zeros do not couple; they may point into another domain.
                if (h != g && it.value() == 0.0) continue;
                if (sep[h]) {
                    tib.emplace_back(p, local[h], it.value());
                } else {
                    tii.emplace_back(local[h], p, it.value());
                }
            }
            if (sys.shift != 0.0) tii.emplace_back(p, p, sys.shift);
        }
        dp.a_ii.resize(ni, ni);
        dp.a_ii.setFromTriplets(tii.begin(), tii.end());
        dp.a_ib.resize(ni, nb);
        dp.a_ib.setFromTriplets(tib.begin(), tib.end());

        dp.a_bb_local = Eigen::MatrixXd::Zero(nb, nb);
        dp.interface_weight.resize(nb);
        std::vector<int> nbrs;
        for (int q = 0; q < nb; ++q) {
            const int t = dp.interface[q];
            for (Eigen::SparseMatrix<double>::InnerIterator it(a, t); it; ++it) {
                const int s = static_cast<int>(it.row());
                if (!sep[s] || local[s] < 0 || (s != t && it.value() == 0.0)) continue;
                // s must also be in this domain's interface
                if (!std::binary_search(dp.interface.begin(), dp.interface.end(), s)) continue;
                dp.a_bb_local(local[s], q) = it.value() / shared_count(s, t);
            }
            dp.interface_weight[q] = 1.0 / static_cast<double>(seen_by[t].size());
            for (int other : seen_by[t])
                if (other != dp.domain_id) nbrs.push_back(other);
        }
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
        dp.neighbor_ids = std::move(nbrs);

        for (int g : dp.interior) local[g] = -1;
        for (int g : dp.interface) local[g] = -1;
    }
    return out;
}

Partition load_partition(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    Partition part;
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) {
            // trailing blank lines are tolerated, interior ones are not
            std::string rest;
            while (std::getline(in, rest)) {
                ++lineno;
                if (!blank(rest)) throw ParseError("blank line inside partition file", lineno - 1);
            }
            break;
        }
        std::istringstream ss(line);
        long long d = -1;
        std::string extra;
        if (!(ss >> d) || (ss >> extra) || d < 0 || d > std::numeric_limits<int>::max())
            throw ParseError("expected a nonnegative domain id", lineno);
        part.owner.push_back(static_cast<int>(d));
    }
    if (part.owner.empty()) throw ParseError("empty partition file", 0);
    part.num_domains = *std::max_element(part.owner.begin(), part.owner.end()) + 1;
    part.validate(static_cast<int>(part.owner.size()));
    return part;
}

void save_partition(const Partition& part, const std::filesystem::path& path) {
    std::ostringstream out;
    for (int d : part.owner) out << d << "\n";
    write_file_atomic(path, out.str());
}

}  // namespace d3m
