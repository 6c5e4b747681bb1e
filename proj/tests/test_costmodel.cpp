#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "d3m/costmodel.hpp"
#include "d3m/error.hpp"
#include "d3m/pipeline.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace d3m;

namespace {

Calibration two_point(double t64, double t128) {
    Calibration c;
    for (int k = 0; k < 3; ++k) {
        KernelTable t;
        t.kind = static_cast<KernelKind>(k);
        t.sizes = {64, 128};
        t.seconds = {t64 * (k + 1), t128 * (k + 1)};
        c.tables.push_back(t);
    }
    return c;
}

KnnSamples one_feature(std::vector<std::pair<double, double>> pts) {
    KnnSamples s;
    for (auto [f, t] : pts) s.add({f}, t);
    return s;
}

}  // namespace

TEST(DenseCost, ExactAtGridPoints) {
    const auto c = fixture::synthetic_calibration();
    for (const auto& t : c.tables)
        for (std::size_t i = 0; i < t.sizes.size(); ++i) {
            const double s = t.sizes[i];
            std::vector<double> dims = t.kind == KernelKind::factorize ? std::vector<double>{s}
                                       : t.kind == KernelKind::trisolve ? std::vector<double>{s, s}
                                                                        : std::vector<double>{s, s, s};
            EXPECT_EQ(estimate_dense_cost(c, t.kind, dims), t.seconds[i]);
        }
}

TEST(DenseCost, LogLogInterpolation) {
    const auto c = two_point(1e-4, 9e-4);
    const double w = (std::log(96.0) - std::log(64.0)) / (std::log(128.0) - std::log(64.0));
    const double expect = std::exp(std::log(1e-4) + w * (std::log(9e-4) - std::log(1e-4)));
    EXPECT_NEAR(estimate_dense_cost(c, KernelKind::factorize, {96}), expect, 1e-15);
    // Extrapolation keeps the end slope.
    const double slope = std::log(9.0) / std::log(2.0);
    EXPECT_NEAR(estimate_dense_cost(c, KernelKind::factorize, {256}), 9e-4 * std::pow(2.0, slope), 1e-12);
    EXPECT_NEAR(estimate_dense_cost(c, KernelKind::factorize, {32}), 1e-4 / std::pow(2.0, slope), 1e-15);
}

TEST(DenseCost, ZeroDimensionsCostNothing) {
    const auto c = fixture::synthetic_calibration();
    EXPECT_EQ(estimate_dense_cost(c, KernelKind::factorize, {0}), 0.0);
    EXPECT_EQ(estimate_dense_cost(c, KernelKind::trisolve, {5, 0}), 0.0);
    EXPECT_EQ(estimate_dense_cost(c, KernelKind::update, {0, 3, 3}), 0.0);
}

TEST(DenseCost, MonotoneAlongGrid) {
    const auto c = fixture::synthetic_calibration();
    for (auto k : {KernelKind::factorize, KernelKind::trisolve, KernelKind::update}) {
        double prev = 0.0;
        for (double s = 1; s <= 700; s += 3.5) {
            std::vector<double> dims(k == KernelKind::factorize ? 1 : k == KernelKind::trisolve ? 2 : 3, s);
            const double t = estimate_dense_cost(c, k, dims);
            EXPECT_GE(t, prev);
            prev = t;
        }
    }
}

TEST(DenseCost, EffectiveSize) {
    EXPECT_EQ(effective_size(KernelKind::factorize, {37}), 37.0);
    EXPECT_EQ(effective_size(KernelKind::trisolve, {64, 64}), 64.0);
    EXPECT_EQ(effective_size(KernelKind::update, {50, 50, 50}), 50.0);
    EXPECT_NEAR(effective_size(KernelKind::trisolve, {8, 64}), std::cbrt(8.0 * 64 * 64), 1e-12);
    EXPECT_NEAR(effective_size(KernelKind::update, {2, 4, 8}), 4.0, 1e-12);
}

TEST(DenseCost, NotCalibrated) {
    Calibration empty;
    EXPECT_THROW(estimate_dense_cost(empty, KernelKind::factorize, {4}), NotCalibratedError);
    EXPECT_THROW(empty.table(KernelKind::update), NotCalibratedError);
    const auto pp = fixture::chain_problem();
    EXPECT_THROW(weigh_graph(pp.graph, empty, {}), NotCalibratedError);
}

TEST(Knn, Examples) {
    const auto s = one_feature({{100, 2.0e-3}, {200, 9.0e-3}});
    EXPECT_NEAR(knn_estimate(s, {150}, 2), 5.5e-3, 1e-15);
    EXPECT_EQ(knn_estimate(s, {100}, 3), 2.0e-3);
    EXPECT_EQ(knn_estimate(s, {140}, 1), 2.0e-3);
    // k larger than the sample set.
    EXPECT_NEAR(knn_estimate(s, {150}, 10), 5.5e-3, 1e-15);
}

TEST(Knn, BoundedByNeighbors) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        KnnSamples s;
        const int ns = 1 + static_cast<int>(rng() % 12);
        for (int i = 0; i < ns; ++i) s.add({std::floor(u(rng) * 1000), std::floor(u(rng) * 5000), std::floor(u(rng) * 90)}, 1e-4 + u(rng));
        const std::vector<double> q{std::floor(u(rng) * 1000), std::floor(u(rng) * 5000), std::floor(u(rng) * 90)};
        const int k = 1 + static_cast<int>(rng() % 4);
        const double est = knn_estimate(s, q, k);
        const double lo = *std::min_element(s.seconds.begin(), s.seconds.end());
        const double hi = *std::max_element(s.seconds.begin(), s.seconds.end());
        EXPECT_GE(est, lo - 1e-15);
        EXPECT_LE(est, hi + 1e-15);
    }
}

TEST(Knn, Errors) {
    EXPECT_THROW(knn_estimate(KnnSamples{}, {1.0}), InvalidArgument);
    EXPECT_THROW(knn_estimate(one_feature({{1, 1}}), {1.0, 2.0}), InvalidArgument);
}

TEST(WeighGraph, DeterministicAndPositive) {
    PipelineOptions o;
    o.num_domains = 6;
    const auto pp = prepare_problem(generate_grid_problem({10, 9}, Stencil::laplacian()), o);
    const auto c = fixture::synthetic_calibration();
    const auto a = weigh_graph(pp.graph, c, {});
    const auto b = weigh_graph(pp.graph, c, {});
    EXPECT_EQ(a.to_json(), b.to_json());
    for (const auto& t : a.tasks) EXPECT_GT(t.weight, 0.0) << t.id;
    for (const auto& t : a.tasks) {
        double sum = 0.0;
        for (int p : t.ptasks) sum += a.ptasks[p].weight;
        EXPECT_EQ(sum, t.weight);
    }
}

TEST(WeighGraph, ChainDualWeightsComeFromTables) {
    Partition p;
    p.num_domains = 5;
    for (int i = 0; i < 25; ++i) p.owner.push_back(i / 5);
    PipelineOptions o;
    o.agglomerate = AgglomerationPolicy::none;
    const auto pp = prepare_problem(generate_grid_problem({25}, Stencil::laplacian()), p, o);
    const auto c = fixture::synthetic_calibration();
    const auto g = weigh_graph(pp.graph, c, {});
    int dual_factor = 0;
    for (const auto& q : g.ptasks) {
        if (q.kind == PTaskKind::blk_factorize) {
            EXPECT_EQ(q.weight, estimate_dense_cost(c, KernelKind::factorize, {1}));
            ++dual_factor;
        } else if (q.kind == PTaskKind::blk_trisolve) {
            EXPECT_EQ(q.weight, estimate_dense_cost(c, KernelKind::trisolve, {1, 1}));
            ++dual_factor;
        } else if (q.kind == PTaskKind::blk_update) {
            EXPECT_EQ(q.weight, estimate_dense_cost(c, KernelKind::update, {1, 1, 1}));
            ++dual_factor;
        }
    }
    EXPECT_EQ(dual_factor, 10);
}

TEST(WeighGraph, DoublingTablesDoublesDualWeights) {
    PipelineOptions o;
    o.num_domains = 5;
    const auto pp = prepare_problem(generate_grid_problem({8, 7}, Stencil::laplacian()), o);
    auto c = fixture::synthetic_calibration();
    const auto a = weigh_graph(pp.graph, c, {});
    for (auto& t : c.tables)
        for (auto& s : t.seconds) s *= 2.0;
    const auto b = weigh_graph(pp.graph, c, {});
    for (int t = 0; t < a.num_tasks(); ++t)
        if (a.tasks[t].phase == Phase::dual) { EXPECT_EQ(b.tasks[t].weight, 2.0 * a.tasks[t].weight); }
}

TEST(WeighGraph, UsesSamplesWhenPresent) {
    const auto pp = fixture::chain_problem();
    CostSamples s;
    s.primal.add({2, 4, 1}, 0.125);
    s.recovery.add({2, 4, 1}, 0.25);
    const auto g = weigh_graph(pp.graph, fixture::synthetic_calibration(), s);
    for (const auto& t : g.tasks) {
        if (t.phase == Phase::primal_reduction) { EXPECT_EQ(t.weight, 0.125); }
        if (t.phase == Phase::primal_recovery) { EXPECT_EQ(t.weight, 0.25); }
    }
}

TEST(WeighGraph, EmptyInterfaceDomain) {
    Partition p;
    p.num_domains = 1;
    p.owner.assign(9, 0);
    const auto pp = prepare_problem(generate_grid_problem({9}, Stencil::laplacian()), p, {});
    const auto c = fixture::synthetic_calibration();
    const auto g = weigh_graph(pp.graph, c, {});
    ASSERT_EQ(g.num_tasks(), 2);
    EXPECT_EQ(g.tasks[1].weight, estimate_dense_cost(c, KernelKind::trisolve, {1, 9}));
}

TEST(Calibration, TwoSizesTwoRows) {
    std::ostringstream log;
    const auto c = calibrate_kernels({64, 128}, 3, &log);
    ASSERT_EQ(c.tables.size(), 3u);
    for (const auto& t : c.tables) {
        EXPECT_EQ(t.sizes, (std::vector<int>{64, 128}));
        ASSERT_EQ(t.seconds.size(), 2u);
        for (double s : t.seconds) EXPECT_GT(s, 0.0);
        EXPECT_EQ(estimate_dense_cost(c, t.kind, std::vector<double>(t.kind == KernelKind::factorize ? 1 : t.kind == KernelKind::trisolve ? 2 : 3, 128.0)),
                  t.seconds[1]);
    }
    const auto& f = c.table(KernelKind::factorize);
    EXPECT_GT(f.seconds[1], f.seconds[0]);
    EXPECT_GT(c.comm.bandwidth, 0.0);
    EXPECT_GE(c.comm.latency, 0.0);
    EXPECT_EQ(c.fingerprint, machine_fingerprint());
    EXPECT_THROW(calibrate_kernels({64}, 2), InvalidArgument);
    EXPECT_THROW(calibrate_kernels({}, 3), InvalidArgument);
    EXPECT_EQ(calibrate_kernels({32, 16, 32}, 3).table(KernelKind::update).sizes, (std::vector<int>{16, 32}));
}

TEST(Calibration, JsonRoundTripAndFingerprintWarning) {
    fixture::TempDir dir("cal");
    auto c = fixture::synthetic_calibration();
    c.comm = {2.5e9, 3e-6};
    save_calibration(c, dir.path / "cal.json");
    std::ostringstream log;
    const auto back = load_calibration(dir.path / "cal.json", &log);
    EXPECT_NE(log.str().find("fingerprint"), std::string::npos);
    ASSERT_EQ(back.tables.size(), 3u);
    for (int k = 0; k < 3; ++k) {
        EXPECT_EQ(back.tables[k].sizes, c.tables[k].sizes);
        EXPECT_EQ(back.tables[k].seconds, c.tables[k].seconds);
    }
    EXPECT_EQ(back.comm.bandwidth, 2.5e9);
    EXPECT_EQ(back.comm.latency, 3e-6);
    EXPECT_THROW(calibration_from_json("[]"), ParseError);
    EXPECT_THROW(load_calibration(dir.path / "none.json"), IoError);
}

TEST(Samples, AppendAndLoad) {
    fixture::TempDir dir("samples");
    const auto path = dir.path / "knn.jsonl";
    EXPECT_EQ(load_cost_samples(path).primal.size(), 0u);
    CostSamples s;
    s.primal.add({10, 28, 3}, 1e-5);
    s.recovery.add({10, 28, 3}, 2e-6);
    append_cost_samples(path, s);
    append_cost_samples(path, s);
    const auto back = load_cost_samples(path);
    EXPECT_EQ(back.primal.size(), 2u);
    EXPECT_EQ(back.recovery.size(), 2u);
    EXPECT_EQ(back.primal.features[1], (std::vector<double>{10, 28, 3}));
    EXPECT_EQ(back.recovery.seconds[0], 2e-6);
}

TEST(Samples, DomainFeatures) {
    DomainStats s{12, 40, 5};
    EXPECT_EQ(domain_features(s), (std::vector<double>{12, 40, 5}));
}
