#include <gtest/gtest.h>

#include <random>

#include "d3m/error.hpp"
#include "d3m/pipeline.hpp"
#include "d3m/primal.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace d3m;

namespace {

std::vector<DomainProblem> chain_domains() {
    return split_domain_dofs(generate_grid_problem({5}, Stencil::laplacian()), fixture::chain_partition());
}

/// A domain with a random dense interior and coupling, built by hand.
DomainProblem random_domain(std::mt19937_64& rng, int ni, int nb, double shift) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd aii(ni, ni);
    for (int i = 0; i < ni; ++i)
        for (int j = 0; j <= i; ++j) aii(i, j) = aii(j, i) = g(rng);
    aii.diagonal().array() += shift;
    Eigen::MatrixXd aib(ni, nb);
    for (int i = 0; i < ni; ++i)
        for (int j = 0; j < nb; ++j) aib(i, j) = (rng() % 3 == 0) ? g(rng) : 0.0;
    Eigen::MatrixXd abb(nb, nb);
    for (int i = 0; i < nb; ++i)
        for (int j = 0; j <= i; ++j) abb(i, j) = abb(j, i) = g(rng);
    DomainProblem dp;
    for (int i = 0; i < ni; ++i) dp.interior.push_back(i);
    for (int j = 0; j < nb; ++j) dp.interface.push_back(ni + j);
    dp.a_ii = aii.sparseView();
    dp.a_ib = aib.sparseView();
    dp.a_bb_local = abb;
    dp.interface_weight = Eigen::VectorXd::Ones(nb);
    return dp;
}

}  // namespace

TEST(FactorInterior, ChainDomain) {
    const auto dps = chain_domains();
    const auto f = factor_interior(dps[0]);
    EXPECT_EQ(f.storage, FactorStorage::dense);
    EXPECT_EQ(f.size(), 2);
    const Eigen::MatrixXd a(dps[0].a_ii);
    const Eigen::MatrixXd l = f.l_matrix(), d = f.d_matrix();
    Eigen::MatrixXd pap(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) pap(i, j) = a(f.perm()[i], f.perm()[j]);
    EXPECT_LE((l * d * l.transpose() - pap).norm(), 1e-15);
}

TEST(FactorInterior, EmptyInterior) {
    DomainProblem dp;
    dp.interface = {0, 1};
    dp.a_ii.resize(0, 0);
    dp.a_ib.resize(0, 2);
    dp.a_bb_local = Eigen::MatrixXd::Identity(2, 2);
    dp.interface_weight = Eigen::VectorXd::Ones(2);
    const auto f = factor_interior(dp);
    EXPECT_EQ(f.size(), 0);
    EXPECT_TRUE(compute_schur(dp, f).isIdentity());
    const auto u = recover_primal(dp, f, Eigen::MatrixXd::Ones(2, 1), Eigen::MatrixXd(0, 1));
    EXPECT_EQ(u.rows(), 0);
}

TEST(FactorInterior, SingularDomainCarriesId) {
    auto s = generate_grid_problem({6}, Stencil::laplacian());
    std::fill(s.values.begin(), s.values.end(), 0.0);
    Partition p;
    p.num_domains = 2;
    p.owner = {0, 0, 0, 1, 1, 1};
    const auto dps = split_domain_dofs(s, p);
    try {
        factor_interior(dps[1]);
        FAIL();
    } catch (const SingularDomainError& e) {
        EXPECT_EQ(e.domain(), 1);
        EXPECT_EQ(e.pivot(), 0);
    }
}

TEST(FactorInterior, SparsePathReconstructs) {
    const auto s = generate_grid_problem({20, 20}, Stencil::laplacian());
    Partition p;
    p.num_domains = 1;
    p.owner.assign(s.n, 0);
    const auto dps = split_domain_dofs(s, p);
    const auto f = factor_interior(dps[0]);
    EXPECT_EQ(f.storage, FactorStorage::sparse);
    const Eigen::MatrixXd a(dps[0].a_ii);
    const Eigen::MatrixXd l = f.l_matrix();
    Eigen::MatrixXd pap(s.n, s.n);
    for (int i = 0; i < s.n; ++i)
        for (int j = 0; j < s.n; ++j) pap(i, j) = a(f.perm()[i], f.perm()[j]);
    EXPECT_LE((l * f.d_matrix() * l.transpose() - pap).norm(), 1e-12 * pap.norm());
}

TEST(FactorInterior, IndefiniteSparseFallsBackToDense) {
    // Helmholtz with k^2 exactly an eigenvalue of a 1-D sub-chain would be
    // singular; pick a k that produces a tiny leading pivot instead.
    const auto s = generate_grid_problem({300}, Stencil::helmholtz(std::sqrt(2.0)));
    Partition p;
    p.num_domains = 1;
    p.owner.assign(s.n, 0);
    const auto dps = split_domain_dofs(s, p);
    const auto f = factor_interior(dps[0]);
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(s.n, 1);
    f.solve(x);
    const Eigen::MatrixXd a(dps[0].a_ii);
    EXPECT_LE((a * x - Eigen::MatrixXd::Ones(s.n, 1)).norm() / std::sqrt(s.n), 1e-8);
}

TEST(Dtn, ChainValues) {
    const auto dps = chain_domains();
    const auto s = generate_grid_problem({5}, Stencil::laplacian());
    for (int d = 0; d < 2; ++d) {
        const auto f = factor_interior(dps[d]);
        const auto c = compute_dtn(dps[d], f, s.rhs_matrix());
        ASSERT_EQ(c.s_local.rows(), 1);
        EXPECT_NEAR(c.s_local(0, 0), 1.0 / 3.0, 1e-15);
        EXPECT_NEAR(c.g_local(0, 0), 1.5, 1e-15);
        EXPECT_EQ(c.interface_dofs, std::vector<int>{2});
        EXPECT_EQ(c.domain_id, d);
    }
}

TEST(Dtn, EmptyInterface) {
    const auto s = generate_grid_problem({4}, Stencil::laplacian());
    Partition p;
    p.num_domains = 1;
    p.owner.assign(4, 0);
    const auto dps = split_domain_dofs(s, p);
    const auto c = compute_dtn(dps[0], factor_interior(dps[0]), s.rhs_matrix());
    EXPECT_EQ(c.s_local.rows(), 0);
    EXPECT_EQ(c.s_local.cols(), 0);
    EXPECT_EQ(c.g_local.rows(), 0);
}

TEST(Dtn, MatchesDenseSchurOracle) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 40; ++trial) {
        const int ni = 1 + static_cast<int>(rng() % 200);
        const int nb = 1 + static_cast<int>(rng() % 30);
        const bool spd = trial % 2 == 0;
        const auto dp = random_domain(rng, ni, nb, spd ? 2.0 * std::sqrt(ni) + 3.0 : 0.37);
        const auto f = factor_interior(dp);
        const Eigen::MatrixXd s = compute_schur(dp, f);
        const Eigen::MatrixXd ref =
            oracle::dense_schur(Eigen::MatrixXd(dp.a_ii), Eigen::MatrixXd(dp.a_ib), dp.a_bb_local);
        EXPECT_LE(oracle::rel_fro(s, ref), 1e-11) << "ni=" << ni << " nb=" << nb;
        EXPECT_LE((s - s.transpose()).norm(), 1e-13 * s.norm());
    }
}

TEST(Dtn, RhsReduction) {
    std::mt19937_64 rng(4);
    const auto dp = random_domain(rng, 25, 6, 12.0);
    const auto f = factor_interior(dp);
    const Eigen::MatrixXd fi = Eigen::MatrixXd::Random(25, 2), fb = Eigen::MatrixXd::Random(6, 2);
    const Eigen::MatrixXd g = reduce_rhs(dp, f, fi, fb);
    const Eigen::MatrixXd aii(dp.a_ii), aib(dp.a_ib);
    const Eigen::MatrixXd ref = fb - aib.transpose() * oracle::dense_solve(aii, fi);
    EXPECT_LE(oracle::rel_fro(g, ref), 1e-12);
}

TEST(Recover, ChainValues) {
    const auto dps = chain_domains();
    const auto f = factor_interior(dps[0]);
    const Eigen::MatrixXd u = recover_primal(dps[0], f, Eigen::MatrixXd::Constant(1, 1, 4.5), Eigen::MatrixXd::Ones(2, 1));
    EXPECT_NEAR(u(0, 0), 2.5, 1e-14);
    EXPECT_NEAR(u(1, 0), 4.0, 1e-14);
}

TEST(Recover, HomogeneousAndMismatch) {
    const auto dps = chain_domains();
    const auto f = factor_interior(dps[1]);
    const Eigen::MatrixXd u = recover_primal(dps[1], f, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(2, 1));
    EXPECT_TRUE(u.isZero(0.0));
    EXPECT_THROW(recover_primal(dps[1], f, Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Zero(2, 1)), InvalidArgument);
    EXPECT_THROW(recover_primal(dps[1], f, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(3, 1)), InvalidArgument);
}

TEST(Pipeline, GlobalEquivalence) {
    std::vector<std::pair<SparseSystem, int>> cases;
    cases.emplace_back(generate_grid_problem({40}, Stencil::laplacian(), 1, RhsKind::random), 4);
    cases.emplace_back(generate_grid_problem({12, 10}, Stencil::laplacian(), 2, RhsKind::random), 6);
    cases.emplace_back(generate_grid_problem({9, 9}, Stencil::helmholtz(oracle::helmholtz_wavenumber({9, 9}, 6)), 3,
                                             RhsKind::random),
                       4);
    cases.emplace_back(generate_grid_problem({6, 5, 4}, Stencil::laplacian(), 4, RhsKind::random), 8);
    for (auto& [s, d] : cases) {
        PipelineOptions o;
        o.num_domains = d;
        const auto pp = prepare_problem(s, o);
        const Eigen::MatrixXd x = solve_reference(pp);
        EXPECT_LE(relative_residual(pp.sys, x), 1e-10);
        const Eigen::MatrixXd ref = oracle::reference_solve(pp.sys);
        EXPECT_LE((x - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Pipeline, GatherRows) {
    Eigen::MatrixXd b(4, 2);
    b << 1, 2, 3, 4, 5, 6, 7, 8;
    const auto r = gather_rows(b, {3, 1});
    EXPECT_EQ(r(0, 0), 7);
    EXPECT_EQ(r(1, 1), 4);
}
