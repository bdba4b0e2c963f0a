// SPDX-License-Identifier: Apache-2.0
//
// thp-sim: two-timescale hybrid precoding optimization for massive MIMO
// Copyright (C) 2026 The thp-sim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "thp/dual_qp.hpp"
#include "thp/verification.hpp"

#include <gtest/gtest.h>

#include <chrono>

using namespace thp;

namespace
{
    QuadraticSubproblem one_dim(double tau0, double xl, double u0, double lo, double hi)
    {
        QuadraticSubproblem qp;
        qp.center = Vec::Constant(1, xl);
        qp.tau = Vec::Constant(1, tau0);
        qp.u = Mat::Constant(1, 1, u0);
        qp.anchor = Vec::Zero(1);
        qp.box = {Vec::Constant(1, lo), Vec::Constant(1, hi)};
        return qp;
    }

    QuadraticSubproblem add_row(QuadraticSubproblem qp, double tau, const Vec &u, double anchor)
    {
        const int m = qp.m() + 1;
        qp.tau.conservativeResize(m + 1);
        qp.tau[m] = tau;
        qp.u.conservativeResize(m + 1, Eigen::NoChange);
        qp.u.row(m) = u.transpose();
        qp.anchor.conservativeResize(m + 1);
        qp.anchor[m] = anchor;
        return qp;
    }
} // namespace

TEST(PrimalFromDual, UnconstrainedMinimum)
{
    QuadraticSubproblem qp;
    qp.center = Vec::LinSpaced(4, -1.0, 2.0);
    qp.tau = Vec::Constant(1, 0.7);
    qp.u = Mat(1, 4);
    qp.u << 0.3, -1.2, 2.0, 0.0;
    qp.anchor = Vec::Zero(1);
    qp.box = {Vec::Constant(4, -1e6), Vec::Constant(4, 1e6)};
    const Vec x = primal_from_dual(qp, Vec(0));
    const Vec expect = qp.center - qp.u.row(0).transpose() / (2.0 * 0.7);
    EXPECT_LT((x - expect).norm(), 1e-14);
}

TEST(PrimalFromDual, ZeroGradientIsProximalFixedPoint)
{
    auto qp = one_dim(2.0, 0.4, 0.0, -1.0, 1.0);
    EXPECT_EQ(primal_from_dual(qp, Vec(0))[0], 0.4);
}

TEST(PrimalFromDual, ClipsToBox)
{
    // unclipped -u/(2 tau) = -2, box [-1, 1]
    auto qp = one_dim(1.0, 0.0, 4.0, -1.0, 1.0);
    EXPECT_EQ(primal_from_dual(qp, Vec(0))[0], -1.0);
    qp.box = {Vec::Constant(1, -5.0), Vec::Constant(1, 5.0)};
    EXPECT_DOUBLE_EQ(primal_from_dual(qp, Vec(0))[0], -2.0);
}

TEST(PrimalFromDual, AlwaysInsideBox)
{
    Rng rng = make_rng(11, Stream::Testing);
    std::exponential_distribution<double> E(0.2);
    for (int t = 0; t < 200; ++t)
    {
        const auto r = random_subproblem(rng, 15, 3, QpMode::Objective);
        Vec lambda(3);
        for (int j = 0; j < 3; ++j)
            lambda[j] = E(rng);
        const Vec x = primal_from_dual(r.qp, lambda);
        EXPECT_TRUE(r.qp.box.contains(x));
    }
}

TEST(PrimalFromDual, RejectsZeroCurvature)
{
    auto qp = add_row(one_dim(1.0, 0.0, 1.0, -1.0, 1.0), 1.0, Vec::Ones(1), -1.0);
    qp.mode = QpMode::Feasibility;
    EXPECT_THROW(primal_from_dual(qp, Vec::Zero(1)), DomainError);
    EXPECT_THROW(primal_from_dual(qp, Vec::Zero(2)), DimensionError);
}

TEST(QuadraticSubproblem, AffineConstantMatchesExpandedForm)
{
    Rng rng = make_rng(5, Stream::Testing);
    const auto r = random_subproblem(rng, 7, 2, QpMode::Objective);
    const auto &qp = r.qp;
    const Vec x = r.interior;
    for (int j = 0; j <= qp.m(); ++j)
    {
        const double expanded = qp.affine_constant(j) + qp.u.row(j).dot(x) -
                                2.0 * qp.tau[j] * qp.center.dot(x) + qp.tau[j] * x.squaredNorm();
        EXPECT_NEAR(expanded, qp.value(j, x), 1e-12);
    }
}

TEST(QuadraticSubproblem, ValidationRejectsBadInput)
{
    auto qp = one_dim(1.0, 0.0, 1.0, -1.0, 1.0);
    qp.tau[0] = 0.0;
    EXPECT_THROW(qp.validate(), DomainError);
    qp.tau[0] = 1.0;
    qp.box.upper[0] = -2.0;
    EXPECT_THROW(qp.validate(), DomainError);
    qp.box.upper[0] = 1.0;
    qp.u.resize(1, 2);
    EXPECT_THROW(qp.validate(), DimensionError);
}

TEST(ProjectSimplex, KnownCases)
{
    Vec a(3);
    a << 0.5, 0.5, 0.5;
    EXPECT_LT((project_simplex(a) - Vec::Constant(3, 1.0 / 3.0)).norm(), 1e-15);
    Vec b(2);
    b << 2.0, 0.0;
    EXPECT_EQ(project_simplex(b), Vec::Unit(2, 0));
    Vec c(3);
    c << 0.2, 0.3, 0.5;
    EXPECT_LT((project_simplex(c) - c).norm(), 1e-15);
    Vec d(3);
    d << -1.0, 0.4, 0.8;
    Vec expect(3);
    expect << 0.0, 0.3, 0.7;
    EXPECT_LT((project_simplex(d) - expect).norm(), 1e-15);
}

TEST(ObjectiveQp, InactiveConstraintHasZeroMultiplier)
{
    // unconstrained minimizer x = -0.5; constraint x - 0.9 <= 0 is slack there
    auto qp = add_row(one_dim(1.0, 0.0, 1.0, -2.0, 2.0), 1e-3, Vec::Ones(1), -0.9);
    const auto s = solve_objective_qp(qp);
    ASSERT_TRUE(s.converged);
    EXPECT_EQ(s.lambda[0], 0.0);
    EXPECT_NEAR(s.x_bar[0], -0.5, 1e-12);
}

TEST(ObjectiveQp, ActiveConstraintMatchesHandSolution)
{
    // min (x-0)^2 + 4x on [-5,5] s.t. -x - 1 + 1e-3 x^2 <= 0 -> x near -1
    auto qp = add_row(one_dim(1.0, 0.0, 4.0, -5.0, 5.0), 1e-3, -Vec::Ones(1), -1.0);
    const auto s = solve_objective_qp(qp);
    ASSERT_TRUE(s.converged);
    // root of 1e-3 x^2 - x - 1 = 0 on the negative side
    const double root = (1.0 - std::sqrt(1.0 + 4e-3)) / 2e-3;
    EXPECT_NEAR(s.x_bar[0], root, 1e-9);
    EXPECT_GT(s.lambda[0], 0.0);
}

TEST(ObjectiveQp, DuplicateRowsGiveUniquePrimal)
{
    Rng rng = make_rng(21, Stream::Testing);
    for (int t = 0; t < 10; ++t)
    {
        auto r = random_subproblem(rng, 8, 1, QpMode::Objective);
        auto qp = add_row(r.qp, r.qp.tau[1], r.qp.u.row(1).transpose(), r.qp.anchor[1]);
        const auto s = solve_objective_qp(qp);
        const auto o = barrier_oracle(qp, r.interior);
        ASSERT_TRUE(s.converged);
        ASSERT_TRUE(o.ok);
        EXPECT_NEAR(s.primal_value, o.value, 1e-6);
        EXPECT_LT((s.x_bar - o.x).norm(), 1e-4);
    }
}

TEST(ObjectiveQp, InfeasibleSubproblemIsFlagged)
{
    // x^2 + 5 <= 0 has no solution
    auto qp = add_row(one_dim(1.0, 0.0, 1.0, -1.0, 1.0), 1.0, Vec::Zero(1), 5.0);
    const auto s = solve_objective_qp(qp);
    EXPECT_FALSE(s.converged);
    EXPECT_TRUE(s.infeasible);
}

TEST(ObjectiveQp, NoConstraints)
{
    auto qp = one_dim(0.5, 1.0, -3.0, -10.0, 10.0);
    const auto s = solve_objective_qp(qp);
    EXPECT_TRUE(s.converged);
    EXPECT_DOUBLE_EQ(s.x_bar[0], 4.0);
    EXPECT_EQ(s.iterations, 0);
}

TEST(FeasibilityQp, SingleConstraintMinimizesIt)
{
    auto qp = add_row(one_dim(1.0, 0.2, 0.0, -1.0, 1.0), 2.0, Vec::Constant(1, 6.0), 0.3);
    const auto s = solve_feasibility_qp(qp);
    ASSERT_TRUE(s.converged);
    EXPECT_DOUBLE_EQ(s.lambda[0], 1.0);
    // unclipped 0.2 - 6/4 = -1.3, clipped to -1
    EXPECT_DOUBLE_EQ(s.x_bar[0], -1.0);
    EXPECT_NEAR(s.nu, qp.value(1, s.x_bar), 1e-15);
}

TEST(FeasibilityQp, IdenticalConstraintsGiveCommonMinimum)
{
    Rng rng = make_rng(3, Stream::Testing);
    auto r = random_subproblem(rng, 6, 1, QpMode::Feasibility);
    auto qp = add_row(r.qp, r.qp.tau[1], r.qp.u.row(1).transpose(), r.qp.anchor[1]);
    qp = add_row(qp, r.qp.tau[1], r.qp.u.row(1).transpose(), r.qp.anchor[1]);
    const auto s = solve_feasibility_qp(qp);
    ASSERT_TRUE(s.converged);
    Vec xmin(6);
    for (int i = 0; i < 6; ++i)
        xmin[i] = qp.box.clip(i, qp.center[i] - qp.u(1, i) / (2.0 * qp.tau[1]));
    EXPECT_NEAR(s.nu, qp.value(1, xmin), 1e-9);
    EXPECT_NEAR(s.lambda.sum(), 1.0, 1e-14);
}

TEST(DualQp, MatchesBarrierOracleOnRandomInstances)
{
    const auto rep = run_qp_check(97, 20);
    for (const auto &m : rep.messages)
        ADD_FAILURE() << m;
    EXPECT_EQ(rep.failures, 0);
    EXPECT_LE(rep.worst_value_error, 1e-6);
    EXPECT_LE(rep.worst_gap, 1e-6);
    EXPECT_LE(rep.worst_kkt, 1e-7);
}

TEST(DualQp, StrongDualityAndFeasibleImpliesObjectiveSolvable)
{
    Rng rng = make_rng(17, Stream::Testing);
    std::uniform_int_distribution<int> nd(1, 20), md(1, 3);
    int feasible = 0;
    for (int t = 0; t < 60; ++t)
    {
        auto r = random_subproblem(rng, nd(rng), md(rng), QpMode::Objective);
        // shift some instances into infeasibility
        if (t % 3 == 0)
            r.qp.anchor.tail(r.qp.m()).array() += 3.0;
        const auto f = solve_feasibility_qp(r.qp);
        ASSERT_TRUE(f.converged);
        EXPECT_LE(std::abs(f.duality_gap()), 1e-6 * (1.0 + std::abs(f.primal_value)));
        if (f.nu <= 0.0)
        {
            ++feasible;
            const auto o = solve_objective_qp(r.qp);
            ASSERT_TRUE(o.converged);
            EXPECT_FALSE(o.infeasible);
            EXPECT_LE(std::abs(o.duality_gap()), 1e-6 * (1.0 + std::abs(o.primal_value)));
        }
    }
    EXPECT_GT(feasible, 20);
}

TEST(DualQp, WarmStartDoesNotIncreaseWork)
{
    Rng rng = make_rng(8, Stream::Testing);
    const auto r = random_subproblem(rng, 12, 3, QpMode::Objective);
    const auto cold = solve_objective_qp(r.qp);
    ASSERT_TRUE(cold.converged);
    const auto warm = solve_objective_qp(r.qp, {}, cold.lambda);
    EXPECT_TRUE(warm.converged);
    EXPECT_LE(warm.iterations, cold.iterations);
    EXPECT_LT((warm.x_bar - cold.x_bar).norm(), 1e-10);
}

TEST(DualQp, SubgradientOptionApproachesOptimum)
{
    Rng rng = make_rng(9, Stream::Testing);
    const auto r = random_subproblem(rng, 5, 2, QpMode::Objective);
    DualSolverOptions opt;
    opt.method = DualMethod::Subgradient;
    opt.tolerance = 1e-3;
    opt.max_iterations = 20000;
    const auto s = solve_objective_qp(r.qp, opt);
    const auto o = barrier_oracle(r.qp, r.interior);
    ASSERT_TRUE(o.ok);
    EXPECT_TRUE(s.converged);
    EXPECT_NEAR(s.primal_value, o.value, 1e-2 * (1.0 + std::abs(o.value)));
}

TEST(DualQp, PrimalRecoveryScalesLinearly)
{
    auto build = [](int n) {
        Rng rng = make_rng(4, Stream::Testing, static_cast<std::uint64_t>(n));
        return random_subproblem(rng, n, 3, QpMode::Objective);
    };
    // sizes chosen to stay cache resident so the ratio measures work, not memory
    const int n = 1 << 10;
    const auto a = build(n), b = build(2 * n);
    const Vec lambda = Vec::Constant(3, 0.5);
    auto time_of = [&](const QuadraticSubproblem &qp) {
        double best = 1e300;
        double sink = 0.0;
        for (int rep = 0; rep < 15; ++rep)
        {
            const auto t0 = std::chrono::steady_clock::now();
            for (int k = 0; k < 400; ++k)
                sink += primal_from_dual(qp, lambda)[0];
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            best = std::min(best, dt);
        }
        EXPECT_TRUE(std::isfinite(sink));
        return best;
    };
    const double ta = time_of(a.qp), tb = time_of(b.qp);
    EXPECT_LT(tb / ta, 2.6) << "n: " << ta << " s, 2n: " << tb << " s";
}

TEST(BarrierOracle, UnconstrainedQuadratic)
{
    auto qp = one_dim(1.0, 0.0, 1.0, -3.0, 3.0);
    qp.anchor[0] = 2.0;
    const auto o = barrier_oracle(qp, Vec::Zero(1));
    ASSERT_TRUE(o.ok);
    EXPECT_NEAR(o.x[0], -0.5, 1e-8);
    EXPECT_NEAR(o.value, 2.0 - 0.25, 1e-9);
}
