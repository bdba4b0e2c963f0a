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

#include "thp/gradients.hpp"
#include "thp/verification.hpp"

#include <gtest/gtest.h>

using namespace thp;

namespace
{
    detail::GradInstance instance(std::uint64_t seed, Connectivity c, RfMethod m)
    {
        Rng rng = make_rng(seed, Stream::Testing, 40);
        return detail::random_grad_instance(rng, c, m, 12, 3, 4);
    }
} // namespace

TEST(Jacobian, AgreesWithCentralDifferencesUnitColumn)
{
    const auto rep = run_grad_check(7, 15);
    ASSERT_EQ(rep.entries.size(), 3u);
    for (const auto &e : rep.entries)
    {
        EXPECT_EQ(e.instances, 15);
        EXPECT_LE(e.max_rel_error, 1e-5) << e.structure;
    }
}

TEST(Jacobian, AgreesWithCentralDifferencesLiteral)
{
    const auto rep = run_grad_check(8, 10, 12, 3, 3, Normalization::Literal);
    EXPECT_LE(rep.worst(), 1e-5);
}

TEST(Jacobian, SingleUserPowerDerivative)
{
    const auto g = instance(1, Connectivity::FullyConnected, RfMethod::Dps);
    SystemDims d = g.dims;
    d.K = 1;
    ThpVariable x = g.x;
    x.p = Vec::Constant(1, 1.7);
    const CMat H = g.H.topRows(1);
    const auto J = rate_jacobian(x, H, g.st, d);
    const auto pr = rzf_baseband(H, effective_rf_precoder(x.phi, g.st, d), x.alpha);
    const double q = std::norm((H * pr.F * pr.G)(0, 0));
    // r = log(1 + p q), so dr/dp = q / (1 + p q)
    EXPECT_NEAR(J.J(J.layout.p_offset(), 0), q / (1.0 + 1.7 * q), 1e-12);
    EXPECT_NEAR(J.rate[0], std::log1p(1.7 * q), 1e-12);
}

TEST(Jacobian, CommonColumnPhaseIsAFlatDirection)
{
    // shifting every phase of one RF chain rotates that column of F, leaving F F^H fixed
    const auto g = instance(2, Connectivity::FullyConnected, RfMethod::Dps);
    const auto J = rate_jacobian(g.x, g.H, g.st, g.dims);
    const int M = g.dims.M;
    for (int j = 0; j < g.dims.S; ++j)
    {
        const Mat col_sum = J.J.middleRows(j * M, M).colwise().sum();
        EXPECT_LE(col_sum.cwiseAbs().maxCoeff(), 1e-10 * (1.0 + J.J.cwiseAbs().maxCoeff()));
    }
}

TEST(Jacobian, BetaRowsAreZero)
{
    auto g = instance(3, Connectivity::PartiallyConnected, RfMethod::Dps);
    g.x.beta = Vec::Constant(1, 0.4);
    const auto J = rate_jacobian(g.x, g.H, g.st, g.dims);
    EXPECT_EQ(J.J.rows(), g.x.layout().size());
    EXPECT_EQ(J.J.row(J.layout.beta_offset()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Jacobian, RatesMatchForwardPipeline)
{
    for (auto m : {RfMethod::Dps, RfMethod::Codebook})
    {
        const auto g = instance(4, Connectivity::FullyConnected, m);
        const auto J = rate_jacobian(g.x, g.H, g.st, g.dims);
        EXPECT_NEAR((J.rate - rates_at(g.x, g.H, g.st, g.dims)).cwiseAbs().maxCoeff(), 0.0, 1e-13);
    }
}

TEST(Jacobian, PartialCodebookFallsBackToDifferences)
{
    SystemDims d{8, 2, 2, 4};
    const auto st = make_codebook_structure(Connectivity::PartiallyConnected, d);
    Rng rng = make_rng(5, Stream::Testing);
    ChannelConfig cc;
    cc.dims = d;
    Rng srng = make_rng(5, Stream::Statistics);
    const CMat H = sample_channel(draw_statistics(cc, srng), rng).H;
    ThpVariable x;
    x.phi = Vec::Constant(8, 0.5);
    x.phi[0] = 1.0; // on the box edge: one-sided difference
    x.p = Vec::Ones(2);
    x.alpha = 0.3;
    Box box{Vec::Zero(x.pack().size()), Vec::Constant(x.pack().size(), 10.0)};
    box.upper.head(8).setOnes();
    const auto J = rate_jacobian(x, H, st, d, Normalization::UnitColumn, &box);
    ASSERT_TRUE(J.J.allFinite());

    ThpVariable xm = x;
    xm.phi[0] -= 1e-6;
    const Vec fd = (rates_at(x, H, st, d) - rates_at(xm, H, st, d)) / 1e-6;
    EXPECT_NEAR((J.J.row(0).transpose() - fd).cwiseAbs().maxCoeff(), 0.0, 1e-8);
}

TEST(Jacobian, StructureMismatchThrows)
{
    const auto g = instance(6, Connectivity::FullyConnected, RfMethod::Codebook);
    EXPECT_THROW(jacobian_dps(g.x, g.H, g.st, g.dims), std::invalid_argument);
    ThpVariable bad = g.x;
    bad.phi.conservativeResize(bad.phi.size() + 1);
    bad.phi[bad.phi.size() - 1] = 0.5;
    EXPECT_THROW(rate_jacobian(bad, g.H, g.st, g.dims), DimensionError);
}

TEST(CentralDifference, OneSidedAtBoxEdges)
{
    auto f = [](const Vec &x) { return Vec(x.array().square()); };
    Vec x(2);
    x << 1.0, 0.0;
    Box box{Vec::Zero(2), Vec::Ones(2)};
    const Mat J = central_difference(f, x, 1e-6, &box);
    EXPECT_NEAR(J(0, 0), 2.0, 1e-5);
    EXPECT_NEAR(J(1, 1), 0.0, 1e-5);
    EXPECT_THROW(central_difference(f, x, 0.0), DomainError);
}

TEST(JacobianRelError, FloorsTinyReferenceEntries)
{
    Mat a(1, 2), r(1, 2);
    r << 1.0, 1e-9;
    a << 1.0, 2e-9;
    EXPECT_NEAR(jacobian_rel_error(a, r), 1e-6, 1e-12);
    a << 1.1, 1e-9;
    EXPECT_NEAR(jacobian_rel_error(a, r), 0.1, 1e-12);
}
