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

#include "thp/channel_model.hpp"
#include "thp/precoding.hpp"

#include <gtest/gtest.h>

using namespace thp;

namespace
{
    CMat random_channel(Rng &rng, int K, int M)
    {
        std::normal_distribution<double> n01;
        CMat H(K, M);
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < M; ++j)
                H(i, j) = cplx(n01(rng), n01(rng)) / std::sqrt(2.0);
        return H;
    }

    Vec random_phases(Rng &rng, int n)
    {
        std::uniform_real_distribution<double> u(0.0, 2.0 * pi);
        Vec v(n);
        for (auto &x : v)
            x = u(rng);
        return v;
    }
} // namespace

TEST(Rzf, ScalarRegularizedInverse)
{
    CMat H(1, 1), F(1, 1);
    H(0, 0) = 2.0;
    F(0, 0) = 1.0;
    const auto pr = rzf_baseband(H, F, 0.3);
    EXPECT_NEAR(pr.Breg(0, 0).real(), 0.23255813953488372, 1e-15);
    EXPECT_NEAR(pr.Breg(0, 0).imag(), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(pr.G(0, 0)), 1.0, 1e-14);
}

TEST(Rzf, TwoUserRatesMatchReference)
{
    CMat H(2, 2), F(2, 2);
    H << cplx(1, 0), cplx(0, 0.5), cplx(0.2, 0), cplx(1, -0.3);
    F << 1, 1, 1, -1;
    F /= std::sqrt(2.0);
    Vec p(2);
    p << 1.0, 2.0;
    const auto r = instantaneous_rate(H, rzf_baseband(H, F, 0.1), p);
    // independent numpy evaluation of the same pipeline
    EXPECT_NEAR(r.rate[0], 0.7219869559601492, 1e-12);
    EXPECT_NEAR(r.rate[1], 1.0684780880322475, 1e-12);
}

TEST(Rzf, UnitColumnNormalization)
{
    Rng rng = make_rng(1, Stream::Testing);
    const SystemDims d{16, 4, 3, 0};
    const auto st = make_dps_structure(Connectivity::FullyConnected);
    for (int t = 0; t < 20; ++t)
    {
        const CMat H = random_channel(rng, 3, 16);
        const CMat F = build_rf_precoder(random_phases(rng, 64), st, d);
        const auto pr = rzf_baseband(H, F, 0.05 + t * 0.3);
        const CMat FG = F * pr.G;
        for (int k = 0; k < 3; ++k)
            EXPECT_NEAR(FG.col(k).norm(), 1.0, 1e-10);
    }
}

TEST(Rzf, LiteralNormalizationScalesBySquareRoot)
{
    Rng rng = make_rng(2, Stream::Testing);
    const CMat H = random_channel(rng, 2, 8);
    const CMat F = random_channel(rng, 8, 4);
    const auto pr = rzf_baseband(H, F, 0.7, Normalization::Literal);
    const CMat FG = F * pr.G;
    for (int k = 0; k < 2; ++k)
        EXPECT_NEAR(FG.col(k).squaredNorm(), std::sqrt(pr.col_energy[k]), 1e-10);
}

TEST(Rzf, RejectsNonPositiveAlpha)
{
    CMat H = CMat::Identity(1, 2), F = CMat::Identity(2, 1);
    EXPECT_THROW(rzf_baseband(H, F, 0.0), DomainError);
    EXPECT_THROW(rzf_baseband(H, F, -1.0), DomainError);
}

TEST(Rates, NonNegativeAndZeroPowerGivesZero)
{
    Rng rng = make_rng(3, Stream::Testing);
    const CMat H = random_channel(rng, 3, 8);
    const auto pr = rzf_baseband(H, random_channel(rng, 8, 4), 0.2);
    const auto r0 = instantaneous_rate(H, pr, Vec::Zero(3));
    EXPECT_EQ(r0.rate.cwiseAbs().maxCoeff(), 0.0);
    Vec p(3);
    p << 0.5, 0.0, 3.0;
    const auto r = instantaneous_rate(H, pr, p);
    EXPECT_TRUE((r.rate.array() >= 0.0).all());
    EXPECT_EQ(r.rate[1], 0.0);
    p[1] = -1e-3;
    EXPECT_THROW(instantaneous_rate(H, pr, p), DomainError);
}

TEST(RfPrecoder, DpsEntriesHaveConstantModulus)
{
    Rng rng = make_rng(4, Stream::Testing);
    const SystemDims d{16, 4, 2, 0};
    const CMat Ff = build_rf_precoder(random_phases(rng, 64), make_dps_structure(Connectivity::FullyConnected), d);
    EXPECT_NEAR((Ff.cwiseAbs().array() - 0.25).abs().maxCoeff(), 0.0, 1e-15);

    const CMat Fp = build_rf_precoder(random_phases(rng, 16), make_dps_structure(Connectivity::PartiallyConnected), d);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 4; ++j)
        {
            const double expect = (i / 4 == j) ? 0.5 : 0.0;
            EXPECT_NEAR(std::abs(Fp(i, j)), expect, 1e-15);
        }
}

TEST(RfPrecoder, CodebookSelectionFormsAgree)
{
    const SystemDims d{8, 2, 2, 8};
    const auto st = make_codebook_structure(Connectivity::FullyConnected, d);
    Vec sel = Vec::Zero(8);
    sel[2] = sel[5] = 1.0;
    const CMat Fs = build_rf_precoder(sel, st, d);
    const CMat Fe = effective_rf_precoder(sel, st, d);
    ASSERT_EQ(Fs.cols(), 2);
    ASSERT_EQ(Fe.cols(), 8);
    EXPECT_NEAR((Fs * Fs.adjoint() - Fe * Fe.adjoint()).norm(), 0.0, 1e-14);
    EXPECT_NEAR((Fs.col(0) - st.codebook[0].col(2)).norm(), 0.0, 0.0);

    Vec bad = sel;
    bad[0] = 1.5;
    EXPECT_THROW(build_rf_precoder(bad, st, d), DomainError);
}

TEST(RfPrecoder, CodebookColumnsAreUnitNorm)
{
    const CMat C = dft_codebook(16, 32);
    for (int i = 0; i < 32; ++i)
        EXPECT_NEAR(C.col(i).norm(), 1.0, 1e-14);
}

TEST(RfStructure, ValidationCatchesShapeErrors)
{
    const SystemDims d{8, 2, 2, 4};
    auto st = make_codebook_structure(Connectivity::FullyConnected, d);
    EXPECT_NO_THROW(st.validate(d));
    st.codebook[0] = CMat::Zero(8, 3);
    EXPECT_THROW(st.validate(d), DimensionError);
    auto ps = make_dps_structure(Connectivity::FullyConnected, 0);
    EXPECT_THROW(ps.validate(d), ConfigError);
    const SystemDims small{8, 4, 2, 2};
    EXPECT_THROW(make_codebook_structure(Connectivity::FullyConnected, small).validate(small), ConfigError);
}

TEST(PhaseProjection, NearestGridPoint)
{
    Vec t(4);
    t << 0.3 * pi, 7.0 * pi / 4.0, -0.1, 2.0 * pi + 1.0;
    const Vec q = project_phases(t, 2);
    EXPECT_NEAR(q[0], pi / 2.0, 1e-15);
    EXPECT_NEAR(q[1], 0.0, 1e-15); // tie between 3pi/2 and 0 goes to 0
    EXPECT_NEAR(q[2], 0.0, 1e-15);
    EXPECT_NEAR(q[3], pi / 2.0, 1e-15);
    EXPECT_THROW(project_phases(t, 0), DomainError);
}

TEST(PhaseProjection, IdempotentAndOnGrid)
{
    Rng rng = make_rng(5, Stream::Testing);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (int B : {1, 2, 3, 5})
    {
        Vec t(200);
        for (auto &x : t)
            x = u(rng);
        const Vec q = project_phases(t, B);
        EXPECT_EQ((project_phases(q, B) - q).norm(), 0.0);
        const double step = 2.0 * pi / (1 << B);
        for (double v : q)
        {
            EXPECT_GE(v, 0.0);
            EXPECT_LT(v, 2.0 * pi);
            EXPECT_NEAR(v / step, std::round(v / step), 1e-12);
        }
    }
}

TEST(SelectionProjection, TopEntriesWithLowIndexTies)
{
    Vec d(3);
    d << 0.5, 0.5, 0.1;
    const Vec s = project_selection(d, 1);
    EXPECT_EQ(s, (Vec(3) << 1, 0, 0).finished());
    Vec e(5);
    e << 0.2, 0.9, 0.1, 0.9, 0.3;
    EXPECT_EQ(project_selection(e, 2), (Vec(5) << 0, 1, 0, 1, 0).finished());
    EXPECT_EQ(project_selection(project_selection(e, 2), 2), project_selection(e, 2));
    EXPECT_THROW(project_selection(e, 6), DimensionError);
}

TEST(SelectionProjection, BlocksAreOneHot)
{
    Vec d(6);
    d << 0.1, 0.7, 0.2, 0.4, 0.4, 0.3;
    EXPECT_EQ(project_selection_blocks(d, 2, 3), (Vec(6) << 0, 1, 0, 1, 0, 0).finished());
}

TEST(SmoothL0, ValueAndGradient)
{
    Vec d(4);
    d << 0.5, 0.2, 0.0, 1.0;
    const auto s = smooth_l0(d, 0.01);
    EXPECT_NEAR(s.value, 2.5116285793599578, 1e-13);
    for (Eigen::Index i = 0; i < 4; ++i)
    {
        Vec dp = d, dm = d;
        dp[i] += 1e-6;
        dm[i] -= 1e-6;
        if (dm[i] < 0.0)
            dm[i] = 0.0;
        const double fd = (smooth_l0(dp, 0.01).value - smooth_l0(dm, 0.01).value) / (dp[i] - dm[i]);
        EXPECT_NEAR(s.gradient[i], fd, 1e-4 * std::abs(fd));
    }
    // binary d counts exactly its support
    Vec b(5);
    b << 1, 0, 1, 1, 0;
    EXPECT_NEAR(smooth_l0(b, 0.01).value, 3.0, 1e-12);
    EXPECT_THROW(smooth_l0(d, 0.0), DomainError);
}

TEST(Variable, PackUnpackRoundTrip)
{
    ThpVariable x;
    x.phi = Vec::LinSpaced(6, 0.0, 1.0);
    x.p = (Vec(2) << 1.5, 2.5).finished();
    x.alpha = 0.7;
    x.beta = (Vec(2) << 0.1, 0.2).finished();
    const auto L = x.layout();
    EXPECT_EQ(L.size(), 11);
    const auto y = ThpVariable::unpack(x.pack(), L);
    EXPECT_EQ(y.pack(), x.pack());
    EXPECT_THROW(ThpVariable::unpack(Vec::Zero(10), L), DimensionError);
}

TEST(Variable, TerminalProjectionPerStructure)
{
    const SystemDims d{4, 2, 2, 4};
    ThpVariable x;
    x.p = Vec::Ones(2);
    x.phi = (Vec(8) << 0.1, 1.4, 3.0, 4.9, 0.2, 6.2, 2.0, 3.5).finished();
    const auto pd = project_variable(x, make_dps_structure(Connectivity::FullyConnected, 2), d);
    EXPECT_EQ(pd.phi, project_phases(x.phi, 2));
    EXPECT_EQ(pd.p, x.p);

    x.phi = (Vec(4) << 0.3, 0.9, 0.8, 0.1).finished();
    const auto pc = project_variable(x, make_codebook_structure(Connectivity::FullyConnected, d), d);
    EXPECT_EQ(pc.phi, (Vec(4) << 0, 1, 1, 0).finished());
}
