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

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace thp;

namespace
{
    ChannelConfig small_config(int M, int K)
    {
        ChannelConfig cfg;
        cfg.dims = {M, K, K, 0};
        return cfg;
    }

    std::string temp_path(const std::string &name)
    {
        return (std::filesystem::temp_directory_path() / name).string();
    }
} // namespace

TEST(ArrayResponse, KnownEntries)
{
    const CVec a = array_response(0.3, 8);
    ASSERT_EQ(a.size(), 8);
    EXPECT_NEAR(std::abs(a[0] - cplx(1.0, 0.0)), 0.0, 1e-15);
    // reference values from an independent numpy evaluation
    EXPECT_NEAR(std::abs(a[1] - cplx(0.5991125175028562, 0.8006648433466963)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(a[7] - cplx(0.9768389104712033, 0.21397603368001866)), 0.0, 1e-13);
}

TEST(ArrayResponse, UnitModulus)
{
    for (double ang : {-1.4, -0.2, 0.0, 0.7, 1.5})
    {
        const CVec a = array_response(ang, 64);
        for (Eigen::Index m = 0; m < a.size(); ++m)
            EXPECT_NEAR(std::abs(a[m]), 1.0, 1e-14);
    }
    EXPECT_THROW(array_response(0.1, 0), DimensionError);
}

TEST(UserGains, LogUniformMeanIsCentered)
{
    ChannelConfig cfg = small_config(4, 1);
    Rng rng = make_rng(1, Stream::Testing);
    double sum_db = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i)
        sum_db += 10.0 * std::log10(draw_user_gains(cfg, rng)[0]);
    EXPECT_NEAR(sum_db / n, 0.0, 0.2);
}

TEST(UserGains, DegenerateRangeIsConstant)
{
    ChannelConfig cfg = small_config(4, 3);
    cfg.gain_db_low = cfg.gain_db_high = 10.0;
    Rng rng = make_rng(2, Stream::Testing);
    for (double g : draw_user_gains(cfg, rng))
        EXPECT_NEAR(g, 10.0, 1e-12);
}

TEST(ChannelStatistics, PathVariancesSumToUserGain)
{
    ChannelConfig cfg = small_config(16, 3);
    Rng rng = make_rng(3, Stream::Testing);
    const auto st = draw_statistics(cfg, rng);
    for (int k = 0; k < 3; ++k)
    {
        EXPECT_NEAR(st.path_variances.row(k).sum(), st.user_gains[k], 1e-12 * st.user_gains[k]);
        EXPECT_TRUE((st.path_variances.row(k).array() > 0.0).all());
    }
}

TEST(ChannelSampling, EnergyMatchesArraySizeTimesGain)
{
    ChannelConfig cfg = small_config(16, 2);
    cfg.per_user_gains = {1.0, 4.0};
    Rng srng = make_rng(4, Stream::Statistics);
    const auto st = draw_statistics(cfg, srng);
    const int n = 20000;
    Vec acc = Vec::Zero(2);
    for (int j = 0; j < n; ++j)
    {
        const auto s = sample_channel_at(st, 4, Stream::Frames, j);
        acc += s.H.rowwise().squaredNorm();
    }
    acc /= n;
    // E||h_k||^2 = M g_k because every array entry has unit modulus
    EXPECT_NEAR(acc[0] / 16.0, 1.0, 0.03);
    EXPECT_NEAR(acc[1] / 64.0, 1.0, 0.03);
}

TEST(ChannelSampling, IndexedSamplesAreReproducible)
{
    ChannelConfig cfg = small_config(8, 2);
    Rng srng = make_rng(5, Stream::Statistics);
    const auto st = draw_statistics(cfg, srng);
    const auto a = sample_channel_at(st, 5, Stream::Frames, 17);
    const auto b = sample_channel_at(st, 5, Stream::Frames, 17);
    const auto c = sample_channel_at(st, 5, Stream::Frames, 18);
    const auto d = sample_channel_at(st, 5, Stream::Evaluation, 17);
    EXPECT_EQ((a.H - b.H).norm(), 0.0);
    EXPECT_GT((a.H - c.H).norm(), 1e-6);
    EXPECT_GT((a.H - d.H).norm(), 1e-6);
    EXPECT_EQ(a.frame_index, 17);
}

TEST(ChannelConfig, ValidationRejectsBadInput)
{
    ChannelConfig cfg = small_config(8, 2);
    cfg.num_paths = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = small_config(8, 2);
    cfg.per_user_gains = {1.0};
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.per_user_gains = {1.0, -1.0};
    EXPECT_THROW(cfg.validate(), ConfigError);
    SystemDims d{4, 2, 3, 0};
    EXPECT_THROW(d.validate(), DimensionError);
    SystemDims p{6, 4, 2, 0};
    EXPECT_THROW(p.validate(true), DimensionError);
}

TEST(ChannelDump, RoundTripIsBitExact)
{
    ChannelConfig cfg = small_config(8, 2);
    Rng srng = make_rng(6, Stream::Statistics);
    const auto st = draw_statistics(cfg, srng);
    std::vector<ChannelSample> v;
    for (int j = 0; j < 5; ++j)
        v.push_back(sample_channel_at(st, 6, Stream::Frames, j));
    const auto path = temp_path("thp_dump_roundtrip.thpc");
    write_channel_dump(path, v);
    EXPECT_EQ(std::filesystem::file_size(path), 20u + 5u * 2u * 8u * 16u);
    const auto back = read_channel_dump(path);
    ASSERT_EQ(back.size(), v.size());
    for (size_t j = 0; j < v.size(); ++j)
        EXPECT_EQ((back[j].H - v[j].H).norm(), 0.0);
    std::filesystem::remove(path);
}

TEST(ChannelDump, RejectsBadMagicAndTruncation)
{
    const auto path = temp_path("thp_dump_bad.thpc");
    {
        std::ofstream os(path, std::ios::binary);
        os << "NOPE0000";
    }
    EXPECT_THROW(read_channel_dump(path), std::runtime_error);

    ChannelConfig cfg = small_config(4, 1);
    Rng srng = make_rng(7, Stream::Statistics);
    const auto st = draw_statistics(cfg, srng);
    write_channel_dump(path, {sample_channel_at(st, 7, Stream::Frames, 0)});
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
    EXPECT_THROW(read_channel_dump(path), std::runtime_error);
    std::filesystem::remove(path);
}
