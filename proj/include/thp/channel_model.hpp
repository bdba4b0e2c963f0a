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

#ifndef THP_CHANNEL_MODEL_HPP
#define THP_CHANNEL_MODEL_HPP

#include "thp/rng.hpp"
#include "thp/types.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace thp
{
    // Static system dimensions: M antennas, S RF chains, K single-antenna
    // users, N code vectors (codebook structures only, 0 otherwise).
    struct SystemDims
    {
        int M = 0;
        int S = 0;
        int K = 0;
        int N = 0;

        void validate(bool partially_connected = false) const
        {
            if (M < 1 || S < 1 || K < 1)
                throw DimensionError("SystemDims: M, S and K must be at least 1");
            if (!(K <= S && S <= M))
                throw DimensionError("SystemDims: require K <= S <= M");
            if (partially_connected && M % S != 0)
                throw DimensionError("SystemDims: partially-connected structure needs S to divide M");
            if (N < 0)
                throw DimensionError("SystemDims: N must be non-negative");
        }
    };

    struct ChannelConfig
    {
        SystemDims dims;
        int num_paths = 6;
        double angle_spread_deg = 10.0; // Laplacian scale of path offsets, degrees
        double gain_db_low = -10.0;
        double gain_db_high = 10.0;
        std::vector<double> per_user_gains; // linear; drawn from the dB range when empty
        std::uint64_t rng_seed = 1;

        void validate() const
        {
            if (num_paths < 1)
                throw ConfigError("ChannelConfig: num_paths must be >= 1");
            if (!(angle_spread_deg > 0.0))
                throw ConfigError("ChannelConfig: angle spread must be positive");
            if (gain_db_low > gain_db_high)
                throw ConfigError("ChannelConfig: gain dB range has low > high");
            if (!per_user_gains.empty())
            {
                if (static_cast<int>(per_user_gains.size()) != dims.K)
                    throw ConfigError("ChannelConfig: per_user_gains must have K entries");
                for (double g : per_user_gains)
                    if (!(g > 0.0))
                        throw ConfigError("ChannelConfig: user gains must be positive");
            }
        }
    };

    // One realization of the K x M composite downlink channel; row k is h_k^H.
    struct ChannelSample
    {
        CMat H;
        long frame_index = 0;
    };

    /// Half-wavelength ULA response, element m (0-based) = exp(j*pi*m*sin(angle)).
    /// Entries are unit modulus; no 1/sqrt(M) normalization.
    inline CVec array_response(double angle_rad, int M)
    {
        if (M < 1)
            throw DimensionError("array_response: M must be >= 1");
        CVec a(M);
        const double s = std::sin(angle_rad);
        for (int m = 0; m < M; ++m)
            a[m] = std::polar(1.0, pi * m * s);
        return a;
    }

    inline std::vector<double> draw_user_gains(const ChannelConfig &cfg, Rng &rng)
    {
        if (cfg.gain_db_low > cfg.gain_db_high)
            throw ConfigError("draw_user_gains: low > high");
        std::vector<double> g(cfg.dims.K);
        if (cfg.gain_db_low == cfg.gain_db_high)
        {
            std::fill(g.begin(), g.end(), std::pow(10.0, cfg.gain_db_low / 10.0));
            return g;
        }
        std::uniform_real_distribution<double> u(cfg.gain_db_low, cfg.gain_db_high);
        for (auto &gk : g)
            gk = std::pow(10.0, u(rng) / 10.0);
        return g;
    }

    // Channel statistics for one super-frame. Everything here is drawn once;
    // per-frame sampling only redraws the complex path coefficients.
    struct ChannelStatistics
    {
        SystemDims dims;
        std::vector<double> user_gains;  // g_k
        std::vector<double> center_angles;
        Mat path_angles;                 // K x Np, radians
        Mat path_variances;              // K x Np, rows sum to g_k
        std::vector<CMat> steering;      // per user, M x Np

        int num_paths() const { return static_cast<int>(path_angles.cols()); }
    };

    inline ChannelStatistics draw_statistics(const ChannelConfig &cfg, Rng &rng)
    {
        cfg.dims.validate();
        cfg.validate();
        const int K = cfg.dims.K, M = cfg.dims.M, Np = cfg.num_paths;

        ChannelStatistics st;
        st.dims = cfg.dims;
        st.user_gains = cfg.per_user_gains.empty() ? draw_user_gains(cfg, rng) : cfg.per_user_gains;
        st.center_angles.resize(K);
        st.path_angles.resize(K, Np);
        st.path_variances.resize(K, Np);

        const double b = cfg.angle_spread_deg * pi / 180.0;
        std::uniform_real_distribution<double> center(-pi / 2.0, pi / 2.0);
        std::uniform_real_distribution<double> half(-0.5, 0.5);
        std::exponential_distribution<double> expo(1.0);

        for (int k = 0; k < K; ++k)
        {
            st.center_angles[k] = center(rng);
            double total = 0.0;
            for (int i = 0; i < Np; ++i)
            {
                // Laplacian offset by inverse CDF, density ~ exp(-|x|/b)
                const double v = half(rng);
                const double off = -b * (v < 0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::abs(v));
                st.path_angles(k, i) = st.center_angles[k] + off;
                const double s2 = expo(rng);
                st.path_variances(k, i) = s2;
                total += s2;
            }
            st.path_variances.row(k) *= st.user_gains[k] / total;
        }

        st.steering.reserve(K);
        for (int k = 0; k < K; ++k)
        {
            CMat A(M, Np);
            for (int i = 0; i < Np; ++i)
                A.col(i) = array_response(st.path_angles(k, i), M);
            st.steering.push_back(std::move(A));
        }
        return st;
    }

    /// Draws h_k = sum_i alpha_{k,i} a(phi_{k,i}) with alpha ~ CN(0, sigma_{k,i}^2).
    inline ChannelSample sample_channel(const ChannelStatistics &st, Rng &rng, long frame_index = 0)
    {
        const int K = st.dims.K, M = st.dims.M, Np = st.num_paths();
        std::normal_distribution<double> n01(0.0, 1.0);
        ChannelSample out;
        out.frame_index = frame_index;
        out.H.resize(K, M);
        CVec coeff(Np);
        for (int k = 0; k < K; ++k)
        {
            for (int i = 0; i < Np; ++i)
            {
                const double sd = std::sqrt(st.path_variances(k, i) / 2.0);
                const double re = n01(rng);
                const double im = n01(rng);
                coeff[i] = cplx(sd * re, sd * im);
            }
            CVec h = st.steering[k] * coeff;
            out.H.row(k) = h.adjoint();
        }
        return out;
    }

    /// Convenience: sample j of stream `stream` under `seed`, independent of
    /// every other index.
    inline ChannelSample sample_channel_at(const ChannelStatistics &st, std::uint64_t seed, Stream stream,
                                           long index)
    {
        Rng rng = make_rng(seed, stream, static_cast<std::uint64_t>(index));
        return sample_channel(st, rng, index);
    }

    // ---------------------------------------------------------------------
    // Binary channel dump: "THPC", u32 version, u32 K, u32 M, u32 count,
    // then per sample K*M row-major (re, im) float64 pairs. Little endian.

    inline constexpr std::uint32_t channel_dump_version = 1;

    namespace detail
    {
        inline void put_u32(std::ostream &os, std::uint32_t v)
        {
            unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
            os.write(reinterpret_cast<const char *>(b), 4);
        }

        inline std::uint32_t get_u32(std::istream &is)
        {
            unsigned char b[4];
            if (!is.read(reinterpret_cast<char *>(b), 4))
                throw std::runtime_error("channel dump: truncated header");
            return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
                   std::uint32_t(b[3]) << 24;
        }

        inline void put_f64(std::ostream &os, double d)
        {
            std::uint64_t u;
            std::memcpy(&u, &d, 8);
            unsigned char b[8];
            for (int i = 0; i < 8; ++i)
                b[i] = static_cast<unsigned char>(u >> (8 * i));
            os.write(reinterpret_cast<const char *>(b), 8);
        }

        inline double get_f64(std::istream &is)
        {
            unsigned char b[8];
            if (!is.read(reinterpret_cast<char *>(b), 8))
                throw std::runtime_error("channel dump: truncated payload");
            std::uint64_t u = 0;
            for (int i = 0; i < 8; ++i)
                u |= std::uint64_t(b[i]) << (8 * i);
            double d;
            std::memcpy(&d, &u, 8);
            return d;
        }
    } // namespace detail

    inline void write_channel_dump(const std::string &path, const std::vector<ChannelSample> &samples)
    {
        std::ofstream os(path, std::ios::binary);
        if (!os)
            throw std::runtime_error("channel dump: cannot open " + path);
        const std::uint32_t K = samples.empty() ? 0 : static_cast<std::uint32_t>(samples.front().H.rows());
        const std::uint32_t M = samples.empty() ? 0 : static_cast<std::uint32_t>(samples.front().H.cols());
        os.write("THPC", 4);
        detail::put_u32(os, channel_dump_version);
        detail::put_u32(os, K);
        detail::put_u32(os, M);
        detail::put_u32(os, static_cast<std::uint32_t>(samples.size()));
        for (const auto &s : samples)
        {
            require_dims(s.H.rows() == K && s.H.cols() == M, "channel dump: inconsistent sample shape");
            for (std::uint32_t r = 0; r < K; ++r)
                for (std::uint32_t c = 0; c < M; ++c)
                {
                    detail::put_f64(os, s.H(r, c).real());
                    detail::put_f64(os, s.H(r, c).imag());
                }
        }
    }

    inline std::vector<ChannelSample> read_channel_dump(const std::string &path)
    {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw std::runtime_error("channel dump: cannot open " + path);
        char magic[4];
        if (!is.read(magic, 4) || std::memcmp(magic, "THPC", 4) != 0)
            throw std::runtime_error("channel dump: bad magic");
        const auto version = detail::get_u32(is);
        if (version != channel_dump_version)
            throw std::runtime_error("channel dump: unsupported version " + std::to_string(version));
        const auto K = detail::get_u32(is), M = detail::get_u32(is), count = detail::get_u32(is);
        std::vector<ChannelSample> out(count);
        for (std::uint32_t j = 0; j < count; ++j)
        {
            out[j].frame_index = j;
            out[j].H.resize(K, M);
            for (std::uint32_t r = 0; r < K; ++r)
                for (std::uint32_t c = 0; c < M; ++c)
                {
                    const double re = detail::get_f64(is);
                    const double im = detail::get_f64(is);
                    out[j].H(r, c) = cplx(re, im);
                }
        }
        return out;
    }

} // namespace thp

#endif
