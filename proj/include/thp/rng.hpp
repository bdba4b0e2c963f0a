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

#ifndef THP_RNG_HPP
#define THP_RNG_HPP

#include <cstdint>
#include <random>

namespace thp
{
    /// SplitMix64 finalizer; used to derive independent generator seeds from
    /// (master seed, stream, counter) triples.
    inline std::uint64_t splitmix64(std::uint64_t z)
    {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    using Rng = std::mt19937_64;

    /// Named random streams. Each consumer of randomness draws from its own
    /// stream so adding draws in one place never perturbs another.
    enum class Stream : std::uint64_t
    {
        Statistics = 1, // channel statistics fixed for a super-frame
        Frames = 2,     // per-frame channel samples fed to the optimizer
        Evaluation = 3, // held-out Monte-Carlo samples
        Init = 4,       // initial THP variable
        Testing = 5,
    };

    /// Counter-based seeding: the generator for (seed, stream, index) is a
    /// pure function of its arguments, so sample j can be regenerated
    /// independently of samples 0..j-1 (and drawn concurrently).
    inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0)
    {
        std::uint64_t s = splitmix64(seed);
        s = splitmix64(s ^ (static_cast<std::uint64_t>(stream) * 0xD1B54A32D192ED03ull));
        s = splitmix64(s ^ index);
        std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(static_cast<std::uint64_t>(stream))};
        return Rng(seq);
    }

} // namespace thp

#endif
