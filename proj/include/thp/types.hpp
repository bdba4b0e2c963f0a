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

#ifndef THP_TYPES_HPP
#define THP_TYPES_HPP

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace thp
{
    using cplx = std::complex<double>;
    using Vec = Eigen::VectorXd;
    using Mat = Eigen::MatrixXd;
    using CVec = Eigen::VectorXcd;
    using CMat = Eigen::MatrixXcd;

    inline constexpr double pi = 3.14159265358979323846;
    inline constexpr double ln2 = 0.69314718055994530942;

    // Error taxonomy. All library errors derive from std::logic_error or
    // std::runtime_error so callers can catch broadly.
    struct DimensionError : std::invalid_argument
    {
        using std::invalid_argument::invalid_argument;
    };

    struct DomainError : std::domain_error
    {
        using std::domain_error::domain_error;
    };

    struct ConfigError : std::invalid_argument
    {
        using std::invalid_argument::invalid_argument;
    };

    // Raised when the RZF inverse fails its residual check.
    struct ConditioningError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    // Raised when the optimizer cannot make progress (repeated QP failures).
    struct SolverError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    inline void require_dims(bool ok, const std::string &what)
    {
        if (!ok)
            throw DimensionError(what);
    }

    inline double nats_to_bits(double nats) { return nats / ln2; }
    inline double bits_to_nats(double bits) { return bits * ln2; }

} // namespace thp

#endif
