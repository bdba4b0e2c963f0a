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

#ifndef THP_BOX_HPP
#define THP_BOX_HPP

#include "thp/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace thp
{
    // Decoupled box X = X_1 x ... x X_n with finite bounds.
    struct Box
    {
        Vec lower;
        Vec upper;

        Eigen::Index size() const { return lower.size(); }

        void validate() const
        {
            require_dims(lower.size() == upper.size(), "Box: bound vectors differ in length");
            for (Eigen::Index i = 0; i < lower.size(); ++i)
                if (!(std::isfinite(lower[i]) && std::isfinite(upper[i]) && lower[i] <= upper[i]))
                    throw DomainError("Box: interval " + std::to_string(i) + " is empty or unbounded");
        }

        double clip(Eigen::Index i, double v) const { return std::clamp(v, lower[i], upper[i]); }

        Vec project(const Vec &x) const { return x.cwiseMax(lower).cwiseMin(upper); }

        bool contains(const Vec &x) const
        {
            return x.size() == lower.size() && (x.array() >= lower.array()).all() &&
                   (x.array() <= upper.array()).all();
        }
    };

} // namespace thp

#endif
