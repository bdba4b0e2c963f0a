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

#ifndef THP_SCHEDULE_HPP
#define THP_SCHEDULE_HPP

#include "thp/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace thp
{
    // Outcome of the step-size checks. The series conditions cannot be
    // decided from a finite prefix, so the power-law exponents are checked
    // analytically and the prefix is checked numerically.
    struct ScheduleCheck
    {
        long horizon = 0;
        double sum_rho = 0.0, sum_rho_sq = 0.0;
        double sum_gamma = 0.0, sum_gamma_sq = 0.0;
        double sum_rho_over_sqrt_l = 0.0; // sum rho^l l^-1/2, the stricter variant
        bool strict_rho_condition = false;
        std::vector<std::string> violations;

        bool ok() const { return violations.empty(); }
    };

    /// rho^l = min(1, c_rho (1+l)^-a), gamma^l = min(1, c_gamma (1+l)^-b).
    struct StepSchedule
    {
        double rho_scale = 1.0;
        double rho_exponent = 0.6;
        double gamma_scale = 2.0;
        double gamma_exponent = 0.9;

        double rho(long l) const { return std::min(1.0, rho_scale * std::pow(1.0 + l, -rho_exponent)); }
        double gamma(long l) const { return std::min(1.0, gamma_scale * std::pow(1.0 + l, -gamma_exponent)); }

        ScheduleCheck check(long horizon = 10000) const
        {
            ScheduleCheck c;
            c.horizon = horizon;
            auto bad = [&](const std::string &s) { c.violations.push_back(s); };
            if (!(rho_scale > 0.0) || !(gamma_scale > 0.0))
                bad("scales must be positive");
            const double a = rho_exponent, b = gamma_exponent;
            // rho -> 0, sum rho = inf, sum rho^2 < inf
            if (!(a > 0.5 && a <= 1.0))
                bad("rho exponent must lie in (0.5, 1]");
            // gamma -> 0, sum gamma = inf, sum gamma^2 < inf
            if (!(b > 0.5 && b <= 1.0))
                bad("gamma exponent must lie in (0.5, 1]");
            // gamma / rho -> 0
            if (!(b > a))
                bad("gamma must decay strictly faster than rho");
            c.strict_rho_condition = a > 0.5;

            double prev_rho = 2.0, prev_ratio = 1e300;
            for (long l = 0; l < horizon; ++l)
            {
                const double r = rho(l), g = gamma(l);
                if (!(r > 0.0 && r <= 1.0) || !(g > 0.0 && g <= 1.0))
                {
                    bad("step outside (0, 1] at l = " + std::to_string(l));
                    break;
                }
                if (r > prev_rho)
                {
                    bad("rho increases at l = " + std::to_string(l));
                    break;
                }
                // the clip at 1 can make gamma/rho rise over the first few
                // steps; monotonicity is required once gamma is unclipped
                const double ratio = g / r;
                if (g < 1.0 && ratio > prev_ratio * (1.0 + 1e-12))
                {
                    bad("gamma/rho increases at l = " + std::to_string(l));
                    break;
                }
                prev_rho = r;
                if (g < 1.0)
                    prev_ratio = ratio;
                c.sum_rho += r;
                c.sum_rho_sq += r * r;
                c.sum_gamma += g;
                c.sum_gamma_sq += g * g;
                if (l > 0)
                    c.sum_rho_over_sqrt_l += r / std::sqrt(static_cast<double>(l));
            }
            return c;
        }

        void validate(long horizon = 10000) const
        {
            const auto c = check(horizon);
            if (!c.ok())
                throw ConfigError("StepSchedule: " + c.violations.front());
        }
    };

} // namespace thp

#endif
