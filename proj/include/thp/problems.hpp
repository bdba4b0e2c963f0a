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

#ifndef THP_PROBLEMS_HPP
#define THP_PROBLEMS_HPP

#include "thp/box.hpp"
#include "thp/precoding.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace thp
{
    // Problem data shared by the four formulations. Rates are in nats.
    struct RateTargets
    {
        Vec gamma;                 // per-user average-rate targets
        Vec weights;               // MWTM weights w_k
        double power_budget = 10.0;
        double pfs_eps = 0.01;

        void validate() const
        {
            if (!(power_budget > 0.0))
                throw ConfigError("RateTargets: power budget must be positive");
            if (!(pfs_eps > 0.0))
                throw ConfigError("RateTargets: PFS epsilon must be positive");
            if ((gamma.array() < 0.0).any())
                throw ConfigError("RateTargets: rate targets must be non-negative");
            if ((weights.array() <= 0.0).any())
                throw ConfigError("RateTargets: weights must be positive");
        }
    };

    // Bounds of the decoupled box X.
    struct BoxBounds
    {
        double phase_limit = 8.0 * pi; // theta in [-phase_limit, phase_limit]
        double d_min = 1e-3;           // codebook selections in [d_min, 1]
        double p_max = 20.0;
        double alpha_min = 1e-6;
        double alpha_max = 1e3;
        double beta_max = 50.0;
    };

    /// p_max = 4P/K, the default power cap per user.
    inline BoxBounds default_bounds(double power_budget, int K)
    {
        BoxBounds b;
        b.p_max = 4.0 * power_budget / K;
        return b;
    }

    // One function h_i(rbar, x) with its partial gradients.
    struct ProblemRow
    {
        std::function<double(const Vec &, const Vec &)> h;
        std::function<Vec(const Vec &, const Vec &)> grad_r;
        std::function<Vec(const Vec &, const Vec &)> grad_x;
    };

    // min h_0(rbar, x) s.t. h_i(rbar, x) <= 0, i = 1..m, x in X.
    struct ProblemSpec
    {
        std::string kind;
        VariableLayout layout;
        BoxBounds bounds;
        std::vector<ProblemRow> rows; // rows[0] is the objective
        int sparse_rows = 0;          // trailing rows added by attach_sparse_constraint

        int m() const { return static_cast<int>(rows.size()) - 1; }
        int n() const { return layout.size(); }
        int n_beta() const { return layout.n_beta; }

        double h(int i, const Vec &rbar, const Vec &x) const { return rows.at(i).h(rbar, x); }
        Vec grad_h_r(int i, const Vec &rbar, const Vec &x) const { return rows.at(i).grad_r(rbar, x); }
        Vec grad_h_x(int i, const Vec &rbar, const Vec &x) const { return rows.at(i).grad_x(rbar, x); }

        Box box(const RfStructure &st) const
        {
            const auto &L = layout;
            Box b{Vec(L.size()), Vec(L.size())};
            // a selection floor keeps C Diag(d) away from the all-zero precoder
            const double lo = st.dps() ? -bounds.phase_limit : bounds.d_min;
            const double hi = st.dps() ? bounds.phase_limit : 1.0;
            b.lower.segment(0, L.n_phi).setConstant(lo);
            b.upper.segment(0, L.n_phi).setConstant(hi);
            b.lower.segment(L.p_offset(), L.K).setZero();
            b.upper.segment(L.p_offset(), L.K).setConstant(bounds.p_max);
            b.lower[L.alpha_index()] = bounds.alpha_min;
            b.upper[L.alpha_index()] = bounds.alpha_max;
            b.lower.segment(L.beta_offset(), L.n_beta).setZero();
            b.upper.segment(L.beta_offset(), L.n_beta).setConstant(bounds.beta_max);
            b.validate();
            return b;
        }
    };

    namespace detail
    {
        inline ProblemRow power_budget_row(const VariableLayout &L, double P)
        {
            return {[L, P](const Vec &, const Vec &x) { return x.segment(L.p_offset(), L.K).sum() - P; },
                    [L](const Vec &, const Vec &) { return Vec(Vec::Zero(L.K)); },
                    [L](const Vec &, const Vec &) {
                        Vec g = Vec::Zero(L.size());
                        g.segment(L.p_offset(), L.K).setOnes();
                        return g;
                    }};
        }

        inline Vec zeros(int n) { return Vec::Zero(n); }
    } // namespace detail

    /// max sum_k rbar_k s.t. sum_k p_k <= P.
    inline ProblemSpec make_sum_throughput(double P, int n_phi, int K)
    {
        if (!(P > 0.0))
            throw ConfigError("make_sum_throughput: P must be positive");
        ProblemSpec s;
        s.kind = "sum";
        s.layout = {n_phi, K, 0};
        s.bounds = default_bounds(P, K);
        const auto L = s.layout;
        s.rows.push_back({[](const Vec &r, const Vec &) { return -r.sum(); },
                          [K](const Vec &, const Vec &) { return Vec(-Vec::Ones(K)); },
                          [L](const Vec &, const Vec &) { return detail::zeros(L.size()); }});
        s.rows.push_back(detail::power_budget_row(L, P));
        return s;
    }

    /// max sum_k log(eps + rbar_k) s.t. sum_k p_k <= P.
    inline ProblemSpec make_pfs(double P, double eps, int n_phi, int K)
    {
        if (!(eps > 0.0))
            throw ConfigError("make_pfs: eps must be positive");
        if (!(P > 0.0))
            throw ConfigError("make_pfs: P must be positive");
        ProblemSpec s;
        s.kind = "pfs";
        s.layout = {n_phi, K, 0};
        s.bounds = default_bounds(P, K);
        const auto L = s.layout;
        s.rows.push_back({[eps](const Vec &r, const Vec &) { return -(r.array() + eps).log().sum(); },
                          [eps](const Vec &r, const Vec &) { return Vec(-(r.array() + eps).inverse()); },
                          [L](const Vec &, const Vec &) { return detail::zeros(L.size()); }});
        s.rows.push_back(detail::power_budget_row(L, P));
        return s;
    }

    /// min sum_k p_k s.t. rbar_k >= gamma_k. `p_max` caps each p_k.
    inline ProblemSpec make_power_min(const Vec &gamma, int n_phi, double p_max)
    {
        const int K = static_cast<int>(gamma.size());
        if ((gamma.array() < 0.0).any())
            throw ConfigError("make_power_min: targets must be non-negative");
        if (!(p_max > 0.0))
            throw ConfigError("make_power_min: p_max must be positive");
        ProblemSpec s;
        s.kind = "powermin";
        s.layout = {n_phi, K, 0};
        s.bounds.p_max = p_max;
        const auto L = s.layout;
        s.rows.push_back({[L](const Vec &, const Vec &x) { return x.segment(L.p_offset(), L.K).sum(); },
                          [K](const Vec &, const Vec &) { return detail::zeros(K); },
                          [L](const Vec &, const Vec &) {
                              Vec g = Vec::Zero(L.size());
                              g.segment(L.p_offset(), L.K).setOnes();
                              return g;
                          }});
        for (int k = 0; k < K; ++k)
        {
            const double g = gamma[k];
            s.rows.push_back({[k, g](const Vec &r, const Vec &) { return g - r[k]; },
                              [k, K](const Vec &, const Vec &) {
                                  Vec v = Vec::Zero(K);
                                  v[k] = -1.0;
                                  return v;
                              },
                              [L](const Vec &, const Vec &) { return detail::zeros(L.size()); }});
        }
        return s;
    }

    /// max beta s.t. rbar_k >= w_k beta, sum_k p_k <= P; beta in [0, beta_max].
    inline ProblemSpec make_mwtm(double P, const Vec &w, int n_phi)
    {
        const int K = static_cast<int>(w.size());
        if (!(P > 0.0))
            throw ConfigError("make_mwtm: P must be positive");
        if ((w.array() <= 0.0).any())
            throw ConfigError("make_mwtm: weights must be positive");
        ProblemSpec s;
        s.kind = "mwtm";
        s.layout = {n_phi, K, 1};
        s.bounds = default_bounds(P, K);
        const auto L = s.layout;
        const int ib = L.beta_offset();
        s.rows.push_back({[ib](const Vec &, const Vec &x) { return -x[ib]; },
                          [K](const Vec &, const Vec &) { return detail::zeros(K); },
                          [L, ib](const Vec &, const Vec &) {
                              Vec g = Vec::Zero(L.size());
                              g[ib] = -1.0;
                              return g;
                          }});
        for (int k = 0; k < K; ++k)
        {
            const double wk = w[k];
            s.rows.push_back({[k, wk, ib](const Vec &r, const Vec &x) { return wk * x[ib] - r[k]; },
                              [k, K](const Vec &, const Vec &) {
                                  Vec v = Vec::Zero(K);
                                  v[k] = -1.0;
                                  return v;
                              },
                              [L, ib, wk](const Vec &, const Vec &) {
                                  Vec g = Vec::Zero(L.size());
                                  g[ib] = wk;
                                  return g;
                              }});
        }
        s.rows.push_back(detail::power_budget_row(L, P));
        return s;
    }

    /// Appends the smooth-l0 sparse constraint on the codebook selection d:
    /// smooth_l0(d) <= S (fully connected) or smooth_l0(d_s) <= 1 per block.
    inline ProblemSpec attach_sparse_constraint(ProblemSpec spec, const RfStructure &st, const SystemDims &dims,
                                                double eps_l0 = 0.01)
    {
        if (st.dps())
            throw ConfigError("attach_sparse_constraint: requires a codebook structure");
        if (!(eps_l0 > 0.0))
            throw DomainError("attach_sparse_constraint: eps must be positive");
        const auto L = spec.layout;
        require_dims(L.n_phi == rf_param_count(st, dims), "attach_sparse_constraint: layout/structure mismatch");
        const int K = L.K;

        auto add_row = [&](int offset, int len, double rhs) {
            spec.rows.push_back({[=](const Vec &, const Vec &x) { return smooth_l0(x.segment(offset, len), eps_l0).value - rhs; },
                                 [K](const Vec &, const Vec &) { return detail::zeros(K); },
                                 [=](const Vec &, const Vec &x) {
                                     Vec g = Vec::Zero(L.size());
                                     g.segment(offset, len) = smooth_l0(x.segment(offset, len), eps_l0).gradient;
                                     return g;
                                 }});
            ++spec.sparse_rows;
        };

        if (st.fully())
            add_row(0, dims.N, static_cast<double>(dims.S));
        else
            for (int s = 0; s < dims.S; ++s)
                add_row(s * dims.N, dims.N, 1.0);
        return spec;
    }

} // namespace thp

#endif
