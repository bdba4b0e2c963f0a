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

#ifndef THP_VERIFICATION_HPP
#define THP_VERIFICATION_HPP

// Oracle suites behind the gradcheck and qpcheck verbs: the analytic
// Jacobian against central differences, and the dual QP solver against an
// independent primal log-barrier method.

#include "thp/channel_model.hpp"
#include "thp/dual_qp.hpp"
#include "thp/gradients.hpp"
#include "thp/precoding.hpp"
#include "thp/rng.hpp"

#include <algorithm>
#include <chrono>
#include <random>
#include <string>
#include <vector>

namespace thp
{
    // ---------------------------------------------------------------------
    // Primal barrier oracle.

    struct BarrierResult
    {
        Vec x;
        double value = 0.0; // f_0(x) in Objective mode, nu in Feasibility mode
        bool ok = false;
    };

    namespace detail
    {
        // Barrier over z = [x] (Objective) or z = [x; nu] (Feasibility).
        struct BarrierModel
        {
            const QuadraticSubproblem &qp;
            bool feas;
            int n;

            double obj(const Vec &z) const { return feas ? z[n] : qp.value(0, z.head(n)); }

            double g(int j, const Vec &z) const
            {
                const double v = qp.value(j, z.head(n));
                return feas ? v - z[n] : v;
            }

            bool strictly_feasible(const Vec &z) const
            {
                for (int i = 0; i < n; ++i)
                    if (!(z[i] > qp.box.lower[i] && z[i] < qp.box.upper[i]))
                        return false;
                for (int j = 1; j <= qp.m(); ++j)
                    if (!(g(j, z) < 0.0))
                        return false;
                return true;
            }

            void derivatives(const Vec &z, double t, Vec &grad, Mat &hess) const
            {
                const int nz = static_cast<int>(z.size());
                grad = Vec::Zero(nz);
                hess = Mat::Zero(nz, nz);
                const Vec x = z.head(n);
                if (feas)
                    grad[n] = t;
                else
                {
                    grad.head(n) = t * qp.gradient(0, x);
                    hess.topLeftCorner(n, n).diagonal().array() += 2.0 * t * qp.tau[0];
                }
                for (int j = 1; j <= qp.m(); ++j)
                {
                    const double s = -g(j, z);
                    Vec dg(nz);
                    dg.head(n) = qp.gradient(j, x);
                    if (feas)
                        dg[n] = -1.0;
                    grad += dg / s;
                    hess += dg * dg.transpose() / (s * s);
                    hess.topLeftCorner(n, n).diagonal().array() += 2.0 * qp.tau[j] / s;
                }
                for (int i = 0; i < n; ++i)
                {
                    const double a = z[i] - qp.box.lower[i], b = qp.box.upper[i] - z[i];
                    grad[i] += -1.0 / a + 1.0 / b;
                    hess(i, i) += 1.0 / (a * a) + 1.0 / (b * b);
                }
            }
        };
    } // namespace detail

    /// Log-barrier path following with damped Newton centering. Every term is
    /// self-concordant, so the damped step 1/(1+decrement) keeps the iterate
    /// strictly feasible without a line search. Objective mode needs a
    /// strictly feasible start; Feasibility mode starts from the box centre.
    inline BarrierResult barrier_oracle(const QuadraticSubproblem &qp, const Vec &start, double gap_target = 1e-11)
    {
        qp.validate();
        const bool feas = qp.mode == QpMode::Feasibility;
        const int n = qp.n();
        detail::BarrierModel model{qp, feas, n};
        Vec z(feas ? n + 1 : n);
        z.head(n) = start;
        if (feas)
        {
            double worst = -std::numeric_limits<double>::infinity();
            for (int j = 1; j <= qp.m(); ++j)
                worst = std::max(worst, qp.value(j, start));
            z[n] = worst + 1.0;
        }
        BarrierResult out;
        if (!model.strictly_feasible(z))
            return out;

        const double n_cons = qp.m() + 2.0 * n;
        Vec grad;
        Mat hess;
        for (double t = 1.0;; t *= 8.0)
        {
            for (int it = 0; it < 500; ++it)
            {
                model.derivatives(z, t, grad, hess);
                const Vec step = -hess.ldlt().solve(grad);
                const double dec2 = -grad.dot(step);
                if (!(dec2 >= 0.0) || !step.allFinite())
                    return out;
                if (dec2 < 1e-22)
                    break;
                const double dec = std::sqrt(dec2);
                Vec zn = z + (dec < 0.25 ? 1.0 : 1.0 / (1.0 + dec)) * step;
                if (!model.strictly_feasible(zn))
                    zn = z + 0.5 / (1.0 + dec) * step;
                if (!model.strictly_feasible(zn))
                    break;
                z = zn;
            }
            if (n_cons / t < gap_target)
                break;
        }
        out.x = z.head(n);
        out.value = model.obj(z);
        out.ok = true;
        return out;
    }

    // ---------------------------------------------------------------------
    // Random subproblems.

    struct RandomQp
    {
        QuadraticSubproblem qp;
        Vec interior; // strictly feasible point (Objective mode)
    };

    /// Random diagonal-quadratic subproblem. Constraints are shifted so that
    /// `interior` satisfies each with a margin, which makes Objective-mode
    /// instances strictly feasible by construction.
    inline RandomQp random_subproblem(Rng &rng, int n, int m, QpMode mode)
    {
        std::uniform_real_distribution<double> U(0.0, 1.0);
        std::normal_distribution<double> N01(0.0, 1.0);
        RandomQp r;
        auto &qp = r.qp;
        qp.mode = mode;
        qp.box.lower.resize(n);
        qp.box.upper.resize(n);
        qp.center.resize(n);
        r.interior.resize(n);
        for (int i = 0; i < n; ++i)
        {
            qp.box.lower[i] = -0.1 - 3.0 * U(rng);
            qp.box.upper[i] = qp.box.lower[i] + 0.2 + 4.0 * U(rng);
            const double w = qp.box.upper[i] - qp.box.lower[i];
            qp.center[i] = qp.box.lower[i] + w * U(rng);
            r.interior[i] = qp.box.lower[i] + w * (0.05 + 0.9 * U(rng));
        }
        qp.tau.resize(m + 1);
        qp.u.resize(m + 1, n);
        qp.anchor.resize(m + 1);
        for (int j = 0; j <= m; ++j)
        {
            qp.tau[j] = 0.1 + 2.9 * U(rng);
            for (int i = 0; i < n; ++i)
                qp.u(j, i) = 2.0 * N01(rng);
            qp.anchor[j] = N01(rng);
        }
        const Vec d = r.interior - qp.center;
        for (int j = 1; j <= m; ++j)
        {
            const double margin = 0.05 + 0.95 * U(rng);
            qp.anchor[j] = -margin - qp.u.row(j).dot(d) - qp.tau[j] * d.squaredNorm();
        }
        return r;
    }

    // ---------------------------------------------------------------------
    // Suites.

    struct QpCheckReport
    {
        int instances = 0;
        int failures = 0;
        double worst_value_error = 0.0; // |dual optimum - oracle optimum|
        double worst_gap = 0.0;         // scaled duality gap
        double worst_kkt = 0.0;
        double seconds = 0.0;
        std::vector<std::string> messages;

        bool passed(double tol = 1e-6) const
        {
            return failures == 0 && worst_value_error <= tol && worst_gap <= tol;
        }
    };

    /// Compares solve_objective_qp / solve_feasibility_qp with the barrier
    /// oracle on `per_mode` random instances of each mode.
    inline QpCheckReport run_qp_check(std::uint64_t seed, int per_mode = 50, int max_n = 20, int max_m = 3,
                                      const DualSolverOptions &opt = {})
    {
        QpCheckReport rep;
        const auto t0 = std::chrono::steady_clock::now();
        Rng rng = make_rng(seed, Stream::Testing, 2);
        for (QpMode mode : {QpMode::Objective, QpMode::Feasibility})
        {
            for (int k = 0; k < per_mode; ++k)
            {
                const int n = std::uniform_int_distribution<int>(1, max_n)(rng);
                const int m = std::uniform_int_distribution<int>(mode == QpMode::Objective ? 0 : 1, max_m)(rng);
                const auto inst = random_subproblem(rng, n, m, mode);
                const auto &qp = inst.qp;
                ++rep.instances;

                const auto sol =
                    mode == QpMode::Objective ? solve_objective_qp(qp, opt) : solve_feasibility_qp(qp, opt);
                const Vec start = mode == QpMode::Objective ? inst.interior
                                                            : Vec(0.5 * (qp.box.lower + qp.box.upper));
                const auto ora = barrier_oracle(qp, start);
                const std::string tag = std::string(mode == QpMode::Objective ? "objective" : "feasibility") +
                                        " #" + std::to_string(k) + " (n=" + std::to_string(n) +
                                        ", m=" + std::to_string(m) + ")";
                if (!sol.converged || !ora.ok || !qp.box.contains(sol.x_bar))
                {
                    ++rep.failures;
                    rep.messages.push_back(tag + (ora.ok ? ": dual solver did not converge" : ": oracle failed"));
                    continue;
                }
                const double err = std::abs(sol.primal_value - ora.value);
                const double gap = std::abs(sol.duality_gap()) / (1.0 + std::abs(sol.primal_value));
                rep.worst_value_error = std::max(rep.worst_value_error, err);
                rep.worst_gap = std::max(rep.worst_gap, gap);
                rep.worst_kkt = std::max(rep.worst_kkt, sol.kkt_residual);
            }
        }
        rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rep;
    }

    struct GradCheckEntry
    {
        std::string structure;
        int instances = 0;
        double max_rel_error = 0.0;
    };

    struct GradCheckReport
    {
        std::vector<GradCheckEntry> entries;
        double seconds = 0.0;

        double worst() const
        {
            double w = 0.0;
            for (const auto &e : entries)
                w = std::max(w, e.max_rel_error);
            return w;
        }
    };

    /// Entrywise relative error with a floor of 1e-3 of the largest entry, so
    /// tiny reference entries do not dominate.
    inline double jacobian_rel_error(const Mat &analytic, const Mat &reference)
    {
        require_dims(analytic.rows() == reference.rows() && analytic.cols() == reference.cols(),
                     "jacobian_rel_error: shape mismatch");
        const double floor = std::max(1e-12, 1e-3 * reference.cwiseAbs().maxCoeff());
        double worst = 0.0;
        for (Eigen::Index i = 0; i < analytic.size(); ++i)
        {
            const double ref = reference.data()[i];
            worst = std::max(worst, std::abs(analytic.data()[i] - ref) / std::max(std::abs(ref), floor));
        }
        return worst;
    }

    namespace detail
    {
        struct GradInstance
        {
            SystemDims dims;
            RfStructure st;
            ThpVariable x;
            CMat H;
        };

        inline GradInstance random_grad_instance(Rng &rng, Connectivity c, RfMethod method, int max_M, int max_K,
                                                 int max_S)
        {
            std::uniform_real_distribution<double> U(0.0, 1.0);
            auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
            GradInstance g;
            auto &d = g.dims;
            d.M = pick(2, max_M);
            if (c == Connectivity::PartiallyConnected)
            {
                std::vector<int> divisors;
                for (int s = 1; s <= std::min(max_S, d.M); ++s)
                    if (d.M % s == 0)
                        divisors.push_back(s);
                d.S = divisors[pick(0, static_cast<int>(divisors.size()) - 1)];
            }
            else
                d.S = pick(1, std::min(max_S, d.M));
            d.K = pick(1, std::min(max_K, d.S));
            d.N = method == RfMethod::Codebook ? pick(d.S, 2 * d.M) : 0;
            g.st = method == RfMethod::Dps ? make_dps_structure(c) : make_codebook_structure(c, d);

            ChannelConfig cc;
            cc.dims = d;
            cc.num_paths = pick(1, 6);
            cc.rng_seed = rng();
            Rng srng = make_rng(cc.rng_seed, Stream::Statistics);
            const auto stats = draw_statistics(cc, srng);
            g.H = sample_channel(stats, rng).H;

            const int n_phi = rf_param_count(g.st, d);
            g.x.phi.resize(n_phi);
            for (int i = 0; i < n_phi; ++i)
                g.x.phi[i] = method == RfMethod::Dps ? 2.0 * pi * U(rng) : 0.1 + 0.8 * U(rng);
            g.x.p.resize(d.K);
            for (int k = 0; k < d.K; ++k)
                g.x.p[k] = 0.1 + 2.0 * U(rng);
            g.x.alpha = 0.05 + 2.0 * U(rng);
            return g;
        }
    } // namespace detail

    /// Analytic Jacobian vs central differences for fully-connected DPS,
    /// fully-connected codebook and partially-connected DPS.
    inline GradCheckReport run_grad_check(std::uint64_t seed, int per_structure = 100, int max_M = 16,
                                          int max_K = 4, int max_S = 4,
                                          Normalization norm = Normalization::UnitColumn)
    {
        GradCheckReport rep;
        const auto t0 = std::chrono::steady_clock::now();
        Rng rng = make_rng(seed, Stream::Testing, 1);
        const struct
        {
            const char *name;
            Connectivity c;
            RfMethod m;
        } cases[] = {{"fully-dps", Connectivity::FullyConnected, RfMethod::Dps},
                     {"fully-codebook", Connectivity::FullyConnected, RfMethod::Codebook},
                     {"partially-dps", Connectivity::PartiallyConnected, RfMethod::Dps}};
        for (const auto &cs : cases)
        {
            GradCheckEntry e;
            e.structure = cs.name;
            for (int k = 0; k < per_structure; ++k)
            {
                const auto g = detail::random_grad_instance(rng, cs.c, cs.m, max_M, max_K, max_S);
                const auto an = rate_jacobian(g.x, g.H, g.st, g.dims, norm);
                const auto fd = finite_diff_jacobian(g.x, g.H, g.st, g.dims, 1e-6, nullptr, norm);
                e.max_rel_error = std::max(e.max_rel_error, jacobian_rel_error(an.J, fd.J));
                ++e.instances;
            }
            rep.entries.push_back(e);
        }
        rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rep;
    }

} // namespace thp

#endif
