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

#ifndef THP_DUAL_QP_HPP
#define THP_DUAL_QP_HPP

#include "thp/box.hpp"
#include "thp/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace thp
{
    enum class QpMode
    {
        Objective,   // min f_0 s.t. f_j <= 0
        Feasibility  // min nu s.t. f_j <= nu
    };

    // Surrogates f_j(x) = anchor_j + u_j^T (x - x_l) + tau_j ||x - x_l||^2,
    // j = 0..m, over a box. Row 0 is the objective and is ignored in
    // Feasibility mode.
    struct QuadraticSubproblem
    {
        Vec center;  // x_l
        Vec tau;     // m+1
        Mat u;       // (m+1) x n
        Vec anchor;  // h_j(rhat, x_l)
        Box box;
        QpMode mode = QpMode::Objective;

        int n() const { return static_cast<int>(center.size()); }
        int m() const { return static_cast<int>(tau.size()) - 1; }

        void validate() const
        {
            require_dims(tau.size() >= 1, "QuadraticSubproblem: need at least the objective row");
            require_dims(u.rows() == tau.size() && u.cols() == center.size() && anchor.size() == tau.size(),
                         "QuadraticSubproblem: coefficient shapes disagree");
            require_dims(box.size() == center.size(), "QuadraticSubproblem: box dimension mismatch");
            if ((tau.array() <= 0.0).any())
                throw DomainError("QuadraticSubproblem: tau must be strictly positive");
            box.validate();
        }

        /// Affine constant of row j in expanded form: h_j - u_j^T x_l + tau_j ||x_l||^2.
        double affine_constant(int j) const
        {
            return anchor[j] - u.row(j).dot(center) + tau[j] * center.squaredNorm();
        }

        double value(int j, const Vec &x) const
        {
            const Vec d = x - center;
            return anchor[j] + u.row(j).dot(d) + tau[j] * d.squaredNorm();
        }

        Vec gradient(int j, const Vec &x) const { return u.row(j).transpose() + 2.0 * tau[j] * (x - center); }

        /// Values of rows 1..m at x.
        Vec constraint_values(const Vec &x) const
        {
            const Vec d = x - center;
            const double dd = d.squaredNorm();
            Vec f(m());
            for (int j = 1; j <= m(); ++j)
                f[j - 1] = anchor[j] + u.row(j).dot(d) + tau[j] * dd;
            return f;
        }
    };

    enum class DualMethod
    {
        ProjectedNewton,
        Subgradient
    };

    struct DualSolverOptions
    {
        double tolerance = 1e-7;      // scaled KKT residual
        int max_iterations = 5000;
        DualMethod method = DualMethod::ProjectedNewton;
        double divergence_lambda = 1e9; // |lambda| beyond this flags an infeasible subproblem
    };

    struct DualSolution
    {
        Vec lambda;
        Vec x_bar;
        double nu = 0.0;            // Feasibility mode: max_j f_j(x_bar)
        double primal_value = 0.0;  // f_0(x_bar) or nu
        double dual_value = 0.0;    // g(lambda)
        double kkt_residual = 0.0;  // scaled
        int iterations = 0;
        bool converged = false;
        bool infeasible = false;    // Objective mode only

        double duality_gap() const { return primal_value - dual_value; }
    };

    /// Euclidean projection onto the unit simplex (sort-based).
    inline Vec project_simplex(const Vec &v)
    {
        const Eigen::Index n = v.size();
        require_dims(n >= 1, "project_simplex: empty vector");
        std::vector<double> s(v.data(), v.data() + n);
        std::sort(s.begin(), s.end(), std::greater<>());
        double cum = 0.0, theta = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
        {
            cum += s[i];
            const double t = (cum - 1.0) / static_cast<double>(i + 1);
            if (s[i] - t > 0.0)
                theta = t;
        }
        return (v.array() - theta).max(0.0).matrix();
    }

    namespace detail
    {
        // lambda_0 weight on the objective row.
        inline double lambda0(const QuadraticSubproblem &qp) { return qp.mode == QpMode::Objective ? 1.0 : 0.0; }

        inline double curvature(const QuadraticSubproblem &qp, const Vec &lambda)
        {
            double a = lambda0(qp) * qp.tau[0];
            for (int j = 1; j <= qp.m(); ++j)
                a += lambda[j - 1] * qp.tau[j];
            return a;
        }
    } // namespace detail

    /// Closed-form Lagrangian minimizer over the box:
    /// x_i = clip(-b_i / (2a)), a = sum_j lambda_j tau_j,
    /// b_i = sum_j lambda_j (u_ji - 2 tau_j x_l,i). Linear in n.
    inline Vec primal_from_dual(const QuadraticSubproblem &qp, const Vec &lambda)
    {
        require_dims(lambda.size() == qp.m(), "primal_from_dual: lambda must have m entries");
        const double a = detail::curvature(qp, lambda);
        if (!(a > 0.0))
            throw DomainError("primal_from_dual: zero curvature a(lambda); lambda must not vanish in feasibility mode");
        Vec wsum = detail::lambda0(qp) * qp.u.row(0).transpose();
        for (int j = 1; j <= qp.m(); ++j)
            if (lambda[j - 1] != 0.0)
                wsum.noalias() += lambda[j - 1] * qp.u.row(j).transpose();
        Vec x(qp.n());
        const double inv = 1.0 / (2.0 * a);
        for (int i = 0; i < qp.n(); ++i)
            x[i] = qp.box.clip(i, qp.center[i] - wsum[i] * inv);
        return x;
    }

    namespace detail
    {
        struct DualPoint
        {
            Vec x;
            Vec f;     // constraint values, rows 1..m
            double f0 = 0.0;
            double g = 0.0;
        };

        inline DualPoint evaluate_dual(const QuadraticSubproblem &qp, const Vec &lambda)
        {
            DualPoint p;
            p.x = primal_from_dual(qp, lambda);
            p.f = qp.constraint_values(p.x);
            p.f0 = qp.mode == QpMode::Objective ? qp.value(0, p.x) : 0.0;
            p.g = p.f0 + lambda.dot(p.f);
            return p;
        }

        inline double residual_scale(const QuadraticSubproblem &qp)
        {
            return std::max(1.0, qp.anchor.cwiseAbs().maxCoeff());
        }

        // Natural KKT residual of the dual: min(lambda_j, slack_j) = 0 with
        // slack = -f (objective) or nu - f (feasibility).
        inline double kkt_residual(const QuadraticSubproblem &qp, const Vec &lambda, const DualPoint &p)
        {
            if (qp.m() == 0)
                return 0.0;
            const double nu = qp.mode == QpMode::Feasibility ? p.f.maxCoeff() : 0.0;
            double r = 0.0;
            for (int j = 0; j < qp.m(); ++j)
                r = std::max(r, std::abs(std::min(lambda[j], nu - p.f[j])));
            return r / residual_scale(qp);
        }

        // Hessian of g on the current clip pattern: -G G^T / (2a) with
        // G_j = grad f_j restricted to unclipped coordinates.
        inline Mat dual_hessian(const QuadraticSubproblem &qp, const Vec &lambda, const Vec &x)
        {
            const int m = qp.m();
            const double a = curvature(qp, lambda);
            Vec wsum = lambda0(qp) * qp.u.row(0).transpose();
            for (int j = 1; j <= m; ++j)
                wsum.noalias() += lambda[j - 1] * qp.u.row(j).transpose();
            std::vector<int> free;
            free.reserve(qp.n());
            for (int i = 0; i < qp.n(); ++i)
            {
                const double raw = qp.center[i] - wsum[i] / (2.0 * a);
                if (raw > qp.box.lower[i] && raw < qp.box.upper[i])
                    free.push_back(i);
            }
            Mat G(m, free.size());
            for (int j = 1; j <= m; ++j)
                for (std::size_t c = 0; c < free.size(); ++c)
                {
                    const int i = free[c];
                    G(j - 1, c) = qp.u(j, i) + 2.0 * qp.tau[j] * (x[i] - qp.center[i]);
                }
            return -(G * G.transpose()) / (2.0 * a);
        }

        inline Vec project_dual(const QuadraticSubproblem &qp, const Vec &v)
        {
            return qp.mode == QpMode::Objective ? Vec(v.cwiseMax(0.0)) : project_simplex(v);
        }

        inline DualSolution finish(const QuadraticSubproblem &qp, const Vec &lambda, const DualPoint &p, int it,
                                   double tol)
        {
            DualSolution s;
            s.lambda = lambda;
            s.x_bar = p.x;
            s.iterations = it;
            s.dual_value = p.g;
            s.nu = qp.m() > 0 ? p.f.maxCoeff() : -std::numeric_limits<double>::infinity();
            s.primal_value = qp.mode == QpMode::Objective ? p.f0 : s.nu;
            s.kkt_residual = kkt_residual(qp, lambda, p);
            s.converged = s.kkt_residual <= tol;
            return s;
        }

        // Newton direction for the orthant (objective mode) or simplex
        // (feasibility mode), with active-set identification.
        inline Vec newton_direction(const QuadraticSubproblem &qp, const Vec &lambda, const DualPoint &p, double mu)
        {
            const int m = qp.m();
            const Mat Hs = dual_hessian(qp, lambda, p.x);
            const Vec &grad = p.f;
            // Bertsekas' epsilon-active set: bound multipliers within the
            // projected-gradient step length of the boundary.
            const double act = std::min(1e-3, (lambda - project_dual(qp, lambda + grad)).lpNorm<Eigen::Infinity>());
            std::vector<int> F, A;

            double eta = 0.0;
            if (qp.mode == QpMode::Feasibility)
                eta = lambda.dot(grad);
            for (int j = 0; j < m; ++j)
            {
                const bool at_bound = lambda[j] <= act;
                const bool pushes_out = grad[j] < eta || (qp.mode == QpMode::Objective && grad[j] <= 0.0);
                (at_bound && pushes_out ? A : F).push_back(j);
            }

            Vec d = Vec::Zero(m);
            for (int j : A)
                d[j] = qp.mode == QpMode::Objective ? grad[j] : -lambda[j];
            if (F.empty())
                return d;

            const int nf = static_cast<int>(F.size());
            Mat Mr(nf, nf);
            Vec gF(nf);
            for (int r = 0; r < nf; ++r)
            {
                gF[r] = grad[F[r]];
                for (int c = 0; c < nf; ++c)
                    Mr(r, c) = -Hs(F[r], F[c]);
                Mr(r, r) += mu;
            }
            Eigen::LDLT<Mat> ldlt(Mr);
            Vec dF;
            if (qp.mode == QpMode::Objective)
                dF = ldlt.solve(gF);
            else
            {
                double delta = 0.0;
                for (int j : A)
                    delta += lambda[j];
                const Vec one = Vec::Ones(nf);
                const Vec Mg = ldlt.solve(gF), M1 = ldlt.solve(one);
                const double etap = (Mg.sum() - delta) / M1.sum();
                dF = Mg - etap * M1;
            }
            for (int r = 0; r < nf; ++r)
                d[F[r]] = dF[r];
            return d;
        }

        inline DualSolution solve_newton(const QuadraticSubproblem &qp, Vec lambda, const DualSolverOptions &opt)
        {
            constexpr double sigma = 1e-4;
            DualPoint p = evaluate_dual(qp, lambda);
            int it = 0;
            double mu_scale = 1e-10;
            // Newton converges fast near the optimum, so polish well below the
            // reported tolerance; the optimum value error scales with |lambda|
            // times the residual.
            const double target = 1e-4 * opt.tolerance;
            for (; it < opt.max_iterations; ++it)
            {
                if (kkt_residual(qp, lambda, p) <= target)
                    break;
                if (qp.mode == QpMode::Objective && lambda.lpNorm<Eigen::Infinity>() > opt.divergence_lambda)
                {
                    auto s = finish(qp, lambda, p, it, opt.tolerance);
                    s.infeasible = true;
                    s.converged = false;
                    return s;
                }

                const Mat Hs = dual_hessian(qp, lambda, p.x);
                const double mu = mu_scale * std::max(1.0, Hs.cwiseAbs().maxCoeff());
                bool accepted = false;
                for (int attempt = 0; attempt < 2 && !accepted; ++attempt)
                {
                    // attempt 0: Newton; attempt 1: projected gradient
                    const Vec d = attempt == 0 ? newton_direction(qp, lambda, p, mu) : Vec(p.f);
                    double s = attempt == 0 ? 1.0 : 1.0 / std::max(1e-12, Hs.norm());
                    for (int ls = 0; ls < 80; ++ls, s *= 0.5)
                    {
                        const Vec ln = project_dual(qp, lambda + s * d);
                        const Vec step = ln - lambda;
                        if (step.lpNorm<Eigen::Infinity>() == 0.0)
                            break;
                        DualPoint pn = evaluate_dual(qp, ln);
                        const double need = sigma * p.f.dot(step);
                        // Close to the optimum g is flat below rounding level;
                        // there the residual itself serves as the merit.
                        const bool flat = std::abs(pn.g - p.g) <= 1e-12 * (1.0 + std::abs(p.g));
                        const bool armijo = pn.g >= p.g + need && pn.g >= p.g - 1e-15 * std::abs(p.g);
                        if (flat ? kkt_residual(qp, ln, pn) < kkt_residual(qp, lambda, p) : armijo)
                        {
                            lambda = ln;
                            p = std::move(pn);
                            accepted = true;
                            break;
                        }
                    }
                }
                if (!accepted)
                {
                    // Stalled at rounding level: accept the better of the
                    // current point and a larger regularization next round.
                    if (mu_scale > 1e2)
                        break;
                    mu_scale *= 1e3;
                }
                else
                    mu_scale = std::max(1e-10, mu_scale * 1e-2);
            }
            return finish(qp, lambda, p, it, opt.tolerance);
        }

        inline DualSolution solve_subgradient(const QuadraticSubproblem &qp, Vec lambda, const DualSolverOptions &opt)
        {
            DualPoint p = evaluate_dual(qp, lambda);
            Vec best_lambda = lambda;
            DualPoint best = p;
            double best_res = kkt_residual(qp, lambda, p);
            const double c = 1.0 / std::max(1e-12, p.f.norm());
            int it = 0;
            for (; it < opt.max_iterations && best_res > opt.tolerance; ++it)
            {
                lambda = project_dual(qp, lambda + (c / std::sqrt(it + 1.0)) * p.f);
                p = evaluate_dual(qp, lambda);
                const double r = kkt_residual(qp, lambda, p);
                if (r < best_res)
                {
                    best_res = r;
                    best_lambda = lambda;
                    best = p;
                }
            }
            return finish(qp, best_lambda, best, it, opt.tolerance);
        }

        inline DualSolution solve(const QuadraticSubproblem &qp, const std::optional<Vec> &warm,
                                  const DualSolverOptions &opt)
        {
            qp.validate();
            const int m = qp.m();
            Vec lambda;
            if (warm && warm->size() == m && warm->allFinite())
                lambda = project_dual(qp, *warm);
            else if (qp.mode == QpMode::Objective)
                lambda = Vec::Zero(m);
            else
                lambda = Vec::Constant(m, 1.0 / m);
            if (m == 0)
                return finish(qp, lambda, evaluate_dual(qp, lambda), 0, opt.tolerance);
            return opt.method == DualMethod::ProjectedNewton ? solve_newton(qp, lambda, opt)
                                                             : solve_subgradient(qp, lambda, opt);
        }
    } // namespace detail

    /// Objective update: maximizes g(lambda) over lambda >= 0 and recovers
    /// x_bar = x(lambda*). `infeasible` is set when the dual ascent diverges.
    inline DualSolution solve_objective_qp(QuadraticSubproblem qp, const DualSolverOptions &opt = {},
                                           const std::optional<Vec> &warm = std::nullopt)
    {
        qp.mode = QpMode::Objective;
        return detail::solve(qp, warm, opt);
    }

    /// Feasible update: min nu s.t. f_j(x) <= nu. The dual lives on the unit
    /// simplex (the nu terms cancel only when sum lambda = 1).
    inline DualSolution solve_feasibility_qp(QuadraticSubproblem qp, const DualSolverOptions &opt = {},
                                             const std::optional<Vec> &warm = std::nullopt)
    {
        if (qp.m() < 1)
            throw DimensionError("solve_feasibility_qp: needs at least one constraint");
        qp.mode = QpMode::Feasibility;
        return detail::solve(qp, warm, opt);
    }

} // namespace thp

#endif
