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

#ifndef THP_SSCA_HPP
#define THP_SSCA_HPP

#include "thp/box.hpp"
#include "thp/dual_qp.hpp"
#include "thp/gradients.hpp"
#include "thp/precoding.hpp"
#include "thp/problems.hpp"
#include "thp/schedule.hpp"

#include <chrono>
#include <concepts>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace thp
{
    // A map x -> r(x; H) with its n x K Jacobian. The hybrid precoder is one
    // model; tests plug in synthetic ones.
    template <class M>
    concept RateModel = requires(const M &m, const Vec &x, const typename M::Sample &s) {
        { m.num_users() } -> std::convertible_to<int>;
        { m.rates(x, s) } -> std::convertible_to<Vec>;
        { m.jacobian(x, s) } -> std::convertible_to<Mat>;
    };

    // Instantaneous rates of the hybrid precoder over flat THP variables.
    struct HybridRateModel
    {
        using Sample = CMat;

        SystemDims dims;
        RfStructure structure;
        VariableLayout layout;
        Box box;
        Normalization norm = Normalization::UnitColumn;

        int num_users() const { return dims.K; }

        Vec rates(const Vec &x, const CMat &H) const
        {
            return rates_at(ThpVariable::unpack(x, layout), H, structure, dims, norm);
        }

        Mat jacobian(const Vec &x, const CMat &H) const
        {
            return rate_jacobian(ThpVariable::unpack(x, layout), H, structure, dims, norm, &box).J;
        }

        // Shares the RF precoder across samples. With c = I - alpha B and
        // n_i = [B V B]_ii, V = HF (F^H F) (HF)^H, the effective gains are
        // |h_k^H F g_i|^2 = |c_ki|^2 lambda_i, so G is never formed.
        template <class Range>
        Vec average_rates(const Vec &x, const Range &samples) const
        {
            const auto v = ThpVariable::unpack(x, layout);
            const CMat F = effective_rf_precoder(v.phi, structure, dims);
            const CMat W = F.adjoint() * F;
            const Eigen::Index K = dims.K;
            CMat HF(K, F.cols()), T(K, K), B(K, K), V(K, K), N(K, K), C(K, K);
            const CMat I = CMat::Identity(K, K);
            Vec sum = Vec::Zero(K);
            Vec lam(K);
            for (const auto &H : samples)
            {
                if (v.p.minCoeff() < 0.0)
                    throw DomainError("average_rates: negative power");
                HF.noalias() = H * F;
                T.noalias() = HF * HF.adjoint();
                T.diagonal().array() += v.alpha;
                Eigen::LLT<CMat> llt(T);
                if (llt.info() != Eigen::Success)
                    throw ConditioningError("average_rates: regularized Gram matrix is not positive definite");
                B = llt.solve(I);
                C.noalias() = T * B;
                if (!((C - I).cwiseAbs().maxCoeff() <= 1e-8))
                    throw ConditioningError("average_rates: inversion residual exceeds 1e-8");
                V.noalias() = HF * W * HF.adjoint();
                N.noalias() = B * V * B;
                for (Eigen::Index i = 0; i < K; ++i)
                {
                    const double n = N(i, i).real();
                    if (!(n > 0.0) || !std::isfinite(n))
                        throw ConditioningError("average_rates: zero-energy precoding column");
                    lam[i] = norm == Normalization::UnitColumn ? 1.0 / n : 1.0 / std::sqrt(n);
                }
                C = I - v.alpha * B;
                for (Eigen::Index k = 0; k < K; ++k)
                {
                    double interference = 1.0;
                    for (Eigen::Index i = 0; i < K; ++i)
                        if (i != k)
                            interference += v.p[i] * std::norm(C(k, i)) * lam[i];
                    sum[k] += std::log1p(v.p[k] * std::norm(C(k, k)) * lam[k] / interference);
                }
            }
            return sum / static_cast<double>(samples.size());
        }
    };

    enum class RateAverage
    {
        Exact,    // recompute at x^l over every stored sample
        Recursive // rhat = (1 - rho) rhat + rho r(x^l; H^l)
    };

    struct SscaOptions
    {
        RateAverage rate_average = RateAverage::Exact;
        std::size_t sample_cap = 2000;
        double feasibility_tolerance = 1e-9;
        DualSolverOptions dual;
        Vec tau; // empty: all ones
        int max_consecutive_skips = 3;
    };

    enum class UpdateKind
    {
        Objective,
        Feasibility,
        Skipped
    };

    inline const char *to_string(UpdateKind k)
    {
        switch (k)
        {
        case UpdateKind::Objective:
            return "objective";
        case UpdateKind::Feasibility:
            return "feasibility";
        default:
            return "skipped";
        }
    }

    struct TrajectoryRecord
    {
        long iter = 0;
        UpdateKind kind = UpdateKind::Objective;
        double objective_est = 0.0;      // h_0(rhat^l, x^l)
        double max_constraint_est = 0.0; // max_i h_i(rhat^l, x^l)
        double nu = 0.0;
        double step_gamma = 0.0;
        double step_rho = 0.0;
        double x_move_norm = 0.0;        // ||xbar^l - x^l||
        double seconds = 0.0;            // measured step time
        bool windowed = false;           // sample store at its cap
    };

    using Trajectory = std::vector<TrajectoryRecord>;

    template <class Sample>
    struct SurrogateState
    {
        long l = 0;
        Vec x;
        Mat u;     // (m+1) x n
        Vec r_hat; // K
        std::deque<Sample> samples;
        Vec tau;
        std::optional<Vec> lambda_objective;
        std::optional<Vec> lambda_feasibility;
        int consecutive_skips = 0;
        long window_engaged_at = -1;
    };

    template <RateModel Model>
    SurrogateState<typename Model::Sample> init_state(const Model &model, const ProblemSpec &spec, const Box &box,
                                                      const Vec &x0, const SscaOptions &opt = {})
    {
        require_dims(x0.size() == spec.n() && box.size() == spec.n(), "init_state: dimension mismatch");
        if (!box.contains(x0))
            throw DomainError("init_state: initial point outside the box");
        SurrogateState<typename Model::Sample> s;
        s.x = x0;
        s.u = Mat::Zero(spec.m() + 1, spec.n());
        s.r_hat = Vec::Zero(model.num_users());
        if (opt.tau.size() == 0)
            s.tau = Vec::Ones(spec.m() + 1);
        else
        {
            require_dims(opt.tau.size() == spec.m() + 1, "init_state: tau must have m+1 entries");
            if ((opt.tau.array() <= 0.0).any())
                throw ConfigError("init_state: tau must be positive");
            s.tau = opt.tau;
        }
        return s;
    }

    namespace detail
    {
        template <class Model, class Range>
        Vec mean_rates(const Model &model, const Vec &x, const Range &samples)
        {
            if constexpr (requires { model.average_rates(x, samples); })
                return model.average_rates(x, samples);
            else
            {
                Vec sum = Vec::Zero(model.num_users());
                for (const auto &s : samples)
                    sum += model.rates(x, s);
                return sum / static_cast<double>(samples.size());
            }
        }
    } // namespace detail

    /// Appends H^l and refreshes rhat at the current iterate.
    template <RateModel Model>
    const Vec &update_rate_average(SurrogateState<typename Model::Sample> &st, const Model &model,
                                   const typename Model::Sample &sample, double rho, const SscaOptions &opt = {})
    {
        if (opt.rate_average == RateAverage::Recursive)
        {
            const Vec r = model.rates(st.x, sample);
            st.r_hat = st.l == 0 ? r : Vec((1.0 - rho) * st.r_hat + rho * r);
            return st.r_hat;
        }
        st.samples.push_back(sample);
        if (opt.sample_cap > 0 && st.samples.size() > opt.sample_cap)
        {
            st.samples.pop_front();
            if (st.window_engaged_at < 0)
                st.window_engaged_at = st.l;
        }
        st.r_hat = detail::mean_rates(model, st.x, st.samples);
        return st.r_hat;
    }

    /// uhat_i = J nabla_r h_i(rbar, x) + nabla_x h_i(rbar, x) for a given
    /// n x K rate Jacobian J.
    inline Mat surrogate_gradients(const ProblemSpec &spec, const Mat &J, const Vec &r_hat, const Vec &x)
    {
        require_dims(J.rows() == spec.n() && J.cols() == r_hat.size(), "surrogate_gradients: Jacobian shape");
        Mat uh(spec.m() + 1, spec.n());
        for (int i = 0; i <= spec.m(); ++i)
            uh.row(i) = (J * spec.grad_h_r(i, r_hat, x) + spec.grad_h_x(i, r_hat, x)).transpose();
        return uh;
    }

    template <RateModel Model>
    Mat surrogate_gradient_sample(const SurrogateState<typename Model::Sample> &st, const Model &model,
                                  const typename Model::Sample &sample, const ProblemSpec &spec)
    {
        return surrogate_gradients(spec, model.jacobian(st.x, sample), st.r_hat, st.x);
    }

    inline void update_tracked_gradients(Mat &u, const Mat &u_hat, double rho)
    {
        require_dims(u.rows() == u_hat.rows() && u.cols() == u_hat.cols(), "update_tracked_gradients: shape");
        if (!(rho > 0.0 && rho <= 1.0))
            throw DomainError("update_tracked_gradients: rho must lie in (0, 1]");
        u = (1.0 - rho) * u + rho * u_hat;
    }

    /// Packs fbar_i(x) = h_i(rhat, x^l) + u_i^T (x - x^l) + tau_i ||x - x^l||^2.
    template <class Sample>
    QuadraticSubproblem build_subproblem(const SurrogateState<Sample> &st, const ProblemSpec &spec, const Box &box)
    {
        QuadraticSubproblem qp;
        qp.center = st.x;
        qp.tau = st.tau;
        qp.u = st.u;
        qp.anchor.resize(spec.m() + 1);
        for (int i = 0; i <= spec.m(); ++i)
            qp.anchor[i] = spec.h(i, st.r_hat, st.x);
        qp.box = box;
        return qp;
    }

    struct SurrogateSolution
    {
        UpdateKind kind = UpdateKind::Skipped;
        Vec x_bar;
        double nu = std::numeric_limits<double>::quiet_NaN();
    };

    /// Step 2: feasibility problem first, objective problem when nu <= tol.
    /// A failed objective solve after a successful feasibility solve falls
    /// back to the feasibility point.
    template <class Sample>
    SurrogateSolution solve_surrogate(const QuadraticSubproblem &qp, SurrogateState<Sample> &st,
                                      const SscaOptions &opt)
    {
        SurrogateSolution out;
        if (qp.m() == 0)
        {
            const auto o = solve_objective_qp(qp, opt.dual);
            if (o.converged)
            {
                out.kind = UpdateKind::Objective;
                out.x_bar = o.x_bar;
            }
            return out;
        }
        const auto f = solve_feasibility_qp(qp, opt.dual, st.lambda_feasibility);
        if (!f.converged)
            return out;
        st.lambda_feasibility = f.lambda;
        out.nu = f.nu;
        out.kind = UpdateKind::Feasibility;
        out.x_bar = f.x_bar;
        if (f.nu <= opt.feasibility_tolerance)
        {
            const auto o = solve_objective_qp(qp, opt.dual, st.lambda_objective);
            if (o.converged)
            {
                st.lambda_objective = o.lambda;
                out.kind = UpdateKind::Objective;
                out.x_bar = o.x_bar;
            }
            else
                st.lambda_objective.reset();
        }
        return out;
    }

    /// One iteration of the stochastic successive convex approximation.
    template <RateModel Model>
    TrajectoryRecord ssca_step(SurrogateState<typename Model::Sample> &st, const Model &model,
                               const typename Model::Sample &sample, const ProblemSpec &spec, const Box &box,
                               const StepSchedule &sched, const SscaOptions &opt = {})
    {
        const auto t0 = std::chrono::steady_clock::now();
        TrajectoryRecord rec;
        rec.iter = st.l;
        rec.step_rho = sched.rho(st.l);
        rec.step_gamma = sched.gamma(st.l);

        update_rate_average(st, model, sample, rec.step_rho, opt);
        update_tracked_gradients(st.u, surrogate_gradient_sample(st, model, sample, spec), rec.step_rho);
        const auto qp = build_subproblem(st, spec, box);

        rec.objective_est = qp.anchor[0];
        rec.max_constraint_est =
            spec.m() > 0 ? qp.anchor.tail(spec.m()).maxCoeff() : std::numeric_limits<double>::quiet_NaN();

        const auto sol = solve_surrogate(qp, st, opt);
        rec.kind = sol.kind;
        rec.nu = sol.nu;
        rec.windowed = st.window_engaged_at >= 0;
        if (sol.kind == UpdateKind::Skipped)
        {
            if (++st.consecutive_skips >= opt.max_consecutive_skips)
                throw SolverError("ssca_step: surrogate problem failed " + std::to_string(st.consecutive_skips) +
                                  " consecutive times at iteration " + std::to_string(st.l));
        }
        else
        {
            st.consecutive_skips = 0;
            rec.x_move_norm = (sol.x_bar - st.x).norm();
            // clamp guards the last ulp; the combination of two box points is
            // already inside
            st.x = box.project((1.0 - rec.step_gamma) * st.x + rec.step_gamma * sol.x_bar);
        }
        ++st.l;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rec;
    }

    template <class Sample>
    struct SscaResult
    {
        SurrogateState<Sample> state;
        Trajectory trajectory;
    };

    /// L frames; `sampler(l)` returns the channel of frame l.
    template <RateModel Model, class Sampler>
    SscaResult<typename Model::Sample> run_ssca(const Model &model, const ProblemSpec &spec, const Box &box,
                                                const StepSchedule &sched, const SscaOptions &opt, const Vec &x0,
                                                long frames, Sampler &&sampler)
    {
        if (frames < 1)
            throw ConfigError("run_ssca: need at least one frame");
        SscaResult<typename Model::Sample> res{init_state(model, spec, box, x0, opt), {}};
        res.trajectory.reserve(frames);
        for (long l = 0; l < frames; ++l)
            res.trajectory.push_back(ssca_step(res.state, model, sampler(l), spec, box, sched, opt));
        return res;
    }

    /// Residual of the KKT system of the surrogate problem at its centre:
    /// projected stationarity of u_0 + sum lambda_i u_i, primal feasibility
    /// and complementary slackness of the anchors.
    inline double surrogate_kkt_residual(const QuadraticSubproblem &qp, const Vec &lambda)
    {
        require_dims(lambda.size() == qp.m(), "surrogate_kkt_residual: lambda length");
        Vec g = qp.u.row(0).transpose();
        for (int j = 1; j <= qp.m(); ++j)
            g += lambda[j - 1] * qp.u.row(j).transpose();
        double r = (qp.center - qp.box.project(qp.center - g)).lpNorm<Eigen::Infinity>();
        for (int j = 1; j <= qp.m(); ++j)
        {
            r = std::max(r, std::max(0.0, qp.anchor[j]));
            r = std::max(r, std::abs(lambda[j - 1] * qp.anchor[j]));
        }
        return r;
    }

    /// Stationarity certificate for the current surrogate: multipliers from
    /// the objective problem (feasibility problem when infeasible).
    template <class Sample>
    double stationarity_residual(const SurrogateState<Sample> &st, const ProblemSpec &spec, const Box &box,
                                 const SscaOptions &opt = {})
    {
        const auto qp = build_subproblem(st, spec, box);
        if (qp.m() == 0)
            return surrogate_kkt_residual(qp, Vec(0));
        const auto o = solve_objective_qp(qp, opt.dual);
        if (o.converged)
            return surrogate_kkt_residual(qp, o.lambda);
        const auto f = solve_feasibility_qp(qp, opt.dual);
        return surrogate_kkt_residual(qp, f.lambda);
    }

    // ---------------------------------------------------------------------
    // Sample average approximation baseline.

    struct SaaOptions
    {
        int max_iterations = 200;
        double tolerance = 1e-5; // on ||xbar - x||
    };

    template <class Sample>
    struct SaaResult
    {
        SurrogateState<Sample> state;
        Trajectory trajectory;
        bool converged = false;
    };

    /// Deterministic SCA on the fixed sample average: full-batch rates and
    /// Jacobian at every iteration, no gradient memory (rho = 1).
    template <RateModel Model>
    SaaResult<typename Model::Sample> run_saa(const Model &model, const ProblemSpec &spec, const Box &box,
                                              const StepSchedule &sched, const SscaOptions &opt, const Vec &x0,
                                              const std::vector<typename Model::Sample> &samples,
                                              const SaaOptions &saa = {})
    {
        if (samples.empty())
            throw ConfigError("run_saa: need at least one sample");
        SaaResult<typename Model::Sample> res{init_state(model, spec, box, x0, opt), {}, false};
        auto &st = res.state;
        for (int it = 0; it < saa.max_iterations; ++it)
        {
            const auto t0 = std::chrono::steady_clock::now();
            TrajectoryRecord rec;
            rec.iter = st.l;
            rec.step_rho = 1.0;
            rec.step_gamma = sched.gamma(st.l);

            st.r_hat = detail::mean_rates(model, st.x, samples);
            Mat J = Mat::Zero(spec.n(), model.num_users());
            for (const auto &H : samples)
                J += model.jacobian(st.x, H);
            J /= static_cast<double>(samples.size());
            st.u = surrogate_gradients(spec, J, st.r_hat, st.x);
            const auto qp = build_subproblem(st, spec, box);
            rec.objective_est = qp.anchor[0];
            rec.max_constraint_est =
                spec.m() > 0 ? qp.anchor.tail(spec.m()).maxCoeff() : std::numeric_limits<double>::quiet_NaN();

            const auto sol = solve_surrogate(qp, st, opt);
            rec.kind = sol.kind;
            rec.nu = sol.nu;
            bool done = false;
            if (sol.kind == UpdateKind::Skipped)
            {
                if (++st.consecutive_skips >= opt.max_consecutive_skips)
                    throw SolverError("run_saa: surrogate problem failed repeatedly");
            }
            else
            {
                st.consecutive_skips = 0;
                rec.x_move_norm = (sol.x_bar - st.x).norm();
                st.x = box.project((1.0 - rec.step_gamma) * st.x + rec.step_gamma * sol.x_bar);
                done = rec.x_move_norm <= saa.tolerance;
            }
            ++st.l;
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            res.trajectory.push_back(rec);
            if (done)
            {
                res.converged = true;
                break;
            }
        }
        return res;
    }

} // namespace thp

#endif
