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

#ifndef THP_HARNESS_EXPERIMENT_HPP
#define THP_HARNESS_EXPERIMENT_HPP

#include "thp/channel_model.hpp"
#include "thp/harness/config.hpp"
#include "thp/problems.hpp"
#include "thp/rng.hpp"
#include "thp/ssca.hpp"

#include <algorithm>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace thp::harness
{
    // Everything a run needs, assembled once from the configuration.
    struct Experiment
    {
        ExperimentConfig cfg;
        SystemDims dims;
        RfStructure structure;
        ProblemSpec spec;
        Box box;
        HybridRateModel model;
        ChannelStatistics stats;
        StepSchedule schedule;
        SscaOptions options;
    };

    inline ProblemSpec make_problem(const ExperimentConfig &cfg, const RfStructure &st, const SystemDims &dims)
    {
        const int n_phi = rf_param_count(st, dims);
        const int K = dims.K;
        auto expand = [K](const std::vector<double> &v) {
            Vec out(K);
            for (int k = 0; k < K; ++k)
                out[k] = v.size() == 1 ? v[0] : v[k];
            return out;
        };
        const double p_max = cfg.p_max ? *cfg.p_max : 4.0 * cfg.power_budget / K;
        ProblemSpec spec;
        if (cfg.problem == "sum")
            spec = make_sum_throughput(cfg.power_budget, n_phi, K);
        else if (cfg.problem == "pfs")
            spec = make_pfs(cfg.power_budget, cfg.pfs_eps, n_phi, K);
        else if (cfg.problem == "powermin")
            spec = make_power_min(expand(cfg.target_bps) * ln2, n_phi, p_max);
        else if (cfg.problem == "mwtm")
            spec = make_mwtm(cfg.power_budget, expand(cfg.weights), n_phi);
        else
            throw ConfigError("unknown problem kind '" + cfg.problem + "'");
        spec.bounds.p_max = p_max;
        spec.bounds.alpha_min = cfg.alpha_min;
        spec.bounds.alpha_max = cfg.alpha_max;
        spec.bounds.beta_max = cfg.beta_max;
        spec.bounds.phase_limit = cfg.phase_limit;
        spec.bounds.d_min = cfg.d_min;
        if (!st.dps() && cfg.sparse_constraint)
            spec = attach_sparse_constraint(spec, st, dims, cfg.l0_eps);
        return spec;
    }

    inline Experiment make_experiment(const ExperimentConfig &cfg)
    {
        cfg.validate();
        Experiment e;
        e.cfg = cfg;
        e.dims = {cfg.M, cfg.S, cfg.K, cfg.method == RfMethod::Codebook ? cfg.effective_N() : 0};
        e.dims.validate(cfg.connectivity == Connectivity::PartiallyConnected);
        e.structure = cfg.method == RfMethod::Dps ? make_dps_structure(cfg.connectivity, cfg.phase_bits)
                                                  : make_codebook_structure(cfg.connectivity, e.dims);
        e.structure.validate(e.dims);
        e.spec = make_problem(cfg, e.structure, e.dims);
        e.box = e.spec.box(e.structure);
        e.model = HybridRateModel{e.dims, e.structure, e.spec.layout, e.box, cfg.normalization};

        ChannelConfig cc;
        cc.dims = e.dims;
        cc.num_paths = cfg.num_paths;
        cc.angle_spread_deg = cfg.angle_spread_deg;
        cc.gain_db_low = cfg.gain_db_low;
        cc.gain_db_high = cfg.gain_db_high;
        cc.per_user_gains = cfg.user_gains;
        cc.rng_seed = cfg.seed;
        Rng rng = make_rng(cfg.seed, Stream::Statistics);
        e.stats = draw_statistics(cc, rng);

        e.schedule = {cfg.rho_scale, cfg.rho_exponent, cfg.gamma_scale, cfg.gamma_exponent};
        e.schedule.validate(std::max<long>(cfg.frames, 1000));

        const int m = e.spec.m();
        if (cfg.tau.size() != 1 && static_cast<int>(cfg.tau.size()) != m + 1)
            throw ConfigError("schedule.tau needs 1 or " + std::to_string(m + 1) + " values for this problem");
        e.options.tau.resize(m + 1);
        for (int i = 0; i <= m; ++i)
            e.options.tau[i] = cfg.tau.size() == 1 ? cfg.tau[0] : cfg.tau[i];
        if ((e.options.tau.array() <= 0.0).any())
            throw ConfigError("schedule.tau must be positive");
        e.options.rate_average = cfg.rate_average == "exact" ? RateAverage::Exact : RateAverage::Recursive;
        e.options.sample_cap = static_cast<std::size_t>(cfg.sample_cap);
        e.options.feasibility_tolerance = cfg.feasibility_tol;
        e.options.dual.tolerance = cfg.dual_tol;
        e.options.dual.max_iterations = cfg.dual_max_iter;
        e.options.dual.method = cfg.dual_method == "newton" ? DualMethod::ProjectedNewton : DualMethod::Subgradient;
        return e;
    }

    /// x^0: phases uniform on [0, 2pi), selections S/N (full) or 1/N
    /// (per block), p = P/K (p_max/4 for power minimization), alpha = K,
    /// beta = 0.
    inline Vec initial_point(const Experiment &e)
    {
        const auto &L = e.spec.layout;
        Vec x = Vec::Zero(L.size());
        if (e.structure.dps())
        {
            Rng rng = make_rng(e.cfg.seed, Stream::Init);
            std::uniform_real_distribution<double> U(0.0, 2.0 * pi);
            for (int i = 0; i < L.n_phi; ++i)
                x[i] = U(rng);
        }
        else
        {
            const double d0 = e.structure.fully() ? static_cast<double>(e.dims.S) / e.dims.N : 1.0 / e.dims.N;
            x.segment(0, L.n_phi).setConstant(d0);
        }
        const double p0 = e.cfg.problem == "powermin" ? e.spec.bounds.p_max / 4.0 : e.cfg.power_budget / L.K;
        x.segment(L.p_offset(), L.K).setConstant(p0);
        x[L.alpha_index()] = std::clamp(static_cast<double>(L.K), e.spec.bounds.alpha_min, e.spec.bounds.alpha_max);
        return e.box.project(x);
    }

    /// Channel of frame l; the SSCA run and the SAA collection phase see the
    /// same sequence.
    inline CMat frame_channel(const Experiment &e, long l)
    {
        return sample_channel_at(e.stats, e.cfg.seed, Stream::Frames, l).H;
    }

    // ---------------------------------------------------------------------
    // Monte-Carlo evaluation.

    struct RateEstimate
    {
        Vec mean;   // K, nats
        Vec stderr_;
        Mat cov;    // sample covariance of per-sample rates
        int samples = 0;
    };

    /// Worker count from THP_THREADS; defaults to the hardware concurrency.
    inline int thread_count()
    {
        if (const char *env = std::getenv("THP_THREADS"))
        {
            const int n = std::atoi(env);
            if (n >= 1)
                return n;
        }
        return std::max(1u, std::thread::hardware_concurrency());
    }

    /// Mean and standard error of r_k(x; H) over fresh draws from the
    /// Evaluation stream. Per-sample values are computed in parallel and
    /// reduced in index order, so the result does not depend on the thread
    /// count.
    inline RateEstimate evaluate_average_rates(const ThpVariable &x, const ChannelStatistics &stats,
                                               const RfStructure &st, const SystemDims &dims,
                                               Normalization norm, int n_samples, std::uint64_t seed,
                                               int threads = 0)
    {
        if (n_samples < 2)
            throw ConfigError("evaluate_average_rates: need at least two samples");
        const int K = dims.K;
        const CMat F = effective_rf_precoder(x.phi, st, dims);
        Mat per(K, n_samples);
        auto work = [&](int begin, int end) {
            for (int j = begin; j < end; ++j)
            {
                const CMat H = sample_channel_at(stats, seed, Stream::Evaluation, j).H;
                per.col(j) = instantaneous_rate(H, rzf_baseband(H, F, x.alpha, norm), x.p).rate;
            }
        };
        const int nt = std::clamp(threads > 0 ? threads : thread_count(), 1, n_samples);
        if (nt == 1)
            work(0, n_samples);
        else
        {
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errors(nt);
            const int chunk = (n_samples + nt - 1) / nt;
            for (int t = 0; t < nt; ++t)
                pool.emplace_back([&, t] {
                    try
                    {
                        work(t * chunk, std::min(n_samples, (t + 1) * chunk));
                    }
                    catch (...)
                    {
                        errors[t] = std::current_exception();
                    }
                });
            for (auto &th : pool)
                th.join();
            for (auto &err : errors)
                if (err)
                    std::rethrow_exception(err);
        }
        RateEstimate out;
        out.samples = n_samples;
        out.mean = Vec::Zero(K);
        for (int j = 0; j < n_samples; ++j)
            out.mean += per.col(j);
        out.mean /= n_samples;
        out.cov = Mat::Zero(K, K);
        for (int j = 0; j < n_samples; ++j)
        {
            const Vec d = per.col(j) - out.mean;
            out.cov += d * d.transpose();
        }
        out.cov /= (n_samples - 1);
        out.stderr_ = (out.cov.diagonal() / n_samples).cwiseSqrt();
        return out;
    }

    // Problem functions evaluated at Monte-Carlo average rates.
    struct Assessment
    {
        RateEstimate rates;
        double objective = 0.0;
        double objective_stderr = 0.0; // delta method
        Vec constraints;               // h_i, i = 1..m
        Vec constraint_stderr;
        double total_power = 0.0;
    };

    inline Assessment assess(const Experiment &e, const ThpVariable &x, int threads = 0)
    {
        Assessment a;
        a.rates = evaluate_average_rates(x, e.stats, e.structure, e.dims, e.cfg.normalization, e.cfg.eval_samples,
                                         e.cfg.seed, threads);
        const Vec flat = x.pack();
        const Mat cov_mean = a.rates.cov / a.rates.samples;
        auto se = [&](int i) {
            const Vec g = e.spec.grad_h_r(i, a.rates.mean, flat);
            return std::sqrt(std::max(0.0, g.dot(cov_mean * g)));
        };
        a.objective = e.spec.h(0, a.rates.mean, flat);
        a.objective_stderr = se(0);
        a.constraints.resize(e.spec.m());
        a.constraint_stderr.resize(e.spec.m());
        for (int i = 1; i <= e.spec.m(); ++i)
        {
            a.constraints[i - 1] = e.spec.h(i, a.rates.mean, flat);
            a.constraint_stderr[i - 1] = se(i);
        }
        a.total_power = x.p.sum();
        return a;
    }

    // ---------------------------------------------------------------------
    // Runs.

    struct RunOutput
    {
        std::string method; // "ssca" or "saa"
        Trajectory trajectory;
        ThpVariable x;           // before the terminal projection
        ThpVariable x_projected; // deployable discrete precoder
        Assessment pre, post;
        double stationarity = 0.0;
        long window_engaged_at = -1;
        bool converged = false; // SAA only
    };

    namespace detail
    {
        template <class State>
        void finish_run(const Experiment &e, const State &st, RunOutput &out, int threads)
        {
            out.x = ThpVariable::unpack(st.x, e.spec.layout);
            out.x_projected = project_variable(out.x, e.structure, e.dims, e.cfg.phase_bits);
            out.pre = assess(e, out.x, threads);
            out.post = assess(e, out.x_projected, threads);
            out.stationarity = stationarity_residual(st, e.spec, e.box, e.options);
            out.window_engaged_at = st.window_engaged_at;
        }
    } // namespace detail

    inline RunOutput run_experiment(const Experiment &e, int threads = 0)
    {
        auto res = run_ssca(e.model, e.spec, e.box, e.schedule, e.options, initial_point(e), e.cfg.frames,
                            [&](long l) { return frame_channel(e, l); });
        RunOutput out;
        out.method = "ssca";
        out.trajectory = std::move(res.trajectory);
        detail::finish_run(e, res.state, out, threads);
        return out;
    }

    inline RunOutput run_saa_experiment(const Experiment &e, int threads = 0)
    {
        std::vector<CMat> samples;
        samples.reserve(e.cfg.collection_frames);
        for (long l = 0; l < e.cfg.collection_frames; ++l)
            samples.push_back(frame_channel(e, l));
        SaaOptions so;
        so.max_iterations = e.cfg.saa_iterations;
        so.tolerance = e.cfg.saa_tol;
        auto res = run_saa(e.model, e.spec, e.box, e.schedule, e.options, initial_point(e), samples, so);
        RunOutput out;
        out.method = "saa";
        out.trajectory = std::move(res.trajectory);
        out.converged = res.converged;
        detail::finish_run(e, res.state, out, threads);
        return out;
    }

} // namespace thp::harness

#endif
