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

#ifndef THP_HARNESS_OUTPUTS_HPP
#define THP_HARNESS_OUTPUTS_HPP

#include "thp/harness/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

namespace thp::harness
{
    using json = nlohmann::json;

    inline const char *trajectory_header =
        "iter,kind,objective_est,max_constraint_est,nu,step_gamma,step_rho,x_move_norm,wall_ms";

    namespace detail
    {
        inline std::string num(double v)
        {
            if (std::isnan(v))
                return "nan";
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return buf;
        }

        inline std::vector<double> to_std(const Vec &v) { return {v.data(), v.data() + v.size()}; }

        inline Vec from_std(const std::vector<double> &v)
        {
            return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
        }
    } // namespace detail

    /// One row per iteration. Without `wall_clock` the timing column is 0,
    /// which keeps reruns byte-identical.
    inline void write_trajectory_csv(std::ostream &os, const Trajectory &t, bool wall_clock)
    {
        os << trajectory_header << '\n';
        for (const auto &r : t)
            os << r.iter << ',' << to_string(r.kind) << ',' << detail::num(r.objective_est) << ','
               << detail::num(r.max_constraint_est) << ',' << detail::num(r.nu) << ',' << detail::num(r.step_gamma)
               << ',' << detail::num(r.step_rho) << ',' << detail::num(r.x_move_norm) << ','
               << detail::num(wall_clock ? r.seconds * 1e3 : 0.0) << '\n';
    }

    inline const char *normalization_tag(Normalization n) { return n == Normalization::UnitColumn ? "unit" : "literal"; }

    inline json dims_json(const SystemDims &d) { return {{"M", d.M}, {"S", d.S}, {"K", d.K}, {"N", d.N}}; }

    /// Saved variable: structure tag, dimensions and flat arrays; phases (or
    /// selections) before and after the terminal projection.
    inline json variable_json(const Experiment &e, const ThpVariable &x, const ThpVariable &xp)
    {
        return {{"structure", e.structure.tag()},
                {"normalization", normalization_tag(e.cfg.normalization)},
                {"dims", dims_json(e.dims)},
                {"phase_bits", e.cfg.phase_bits ? json(*e.cfg.phase_bits) : json(nullptr)},
                {"phi", detail::to_std(x.phi)},
                {"phi_projected", detail::to_std(xp.phi)},
                {"p", detail::to_std(x.p)},
                {"alpha", x.alpha},
                {"beta", detail::to_std(x.beta)},
                {"seed", e.cfg.seed}};
    }

    /// Reads a variable saved by variable_json, either bare or under the
    /// "variable" key of a report. Checks it against the experiment.
    inline ThpVariable variable_from_json(const json &j_in, const Experiment &e, bool projected = false)
    {
        const json &j = j_in.contains("variable") ? j_in.at("variable") : j_in;
        try
        {
            if (j.at("structure").get<std::string>() != e.structure.tag())
                throw ConfigError("saved variable has structure '" + j.at("structure").get<std::string>() +
                                  "' but the config describes '" + e.structure.tag() + "'");
            const auto &d = j.at("dims");
            if (d.at("M").get<int>() != e.dims.M || d.at("S").get<int>() != e.dims.S ||
                d.at("K").get<int>() != e.dims.K || d.at("N").get<int>() != e.dims.N)
                throw ConfigError("saved variable dimensions do not match the config");
            ThpVariable x;
            x.phi = detail::from_std(j.at(projected ? "phi_projected" : "phi").get<std::vector<double>>());
            x.p = detail::from_std(j.at("p").get<std::vector<double>>());
            x.alpha = j.at("alpha").get<double>();
            x.beta = detail::from_std(j.at("beta").get<std::vector<double>>());
            const auto L = x.layout();
            if (L.n_phi != e.spec.layout.n_phi || L.K != e.spec.layout.K || L.n_beta != e.spec.layout.n_beta)
                throw ConfigError("saved variable layout does not match the problem");
            return x;
        }
        catch (const json::exception &ex)
        {
            throw ConfigError(std::string("malformed variable file: ") + ex.what());
        }
    }

    inline json assessment_json(const Assessment &a)
    {
        json c = json::array();
        for (Eigen::Index i = 0; i < a.constraints.size(); ++i)
            c.push_back({{"row", i + 1}, {"value", a.constraints[i]}, {"stderr", a.constraint_stderr[i]}});
        Vec bps = a.rates.mean / ln2;
        return {{"objective", a.objective},
                {"objective_stderr", a.objective_stderr},
                {"rates_nats", detail::to_std(a.rates.mean)},
                {"rates_stderr_nats", detail::to_std(a.rates.stderr_)},
                {"rates_bps", detail::to_std(bps)},
                {"sum_rate_bps", bps.sum()},
                {"min_rate_bps", bps.minCoeff()},
                {"total_power", a.total_power},
                {"constraints", c},
                {"max_constraint", a.constraints.size() ? a.constraints.maxCoeff() : 0.0},
                {"eval_samples", a.rates.samples}};
    }

    struct TimingSummary
    {
        double mean_ms = 0.0, median_ms = 0.0, max_ms = 0.0, total_s = 0.0;
    };

    inline TimingSummary timing_summary(const Trajectory &t)
    {
        TimingSummary s;
        if (t.empty())
            return s;
        std::vector<double> ms;
        for (const auto &r : t)
            ms.push_back(r.seconds * 1e3);
        s.total_s = std::accumulate(ms.begin(), ms.end(), 0.0) / 1e3;
        s.mean_ms = s.total_s * 1e3 / ms.size();
        s.max_ms = *std::max_element(ms.begin(), ms.end());
        std::nth_element(ms.begin(), ms.begin() + ms.size() / 2, ms.end());
        s.median_ms = ms[ms.size() / 2];
        return s;
    }

    inline json report_json(const Experiment &e, const RunOutput &out)
    {
        const auto tm = timing_summary(out.trajectory);
        long objective_updates = 0, skipped = 0;
        for (const auto &r : out.trajectory)
        {
            objective_updates += r.kind == UpdateKind::Objective;
            skipped += r.kind == UpdateKind::Skipped;
        }
        json delta = {{"objective", out.post.objective - out.pre.objective},
                      {"sum_rate_bps", (out.post.rates.mean.sum() - out.pre.rates.mean.sum()) / ln2},
                      {"max_constraint", (out.post.constraints.size() ? out.post.constraints.maxCoeff() : 0.0) -
                                             (out.pre.constraints.size() ? out.pre.constraints.maxCoeff() : 0.0)}};
        json r = {{"method", out.method},
                  {"problem", e.cfg.problem},
                  {"structure", e.structure.tag()},
                  {"dims", dims_json(e.dims)},
                  {"seed", e.cfg.seed},
                  {"iterations", out.trajectory.size()},
                  {"frames", e.cfg.frames},
                  {"slots_per_frame", e.cfg.slots_per_frame},
                  {"objective_updates", objective_updates},
                  {"skipped_steps", skipped},
                  {"final_nu", out.trajectory.empty() ? 0.0 : out.trajectory.back().nu},
                  {"stationarity_residual", out.stationarity},
                  {"rate_window_engaged_at", out.window_engaged_at},
                  {"pre_projection", assessment_json(out.pre)},
                  {"post_projection", assessment_json(out.post)},
                  {"projection_delta", delta},
                  {"timing", {{"mean_ms", tm.mean_ms}, {"median_ms", tm.median_ms}, {"max_ms", tm.max_ms},
                              {"total_s", tm.total_s}}},
                  {"variable", variable_json(e, out.x, out.x_projected)}};
        if (out.method == "saa")
        {
            r["saa_converged"] = out.converged;
            r["collection_frames"] = e.cfg.collection_frames;
        }
        return r;
    }

    inline void write_text(const std::string &path, const std::string &text)
    {
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw std::runtime_error("cannot write " + path);
        f << text;
    }

} // namespace thp::harness

#endif
