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

#ifndef THP_HARNESS_CONFIG_HPP
#define THP_HARNESS_CONFIG_HPP

// Experiment configuration: flat `key = value` text with optional
// `[section]` headers, so `[channel]` followed by `M = 16` and a top-level
// `channel.M = 16` are the same key. `#` starts a comment. Lists are
// comma separated, optionally in brackets.

#include "thp/precoding.hpp"
#include "thp/types.hpp"

#include <cctype>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace thp::harness
{
    struct ExperimentConfig
    {
        std::uint64_t seed = 1;

        // channel
        int M = 16, S = 4, K = 2, N = 0;
        int num_paths = 6;
        double angle_spread_deg = 10.0;
        double gain_db_low = -10.0, gain_db_high = 10.0;
        std::vector<double> user_gains; // linear, optional

        // structure
        Connectivity connectivity = Connectivity::FullyConnected;
        RfMethod method = RfMethod::Dps;
        std::optional<int> phase_bits = 3;
        Normalization normalization = Normalization::UnitColumn;

        // problem
        std::string problem = "sum";
        double power_budget = 10.0;
        double pfs_eps = 0.01;
        std::vector<double> target_bps = {0.5};
        std::vector<double> weights = {1.0};
        double l0_eps = 0.01;
        bool sparse_constraint = true;
        std::optional<double> p_max;
        double alpha_min = 1e-6, alpha_max = 1e3, beta_max = 50.0;
        double phase_limit = 8.0 * pi;
        double d_min = 1e-3;

        // schedule
        double rho_scale = 1.0, rho_exponent = 0.6;
        double gamma_scale = 2.0, gamma_exponent = 0.9;
        std::vector<double> tau = {1.0};

        // solver
        std::string rate_average = "exact";
        int sample_cap = 2000;
        double feasibility_tol = 1e-9;
        double dual_tol = 1e-7;
        int dual_max_iter = 5000;
        std::string dual_method = "newton";

        // run
        long frames = 200;
        long collection_frames = 200;
        int saa_iterations = 200;
        double saa_tol = 1e-5;
        int eval_samples = 1000;
        int slots_per_frame = 10;

        // output
        bool wall_clock = false;
        bool dump_channels = false;

        int effective_N() const
        {
            if (N > 0)
                return N;
            return connectivity == Connectivity::FullyConnected ? 2 * M : 2 * M / S;
        }
        void validate() const;
    };

    struct KeySpec
    {
        std::string key;
        std::string default_value;
        std::string description;
        std::function<void(ExperimentConfig &, const std::string &)> set;
    };

    namespace detail
    {
        inline std::string trim(const std::string &s)
        {
            const auto b = s.find_first_not_of(" \t\r\n");
            if (b == std::string::npos)
                return {};
            const auto e = s.find_last_not_of(" \t\r\n");
            return s.substr(b, e - b + 1);
        }

        inline std::string unquote(std::string s)
        {
            s = trim(s);
            if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
                return s.substr(1, s.size() - 2);
            return s;
        }

        inline double to_double(const std::string &v)
        {
            std::size_t pos = 0;
            double d = 0.0;
            try
            {
                d = std::stod(v, &pos);
            }
            catch (const std::exception &)
            {
                throw ConfigError("expected a number, got '" + v + "'");
            }
            if (trim(v.substr(pos)).size() > 0)
                throw ConfigError("expected a number, got '" + v + "'");
            return d;
        }

        inline long to_long(const std::string &v)
        {
            const double d = to_double(v);
            if (d != static_cast<double>(static_cast<long>(d)))
                throw ConfigError("expected an integer, got '" + v + "'");
            return static_cast<long>(d);
        }

        inline std::uint64_t to_u64(const std::string &v)
        {
            std::size_t pos = 0;
            std::uint64_t u = 0;
            try
            {
                if (!v.empty() && v.front() == '-')
                    throw std::invalid_argument("negative");
                u = std::stoull(v, &pos);
            }
            catch (const std::exception &)
            {
                throw ConfigError("expected an unsigned integer, got '" + v + "'");
            }
            if (pos != v.size())
                throw ConfigError("expected an unsigned integer, got '" + v + "'");
            return u;
        }

        inline bool to_bool(const std::string &v)
        {
            if (v == "true" || v == "1" || v == "yes" || v == "on")
                return true;
            if (v == "false" || v == "0" || v == "no" || v == "off")
                return false;
            throw ConfigError("expected true or false, got '" + v + "'");
        }

        inline std::vector<double> to_list(std::string v)
        {
            v = trim(v);
            if (!v.empty() && v.front() == '[')
            {
                if (v.back() != ']')
                    throw ConfigError("unterminated list '" + v + "'");
                v = v.substr(1, v.size() - 2);
            }
            std::vector<double> out;
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ','))
            {
                item = trim(item);
                if (item.empty())
                    throw ConfigError("empty list element");
                out.push_back(to_double(item));
            }
            if (out.empty())
                throw ConfigError("empty list");
            return out;
        }

        inline std::string choice(const std::string &v, std::initializer_list<const char *> allowed)
        {
            for (const char *a : allowed)
                if (v == a)
                    return v;
            std::string msg = "expected one of";
            for (const char *a : allowed)
                msg += std::string(" ") + a;
            throw ConfigError(msg + ", got '" + v + "'");
        }
    } // namespace detail

    /// Every recognised key with its default and meaning. Also drives the
    /// generated configuration reference.
    inline const std::vector<KeySpec> &config_keys()
    {
        using namespace detail;
        using C = ExperimentConfig;
        static const std::vector<KeySpec> keys = {
            {"seed", "1", "Master seed; every random stream derives from it.",
             [](C &c, const std::string &v) { c.seed = to_u64(v); }},

            {"channel.M", "16", "Transmit antennas.", [](C &c, const std::string &v) { c.M = static_cast<int>(to_long(v)); }},
            {"channel.S", "4", "RF chains.", [](C &c, const std::string &v) { c.S = static_cast<int>(to_long(v)); }},
            {"channel.K", "2", "Single-antenna users.", [](C &c, const std::string &v) { c.K = static_cast<int>(to_long(v)); }},
            {"channel.N", "0", "Codebook size per block; 0 means 2M (full) or 2M/S (partial).",
             [](C &c, const std::string &v) { c.N = static_cast<int>(to_long(v)); }},
            {"channel.num_paths", "6", "Scattering paths per user.",
             [](C &c, const std::string &v) { c.num_paths = static_cast<int>(to_long(v)); }},
            {"channel.angle_spread_deg", "10", "Laplacian scale of path angle offsets, degrees.",
             [](C &c, const std::string &v) { c.angle_spread_deg = to_double(v); }},
            {"channel.gain_db_low", "-10", "Lower end of the uniform user gain range, dB.",
             [](C &c, const std::string &v) { c.gain_db_low = to_double(v); }},
            {"channel.gain_db_high", "10", "Upper end of the uniform user gain range, dB.",
             [](C &c, const std::string &v) { c.gain_db_high = to_double(v); }},
            {"channel.gains", "(drawn)", "Explicit linear user gains, K entries; overrides the dB range.",
             [](C &c, const std::string &v) { c.user_gains = to_list(v); }},

            {"structure.connectivity", "full", "RF network: full or partial.",
             [](C &c, const std::string &v) {
                 c.connectivity = choice(v, {"full", "partial"}) == "full" ? Connectivity::FullyConnected
                                                                            : Connectivity::PartiallyConnected;
             }},
            {"structure.method", "dps", "RF implementation: dps (phase shifters) or codebook (switches).",
             [](C &c, const std::string &v) {
                 c.method = choice(v, {"dps", "codebook"}) == "dps" ? RfMethod::Dps : RfMethod::Codebook;
             }},
            {"structure.phase_bits", "3", "Phase shifter resolution in bits; 0 keeps continuous phases.",
             [](C &c, const std::string &v) {
                 const long b = to_long(v);
                 c.phase_bits = b == 0 ? std::nullopt : std::optional<int>(static_cast<int>(b));
             }},
            {"structure.normalization", "unit", "Baseband column normalization: unit or literal.",
             [](C &c, const std::string &v) {
                 c.normalization = choice(v, {"unit", "literal"}) == "unit" ? Normalization::UnitColumn
                                                                            : Normalization::Literal;
             }},

            {"problem.kind", "sum", "sum, pfs, powermin or mwtm.",
             [](C &c, const std::string &v) { c.problem = choice(v, {"sum", "pfs", "powermin", "mwtm"}); }},
            {"problem.power_budget", "10", "Average power budget P (unit noise power).",
             [](C &c, const std::string &v) { c.power_budget = to_double(v); }},
            {"problem.pfs_eps", "0.01", "Offset inside the proportional-fairness logarithm.",
             [](C &c, const std::string &v) { c.pfs_eps = to_double(v); }},
            {"problem.target_bps", "0.5", "Power minimization rate targets in bps/Hz; one value or K values.",
             [](C &c, const std::string &v) { c.target_bps = to_list(v); }},
            {"problem.weights", "1", "Max-min weights; one value or K values.",
             [](C &c, const std::string &v) { c.weights = to_list(v); }},
            {"problem.l0_eps", "0.01", "Smoothing of the l0 surrogate on codebook selections.",
             [](C &c, const std::string &v) { c.l0_eps = to_double(v); }},
            {"problem.sparse_constraint", "true", "Attach the smooth l0 constraint for codebook structures.",
             [](C &c, const std::string &v) { c.sparse_constraint = to_bool(v); }},
            {"problem.p_max", "4P/K", "Per-user power cap of the box.",
             [](C &c, const std::string &v) { c.p_max = to_double(v); }},
            {"problem.alpha_min", "1e-6", "Lower bound of the RZF regularizer.",
             [](C &c, const std::string &v) { c.alpha_min = to_double(v); }},
            {"problem.alpha_max", "1000", "Upper bound of the RZF regularizer.",
             [](C &c, const std::string &v) { c.alpha_max = to_double(v); }},
            {"problem.beta_max", "50", "Upper bound of the max-min auxiliary variable, nats.",
             [](C &c, const std::string &v) { c.beta_max = to_double(v); }},
            {"problem.phase_limit", "8pi", "Phases are boxed to [-phase_limit, phase_limit].",
             [](C &c, const std::string &v) { c.phase_limit = to_double(v); }},

            {"problem.d_min", "1e-3", "Lower bound of codebook selection weights during optimization.",
             [](C &c, const std::string &v) { c.d_min = to_double(v); }},

            {"schedule.rho_scale", "1", "rho^l = min(1, rho_scale (1+l)^-rho_exponent).",
             [](C &c, const std::string &v) { c.rho_scale = to_double(v); }},
            {"schedule.rho_exponent", "0.6", "Decay exponent of rho.",
             [](C &c, const std::string &v) { c.rho_exponent = to_double(v); }},
            {"schedule.gamma_scale", "2", "gamma^l = min(1, gamma_scale (1+l)^-gamma_exponent).",
             [](C &c, const std::string &v) { c.gamma_scale = to_double(v); }},
            {"schedule.gamma_exponent", "0.9", "Decay exponent of gamma.",
             [](C &c, const std::string &v) { c.gamma_exponent = to_double(v); }},
            {"schedule.tau", "1", "Proximal weights tau_i; one value or m+1 values.",
             [](C &c, const std::string &v) { c.tau = to_list(v); }},

            {"solver.rate_average", "exact", "exact (all stored samples) or recursive.",
             [](C &c, const std::string &v) { c.rate_average = choice(v, {"exact", "recursive"}); }},
            {"solver.sample_cap", "2000", "Stored samples before the rate average slides.",
             [](C &c, const std::string &v) { c.sample_cap = static_cast<int>(to_long(v)); }},
            {"solver.feasibility_tol", "1e-9", "nu threshold for an objective update.",
             [](C &c, const std::string &v) { c.feasibility_tol = to_double(v); }},
            {"solver.dual_tol", "1e-7", "Scaled KKT tolerance of the dual QP solver.",
             [](C &c, const std::string &v) { c.dual_tol = to_double(v); }},
            {"solver.dual_max_iter", "5000", "Iteration cap of the dual QP solver.",
             [](C &c, const std::string &v) { c.dual_max_iter = static_cast<int>(to_long(v)); }},
            {"solver.dual_method", "newton", "newton (projected Newton) or subgradient.",
             [](C &c, const std::string &v) { c.dual_method = choice(v, {"newton", "subgradient"}); }},

            {"run.frames", "200", "Frames L of an SSCA run.", [](C &c, const std::string &v) { c.frames = to_long(v); }},
            {"run.collection_frames", "200", "Samples collected by the SAA baseline.",
             [](C &c, const std::string &v) { c.collection_frames = to_long(v); }},
            {"run.saa_iterations", "200", "Iteration cap of the SAA baseline.",
             [](C &c, const std::string &v) { c.saa_iterations = static_cast<int>(to_long(v)); }},
            {"run.saa_tol", "1e-5", "SAA stops once ||xbar - x|| falls below this.",
             [](C &c, const std::string &v) { c.saa_tol = to_double(v); }},
            {"run.eval_samples", "1000", "Held-out channel draws for Monte-Carlo evaluation (>= 100).",
             [](C &c, const std::string &v) { c.eval_samples = static_cast<int>(to_long(v)); }},
            {"run.slots_per_frame", "10", "Time slots per frame; recorded, not used by the optimizer.",
             [](C &c, const std::string &v) { c.slots_per_frame = static_cast<int>(to_long(v)); }},

            {"output.wall_clock", "false", "Write measured step times to trajectory.csv (breaks byte-identical reruns).",
             [](C &c, const std::string &v) { c.wall_clock = to_bool(v); }},
            {"output.dump_channels", "false", "Write the frame channels to channels.thpc.",
             [](C &c, const std::string &v) { c.dump_channels = to_bool(v); }},
        };
        return keys;
    }

    inline void ExperimentConfig::validate() const
    {
        auto bad = [](const std::string &m) { throw ConfigError(m); };
        if (M < 1 || S < 1 || K < 1)
            bad("channel.M, channel.S and channel.K must be positive");
        if (!(K <= S && S <= M))
            bad("need K <= S <= M");
        if (connectivity == Connectivity::PartiallyConnected && M % S != 0)
            bad("partial connectivity needs S to divide M");
        if (N < 0)
            bad("channel.N must be non-negative");
        if (method == RfMethod::Codebook && effective_N() < (connectivity == Connectivity::FullyConnected ? S : 1))
            bad("codebook too small for S RF chains");
        if (!user_gains.empty() && static_cast<int>(user_gains.size()) != K)
            bad("channel.gains needs K entries");
        if (phase_bits && (*phase_bits < 1 || *phase_bits > 16))
            bad("structure.phase_bits must be 0 or in [1, 16]");
        if (!(power_budget > 0.0))
            bad("problem.power_budget must be positive");
        if (target_bps.size() != 1 && static_cast<int>(target_bps.size()) != K)
            bad("problem.target_bps needs 1 or K values");
        if (weights.size() != 1 && static_cast<int>(weights.size()) != K)
            bad("problem.weights needs 1 or K values");
        if (!(alpha_min > 0.0 && alpha_min < alpha_max))
            bad("need 0 < problem.alpha_min < problem.alpha_max");
        if (p_max && !(*p_max > 0.0))
            bad("problem.p_max must be positive");
        if (!(beta_max > 0.0) || !(phase_limit >= 2.0 * pi))
            bad("problem.beta_max must be positive and problem.phase_limit at least 2pi");
        if (!(d_min >= 0.0 && d_min < 1.0))
            bad("problem.d_min must lie in [0, 1)");
        if (sample_cap < 1)
            bad("solver.sample_cap must be positive");
        if (!(dual_tol > 0.0) || dual_max_iter < 1)
            bad("solver.dual_tol and solver.dual_max_iter must be positive");
        if (frames < 1 || collection_frames < 1 || saa_iterations < 1)
            bad("run.frames, run.collection_frames and run.saa_iterations must be positive");
        if (eval_samples < 100)
            bad("run.eval_samples must be at least 100");
        if (slots_per_frame < 1)
            bad("run.slots_per_frame must be positive");
    }

    /// Parses config text; `origin` names the source in error messages,
    /// which read "origin:LINE: message".
    inline ExperimentConfig parse_config(const std::string &text, const std::string &origin = "<config>")
    {
        std::map<std::string, const KeySpec *> index;
        for (const auto &k : config_keys())
            index[k.key] = &k;

        ExperimentConfig cfg;
        std::map<std::string, int> seen;
        std::istringstream in(text);
        std::string raw, section;
        int line_no = 0;
        auto fail = [&](const std::string &msg) -> void {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + msg);
        };
        while (std::getline(in, raw))
        {
            ++line_no;
            std::string line = raw;
            bool quoted = false;
            for (std::size_t i = 0; i < line.size(); ++i)
            {
                if (line[i] == '"')
                    quoted = !quoted;
                if (line[i] == '#' && !quoted)
                {
                    line.resize(i);
                    break;
                }
            }
            line = detail::trim(line);
            if (line.empty())
                continue;
            if (line.front() == '[')
            {
                if (line.back() != ']')
                    fail("malformed section header");
                section = detail::trim(line.substr(1, line.size() - 2));
                if (section.empty())
                    fail("empty section name");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                fail("expected key = value");
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string value = detail::unquote(line.substr(eq + 1));
            if (key.empty())
                fail("missing key");
            if (value.empty())
                fail("missing value for '" + key + "'");
            const std::string full = section.empty() || key.find('.') != std::string::npos ? key : section + "." + key;
            const auto it = index.find(full);
            if (it == index.end())
                fail("unknown key '" + full + "'");
            if (const auto prev = seen.find(full); prev != seen.end())
                fail("duplicate key '" + full + "' (first set on line " + std::to_string(prev->second) + ")");
            seen[full] = line_no;
            try
            {
                it->second->set(cfg, value);
            }
            catch (const ConfigError &e)
            {
                fail(full + ": " + e.what());
            }
        }
        line_no = 0;
        try
        {
            cfg.validate();
        }
        catch (const ConfigError &e)
        {
            throw ConfigError(origin + ": " + e.what());
        }
        return cfg;
    }

    inline ExperimentConfig load_config(const std::string &path)
    {
        std::ifstream f(path);
        if (!f)
            throw ConfigError(path + ": cannot open config file");
        std::stringstream ss;
        ss << f.rdbuf();
        return parse_config(ss.str(), path);
    }

    /// Markdown table of every key, default and description.
    inline std::string config_reference_markdown()
    {
        std::ostringstream o;
        o << "# Configuration reference\n\n"
          << "Config files are plain `key = value` lines. A `[section]` header prefixes the keys below it, so\n"
          << "`[channel]` followed by `M = 16` is the same as `channel.M = 16`. `#` starts a comment; lists are\n"
          << "comma separated and may be wrapped in brackets. Unknown or duplicate keys are errors.\n\n"
          << "This page is generated by `thp_sim reference`.\n\n"
          << "| key | default | meaning |\n|---|---|---|\n";
        for (const auto &k : config_keys())
            o << "| `" << k.key << "` | `" << k.default_value << "` | " << k.description << " |\n";
        return o.str();
    }

} // namespace thp::harness

#endif
