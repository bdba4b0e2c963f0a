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

// thp_sim: command-line driver for the optimizer and its oracle suites.
//
//   thp_sim run       --config FILE [--seed N] [--out DIR]
//   thp_sim saa       --config FILE [--seed N] [--out DIR]
//   thp_sim eval      --config FILE --variable FILE [--projected] [--out DIR]
//   thp_sim gradcheck [--seed N] [--instances N]
//   thp_sim qpcheck   [--seed N] [--instances N]
//   thp_sim reference [--out FILE]
//
// Exit codes: 0 success, 1 oracle tolerance breached, 2 bad configuration
// or usage, 3 solver failure.

#include "thp/harness/outputs.hpp"
#include "thp/verification.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace thp;
using namespace thp::harness;

namespace
{
    struct Args
    {
        std::string config;
        std::optional<std::uint64_t> seed;
        std::string out = ".";
        std::string variable;
        bool projected = false;
        int instances = 0;
    };

    Experiment load_experiment(const Args &a)
    {
        auto cfg = load_config(a.config);
        if (a.seed)
            cfg.seed = *a.seed;
        return make_experiment(cfg);
    }

    void print_summary(const RunOutput &r)
    {
        std::cout << r.method << ": " << r.trajectory.size() << " iterations, objective "
                  << r.pre.objective << " +- " << r.pre.objective_stderr << " (projected " << r.post.objective
                  << "), max constraint "
                  << (r.pre.constraints.size() ? r.pre.constraints.maxCoeff() : 0.0) << ", sum rate "
                  << r.pre.rates.mean.sum() / ln2 << " bps/Hz\n";
    }

    int do_run(const Args &a, bool saa)
    {
        const auto e = load_experiment(a);
        fs::create_directories(a.out);
        const auto out = saa ? run_saa_experiment(e) : run_experiment(e);
        std::ostringstream csv;
        write_trajectory_csv(csv, out.trajectory, e.cfg.wall_clock);
        write_text((fs::path(a.out) / "trajectory.csv").string(), csv.str());
        write_text((fs::path(a.out) / "report.json").string(), report_json(e, out).dump(2) + "\n");
        write_text((fs::path(a.out) / "variable.json").string(),
                   variable_json(e, out.x, out.x_projected).dump(2) + "\n");
        if (e.cfg.dump_channels)
        {
            const long count = saa ? e.cfg.collection_frames : e.cfg.frames;
            std::vector<ChannelSample> frames;
            for (long l = 0; l < count; ++l)
                frames.push_back({frame_channel(e, l), l});
            write_channel_dump((fs::path(a.out) / "channels.thpc").string(), frames);
        }
        print_summary(out);
        return 0;
    }

    int do_eval(const Args &a)
    {
        const auto e = load_experiment(a);
        std::ifstream f(a.variable);
        if (!f)
            throw ConfigError(a.variable + ": cannot open variable file");
        json j;
        try
        {
            j = json::parse(f);
        }
        catch (const json::exception &ex)
        {
            throw ConfigError(a.variable + ": " + ex.what());
        }
        const auto x = variable_from_json(j, e, a.projected);
        const auto as = assess(e, x);
        const std::string text = assessment_json(as).dump(2) + "\n";
        std::cout << text;
        if (a.out != ".")
        {
            fs::create_directories(a.out);
            write_text((fs::path(a.out) / "eval.json").string(), text);
        }
        return 0;
    }

    int do_gradcheck(const Args &a)
    {
        const auto rep = run_grad_check(a.seed.value_or(1), a.instances > 0 ? a.instances : 100);
        for (const auto &en : rep.entries)
            std::cout << en.structure << ": " << en.instances << " instances, max rel. err " << en.max_rel_error
                      << "\n";
        const bool ok = rep.worst() <= 1e-4;
        std::cout << "gradcheck " << (ok ? "passed" : "FAILED") << " (worst " << rep.worst() << ", limit 1e-4, "
                  << rep.seconds << " s)\n";
        return ok ? 0 : 1;
    }

    int do_qpcheck(const Args &a)
    {
        const auto rep = run_qp_check(a.seed.value_or(1), a.instances > 0 ? a.instances : 50);
        for (const auto &m : rep.messages)
            std::cout << "  " << m << "\n";
        std::cout << "instances " << rep.instances << ", failures " << rep.failures << ", worst value error "
                  << rep.worst_value_error << ", worst scaled gap " << rep.worst_gap << ", worst kkt "
                  << rep.worst_kkt << "\n";
        const bool ok = rep.passed(1e-6);
        std::cout << "qpcheck " << (ok ? "passed" : "FAILED") << " (" << rep.seconds << " s)\n";
        return ok ? 0 : 1;
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Two-timescale hybrid precoding optimizer"};
    app.require_subcommand(1);
    Args a;

    auto add_common = [&](CLI::App *c, bool needs_config) {
        auto *opt = c->add_option("--config", a.config, "Experiment config file");
        if (needs_config)
            opt->required();
        c->add_option("--seed", a.seed, "Override the master seed");
        c->add_option("--out", a.out, "Output directory");
    };
    auto *run = app.add_subcommand("run", "Run the stochastic SCA optimizer");
    add_common(run, true);
    auto *saa = app.add_subcommand("saa", "Run the sample average approximation baseline");
    add_common(saa, true);
    auto *ev = app.add_subcommand("eval", "Evaluate a saved variable on held-out channels");
    add_common(ev, true);
    ev->add_option("--variable", a.variable, "variable.json or report.json")->required();
    ev->add_flag("--projected", a.projected, "Evaluate the projected (discrete) copy");
    auto *gc = app.add_subcommand("gradcheck", "Analytic Jacobian vs finite differences");
    gc->add_option("--seed", a.seed, "Seed");
    gc->add_option("--instances", a.instances, "Instances per structure (default 100)");
    auto *qc = app.add_subcommand("qpcheck", "Dual QP solver vs primal barrier oracle");
    qc->add_option("--seed", a.seed, "Seed");
    qc->add_option("--instances", a.instances, "Instances per mode (default 50)");
    std::string ref_out;
    auto *ref = app.add_subcommand("reference", "Print the configuration reference (Markdown)");
    ref->add_option("--out", ref_out, "Write to this file instead of stdout");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        app.exit(e);
        return 2;
    }

    try
    {
        if (*run)
            return do_run(a, false);
        if (*saa)
            return do_run(a, true);
        if (*ev)
            return do_eval(a);
        if (*gc)
            return do_gradcheck(a);
        if (*qc)
            return do_qpcheck(a);
        if (*ref)
        {
            if (ref_out.empty())
                std::cout << config_reference_markdown();
            else
                write_text(ref_out, config_reference_markdown());
            return 0;
        }
    }
    catch (const ConfigError &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    catch (const DimensionError &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
