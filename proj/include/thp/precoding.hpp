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

#ifndef THP_PRECODING_HPP
#define THP_PRECODING_HPP

#include "thp/channel_model.hpp"
#include "thp/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace thp
{
    enum class Connectivity
    {
        FullyConnected,
        PartiallyConnected
    };

    enum class RfMethod
    {
        Dps,
        Codebook
    };

    // Column normalization of the RZF precoder. UnitColumn makes every
    // ||F g_k|| = 1. Literal keeps the Diag(||gbar_k||^-1) weighting verbatim,
    // which leaves ||F g_k|| = ||gbar_k||^(1/2); kept for comparison runs only.
    enum class Normalization
    {
        UnitColumn,
        Literal
    };

    struct RfStructure
    {
        Connectivity connectivity = Connectivity::FullyConnected;
        RfMethod method = RfMethod::Dps;
        std::optional<int> phase_bits;   // Dps only
        std::vector<CMat> codebook;      // Codebook only: one M x N matrix, or S blocks of (M/S) x N

        bool fully() const { return connectivity == Connectivity::FullyConnected; }
        bool dps() const { return method == RfMethod::Dps; }

        std::string tag() const
        {
            std::string s = fully() ? "full" : "partial";
            return s + (dps() ? "-dps" : "-codebook");
        }

        void validate(const SystemDims &dims) const
        {
            dims.validate(!fully());
            if (dps())
            {
                if (!codebook.empty())
                    throw ConfigError("RfStructure: Dps structure must not carry a codebook");
                if (phase_bits && *phase_bits < 1)
                    throw ConfigError("RfStructure: phase_bits must be >= 1");
                return;
            }
            if (phase_bits)
                throw ConfigError("RfStructure: phase_bits only applies to Dps");
            if (dims.N < 1)
                throw ConfigError("RfStructure: codebook structure needs N >= 1");
            if (fully())
            {
                if (dims.N < dims.S)
                    throw ConfigError("RfStructure: fully-connected codebook needs N >= S");
                if (codebook.size() != 1 || codebook[0].rows() != dims.M || codebook[0].cols() != dims.N)
                    throw DimensionError("RfStructure: fully-connected codebook must be one M x N matrix");
            }
            else
            {
                if (static_cast<int>(codebook.size()) != dims.S)
                    throw DimensionError("RfStructure: partially-connected codebook needs S blocks");
                for (const auto &C : codebook)
                    if (C.rows() != dims.M / dims.S || C.cols() != dims.N)
                        throw DimensionError("RfStructure: codebook block must be (M/S) x N");
            }
        }
    };

    /// DFT codebook: N array-response columns on the sin-angle grid
    /// u_i = -1 + 2i/N, scaled to entry modulus 1/sqrt(rows).
    inline CMat dft_codebook(int rows, int N)
    {
        CMat C(rows, N);
        const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
        for (int i = 0; i < N; ++i)
        {
            const double u = -1.0 + 2.0 * i / N;
            for (int m = 0; m < rows; ++m)
                C(m, i) = std::polar(scale, pi * m * u);
        }
        return C;
    }

    inline RfStructure make_dps_structure(Connectivity c, std::optional<int> bits = 3)
    {
        RfStructure s;
        s.connectivity = c;
        s.method = RfMethod::Dps;
        s.phase_bits = bits;
        return s;
    }

    inline RfStructure make_codebook_structure(Connectivity c, const SystemDims &dims)
    {
        RfStructure s;
        s.connectivity = c;
        s.method = RfMethod::Codebook;
        if (c == Connectivity::FullyConnected)
            s.codebook.push_back(dft_codebook(dims.M, dims.N));
        else
            s.codebook.assign(dims.S, dft_codebook(dims.M / dims.S, dims.N));
        return s;
    }

    /// Length of the RF parameter phi for a structure.
    inline int rf_param_count(const RfStructure &st, const SystemDims &d)
    {
        if (st.dps())
            return st.fully() ? d.M * d.S : d.M;
        return st.fully() ? d.N : d.N * d.S;
    }

    // ---------------------------------------------------------------------
    // THP variable x = [phi; p; alpha; beta] and its flat layout.

    struct VariableLayout
    {
        int n_phi = 0;
        int K = 0;
        int n_beta = 0;

        int phi_offset() const { return 0; }
        int p_offset() const { return n_phi; }
        int alpha_index() const { return n_phi + K; }
        int beta_offset() const { return n_phi + K + 1; }
        int size() const { return n_phi + K + 1 + n_beta; }
    };

    struct ThpVariable
    {
        Vec phi;
        Vec p;
        double alpha = 1.0;
        Vec beta;

        VariableLayout layout() const
        {
            return {static_cast<int>(phi.size()), static_cast<int>(p.size()), static_cast<int>(beta.size())};
        }

        Vec pack() const
        {
            const auto L = layout();
            Vec x(L.size());
            x.segment(L.phi_offset(), L.n_phi) = phi;
            x.segment(L.p_offset(), L.K) = p;
            x[L.alpha_index()] = alpha;
            if (L.n_beta > 0)
                x.segment(L.beta_offset(), L.n_beta) = beta;
            return x;
        }

        static ThpVariable unpack(const Vec &x, const VariableLayout &L)
        {
            require_dims(x.size() == L.size(), "ThpVariable::unpack: length mismatch");
            ThpVariable v;
            v.phi = x.segment(L.phi_offset(), L.n_phi);
            v.p = x.segment(L.p_offset(), L.K);
            v.alpha = x[L.alpha_index()];
            v.beta = x.segment(L.beta_offset(), L.n_beta);
            return v;
        }
    };

    // ---------------------------------------------------------------------
    // RF precoder construction.

    namespace detail
    {
        inline void check_selection_domain(const Vec &d)
        {
            for (Eigen::Index i = 0; i < d.size(); ++i)
                if (!(d[i] >= 0.0 && d[i] <= 1.0))
                    throw DomainError("build_rf_precoder: selection entry outside [0,1]");
        }

        inline bool is_binary(const Vec &d)
        {
            return std::all_of(d.data(), d.data() + d.size(), [](double v) { return v == 0.0 || v == 1.0; });
        }
    } // namespace detail

    /// RF precoder in the form the optimizer differentiates through: for
    /// fully-connected codebooks this is always C * Diag(d) (M x N), even
    /// when d is binary.
    inline CMat effective_rf_precoder(const Vec &phi, const RfStructure &st, const SystemDims &dims)
    {
        require_dims(phi.size() == rf_param_count(st, dims), "build_rf_precoder: phi length mismatch");
        const int M = dims.M, S = dims.S;
        if (st.dps())
        {
            if (st.fully())
            {
                CMat F(M, S);
                const double s = 1.0 / std::sqrt(static_cast<double>(M));
                for (int j = 0; j < S; ++j)
                    for (int i = 0; i < M; ++i)
                        F(i, j) = std::polar(s, phi[j * M + i]); // column-major theta
                return F;
            }
            const int Mb = M / S;
            const double s = 1.0 / std::sqrt(static_cast<double>(Mb));
            CMat F = CMat::Zero(M, S);
            for (int j = 0; j < S; ++j)
                for (int i = 0; i < Mb; ++i)
                    F(j * Mb + i, j) = std::polar(s, phi[j * Mb + i]);
            return F;
        }

        detail::check_selection_domain(phi);
        if (st.fully())
            return st.codebook[0] * phi.asDiagonal();

        const int Mb = M / S, N = dims.N;
        CMat F = CMat::Zero(M, S);
        for (int j = 0; j < S; ++j)
            F.block(j * Mb, j, Mb, 1) = st.codebook[j] * phi.segment(j * N, N);
        return F;
    }

    /// Physical RF precoder. For a fully-connected codebook with binary d the
    /// S selected columns are materialized (M x S); otherwise identical to
    /// effective_rf_precoder. Both forms give the same F F^H.
    inline CMat build_rf_precoder(const Vec &phi, const RfStructure &st, const SystemDims &dims)
    {
        if (!st.dps() && st.fully())
        {
            require_dims(phi.size() == rf_param_count(st, dims), "build_rf_precoder: phi length mismatch");
            detail::check_selection_domain(phi);
            if (detail::is_binary(phi) && static_cast<int>(phi.sum()) == dims.S)
            {
                CMat F(dims.M, dims.S);
                int col = 0;
                for (Eigen::Index i = 0; i < phi.size(); ++i)
                    if (phi[i] == 1.0)
                        F.col(col++) = st.codebook[0].col(i);
                return F;
            }
        }
        return effective_rf_precoder(phi, st, dims);
    }

    // ---------------------------------------------------------------------
    // RZF baseband precoder.

    struct PrecoderPair
    {
        CMat F;    // M x S (or M x N for relaxed codebooks)
        CMat G;    // S x K
        CMat HF;   // K x S effective channel
        CMat Breg; // (H F F^H H^H + alpha I)^-1
        CMat Gbar; // F F^H H^H Breg, M x K
        Vec col_energy; // ||gbar_k||^2
        Vec lambda;     // diagonal of Lambda
        double alpha = 0.0;
        Normalization norm = Normalization::UnitColumn;
    };

    inline PrecoderPair rzf_baseband(const CMat &H, const CMat &F, double alpha,
                                     Normalization norm = Normalization::UnitColumn)
    {
        if (!(alpha > 0.0))
            throw DomainError("rzf_baseband: alpha must be positive");
        require_dims(H.cols() == F.rows(), "rzf_baseband: H and F are incompatible");
        const Eigen::Index K = H.rows();

        PrecoderPair out;
        out.F = F;
        out.alpha = alpha;
        out.norm = norm;
        out.HF = H * F;
        CMat T = out.HF * out.HF.adjoint();
        T.diagonal().array() += alpha;
        Eigen::LLT<CMat> llt(T);
        if (llt.info() != Eigen::Success)
            throw ConditioningError("rzf_baseband: regularized Gram matrix is not positive definite");
        out.Breg = llt.solve(CMat::Identity(K, K));
        const double resid = (T * out.Breg - CMat::Identity(K, K)).cwiseAbs().maxCoeff();
        if (!(resid <= 1e-8))
            throw ConditioningError("rzf_baseband: inversion residual " + std::to_string(resid) + " exceeds 1e-8");

        CMat HFhB = out.HF.adjoint() * out.Breg; // S x K
        out.Gbar = F * HFhB;
        out.col_energy = out.Gbar.colwise().squaredNorm().transpose();
        out.lambda.resize(K);
        for (Eigen::Index k = 0; k < K; ++k)
        {
            const double e = out.col_energy[k];
            if (!(e > 0.0) || !std::isfinite(e))
                throw ConditioningError("rzf_baseband: zero-energy precoding column");
            out.lambda[k] = norm == Normalization::UnitColumn ? 1.0 / e : 1.0 / std::sqrt(e);
        }
        out.G = HFhB * out.lambda.cwiseSqrt().asDiagonal();
        return out;
    }

    // ---------------------------------------------------------------------
    // Instantaneous rates (natural log).

    struct RateResult
    {
        Vec rate;          // r_k, nats per channel use
        Vec gamma;         // 1 + sum_i p_i |h_k^H F g_i|^2
        Vec gamma_minus;   // same sum without i = k
        Mat gain;          // |h_k^H F g_i|^2, K x K
    };

    inline RateResult instantaneous_rate(const CMat &H, const PrecoderPair &pair, const Vec &p)
    {
        const Eigen::Index K = H.rows();
        require_dims(p.size() == K, "instantaneous_rate: power vector length must be K");
        for (Eigen::Index k = 0; k < K; ++k)
            if (p[k] < 0.0)
                throw DomainError("instantaneous_rate: negative power");
        require_dims(pair.HF.rows() == K, "instantaneous_rate: precoder built for a different channel");
        RateResult r;
        const CMat E = pair.HF * pair.G; // pair.HF == H * F by construction
        r.gain = E.cwiseAbs2();
        r.rate.resize(K);
        r.gamma.resize(K);
        r.gamma_minus.resize(K);
        for (Eigen::Index k = 0; k < K; ++k)
        {
            double total = 1.0;
            for (Eigen::Index i = 0; i < K; ++i)
                total += p[i] * r.gain(k, i);
            r.gamma[k] = total;
            r.gamma_minus[k] = total - p[k] * r.gain(k, k);
            r.rate[k] = std::log1p(p[k] * r.gain(k, k) / r.gamma_minus[k]);
        }
        return r;
    }

    /// Full pipeline: x -> F -> RZF -> rates for one channel sample.
    inline Vec rates_at(const ThpVariable &x, const CMat &H, const RfStructure &st, const SystemDims &dims,
                        Normalization norm = Normalization::UnitColumn)
    {
        const CMat F = effective_rf_precoder(x.phi, st, dims);
        return instantaneous_rate(H, rzf_baseband(H, F, x.alpha, norm), x.p).rate;
    }

    // ---------------------------------------------------------------------
    // Discrete projections and the smooth l0 surrogate.

    /// Nearest B-bit phase under circular distance; ties go to the smaller
    /// grid value. Output lies in [0, 2*pi).
    inline Vec project_phases(const Vec &theta, int B)
    {
        if (B < 1)
            throw DomainError("project_phases: B must be >= 1");
        const long Q = 1L << B;
        const double step = 2.0 * pi / static_cast<double>(Q);
        constexpr double tie_tol = 1e-12;
        auto grid = [&](long k) { return 2.0 * pi * static_cast<double>(k) / static_cast<double>(Q); };
        auto circ = [](double a, double b) {
            double d = std::fmod(std::abs(a - b), 2.0 * pi);
            return std::min(d, 2.0 * pi - d);
        };

        Vec out(theta.size());
        for (Eigen::Index i = 0; i < theta.size(); ++i)
        {
            double t = std::fmod(theta[i], 2.0 * pi);
            if (t < 0.0)
                t += 2.0 * pi;
            const long lo = std::min(static_cast<long>(std::floor(t / step)), Q - 1);
            const long hi = (lo + 1) % Q;
            const double dlo = circ(t, grid(lo)), dhi = circ(t, grid(hi));
            long pick;
            if (std::abs(dlo - dhi) <= tie_tol)
                pick = std::min(lo, hi);
            else
                pick = dlo < dhi ? lo : hi;
            out[i] = grid(pick);
        }
        return out;
    }

    /// Binary vector with ones at the S largest entries (lower index wins ties).
    inline Vec project_selection(const Vec &d_star, int S)
    {
        if (S < 0 || S > d_star.size())
            throw DimensionError("project_selection: S exceeds vector length");
        std::vector<Eigen::Index> idx(d_star.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return d_star[a] > d_star[b]; });
        Vec out = Vec::Zero(d_star.size());
        for (int s = 0; s < S; ++s)
            out[idx[s]] = 1.0;
        return out;
    }

    /// Per-block one-hot selection for partially-connected codebooks.
    inline Vec project_selection_blocks(const Vec &d_star, int blocks, int N)
    {
        require_dims(d_star.size() == static_cast<Eigen::Index>(blocks) * N,
                     "project_selection_blocks: length must be blocks * N");
        Vec out(d_star.size());
        for (int s = 0; s < blocks; ++s)
            out.segment(s * N, N) = project_selection(d_star.segment(s * N, N), 1);
        return out;
    }

    struct SmoothL0
    {
        double value = 0.0;
        Vec gradient;
    };

    inline SmoothL0 smooth_l0(const Vec &d, double eps)
    {
        if (!(eps > 0.0))
            throw DomainError("smooth_l0: eps must be positive");
        const double denom = std::log1p(1.0 / eps);
        SmoothL0 out;
        out.gradient.resize(d.size());
        for (Eigen::Index i = 0; i < d.size(); ++i)
        {
            if (!(eps + d[i] > 0.0))
                throw DomainError("smooth_l0: entry below -eps");
            out.value += std::log1p(d[i] / eps) / denom;
            out.gradient[i] = 1.0 / ((eps + d[i]) * denom);
        }
        return out;
    }

    /// Terminal projection onto the discrete feasible set of the structure.
    inline ThpVariable project_variable(const ThpVariable &x, const RfStructure &st, const SystemDims &dims,
                                        std::optional<int> bits = std::nullopt)
    {
        ThpVariable out = x;
        if (st.dps())
        {
            const auto b = bits ? bits : st.phase_bits;
            if (b)
                out.phi = project_phases(x.phi, *b);
        }
        else if (st.fully())
            out.phi = project_selection(x.phi, dims.S);
        else
            out.phi = project_selection_blocks(x.phi, dims.S, dims.N);
        return out;
    }

} // namespace thp

#endif
