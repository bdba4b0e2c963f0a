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

#ifndef THP_GRADIENTS_HPP
#define THP_GRADIENTS_HPP

#include "thp/box.hpp"
#include "thp/precoding.hpp"

#include <cmath>
#include <functional>

namespace thp
{
    // Jacobian of the instantaneous rate vector, n x K, rows laid out as
    // [d/dphi; d/dp; d/dalpha; d/dbeta]. The beta rows are identically zero.
    struct RateJacobian
    {
        Mat J;
        Vec rate;
        VariableLayout layout;
    };

    // Quantities shared by every user's gradient for one (x, H) pair.
    //
    // With c = I - alpha*B (so h_k^H gbar_i = c_ki), n_i = ||gbar_i||^2 and
    // Lambda_i = n_i^-e, the per-pair gain is q_ki = |c_ki|^2 n_i^-e. All
    // derivatives are pushed through T = HF (HF)^H and V = HF F^H F (HF)^H,
    // then pulled back to F by Y = (Q + Q^H) F.
    struct JacobianWorkspace
    {
        CMat F;
        PrecoderPair pair;
        RateResult rates;
        CMat C;       // I - alpha B
        CMat N;       // B V B, Gram matrix of gbar
        CMat FhF;     // F^H F
        CMat dBda;    // alpha B^2 - B, derivative of C w.r.t. alpha
        Vec BN_re;    // Re[B N]_ii
        double e = 1.0;

        JacobianWorkspace(const ThpVariable &x, const CMat &H, const RfStructure &st, const SystemDims &dims,
                          Normalization norm)
        {
            F = effective_rf_precoder(x.phi, st, dims);
            pair = rzf_baseband(H, F, x.alpha, norm);
            rates = instantaneous_rate(H, pair, x.p);
            const Eigen::Index K = H.rows();
            const CMat &B = pair.Breg;
            C = CMat::Identity(K, K) - x.alpha * B;
            FhF = F.adjoint() * F;
            const CMat V = pair.HF * FhF * pair.HF.adjoint();
            N = B * V * B;
            dBda = x.alpha * B * B - B;
            BN_re = (B * N).diagonal().real();
            e = norm == Normalization::UnitColumn ? 1.0 : 0.5;
        }
    };

    namespace detail
    {
        // Pullback of user k's rate gradient onto F, plus d r_k / d alpha.
        struct UserPullback
        {
            CMat Y;
            double dalpha = 0.0;
        };

        inline UserPullback pullback_user(const JacobianWorkspace &ws, const CMat &H, const Vec &p, Eigen::Index k)
        {
            const Eigen::Index K = H.rows();
            const CMat &B = ws.pair.Breg;
            const double alpha = ws.pair.alpha;
            const double Gk = ws.rates.gamma[k], Gmk = ws.rates.gamma_minus[k];

            CMat PT = CMat::Zero(K, K), PV = CMat::Zero(K, K);
            double da = 0.0;
            for (Eigen::Index i = 0; i < K; ++i)
            {
                const double w = p[i] / Gk - (i != k ? p[i] / Gmk : 0.0);
                if (w == 0.0)
                    continue;
                const cplx c = ws.C(k, i);
                const double c2 = std::norm(c);
                const double n = ws.pair.col_energy[i];
                const double ne = std::pow(n, -ws.e);
                const double dn_coef = ws.e * c2 * ne / n; // e |c|^2 n^(-e-1)

                // d|c_ki|^2 = 2 Re(conj(c) alpha [B dT B]_ki) + 2 Re(conj(c) dBda_ki) dalpha
                PT.noalias() += (w * ne * 2.0 * alpha * std::conj(c)) * (B.col(i) * B.row(k));
                da += w * ne * 2.0 * std::real(std::conj(c) * ws.dBda(k, i));

                // dn_i = -tr((N e_i e_i^T B + B e_i e_i^T N) dT) + tr(B e_i e_i^T B dV) - 2 Re[BN]_ii dalpha
                PT.noalias() += (w * dn_coef) * (ws.N.col(i) * B.row(i) + B.col(i) * ws.N.row(i));
                PV.noalias() -= (w * dn_coef) * (B.col(i) * B.row(i));
                da += w * dn_coef * 2.0 * ws.BN_re[i];
            }

            const CMat ST = PT + PT.adjoint();
            const CMat SV = PV + PV.adjoint();
            const CMat &HF = ws.pair.HF;
            UserPullback out;
            out.Y = H.adjoint() * (ST * HF + SV * (HF * ws.FhF)) + ws.F * (HF.adjoint() * SV * HF);
            out.dalpha = da;
            return out;
        }

        inline void fill_power_alpha_rows(Mat &J, const JacobianWorkspace &ws, const VariableLayout &L,
                                          Eigen::Index k, double dalpha)
        {
            const Eigen::Index K = L.K;
            for (Eigen::Index j = 0; j < K; ++j)
            {
                const double q = ws.rates.gain(k, j);
                J(L.p_offset() + j, k) = q / ws.rates.gamma[k] - (j != k ? q / ws.rates.gamma_minus[k] : 0.0);
            }
            J(L.alpha_index(), k) = dalpha;
        }

        inline void check_structure(const RfStructure &st, Connectivity c, RfMethod m, const char *who)
        {
            if (st.connectivity != c || st.method != m)
                throw std::invalid_argument(std::string(who) + ": structure mismatch (got " + st.tag() + ")");
        }

        inline VariableLayout check_layout(const ThpVariable &x, const RfStructure &st, const SystemDims &dims,
                                           const CMat &H)
        {
            const auto L = x.layout();
            require_dims(L.n_phi == rf_param_count(st, dims), "jacobian: phi length mismatch");
            require_dims(L.K == dims.K && H.rows() == dims.K && H.cols() == dims.M,
                         "jacobian: channel/power dimensions mismatch");
            return L;
        }
    } // namespace detail

    /// Analytic Jacobian for DPS precoders (fully or partially connected).
    /// dF_ab / dtheta_ab = j F_ab, so dr_k/dtheta_ab = Im(Y_ab conj(F_ab)).
    inline RateJacobian jacobian_dps(const ThpVariable &x, const CMat &H, const RfStructure &st,
                                     const SystemDims &dims, Normalization norm = Normalization::UnitColumn)
    {
        if (!st.dps())
            throw std::invalid_argument("jacobian_dps: structure mismatch (got " + st.tag() + ")");
        const auto L = detail::check_layout(x, st, dims, H);
        JacobianWorkspace ws(x, H, st, dims, norm);
        RateJacobian out{Mat::Zero(L.size(), L.K), ws.rates.rate, L};
        const int M = dims.M, S = dims.S, Mb = M / S;
        for (Eigen::Index k = 0; k < L.K; ++k)
        {
            const auto pb = detail::pullback_user(ws, H, x.p, k);
            if (st.fully())
            {
                for (int j = 0; j < S; ++j)
                    for (int i = 0; i < M; ++i)
                        out.J(j * M + i, k) = std::imag(pb.Y(i, j) * std::conj(ws.F(i, j)));
            }
            else
            {
                for (int j = 0; j < S; ++j)
                    for (int i = 0; i < Mb; ++i)
                    {
                        const int row = j * Mb + i;
                        out.J(row, k) = std::imag(pb.Y(row, j) * std::conj(ws.F(row, j)));
                    }
            }
            detail::fill_power_alpha_rows(out.J, ws, L, k, pb.dalpha);
        }
        return out;
    }

    inline RateJacobian jacobian_dps_full(const ThpVariable &x, const CMat &H, const RfStructure &st,
                                          const SystemDims &dims, Normalization norm = Normalization::UnitColumn)
    {
        detail::check_structure(st, Connectivity::FullyConnected, RfMethod::Dps, "jacobian_dps_full");
        return jacobian_dps(x, H, st, dims, norm);
    }

    /// Partially-connected DPS: F depends on theta only through its on-block
    /// entries, so the gradient is the fully-connected pullback read on the mask.
    inline RateJacobian jacobian_dps_partial(const ThpVariable &x, const CMat &H, const RfStructure &st,
                                             const SystemDims &dims, Normalization norm = Normalization::UnitColumn)
    {
        detail::check_structure(st, Connectivity::PartiallyConnected, RfMethod::Dps, "jacobian_dps_partial");
        return jacobian_dps(x, H, st, dims, norm);
    }

    /// Fully-connected codebook with relaxed d: F = C Diag(d), so
    /// dr_k/dd_i = Re sum_a conj(Y_ai) C_ai.
    inline RateJacobian jacobian_codebook_full(const ThpVariable &x, const CMat &H, const RfStructure &st,
                                               const SystemDims &dims, Normalization norm = Normalization::UnitColumn)
    {
        detail::check_structure(st, Connectivity::FullyConnected, RfMethod::Codebook, "jacobian_codebook_full");
        const auto L = detail::check_layout(x, st, dims, H);
        JacobianWorkspace ws(x, H, st, dims, norm);
        RateJacobian out{Mat::Zero(L.size(), L.K), ws.rates.rate, L};
        const CMat &C = st.codebook[0];
        for (Eigen::Index k = 0; k < L.K; ++k)
        {
            const auto pb = detail::pullback_user(ws, H, x.p, k);
            out.J.col(k).head(dims.N) = (pb.Y.conjugate().cwiseProduct(C)).colwise().sum().real().transpose();
            detail::fill_power_alpha_rows(out.J, ws, L, k, pb.dalpha);
        }
        return out;
    }

    // ---------------------------------------------------------------------
    // Finite-difference oracle.

    /// Central-difference Jacobian of an arbitrary map f: R^n -> R^K, returned
    /// as n x K. Near a box edge the difference becomes one-sided.
    template <class Fn>
    Mat central_difference(Fn &&f, const Vec &x, double step, const Box *box = nullptr,
                           Eigen::Index rows = -1)
    {
        if (!(step > 0.0))
            throw DomainError("central_difference: step must be positive");
        const Eigen::Index n = rows < 0 ? x.size() : rows;
        const Vec f0 = f(x);
        Mat J(x.size(), f0.size());
        J.setZero();
        Vec xp = x, xm = x;
        for (Eigen::Index i = 0; i < n; ++i)
        {
            double hp = step, hm = step;
            if (box)
            {
                if (x[i] + step > box->upper[i])
                    hp = 0.0;
                if (x[i] - step < box->lower[i])
                    hm = 0.0;
                if (hp == 0.0 && hm == 0.0)
                    continue;
            }
            xp[i] = x[i] + hp;
            xm[i] = x[i] - hm;
            const Vec fp = hp > 0.0 ? Vec(f(xp)) : f0;
            const Vec fm = hm > 0.0 ? Vec(f(xm)) : f0;
            J.row(i) = ((fp - fm) / (hp + hm)).transpose();
            xp[i] = x[i];
            xm[i] = x[i];
        }
        return J;
    }

    /// Finite-difference rate Jacobian, rerunning the full F -> RZF -> rate
    /// pipeline for every perturbation. Beta rows stay zero.
    inline RateJacobian finite_diff_jacobian(const ThpVariable &x, const CMat &H, const RfStructure &st,
                                             const SystemDims &dims, double step = 1e-6, const Box *box = nullptr,
                                             Normalization norm = Normalization::UnitColumn)
    {
        const auto L = detail::check_layout(x, st, dims, H);
        auto f = [&](const Vec &flat) { return rates_at(ThpVariable::unpack(flat, L), H, st, dims, norm); };
        const Vec flat = x.pack();
        RateJacobian out;
        out.layout = L;
        out.rate = f(flat);
        out.J = central_difference(f, flat, step, box, L.beta_offset());
        return out;
    }

    /// Dispatch on structure. The partially-connected codebook has no analytic
    /// path and goes through finite differences.
    inline RateJacobian rate_jacobian(const ThpVariable &x, const CMat &H, const RfStructure &st,
                                      const SystemDims &dims, Normalization norm = Normalization::UnitColumn,
                                      const Box *box = nullptr)
    {
        if (st.dps())
            return jacobian_dps(x, H, st, dims, norm);
        if (st.fully())
            return jacobian_codebook_full(x, H, st, dims, norm);
        return finite_diff_jacobian(x, H, st, dims, 1e-6, box, norm);
    }

} // namespace thp

#endif
