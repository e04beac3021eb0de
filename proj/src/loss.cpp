// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ssep/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ssep {

namespace {

using Vec = Eigen::VectorXd;
using CVec = Eigen::Map<const Vec>;

CVec as_vec(const AudioClip& clip) {
    return CVec(clip.samples.data(), static_cast<long>(clip.samples.size()));
}

double cosine(double dot, double na2, double nb2) {
    if (na2 == 0.0 || nb2 == 0.0) return 0.0;
    return std::clamp(dot / std::sqrt(na2 * nb2), -1.0, 1.0);
}

// d cos(a, b) / d b for fixed a; zero when either norm vanishes
Vec cosine_grad_b(const Vec& a, const Vec& b, double dot, double na2, double nb2) {
    if (na2 == 0.0 || nb2 == 0.0) return Vec::Zero(b.size());
    const double denom = std::sqrt(na2 * nb2);
    return a / denom - (dot / (denom * nb2)) * b;
}

}  // namespace

double spectral_mse(const MagSpectrogram& est, const MagSpectrogram& ref) {
    if (est.data.rows() != ref.data.rows() || est.data.cols() != ref.data.cols()) {
        throw std::invalid_argument("spectral_mse: geometry mismatch");
    }
    return (est.data - ref.data).array().square().mean();
}

double weighted_sdr(const AudioClip& est, const AudioClip& ref, const AudioClip& mix,
                    Eigen::VectorXd* grad_est) {
    if (est.samples.size() != ref.samples.size() ||
        est.samples.size() != mix.samples.size()) {
        throw std::invalid_argument("weighted_sdr: length mismatch");
    }
    CVec e = as_vec(est), r = as_vec(ref), m = as_vec(mix);
    const Vec z = m - r;
    const Vec zhat = m - e;

    const double r2 = r.squaredNorm();
    const double z2 = z.squaredNorm();
    if (r2 + z2 == 0.0) throw std::invalid_argument("weighted_sdr: all-zero mixture");
    const double rho = r2 / (r2 + z2);

    const double e2 = e.squaredNorm();
    const double zhat2 = zhat.squaredNorm();
    const double dot_re = r.dot(e);
    const double dot_zz = z.dot(zhat);
    const double cos_ref = cosine(dot_re, r2, e2);
    const double cos_noise = cosine(dot_zz, z2, zhat2);

    if (grad_est) {
        Vec g = -rho * cosine_grad_b(r, Vec(e), dot_re, r2, e2);
        // zhat = mix - est, so d/d est flips the sign
        g += (1.0 - rho) * cosine_grad_b(z, zhat, dot_zz, z2, zhat2);
        *grad_est = std::move(g);
    }
    return -rho * cos_ref - (1.0 - rho) * cos_noise;
}

std::vector<std::vector<long>> combinations(long n_instruments) {
    if (n_instruments < 2) {
        throw std::invalid_argument("combinations: need at least 2 instruments");
    }
    std::vector<std::vector<long>> out;
    for (long size = 1; size < n_instruments; ++size) {
        std::vector<long> idx(size);
        for (long i = 0; i < size; ++i) idx[i] = i;
        while (true) {
            out.push_back(idx);
            long k = size - 1;
            while (k >= 0 && idx[k] == n_instruments - size + k) --k;
            if (k < 0) break;
            ++idx[k];
            for (long i = k + 1; i < size; ++i) idx[i] = idx[i - 1] + 1;
        }
    }
    return out;
}

LossBreakdown combination_loss(const std::vector<Mask>& masks,
                               const ComplexSpectrogram& mix_spec,
                               const AudioClip& mix,
                               const std::vector<AudioClip>& refs,
                               double lambda,
                               std::vector<Tensor2>* grad_masks) {
    const long J = static_cast<long>(masks.size());
    if (J < 2) throw std::invalid_argument("combination_loss: need at least 2 instruments");
    if (static_cast<long>(refs.size()) != J) {
        throw std::invalid_argument("combination_loss: one reference per mask required");
    }
    const long F = mix_spec.frames();
    const long B = mix_spec.bins();
    for (const auto& mask : masks) {
        if (mask.data.rows() != F || mask.data.cols() != B) {
            throw std::invalid_argument("combination_loss: mask geometry mismatch");
        }
    }
    for (const auto& ref : refs) {
        if (ref.samples.size() != mix.samples.size()) {
            throw std::invalid_argument("combination_loss: reference length mismatch");
        }
    }

    const Eigen::MatrixXd abs_x = mix_spec.data.cwiseAbs();
    // per-instrument pieces; subset sums follow by linearity of stft/istft
    std::vector<Eigen::MatrixXcd> ref_specs(J);
    std::vector<AudioClip> ests(J);
    for (long i = 0; i < J; ++i) {
        ref_specs[i] = stft(refs[i], mix_spec.window_size, mix_spec.hop_size).data;
        ests[i] = istft(apply_mask(mix_spec, masks[i]));
    }

    const auto subsets = combinations(J);
    const double n_sub = static_cast<double>(subsets.size());
    const long n_samples = static_cast<long>(mix.samples.size());

    std::vector<Eigen::VectorXd> g_est;
    if (grad_masks) {
        grad_masks->assign(J, Tensor2::Zero(F, B));
        g_est.assign(J, Eigen::VectorXd::Zero(n_samples));
    }

    LossBreakdown bd;
    bd.lambda = lambda;
    double total = 0.0;
    for (const auto& subset : subsets) {
        Tensor2 mask_s = Tensor2::Zero(F, B);
        Eigen::MatrixXcd ref_spec_s = Eigen::MatrixXcd::Zero(F, B);
        AudioClip est_s, ref_s;
        est_s.sample_rate = mix.sample_rate;
        ref_s.sample_rate = mix.sample_rate;
        est_s.samples.assign(n_samples, 0.0);
        ref_s.samples.assign(n_samples, 0.0);
        for (long i : subset) {
            mask_s += masks[i].data;
            ref_spec_s += ref_specs[i];
            for (long t = 0; t < n_samples; ++t) {
                est_s.samples[t] += ests[i].samples[t];
                ref_s.samples[t] += refs[i].samples[t];
            }
        }

        const Eigen::MatrixXd est_mag =
            (mix_spec.data.array() * mask_s.array()).cwiseAbs().matrix();
        const Eigen::MatrixXd ref_mag = ref_spec_s.cwiseAbs();
        CombinationTerm term;
        term.subset = subset;
        term.freq = (est_mag - ref_mag).array().square().mean();

        Eigen::VectorXd g_time;
        term.time = weighted_sdr(est_s, ref_s, mix, grad_masks ? &g_time : nullptr);
        total += (term.freq + lambda * term.time) / n_sub;
        bd.terms.push_back(std::move(term));

        if (grad_masks) {
            const Tensor2 dfreq =
                (2.0 / (static_cast<double>(F * B) * n_sub)) *
                ((est_mag - ref_mag).array() * abs_x.array()).matrix();
            for (long i : subset) {
                (*grad_masks)[i] += dfreq;
                g_est[i] += (lambda / n_sub) * g_time;
            }
        }
    }
    bd.total = total;

    if (grad_masks) {
        for (long i = 0; i < J; ++i) {
            const Eigen::MatrixXcd adj = istft_adjoint(mix_spec, g_est[i]);
            (*grad_masks)[i] +=
                (adj.array() * mix_spec.data.conjugate().array()).real().matrix();
        }
    }
    return bd;
}

}  // namespace ssep
