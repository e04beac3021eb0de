// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ssep/model.hpp"

#include <algorithm>
#include <set>

#include "ssep/util.hpp"

namespace ssep {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::baseline: return "baseline";
        case Variant::score_informed: return "score_informed";
        case Variant::score_only: return "score_only";
    }
    throw std::invalid_argument("variant_name: unknown variant");
}

Variant variant_from_name(const std::string& name) {
    if (name == "baseline") return Variant::baseline;
    if (name == "score_informed") return Variant::score_informed;
    if (name == "score_only") return Variant::score_only;
    throw DataError("unknown model variant '" + name + "'");
}

void ModelConfig::validate() const {
    if (instruments.empty()) throw DataError("model config: no instruments");
    std::set<std::string> seen;
    for (const auto& name : instruments) {
        if (name.empty()) throw DataError("model config: empty instrument name");
        if (!seen.insert(name).second) {
            throw DataError("model config: duplicate instrument '" + name + "'");
        }
    }
    if (n_bins <= 0 || hidden_size <= 0 || encoder_out <= 0) {
        throw DataError("model config: sizes must be positive");
    }
    if (variant == Variant::score_informed) {
        if (score_encoder_hidden <= 0) {
            throw DataError("model config: score encoder hidden size must be positive");
        }
        if (score_feature_size != 2 * score_encoder_hidden) {
            throw DataError(
                "model config: score_feature_size must equal 2 * score_encoder_hidden "
                "(the score encoder output is the bidirectional state concatenation)");
        }
    }
    if (variant == Variant::score_only && use_io_normalization) {
        throw DataError("model config: score_only removes the input/output normalizations");
    }
}

long ModelConfig::instrument_index(const std::string& name) const {
    for (std::size_t i = 0; i < instruments.size(); ++i) {
        if (instruments[i] == name) return static_cast<long>(i);
    }
    return -1;
}

long SeparationModel::branch_input_width() const {
    switch (config_.variant) {
        case Variant::baseline: return config_.n_bins;
        case Variant::score_informed: return config_.n_bins + config_.score_feature_size;
        case Variant::score_only: return kMidiPitches;
    }
    throw std::logic_error("unreachable");
}

SeparationModel SeparationModel::build(const ModelConfig& config, uint64_t seed) {
    config.validate();
    SeparationModel m;
    m.config_ = config;
    Rng rng(seed);

    const long J = static_cast<long>(config.instruments.size());
    const long in_w = m.branch_input_width();
    const long E = config.encoder_out;
    const long H = config.hidden_size;
    const long B = config.n_bins;

    m.branches_.resize(J);
    for (long i = 0; i < J; ++i) {
        Branch& br = m.branches_[i];
        br.enc_fc.init(in_w, E, rng);
        br.enc_bn.init(E);
        br.lstm.init(3, E, H, rng);
        br.dec_fc1.init(E + 2 * H, H, rng);
        br.dec_bn1.init(H);
        br.dec_fc2.init(H, B, rng);
        br.dec_bn2.init(B);
        if (config.use_io_normalization) {
            br.out_scale = Tensor2::Ones(1, B);
            br.out_shift = Tensor2::Zero(1, B);
            br.g_out_scale = Tensor2::Zero(1, B);
            br.g_out_shift = Tensor2::Zero(1, B);
        }
    }
    if (config.variant == Variant::score_informed) {
        m.score_encoders_.resize(J);
        for (long i = 0; i < J; ++i) {
            ScoreEncoder& se = m.score_encoders_[i];
            se.lstm.init(3, kMidiPitches, config.score_encoder_hidden, rng);
            se.bn.init(config.score_feature_size);
        }
    }
    m.input_mean_ = Tensor2::Zero(1, B);
    m.input_std_ = Tensor2::Ones(1, B);
    return m;
}

long SeparationModel::trainable_param_count(const ModelConfig& config) {
    config.validate();
    const long J = static_cast<long>(config.instruments.size());
    const long E = config.encoder_out;
    const long H = config.hidden_size;
    const long B = config.n_bins;
    long in_w = B;
    if (config.variant == Variant::score_informed) in_w = B + config.score_feature_size;
    if (config.variant == Variant::score_only) in_w = kMidiPitches;

    long per_branch = in_w * E + E;                        // encoder linear
    per_branch += 2 * E;                                   // encoder bn
    per_branch += BiLstm::param_count(3, E, H);
    per_branch += (E + 2 * H) * H + H;                     // decoder linear 1
    per_branch += 2 * H;                                   // decoder bn 1
    per_branch += H * B + B;                               // decoder linear 2
    per_branch += 2 * B;                                   // decoder bn 2
    if (config.use_io_normalization) per_branch += 2 * B;  // output affine

    long total = J * per_branch;
    if (config.variant == Variant::score_informed) {
        const long sh = config.score_encoder_hidden;
        total += J * (BiLstm::param_count(3, kMidiPitches, sh) + 2 * (2 * sh));
    }
    return total;
}

void SeparationModel::set_training(bool training) {
    training_ = training;
    for (auto& br : branches_) {
        br.enc_bn.training = training;
        br.dec_bn1.training = training;
        br.dec_bn2.training = training;
    }
    for (auto& se : score_encoders_) se.bn.training = training;
}

ParamSet SeparationModel::params() {
    ParamSet ps;
    for (std::size_t i = 0; i < branches_.size(); ++i) {
        Branch& br = branches_[i];
        const std::string base = "branch." + config_.instruments[i];
        br.enc_fc.collect(base + ".enc.fc", ps);
        br.enc_bn.collect(base + ".enc.bn", ps);
        br.lstm.collect(base + ".lstm", ps);
        br.dec_fc1.collect(base + ".dec.fc1", ps);
        br.dec_bn1.collect(base + ".dec.bn1", ps);
        br.dec_fc2.collect(base + ".dec.fc2", ps);
        br.dec_bn2.collect(base + ".dec.bn2", ps);
        if (config_.use_io_normalization) {
            ps.add(base + ".out.scale", &br.out_scale, &br.g_out_scale);
            ps.add(base + ".out.shift", &br.out_shift, &br.g_out_shift);
        }
    }
    for (std::size_t i = 0; i < score_encoders_.size(); ++i) {
        ScoreEncoder& se = score_encoders_[i];
        const std::string base = "score_enc." + config_.instruments[i];
        se.lstm.collect(base + ".lstm", ps);
        se.bn.collect(base + ".bn", ps);
    }
    if (config_.use_io_normalization) {
        ps.add_buffer("input.mean", &input_mean_);
        ps.add_buffer("input.std", &input_std_);
    }
    return ps;
}

void SeparationModel::set_input_stats(const Eigen::RowVectorXd& mean,
                                      const Eigen::RowVectorXd& std) {
    if (mean.size() != config_.n_bins || std.size() != config_.n_bins) {
        throw std::invalid_argument("set_input_stats: wrong bin count");
    }
    input_mean_.row(0) = mean;
    // floor the scale so near-silent bins cannot explode the features
    const double floor = 1e-4 * std::max(std.maxCoeff(), 1e-8);
    input_std_.row(0) = std.cwiseMax(floor);
}

Tensor2 SeparationModel::normalized_mix(const Tensor2& mag) const {
    if (!config_.use_io_normalization) return mag;
    return (mag.rowwise() - input_mean_.row(0)).array().rowwise() /
           input_std_.row(0).array();
}

Tensor2 SeparationModel::score_features(long idx, const Tensor2& roll, const Spans& spans) {
    ScoreEncoder& se = score_encoders_[idx];
    return se.act.forward(se.bn.forward(se.lstm.forward(roll, spans)));
}

Tensor2 SeparationModel::encode_score(const PianoRoll& roll, const std::string& instrument,
                                      const Spans& spans) {
    if (config_.variant != Variant::score_informed) {
        throw DataError("encode_score: only the score_informed variant has score encoders");
    }
    const long idx = config_.instrument_index(instrument);
    if (idx < 0) throw DataError("encode_score: unknown instrument '" + instrument + "'");
    if (roll.data.cols() != kMidiPitches) {
        throw std::invalid_argument("encode_score: roll width must be 128");
    }
    return score_features(idx, roll.data, spans);
}

std::vector<Mask> SeparationModel::forward(const MagSpectrogram* mix,
                                           const std::vector<PianoRoll>* rolls,
                                           const Spans& spans) {
    const long J = static_cast<long>(config_.instruments.size());
    const bool needs_mix = config_.variant != Variant::score_only;
    const bool needs_rolls = config_.variant != Variant::baseline;

    if (needs_mix && mix == nullptr) {
        throw DataError("forward: this variant needs the mix magnitude");
    }
    if (needs_rolls && rolls == nullptr) {
        throw DataError("forward: this variant needs per-instrument piano rolls");
    }
    long frames = -1;
    if (needs_mix) {
        if (mix->data.cols() != config_.n_bins) {
            throw std::invalid_argument("forward: mix bin count mismatch");
        }
        frames = mix->data.rows();
    }
    if (needs_rolls) {
        if (static_cast<long>(rolls->size()) != J) {
            throw std::invalid_argument("forward: need one roll per instrument");
        }
        for (const auto& roll : *rolls) {
            if (roll.data.cols() != kMidiPitches) {
                throw std::invalid_argument("forward: roll width must be 128");
            }
            if (frames < 0) frames = roll.data.rows();
            if (roll.data.rows() != frames) {
                throw std::invalid_argument("forward: inputs disagree on frame count");
            }
        }
    }

    spans_ = spans;
    branch_in_.assign(J, {});
    score_cols_ = config_.variant == Variant::score_informed ? config_.score_feature_size : 0;

    Tensor2 norm_mag;
    if (needs_mix) norm_mag = normalized_mix(mix->data);
    for (long i = 0; i < J; ++i) {
        switch (config_.variant) {
            case Variant::baseline:
                branch_in_[i] = norm_mag;
                break;
            case Variant::score_informed: {
                Tensor2 feat = score_features(i, (*rolls)[i].data, spans);
                branch_in_[i].resize(frames, config_.n_bins + score_cols_);
                branch_in_[i].leftCols(config_.n_bins) = norm_mag;
                branch_in_[i].rightCols(score_cols_) = feat;
                break;
            }
            case Variant::score_only:
                branch_in_[i] = (*rolls)[i].data;
                break;
        }
    }

    std::vector<Tensor2> enc_out(J);
    for (long i = 0; i < J; ++i) {
        Branch& br = branches_[i];
        enc_out[i] = br.enc_act.forward(br.enc_bn.forward(br.enc_fc.forward(branch_in_[i])));
    }
    Tensor2 avg_enc = enc_out[0];
    for (long i = 1; i < J; ++i) avg_enc += enc_out[i];
    avg_enc /= static_cast<double>(J);

    std::vector<Tensor2> lstm_out(J);
    for (long i = 0; i < J; ++i) lstm_out[i] = branches_[i].lstm.forward(avg_enc, spans);
    Tensor2 avg_lstm = lstm_out[0];
    for (long i = 1; i < J; ++i) avg_lstm += lstm_out[i];
    avg_lstm /= static_cast<double>(J);

    Tensor2 concat(frames, config_.encoder_out + 2 * config_.hidden_size);
    concat.leftCols(config_.encoder_out) = avg_enc;
    concat.rightCols(2 * config_.hidden_size) = avg_lstm;

    std::vector<Mask> masks(J);
    for (long i = 0; i < J; ++i) {
        Branch& br = branches_[i];
        Tensor2 d = br.dec_bn2.forward(br.dec_fc2.forward(
            br.dec_act1.forward(br.dec_bn1.forward(br.dec_fc1.forward(concat)))));
        br.pre_affine_ = d;
        if (config_.use_io_normalization) {
            d = (d.array().rowwise() * br.out_scale.row(0).array()).rowwise() +
                br.out_shift.row(0).array();
        }
        masks[i].data = br.final_act.forward(d);
    }
    return masks;
}

Tensor2 SeparationModel::backward(const std::vector<Tensor2>& grad_masks) {
    const long J = static_cast<long>(config_.instruments.size());
    if (static_cast<long>(grad_masks.size()) != J) {
        throw std::invalid_argument("backward: need one mask gradient per instrument");
    }
    const long E = config_.encoder_out;
    const long H2 = 2 * config_.hidden_size;
    const long frames = grad_masks[0].rows();

    Tensor2 g_avg_enc = Tensor2::Zero(frames, E);
    Tensor2 g_lstm_total = Tensor2::Zero(frames, H2);
    for (long i = 0; i < J; ++i) {
        Branch& br = branches_[i];
        Tensor2 g = br.final_act.backward(grad_masks[i]);
        if (config_.use_io_normalization) {
            br.g_out_scale.row(0) +=
                (g.array() * br.pre_affine_.array()).colwise().sum().matrix();
            br.g_out_shift.row(0) += g.colwise().sum();
            g = g.array().rowwise() * br.out_scale.row(0).array();
        }
        g = br.dec_fc1.backward(br.dec_bn1.backward(
            br.dec_act1.backward(br.dec_fc2.backward(br.dec_bn2.backward(g)))));
        g_avg_enc += g.leftCols(E);
        g_lstm_total += g.rightCols(H2);
    }

    const Tensor2 g_each_lstm = g_lstm_total / static_cast<double>(J);
    for (long i = 0; i < J; ++i) g_avg_enc += branches_[i].lstm.backward(g_each_lstm);

    const Tensor2 g_enc_out = g_avg_enc / static_cast<double>(J);
    Tensor2 grad_mix;
    const bool has_mix = config_.variant != Variant::score_only;
    if (has_mix) grad_mix = Tensor2::Zero(frames, config_.n_bins);
    for (long i = 0; i < J; ++i) {
        Branch& br = branches_[i];
        Tensor2 g_in =
            br.enc_fc.backward(br.enc_bn.backward(br.enc_act.backward(g_enc_out)));
        switch (config_.variant) {
            case Variant::baseline:
                grad_mix += g_in;
                break;
            case Variant::score_informed: {
                grad_mix += g_in.leftCols(config_.n_bins);
                ScoreEncoder& se = score_encoders_[i];
                se.lstm.backward(
                    se.bn.backward(se.act.backward(g_in.rightCols(score_cols_))));
                break;
            }
            case Variant::score_only:
                break;
        }
    }
    if (has_mix && config_.use_io_normalization) {
        grad_mix = grad_mix.array().rowwise() / input_std_.row(0).array();
    }
    return grad_mix;
}

std::vector<AudioClip> SeparationModel::separate(const AudioClip& mix,
                                                 const std::vector<ScoreTrack>* score,
                                                 int window_size, int hop_size) {
    const bool needs_rolls = config_.variant != Variant::baseline;
    if (needs_rolls && score == nullptr) {
        throw DataError("separate: this variant needs an aligned score");
    }

    ComplexSpectrogram spec = stft(mix, window_size, hop_size);
    if (spec.bins() != config_.n_bins) {
        throw DataError("separate: stft bin count does not match the model");
    }
    MagSpectrogram mag = magnitude(spec);

    std::vector<PianoRoll> rolls;
    if (needs_rolls) {
        for (const auto& name : config_.instruments) {
            const ScoreTrack* track = nullptr;
            for (const auto& t : *score) {
                if (t.instrument == name) { track = &t; break; }
            }
            if (track) {
                rolls.push_back(rasterize(*track, spec.frames(), mix.sample_rate, hop_size));
            } else {
                PianoRoll zero;
                zero.hop_size = hop_size;
                zero.sample_rate = mix.sample_rate;
                zero.data = Eigen::MatrixXd::Zero(spec.frames(), kMidiPitches);
                rolls.push_back(std::move(zero));
            }
        }
    }

    const bool was_training = training_;
    set_training(false);
    std::vector<Mask> masks =
        forward(config_.variant == Variant::score_only ? nullptr : &mag,
                needs_rolls ? &rolls : nullptr);
    set_training(was_training);

    std::vector<AudioClip> stems;
    for (const auto& mask : masks) stems.push_back(istft(apply_mask(spec, mask)));
    return stems;
}

}  // namespace ssep
