// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef SSEP_MODEL_HPP
#define SSEP_MODEL_HPP

#include <string>
#include <vector>

#include "ssep/dsp.hpp"
#include "ssep/nn.hpp"
#include "ssep/score.hpp"

// Cross-branch mask estimation with one branch per instrument. Per-branch
// flow: (optional per-bin input standardization of the mix magnitude) ->
// encoder (linear, batch norm, tanh) -> mean over branches -> 3-layer
// bidirectional LSTM -> mean over branches -> decoder (linear, batch norm,
// ReLU, linear, batch norm) on the concatenation of the averaged encoder
// output and the averaged LSTM output -> (optional learned per-bin output
// affine) -> ReLU mask.
//
// Variants differ only in the branch input:
//   baseline        mix magnitude (n_bins wide)
//   score_informed  mix magnitude ++ per-instrument score features
//                   (n_bins + score_feature_size)
//   score_only      the instrument's raw 128-wide piano roll; input and
//                   output normalizations are removed
//
// The score feature extractor (score_informed) is a per-instrument 3-layer
// bidirectional LSTM over the piano roll followed by batch norm and ReLU,
// so score_feature_size is fixed to 2 * score_encoder_hidden.

namespace ssep {

enum class Variant { baseline, score_informed, score_only };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
    Variant variant = Variant::baseline;
    std::vector<std::string> instruments;
    long n_bins = 2049;
    long hidden_size = 512;
    long encoder_out = 512;
    long score_encoder_hidden = 16;
    long score_feature_size = 32;
    bool use_io_normalization = true;

    void validate() const;
    long instrument_index(const std::string& name) const;
};

class SeparationModel {
public:
    static SeparationModel build(const ModelConfig& config, uint64_t seed);

    const ModelConfig& config() const { return config_; }
    void set_training(bool training);
    bool is_training() const { return training_; }

    // Named view over every parameter and running-statistics buffer.
    // References stay valid while the model lives and is not moved.
    ParamSet params();

    // Fixed per-bin statistics applied to the mix magnitude before the
    // encoder. No-ops unless use_io_normalization.
    void set_input_stats(const Eigen::RowVectorXd& mean, const Eigen::RowVectorXd& std);

    // Score feature extraction for one instrument (score_informed only):
    // frames x score_feature_size, non-negative.
    Tensor2 encode_score(const PianoRoll& roll, const std::string& instrument,
                         const Spans& spans = {});

    // One mask per instrument in config order. Pass the inputs the variant
    // needs: mix for baseline, mix + rolls (config order) for
    // score_informed, rolls only for score_only. `spans` marks segment
    // boundaries when rows of several clips are stacked on the time axis.
    std::vector<Mask> forward(const MagSpectrogram* mix,
                              const std::vector<PianoRoll>* rolls,
                              const Spans& spans = {});

    // Backpropagate d(loss)/d(mask) for every instrument through the whole
    // network, accumulating parameter gradients in place. Returns the
    // gradient with respect to the mix magnitude (empty for score_only).
    Tensor2 backward(const std::vector<Tensor2>& grad_masks);

    // stft -> forward (inference mode) -> mask -> istft per instrument.
    // Score tracks may cover extra instruments; a missing instrument gets
    // an all-zero roll.
    std::vector<AudioClip> separate(const AudioClip& mix,
                                    const std::vector<ScoreTrack>* score,
                                    int window_size, int hop_size);

    static long trainable_param_count(const ModelConfig& config);
    long branch_input_width() const;

private:
    struct Branch {
        Linear enc_fc;
        BatchNorm enc_bn;
        Activation enc_act{Act::tanh_fn};
        BiLstm lstm;
        Linear dec_fc1;
        BatchNorm dec_bn1;
        Activation dec_act1{Act::relu};
        Linear dec_fc2;
        BatchNorm dec_bn2;
        Tensor2 out_scale, out_shift;    // 1 x n_bins, only with io norm
        Tensor2 g_out_scale, g_out_shift;
        Activation final_act{Act::relu};
        Tensor2 pre_affine_;  // cached decoder output for the affine backward
    };
    struct ScoreEncoder {
        BiLstm lstm;
        BatchNorm bn;
        Activation act{Act::relu};
    };

    ModelConfig config_;
    bool training_ = true;
    std::vector<Branch> branches_;
    std::vector<ScoreEncoder> score_encoders_;
    Tensor2 input_mean_, input_std_;  // 1 x n_bins buffers

    // forward caches
    Spans spans_;
    std::vector<Tensor2> branch_in_;
    long score_cols_ = 0;  // width of the score part of the branch input

    Tensor2 normalized_mix(const Tensor2& mag) const;
    Tensor2 score_features(long idx, const Tensor2& roll, const Spans& spans);
};

}  // namespace ssep

#endif
