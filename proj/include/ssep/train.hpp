// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef SSEP_TRAIN_HPP
#define SSEP_TRAIN_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ssep/data.hpp"
#include "ssep/model.hpp"

namespace ssep {

// Everything needed to reproduce a training run. `instruments` wins over
// `family` when non-empty; otherwise the family table picks the branches.
struct TrainConfig {
    Variant variant = Variant::baseline;
    std::string family;
    std::vector<std::string> instruments;
    long epochs = 5;
    long steps_per_epoch = 50;
    long batch_size = 2;
    double segment_sec = 6.0;
    double learning_rate = 1e-3;
    double lambda = 10.0;
    uint64_t seed = 0;
    int window_size = 4096;
    int hop_size = 1024;
    std::string precision = "float64";
    long hidden_size = 512;
    long encoder_out = 512;
    long score_feature_size = 32;
    bool use_io_normalization = true;

    void validate() const;
    ModelConfig model_config(const std::vector<std::string>& resolved) const;
};

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Branch list for a run: the explicit instrument list if given, else the
// members of the named family that the dataset actually contains (at
// least two must be present).
std::vector<std::string> resolve_instruments(const TrainConfig& config,
                                             const Manifest& manifest);

// Per-bin mean/std of the mixture magnitude over a seeded sample of
// segments. Bins whose std falls below 1e-6 are floored there.
struct InputStats {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd std;
};
InputStats compute_input_stats(const Manifest& manifest, const TrainConfig& config,
                               long n_segments);

// Adam with global-norm gradient clipping. Running-statistics buffers are
// left alone; only trainable entries step.
class AdamOptimizer {
public:
    AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8, double clip_norm = 5.0);

    void attach(const ParamSet& params);
    // Applies one update, scaling gradients down when the global norm
    // exceeds the clip value. Returns the pre-clip global norm.
    double step(ParamSet& params);

    long steps_taken() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_, clip_norm_;
    long t_ = 0;
    std::vector<Tensor2> m_, v_;
};

// Serialized model snapshot. Layout on disk: magic "SSEP", u32 version,
// u64 header length, JSON header (model config, metadata, tensor
// directory with name/shape/dtype/offset), then the raw little-endian
// float64 payload in row-major order. save -> load -> save is
// byte-identical.
struct Checkpoint {
    uint32_t version = 1;
    ModelConfig config;
    std::vector<std::pair<std::string, Tensor2>> tensors;
    nlohmann::json metadata;

    static Checkpoint from_model(SeparationModel& model, nlohmann::json metadata);
    // Rebuilds the model and copies every tensor back by name.
    SeparationModel to_model() const;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// STFT geometry recorded in checkpoint metadata, needed for separation.
struct StftGeometry {
    int window_size = 4096;
    int hop_size = 1024;
};
StftGeometry checkpoint_stft(const Checkpoint& checkpoint);

// Runs the full loop and returns the final snapshot. `log` (optional)
// receives one JSON line per optimizer step with the per-subset losses;
// `progress` (optional) receives brief per-epoch text. Throws
// NumericError if the loss goes non-finite.
Checkpoint train(const Manifest& manifest, const TrainConfig& config,
                 std::ostream* log = nullptr, std::ostream* progress = nullptr);

}  // namespace ssep

#endif
