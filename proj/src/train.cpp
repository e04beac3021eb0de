// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ssep/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "ssep/loss.hpp"
#include "ssep/rng.hpp"
#include "ssep/util.hpp"
#include "ssep/wav.hpp"

namespace ssep {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

using nlohmann::json;

constexpr uint32_t kCheckpointVersion = 1;
constexpr char kMagic[4] = {'S', 'S', 'E', 'P'};

// rng stream tags, one per independent consumer of the run seed
constexpr uint64_t kStreamStats = 1;
constexpr uint64_t kStreamModel = 2;
constexpr uint64_t kStreamBatch = 3;

void require(bool ok, const std::string& message) {
    if (!ok) throw DataError(message);
}

template <typename T>
T get_field(const json& j, const std::string& key, const char* where) {
    if (!j.contains(key))
        throw DataError(std::string(where) + " is missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw DataError(std::string(where) + " field '" + key + "' has the wrong type");
    }
}

template <typename T>
void maybe_field(const json& j, const std::string& key, T& out, const char* where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw DataError(std::string(where) + " field '" + key + "' has the wrong type");
    }
}

}  // namespace

void TrainConfig::validate() const {
    require(epochs > 0, "epochs must be positive");
    require(steps_per_epoch > 0, "steps_per_epoch must be positive");
    require(batch_size > 0, "batch_size must be positive");
    require(segment_sec > 0.0, "segment_sec must be positive");
    require(learning_rate > 0.0, "learning_rate must be positive");
    require(lambda >= 0.0, "lambda must be non-negative");
    require(window_size >= 4 && window_size % 2 == 0,
            "window_size must be even and at least 4");
    require(hop_size > 0 && hop_size <= window_size,
            "hop_size must be in [1, window_size]");
    require(precision == "float64",
            "precision must be \"float64\" (the only supported mode)");
    require(hidden_size > 0, "hidden_size must be positive");
    require(encoder_out > 0, "encoder_out must be positive");
    require(score_feature_size > 0 && score_feature_size % 2 == 0,
            "score_feature_size must be positive and even");
    require(!family.empty() || !instruments.empty(),
            "select instruments via a family name or an explicit list");
    if (!instruments.empty())
        require(instruments.size() >= 2, "need at least two instruments");
}

ModelConfig TrainConfig::model_config(const std::vector<std::string>& resolved) const {
    ModelConfig mc;
    mc.variant = variant;
    mc.instruments = resolved;
    mc.n_bins = window_size / 2 + 1;
    mc.hidden_size = hidden_size;
    mc.encoder_out = encoder_out;
    mc.score_feature_size = score_feature_size;
    mc.score_encoder_hidden = score_feature_size / 2;
    mc.use_io_normalization =
        variant == Variant::score_only ? false : use_io_normalization;
    return mc;
}

json model_config_to_json(const ModelConfig& config) {
    json j;
    j["variant"] = variant_name(config.variant);
    j["instruments"] = config.instruments;
    j["n_bins"] = config.n_bins;
    j["hidden_size"] = config.hidden_size;
    j["encoder_out"] = config.encoder_out;
    j["score_encoder_hidden"] = config.score_encoder_hidden;
    j["score_feature_size"] = config.score_feature_size;
    j["use_io_normalization"] = config.use_io_normalization;
    return j;
}

ModelConfig model_config_from_json(const json& j) {
    const char* where = "model config";
    ModelConfig c;
    c.variant = variant_from_name(get_field<std::string>(j, "variant", where));
    c.instruments = get_field<std::vector<std::string>>(j, "instruments", where);
    c.n_bins = get_field<long>(j, "n_bins", where);
    c.hidden_size = get_field<long>(j, "hidden_size", where);
    c.encoder_out = get_field<long>(j, "encoder_out", where);
    c.score_encoder_hidden = get_field<long>(j, "score_encoder_hidden", where);
    c.score_feature_size = get_field<long>(j, "score_feature_size", where);
    c.use_io_normalization = get_field<bool>(j, "use_io_normalization", where);
    return c;
}

json train_config_to_json(const TrainConfig& config) {
    json j;
    j["variant"] = variant_name(config.variant);
    j["family"] = config.family;
    j["instruments"] = config.instruments;
    j["epochs"] = config.epochs;
    j["steps_per_epoch"] = config.steps_per_epoch;
    j["batch_size"] = config.batch_size;
    j["segment_sec"] = config.segment_sec;
    j["learning_rate"] = config.learning_rate;
    j["lambda"] = config.lambda;
    j["seed"] = config.seed;
    j["window_size"] = config.window_size;
    j["hop_size"] = config.hop_size;
    j["precision"] = config.precision;
    j["hidden_size"] = config.hidden_size;
    j["encoder_out"] = config.encoder_out;
    j["score_feature_size"] = config.score_feature_size;
    j["use_io_normalization"] = config.use_io_normalization;
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    const char* where = "train config";
    if (!j.is_object()) throw DataError("train config must be a JSON object");
    static const std::set<std::string> known = {
        "variant",        "family",       "instruments",   "epochs",
        "steps_per_epoch", "batch_size",  "segment_sec",   "learning_rate",
        "lambda",         "seed",         "window_size",   "hop_size",
        "precision",      "hidden_size",  "encoder_out",   "score_feature_size",
        "use_io_normalization"};
    for (auto it = j.begin(); it != j.end(); ++it)
        require(known.count(it.key()) > 0,
                "unknown train config key '" + it.key() + "'");
    TrainConfig c;
    std::string variant = variant_name(c.variant);
    maybe_field(j, "variant", variant, where);
    c.variant = variant_from_name(variant);
    maybe_field(j, "family", c.family, where);
    maybe_field(j, "instruments", c.instruments, where);
    maybe_field(j, "epochs", c.epochs, where);
    maybe_field(j, "steps_per_epoch", c.steps_per_epoch, where);
    maybe_field(j, "batch_size", c.batch_size, where);
    maybe_field(j, "segment_sec", c.segment_sec, where);
    maybe_field(j, "learning_rate", c.learning_rate, where);
    maybe_field(j, "lambda", c.lambda, where);
    maybe_field(j, "seed", c.seed, where);
    maybe_field(j, "window_size", c.window_size, where);
    maybe_field(j, "hop_size", c.hop_size, where);
    maybe_field(j, "precision", c.precision, where);
    maybe_field(j, "hidden_size", c.hidden_size, where);
    maybe_field(j, "encoder_out", c.encoder_out, where);
    maybe_field(j, "score_feature_size", c.score_feature_size, where);
    maybe_field(j, "use_io_normalization", c.use_io_normalization, where);
    return c;
}

std::vector<std::string> resolve_instruments(const TrainConfig& config,
                                             const Manifest& manifest) {
    if (!config.instruments.empty()) {
        require(config.instruments.size() >= 2, "need at least two instruments");
        return config.instruments;
    }
    require(!config.family.empty(),
            "select instruments via a family name or an explicit list");
    std::vector<std::string> members = family_members(config.family);
    std::vector<std::string> present;
    for (const std::string& m : members)
        if (std::find(manifest.instruments.begin(), manifest.instruments.end(), m) !=
            manifest.instruments.end())
            present.push_back(m);
    if (present.size() < 2) {
        std::string have;
        for (const std::string& name : manifest.instruments)
            have += (have.empty() ? "" : ", ") + name;
        throw DataError("family '" + config.family +
                        "' matches fewer than two dataset instruments (dataset has: " +
                        have + "); pass an explicit instrument list instead");
    }
    return present;
}

InputStats compute_input_stats(const Manifest& manifest, const TrainConfig& config,
                               long n_segments) {
    require(n_segments > 0, "need at least one segment for input statistics");
    require(!manifest.songs.empty(), "manifest has no songs");
    const long n_bins = config.window_size / 2 + 1;
    const long seg_samples =
        std::lround(config.segment_sec * manifest.sample_rate);
    Rng rng(Rng::derive(config.seed, kStreamStats));
    std::map<long, AudioClip> cache;

    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(n_bins);
    Eigen::RowVectorXd sum_sq = Eigen::RowVectorXd::Zero(n_bins);
    long count = 0;
    for (long s = 0; s < n_segments; ++s) {
        const long idx = rng.uniform_int(0, (long)manifest.songs.size() - 1);
        auto it = cache.find(idx);
        if (it == cache.end()) {
            const std::filesystem::path path =
                std::filesystem::path(manifest.base_dir) /
                manifest.songs[idx].mixture_path;
            it = cache.emplace(idx, read_wav(path.string())).first;
        }
        const AudioClip& mix = it->second;
        const long len = (long)mix.size();
        const long take = std::min(seg_samples, len);
        const long start = len > take ? rng.uniform_int(0, len - take) : 0;
        AudioClip piece(std::vector<double>(mix.samples.begin() + start,
                                            mix.samples.begin() + start + take),
                        mix.sample_rate);
        MagSpectrogram mag =
            magnitude(stft(piece, config.window_size, config.hop_size));
        sum += mag.data.colwise().sum();
        sum_sq += mag.data.array().square().matrix().colwise().sum();
        count += mag.frames();
    }
    InputStats stats;
    stats.mean = sum / (double)count;
    Eigen::RowVectorXd var =
        (sum_sq / (double)count) - stats.mean.array().square().matrix();
    stats.std = var.array().max(0.0).sqrt().max(1e-6);
    return stats;
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps,
                             double clip_norm)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), clip_norm_(clip_norm) {}

void AdamOptimizer::attach(const ParamSet& params) {
    m_.clear();
    v_.clear();
    t_ = 0;
    for (const ParamRef& p : params.entries()) {
        if (!p.trainable) continue;
        m_.push_back(Tensor2::Zero(p.value->rows(), p.value->cols()));
        v_.push_back(Tensor2::Zero(p.value->rows(), p.value->cols()));
    }
}

double AdamOptimizer::step(ParamSet& params) {
    double norm_sq = 0.0;
    for (const ParamRef& p : params.entries())
        if (p.trainable) norm_sq += p.grad->squaredNorm();
    if (!std::isfinite(norm_sq))
        throw NumericError("gradient norm became non-finite");
    const double norm = std::sqrt(norm_sq);
    const double scale = norm > clip_norm_ ? clip_norm_ / norm : 1.0;

    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, (double)t_);
    const double c2 = 1.0 - std::pow(beta2_, (double)t_);
    std::size_t i = 0;
    for (const ParamRef& p : params.entries()) {
        if (!p.trainable) continue;
        if (i >= m_.size()) throw DataError("optimizer not attached to this model");
        const Eigen::ArrayXXd g = p.grad->array() * scale;
        m_[i].array() = beta1_ * m_[i].array() + (1.0 - beta1_) * g;
        v_[i].array() = beta2_ * v_[i].array() + (1.0 - beta2_) * g.square();
        p.value->array() -=
            lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
        ++i;
    }
    if (i != m_.size()) throw DataError("optimizer not attached to this model");
    return norm;
}

Checkpoint Checkpoint::from_model(SeparationModel& model, json metadata) {
    Checkpoint ckpt;
    ckpt.version = kCheckpointVersion;
    ckpt.config = model.config();
    ckpt.metadata = std::move(metadata);
    ParamSet params = model.params();
    ckpt.tensors.reserve(params.entries().size());
    for (const ParamRef& p : params.entries())
        ckpt.tensors.emplace_back(p.path, *p.value);
    return ckpt;
}

SeparationModel Checkpoint::to_model() const {
    config.validate();
    SeparationModel model = SeparationModel::build(config, 0);
    ParamSet params = model.params();
    std::map<std::string, ParamRef*> by_path;
    std::vector<ParamRef> entries(params.entries());
    for (ParamRef& p : entries) by_path[p.path] = &p;
    require(tensors.size() == entries.size(),
            "checkpoint tensor count does not match the model");
    for (const auto& [name, value] : tensors) {
        auto it = by_path.find(name);
        require(it != by_path.end(), "checkpoint has unknown tensor '" + name + "'");
        ParamRef* ref = it->second;
        require(ref->value->rows() == value.rows() &&
                    ref->value->cols() == value.cols(),
                "checkpoint tensor '" + name + "' has the wrong shape");
        *ref->value = value;
    }
    model.set_training(false);
    return model;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
    json dir = json::array();
    uint64_t offset = 0;
    for (const auto& [name, value] : checkpoint.tensors) {
        json t;
        t["name"] = name;
        t["rows"] = value.rows();
        t["cols"] = value.cols();
        t["dtype"] = "float64";
        t["offset"] = offset;
        dir.push_back(std::move(t));
        offset += (uint64_t)value.size() * sizeof(double);
    }
    json header;
    header["config"] = model_config_to_json(checkpoint.config);
    header["metadata"] = checkpoint.metadata;
    header["tensors"] = std::move(dir);
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    const uint32_t version = checkpoint.version;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const uint64_t header_len = header_text.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_text.data(), (std::streamsize)header_text.size());
    std::vector<double> row;
    for (const auto& [name, value] : checkpoint.tensors) {
        (void)name;
        row.resize((std::size_t)value.cols());
        for (long r = 0; r < value.rows(); ++r) {
            for (long c = 0; c < value.cols(); ++c) row[(std::size_t)c] = value(r, c);
            out.write(reinterpret_cast<const char*>(row.data()),
                      (std::streamsize)(row.size() * sizeof(double)));
        }
    }
    out.flush();
    if (!out) throw DataError("failed while writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not a checkpoint file: " + path);
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in) throw DataError("truncated checkpoint: " + path);
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    if (!in) throw DataError("truncated checkpoint: " + path);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), (std::streamsize)header_len);
    if (!in) throw DataError("truncated checkpoint: " + path);

    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::exception&) {
        throw DataError("corrupt checkpoint header: " + path);
    }
    Checkpoint ckpt;
    ckpt.version = version;
    ckpt.config = model_config_from_json(
        get_field<json>(header, "config", "checkpoint header"));
    ckpt.metadata = get_field<json>(header, "metadata", "checkpoint header");
    const json dir = get_field<json>(header, "tensors", "checkpoint header");
    require(dir.is_array(), "checkpoint tensor directory must be an array");

    uint64_t expected_offset = 0;
    for (const json& t : dir) {
        const char* where = "checkpoint tensor entry";
        const std::string name = get_field<std::string>(t, "name", where);
        const long rows = get_field<long>(t, "rows", where);
        const long cols = get_field<long>(t, "cols", where);
        const std::string dtype = get_field<std::string>(t, "dtype", where);
        const uint64_t offset = get_field<uint64_t>(t, "offset", where);
        require(rows >= 0 && cols >= 0, "tensor '" + name + "' has a negative shape");
        require(dtype == "float64", "tensor '" + name + "' has unsupported dtype");
        require(offset == expected_offset, "corrupt tensor directory in " + path);
        expected_offset += (uint64_t)rows * (uint64_t)cols * sizeof(double);

        Tensor2 value(rows, cols);
        std::vector<double> row((std::size_t)cols);
        for (long r = 0; r < rows; ++r) {
            in.read(reinterpret_cast<char*>(row.data()),
                    (std::streamsize)(row.size() * sizeof(double)));
            if (!in) throw DataError("truncated checkpoint: " + path);
            for (long c = 0; c < cols; ++c) value(r, c) = row[(std::size_t)c];
        }
        ckpt.tensors.emplace_back(name, std::move(value));
    }
    in.peek();
    if (!in.eof()) throw DataError("trailing bytes after checkpoint payload: " + path);
    return ckpt;
}

StftGeometry checkpoint_stft(const Checkpoint& checkpoint) {
    const json& meta = checkpoint.metadata;
    if (!meta.contains("stft"))
        throw DataError("checkpoint metadata lacks stft geometry");
    StftGeometry g;
    g.window_size = get_field<int>(meta.at("stft"), "window_size", "stft metadata");
    g.hop_size = get_field<int>(meta.at("stft"), "hop_size", "stft metadata");
    return g;
}

Checkpoint train(const Manifest& manifest, const TrainConfig& config,
                 std::ostream* log, std::ostream* progress) {
    config.validate();
    require(!manifest.songs.empty(), "manifest has no songs");
    const std::vector<std::string> instruments = resolve_instruments(config, manifest);
    const ModelConfig mc = config.model_config(instruments);
    mc.validate();

    const bool need_notes = config.variant != Variant::baseline;
    const long seg_samples = std::lround(config.segment_sec * manifest.sample_rate);
    std::vector<LoadedSong> songs;
    songs.reserve(manifest.songs.size());
    for (const SongEntry& entry : manifest.songs) {
        LoadedSong song = LoadedSong::load(manifest, entry, need_notes);
        require((long)song.mixture.size() >= seg_samples,
                "song '" + entry.id + "' is shorter than one training segment");
        songs.push_back(std::move(song));
    }

    SeparationModel model =
        SeparationModel::build(mc, Rng::derive(config.seed, kStreamModel));
    if (mc.use_io_normalization) {
        const long n_stats = std::clamp<long>(2 * (long)songs.size(), 8, 32);
        InputStats stats = compute_input_stats(manifest, config, n_stats);
        model.set_input_stats(stats.mean, stats.std);
    }
    model.set_training(true);
    ParamSet params = model.params();
    AdamOptimizer adam(config.learning_rate);
    adam.attach(params);

    const long J = (long)instruments.size();
    std::vector<std::string> labels;
    for (const std::vector<long>& subset : combinations(J)) {
        std::string label;
        for (long i : subset) label += (label.empty() ? "" : "+") + instruments[i];
        labels.push_back(label);
    }

    Rng rng(Rng::derive(config.seed, kStreamBatch));
    long global_step = 0;
    double last_total = 0.0;
    for (long epoch = 0; epoch < config.epochs; ++epoch) {
        double epoch_sum = 0.0;
        for (long step = 0; step < config.steps_per_epoch; ++step) {
            params.zero_grad();

            std::vector<Segment> batch;
            batch.reserve(config.batch_size);
            std::vector<ComplexSpectrogram> specs;
            specs.reserve(config.batch_size);
            for (long b = 0; b < config.batch_size; ++b) {
                const long idx = rng.uniform_int(0, (long)songs.size() - 1);
                batch.push_back(sample_segment(songs[idx], instruments,
                                               config.segment_sec, config.window_size,
                                               config.hop_size, rng));
                specs.push_back(
                    stft(batch.back().mix, config.window_size, config.hop_size));
            }
            const long frames = specs.front().frames();
            const long n_bins = specs.front().bins();

            MagSpectrogram mag_all;
            mag_all.window_size = config.window_size;
            mag_all.hop_size = config.hop_size;
            mag_all.sample_rate = manifest.sample_rate;
            mag_all.data.resize(config.batch_size * frames, n_bins);
            std::vector<PianoRoll> rolls_all((std::size_t)J);
            for (long i = 0; i < J; ++i) {
                rolls_all[i].hop_size = config.hop_size;
                rolls_all[i].sample_rate = manifest.sample_rate;
                rolls_all[i].data.resize(config.batch_size * frames, kMidiPitches);
            }
            Spans spans;
            for (long b = 0; b < config.batch_size; ++b) {
                mag_all.data.middleRows(b * frames, frames) =
                    specs[b].data.cwiseAbs();
                for (long i = 0; i < J; ++i)
                    rolls_all[i].data.middleRows(b * frames, frames) =
                        batch[b].rolls[i].data;
                spans.emplace_back(b * frames, frames);
            }

            const MagSpectrogram* mag_in =
                config.variant == Variant::score_only ? nullptr : &mag_all;
            const std::vector<PianoRoll>* rolls_in =
                config.variant == Variant::baseline ? nullptr : &rolls_all;
            std::vector<Mask> masks = model.forward(mag_in, rolls_in, spans);

            double total = 0.0;
            std::vector<double> freq_sum(labels.size(), 0.0);
            std::vector<double> time_sum(labels.size(), 0.0);
            std::vector<Tensor2> grad_all((std::size_t)J);
            for (long i = 0; i < J; ++i)
                grad_all[i] = Tensor2::Zero(config.batch_size * frames, n_bins);
            const double inv_batch = 1.0 / (double)config.batch_size;
            for (long b = 0; b < config.batch_size; ++b) {
                std::vector<Mask> masks_b((std::size_t)J);
                for (long i = 0; i < J; ++i)
                    masks_b[i].data = masks[i].data.middleRows(b * frames, frames);
                std::vector<Tensor2> grads_b;
                LossBreakdown bd =
                    combination_loss(masks_b, specs[b], batch[b].mix,
                                     batch[b].stems, config.lambda, &grads_b);
                total += bd.total * inv_batch;
                for (std::size_t t = 0; t < bd.terms.size(); ++t) {
                    freq_sum[t] += bd.terms[t].freq * inv_batch;
                    time_sum[t] += bd.terms[t].time * inv_batch;
                }
                for (long i = 0; i < J; ++i)
                    grad_all[i].middleRows(b * frames, frames) =
                        grads_b[i] * inv_batch;
            }
            if (!std::isfinite(total))
                throw NumericError("training loss became non-finite at step " +
                                   std::to_string(global_step + 1));

            model.backward(grad_all);
            const double grad_norm = adam.step(params);

            ++global_step;
            epoch_sum += total;
            last_total = total;
            if (log) {
                json line;
                line["epoch"] = epoch + 1;
                line["step"] = global_step;
                line["total"] = total;
                line["grad_norm"] = grad_norm;
                json subsets;
                for (std::size_t t = 0; t < labels.size(); ++t)
                    subsets[labels[t]] = {{"freq", freq_sum[t]}, {"time", time_sum[t]}};
                line["subsets"] = std::move(subsets);
                *log << line.dump() << "\n";
            }
        }
        if (progress)
            *progress << "[epoch " << (epoch + 1) << "/" << config.epochs
                      << "] mean loss "
                      << epoch_sum / (double)config.steps_per_epoch << "\n";
    }

    model.set_training(false);
    json metadata;
    metadata["train_config"] = train_config_to_json(config);
    metadata["stft"] = {{"window_size", config.window_size},
                        {"hop_size", config.hop_size}};
    metadata["instruments"] = instruments;
    metadata["epochs_run"] = config.epochs;
    metadata["steps_total"] = global_step;
    metadata["final_loss"] = last_total;
    return Checkpoint::from_model(model, std::move(metadata));
}

}  // namespace ssep
