// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ssep/data.hpp"
#include "ssep/dsp.hpp"
#include "ssep/eval.hpp"
#include "ssep/score.hpp"
#include "ssep/train.hpp"
#include "ssep/util.hpp"
#include "ssep/wav.hpp"

namespace py = pybind11;
using namespace ssep;

namespace {

AudioClip clip_from_array(const Eigen::VectorXd& samples, int sample_rate) {
    AudioClip clip;
    clip.sample_rate = sample_rate;
    clip.samples.assign(samples.data(), samples.data() + samples.size());
    return clip;
}

Eigen::VectorXd array_from_clip(const AudioClip& clip) {
    return Eigen::Map<const Eigen::VectorXd>(clip.samples.data(),
                                             (long)clip.samples.size());
}

std::string slurp_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

PYBIND11_MODULE(_ssep, m) {
    m.doc() = "score-informed music source separation core";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def(
        "stft",
        [](const Eigen::VectorXd& samples, int sample_rate, int window_size,
           int hop_size) {
            return stft(clip_from_array(samples, sample_rate), window_size,
                        hop_size).data;
        },
        py::arg("samples"), py::arg("sample_rate") = 44100,
        py::arg("window_size") = 4096, py::arg("hop_size") = 1024,
        "Complex spectrogram (frames x bins) of a mono signal.");

    m.def(
        "istft",
        [](const Eigen::MatrixXcd& data, int sample_rate, int window_size,
           int hop_size, long length) {
            ComplexSpectrogram spec;
            spec.data = data;
            spec.window_size = window_size;
            spec.hop_size = hop_size;
            spec.sample_rate = sample_rate;
            spec.source_samples = length;
            return array_from_clip(istft(spec));
        },
        py::arg("data"), py::arg("sample_rate") = 44100,
        py::arg("window_size") = 4096, py::arg("hop_size") = 1024,
        py::arg("length") = -1,
        "Overlap-add inverse of stft(); length trims the tail when given.");

    m.def(
        "read_wav",
        [](const std::string& path) {
            AudioClip clip = read_wav(path);
            return py::make_tuple(array_from_clip(clip), clip.sample_rate);
        },
        py::arg("path"), "Load a mono WAV as (samples, sample_rate).");

    m.def(
        "write_wav",
        [](const std::string& path, const Eigen::VectorXd& samples,
           int sample_rate) {
            write_wav(path, clip_from_array(samples, sample_rate));
        },
        py::arg("path"), py::arg("samples"), py::arg("sample_rate") = 44100,
        "Write a mono float32 WAV.");

    m.def(
        "resample",
        [](const Eigen::VectorXd& samples, int sample_rate, int target_rate) {
            AudioClip out = resample(clip_from_array(samples, sample_rate),
                                     target_rate);
            return array_from_clip(out);
        },
        py::arg("samples"), py::arg("sample_rate"), py::arg("target_rate"),
        "Windowed-sinc resampling to the target rate.");

    m.def(
        "wiener_denoise",
        [](const Eigen::VectorXd& samples, int sample_rate, double threshold) {
            return array_from_clip(wiener_denoise(
                clip_from_array(samples, sample_rate), threshold));
        },
        py::arg("samples"), py::arg("sample_rate") = 44100,
        py::arg("threshold") = 0.01,
        "Wiener filtering against noise measured in silent regions.");

    m.def(
        "rasterize_notes",
        [](const std::string& csv_text, long n_frames, int sample_rate,
           int hop_size) {
            std::vector<ScoreTrack> tracks = parse_notes_csv(csv_text);
            py::dict rolls;
            for (const ScoreTrack& track : tracks)
                rolls[py::str(track.instrument)] =
                    rasterize(track, n_frames, sample_rate, hop_size).data;
            return rolls;
        },
        py::arg("csv_text"), py::arg("n_frames"), py::arg("sample_rate") = 44100,
        py::arg("hop_size") = 1024,
        "Per-instrument binary piano rolls (frames x 128) from a note CSV.");

    m.def(
        "synthesize_toy",
        [](const std::string& out_dir, long songs, double duration_sec,
           uint64_t seed, const std::string& profile) {
            ToySpec spec = profile == "overlap"
                               ? ToySpec::overlap_profile(songs, duration_sec, seed)
                               : ToySpec::default_profile(songs, duration_sec, seed);
            synthesize_toy(spec, out_dir);
            return (std::filesystem::path(out_dir) / "manifest.json").string();
        },
        py::arg("out_dir"), py::arg("songs") = 4, py::arg("duration_sec") = 30.0,
        py::arg("seed") = 0, py::arg("profile") = "default",
        "Render the deterministic toy dataset; returns the manifest path.");

    m.def(
        "train",
        [](const std::string& manifest_path, const std::string& out_path,
           const std::string& config_json, bool quiet) {
            Manifest manifest = load_manifest(manifest_path);
            TrainConfig config = train_config_from_json(
                nlohmann::json::parse(config_json));
            std::ostringstream log;
            Checkpoint ckpt =
                train(manifest, config, &log, quiet ? nullptr : &std::cerr);
            save_checkpoint(ckpt, out_path);
            return log.str();
        },
        py::arg("manifest_path"), py::arg("out_path"), py::arg("config_json"),
        py::arg("quiet") = true,
        "Train from a manifest with a JSON config; writes a checkpoint and "
        "returns the JSON-lines step log.");

    m.def(
        "separate",
        [](const std::string& model_path, const Eigen::VectorXd& samples,
           int sample_rate, const std::string& notes_csv) {
            Checkpoint ckpt = load_checkpoint(model_path);
            SeparationModel model = ckpt.to_model();
            StftGeometry geom = checkpoint_stft(ckpt);
            std::vector<ScoreTrack> tracks;
            const bool want_score = ckpt.config.variant != Variant::baseline;
            if (want_score) {
                if (notes_csv.empty())
                    throw DataError("this model variant requires a note CSV");
                tracks = parse_notes_csv(notes_csv);
            }
            std::vector<AudioClip> stems = model.separate(
                clip_from_array(samples, sample_rate),
                want_score ? &tracks : nullptr, geom.window_size, geom.hop_size);
            py::dict out;
            for (std::size_t i = 0; i < stems.size(); ++i)
                out[py::str(ckpt.config.instruments[i])] =
                    array_from_clip(stems[i]);
            return out;
        },
        py::arg("model_path"), py::arg("samples"), py::arg("sample_rate") = 44100,
        py::arg("notes_csv") = std::string(),
        "Split a mixture into per-instrument stems with a trained checkpoint.");

    m.def(
        "separate_file",
        [](const std::string& model_path, const std::string& mix_path,
           const std::string& out_dir, const std::string& notes_path) {
            Checkpoint ckpt = load_checkpoint(model_path);
            SeparationModel model = ckpt.to_model();
            StftGeometry geom = checkpoint_stft(ckpt);
            std::vector<ScoreTrack> tracks;
            const bool want_score = ckpt.config.variant != Variant::baseline;
            if (want_score) {
                if (notes_path.empty())
                    throw DataError("this model variant requires a note CSV");
                tracks = parse_notes_csv(slurp_file(notes_path));
            }
            AudioClip mix = read_wav(mix_path);
            std::vector<AudioClip> stems =
                model.separate(mix, want_score ? &tracks : nullptr,
                               geom.window_size, geom.hop_size);
            std::filesystem::create_directories(out_dir);
            std::vector<std::string> written;
            for (std::size_t i = 0; i < stems.size(); ++i) {
                const std::string path =
                    (std::filesystem::path(out_dir) /
                     (ckpt.config.instruments[i] + ".wav")).string();
                write_wav(path, stems[i]);
                written.push_back(path);
            }
            return written;
        },
        py::arg("model_path"), py::arg("mix_path"), py::arg("out_dir"),
        py::arg("notes_path") = std::string(),
        "File-to-file separation; returns the written stem paths.");

    m.def(
        "evaluate",
        [](const std::string& est_dir, const std::string& ref_dir,
           double frame_sec, double silence_threshold) {
            EvalProtocol protocol;
            protocol.frame_sec = frame_sec;
            protocol.silence_threshold = silence_threshold;
            return sdr_report_to_json(evaluate(est_dir, ref_dir, protocol))
                .dump();
        },
        py::arg("est_dir"), py::arg("ref_dir"), py::arg("frame_sec") = 1.0,
        py::arg("silence_threshold") = 0.01,
        "Frame-wise SDR report (JSON string) of estimates against references.");

    m.attr("__version__") = "0.1.0";
}
