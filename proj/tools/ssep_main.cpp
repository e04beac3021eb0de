// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssep/data.hpp"
#include "ssep/dsp.hpp"
#include "ssep/eval.hpp"
#include "ssep/score.hpp"
#include "ssep/train.hpp"
#include "ssep/util.hpp"
#include "ssep/wav.hpp"

namespace fs = std::filesystem;
using namespace ssep;

namespace {

// Command-line misuse discovered after parsing (exit 1), as opposed to
// bad data (exit 2).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr const char* kExitFooter =
    "Exit codes: 0 success, 1 usage error, 2 data/IO error, 3 numerical failure.";

struct CommonFlags {
    int threads = 0;  // 0 = unset
    bool deterministic = false;
    CLI::Option* threads_opt = nullptr;
};

void add_common(CLI::App* sub, CommonFlags& common) {
    common.threads_opt =
        sub->add_option("--threads", common.threads,
                        "Worker cap (upper bound; falls back to SSEP_THREADS, "
                        "then 1; this build runs all numerics on one thread)")
            ->check(CLI::PositiveNumber);
    sub->add_flag("--deterministic", common.deterministic,
                  "Force single-threaded, bit-reproducible numerics");
    sub->footer(kExitFooter);
}

int resolve_threads(const CommonFlags& common) {
    if (common.deterministic) return 1;
    if (common.threads_opt != nullptr && common.threads_opt->count() > 0)
        return std::max(1, common.threads);
    if (const char* env = std::getenv("SSEP_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return (int)v;
        std::cerr << "warning: ignoring invalid SSEP_THREADS value '" << env
                  << "'\n";
    }
    return 1;
}

std::string slurp_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string normalize_variant(std::string name) {
    for (char& c : name)
        if (c == '-') c = '_';
    return name;
}

// --- toygen ----------------------------------------------------------------

struct ToygenArgs {
    std::string out;
    long songs = 4;
    double duration_sec = 30.0;
    uint64_t seed = 0;
    std::string profile = "default";
    CommonFlags common;
};

void run_toygen(const ToygenArgs& args) {
    ToySpec spec = args.profile == "overlap"
                       ? ToySpec::overlap_profile(args.songs, args.duration_sec,
                                                  args.seed)
                       : ToySpec::default_profile(args.songs, args.duration_sec,
                                                  args.seed);
    std::cerr << "synthesizing " << args.songs << " songs ("
              << args.duration_sec << " s each) into " << args.out << "\n";
    synthesize_toy(spec, args.out);
    std::cout << (fs::path(args.out) / "manifest.json").string() << "\n";
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string out;
    std::string log_path;
    std::string config_path;
    std::string variant;
    std::string family;
    std::vector<std::string> instruments;
    long epochs = 0;
    long steps_per_epoch = 0;
    long batch_size = 0;
    double segment_sec = 0.0;
    double learning_rate = 0.0;
    double lambda = 0.0;
    uint64_t seed = 0;
    int window_size = 0;
    int hop_size = 0;
    std::string precision;
    long hidden_size = 0;
    long encoder_out = 0;
    long score_feature_size = 0;
    bool no_io_norm = false;
    CommonFlags common;
};

void run_train(const TrainArgs& args, const CLI::App* sub) {
    TrainConfig cfg;
    if (sub->count("--config") > 0) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(slurp_file(args.config_path));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("cannot parse config JSON: " + std::string(e.what()));
        }
        cfg = train_config_from_json(j);
    }
    if (sub->count("--variant") > 0)
        cfg.variant = variant_from_name(normalize_variant(args.variant));
    if (sub->count("--family") > 0) cfg.family = args.family;
    if (sub->count("--instruments") > 0) cfg.instruments = args.instruments;
    if (sub->count("--epochs") > 0) cfg.epochs = args.epochs;
    if (sub->count("--steps-per-epoch") > 0)
        cfg.steps_per_epoch = args.steps_per_epoch;
    if (sub->count("--batch-size") > 0) cfg.batch_size = args.batch_size;
    if (sub->count("--segment-sec") > 0) cfg.segment_sec = args.segment_sec;
    if (sub->count("--lr") > 0) cfg.learning_rate = args.learning_rate;
    if (sub->count("--lambda") > 0) cfg.lambda = args.lambda;
    if (sub->count("--seed") > 0) cfg.seed = args.seed;
    if (sub->count("--window") > 0) cfg.window_size = args.window_size;
    if (sub->count("--hop") > 0) cfg.hop_size = args.hop_size;
    if (sub->count("--precision") > 0) cfg.precision = args.precision;
    if (sub->count("--hidden") > 0) cfg.hidden_size = args.hidden_size;
    if (sub->count("--encoder-out") > 0) cfg.encoder_out = args.encoder_out;
    if (sub->count("--score-features") > 0)
        cfg.score_feature_size = args.score_feature_size;
    if (sub->count("--no-io-norm") > 0) cfg.use_io_normalization = false;

    Manifest manifest = load_manifest(args.data);
    if (cfg.instruments.empty() && !cfg.family.empty()) {
        std::vector<std::string> members;
        try {
            members = family_members(cfg.family);
        } catch (const DataError& e) {
            throw UsageError(e.what());
        }
        long present = 0;
        for (const std::string& m : members)
            if (std::find(manifest.instruments.begin(), manifest.instruments.end(),
                          m) != manifest.instruments.end())
                ++present;
        if (present < 2) {
            std::string have;
            for (const std::string& name : manifest.instruments)
                have += (have.empty() ? "" : ", ") + name;
            throw UsageError("family '" + cfg.family +
                             "' matches fewer than two dataset instruments "
                             "(dataset has: " + have +
                             "); pass --instruments instead");
        }
    }

    const int threads = resolve_threads(args.common);
    std::cerr << "training variant " << variant_name(cfg.variant) << " ("
              << threads << " worker" << (threads == 1 ? "" : "s") << ")\n";
    std::ofstream log_file;
    std::ostream* log = &std::cerr;
    if (!args.log_path.empty()) {
        log_file.open(args.log_path, std::ios::trunc);
        if (!log_file) throw DataError("cannot write log: " + args.log_path);
        log = &log_file;
    }
    Checkpoint ckpt = train(manifest, cfg, log, &std::cerr);
    if (fs::path(args.out).has_parent_path())
        fs::create_directories(fs::path(args.out).parent_path());
    save_checkpoint(ckpt, args.out);
    std::cout << args.out << "\n";
}

// --- separate --------------------------------------------------------------

struct SeparateArgs {
    std::string model;
    std::string mix;
    std::string score;
    std::string out;
    CommonFlags common;
};

void run_separate(const SeparateArgs& args, const CLI::App* sub) {
    Checkpoint ckpt = load_checkpoint(args.model);
    const bool have_score = sub->count("--score") > 0;
    const bool want_score = ckpt.config.variant != Variant::baseline;
    if (want_score && !have_score)
        throw UsageError("model variant '" + variant_name(ckpt.config.variant) +
                         "' requires --score");
    if (!want_score && have_score)
        std::cerr << "warning: baseline model ignores --score\n";

    AudioClip mix = read_wav(args.mix);
    std::vector<ScoreTrack> tracks;
    if (want_score) tracks = parse_notes_csv(slurp_file(args.score));

    SeparationModel model = ckpt.to_model();
    StftGeometry geom = checkpoint_stft(ckpt);
    std::cerr << "separating " << mix.duration_sec() << " s into "
              << ckpt.config.instruments.size() << " stems\n";
    std::vector<AudioClip> stems = model.separate(
        mix, want_score ? &tracks : nullptr, geom.window_size, geom.hop_size);

    fs::create_directories(args.out);
    for (std::size_t i = 0; i < stems.size(); ++i)
        write_wav((fs::path(args.out) /
                   (ckpt.config.instruments[i] + ".wav")).string(),
                  stems[i]);
    std::cout << args.out << "\n";
}

// --- evaluate --------------------------------------------------------------

struct EvaluateArgs {
    std::string est;
    std::string ref;
    std::string report;
    double silence_threshold = 0.01;
    double frame_sec = 1.0;
    CommonFlags common;
};

void run_evaluate(const EvaluateArgs& args, const CLI::App* sub) {
    EvalProtocol protocol;
    protocol.frame_sec = args.frame_sec;
    protocol.silence_threshold = args.silence_threshold;
    SdrReport report = evaluate(args.est, args.ref, protocol);
    for (const auto& [name, value] : report.instrument_medians)
        std::cerr << name << ": " << value << " dB\n";
    std::cerr << "overall mean: " << report.overall_mean << " dB\n";
    if (sub->count("--report") > 0) {
        if (fs::path(args.report).has_parent_path())
            fs::create_directories(fs::path(args.report).parent_path());
        write_sdr_report(report, args.report);
        std::cout << args.report << "\n";
    } else {
        std::cout << sdr_report_to_json(report).dump(2) << "\n";
    }
}

// --- denoise ---------------------------------------------------------------

struct DenoiseArgs {
    std::string in;
    std::string out;
    std::string noise;
    double threshold = 0.01;
    CommonFlags common;
};

void run_denoise(const DenoiseArgs& args, const CLI::App* sub) {
    AudioClip clip = read_wav(args.in);
    AudioClip noise;
    const AudioClip* noise_ptr = nullptr;
    if (sub->count("--noise") > 0) {
        noise = read_wav(args.noise);
        noise_ptr = &noise;
    }
    AudioClip cleaned = wiener_denoise(clip, args.threshold, noise_ptr);
    if (fs::path(args.out).has_parent_path())
        fs::create_directories(fs::path(args.out).parent_path());
    write_wav(args.out, cleaned);
    std::cout << args.out << "\n";
}

// --- roll ------------------------------------------------------------------

struct RollArgs {
    std::string score;
    std::string out;
    long frames = 0;
    int sample_rate = 44100;
    int hop_size = 1024;
    CommonFlags common;
};

void run_roll(const RollArgs& args) {
    std::vector<ScoreTrack> tracks = parse_notes_csv(slurp_file(args.score));
    ScoreTrack merged;
    merged.instrument = "all";
    for (const ScoreTrack& track : tracks)
        for (NoteEvent note : track.notes) {
            note.instrument = merged.instrument;
            merged.notes.push_back(note);
        }
    std::stable_sort(merged.notes.begin(), merged.notes.end(),
                     [](const NoteEvent& a, const NoteEvent& b) {
                         return a.onset < b.onset;
                     });
    PianoRoll roll =
        rasterize(merged, args.frames, args.sample_rate, args.hop_size);
    std::ofstream out(args.out, std::ios::trunc);
    if (!out) throw DataError("cannot write roll: " + args.out);
    out << roll_to_csv(roll);
    if (!out) throw DataError("failed while writing roll: " + args.out);
    std::cout << args.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"score-informed music source separation toolkit"};
    app.require_subcommand(1);

    ToygenArgs toygen_args;
    CLI::App* toygen = app.add_subcommand(
        "toygen", "Synthesize a deterministic toy dataset with stems and notes");
    toygen->add_option("--out", toygen_args.out, "Output dataset directory")
        ->required();
    toygen->add_option("--songs", toygen_args.songs, "Number of songs")
        ->capture_default_str();
    toygen->add_option("--duration-sec", toygen_args.duration_sec,
                       "Song duration in seconds (>= 12)")
        ->capture_default_str();
    toygen->add_option("--seed", toygen_args.seed, "Random seed")
        ->capture_default_str();
    toygen->add_option("--profile", toygen_args.profile,
                       "Voice profile: separated or overlapping pitch ranges")
        ->check(CLI::IsMember({"default", "overlap"}))
        ->capture_default_str();
    add_common(toygen, toygen_args.common);

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand(
        "train", "Train a separation model on a dataset manifest");
    train_cmd->add_option("--data", train_args.data, "Path to manifest.json")
        ->required();
    train_cmd->add_option("--out", train_args.out, "Checkpoint output path")
        ->required();
    train_cmd->add_option("--config", train_args.config_path,
                          "JSON config file (flags override its values)");
    train_cmd->add_option("--log", train_args.log_path,
                          "Write the per-step JSON-lines log here instead of stderr");
    train_cmd
        ->add_option("--variant", train_args.variant,
                     "Model variant: baseline, score_informed, or score_only")
        ->check(CLI::IsMember({"baseline", "score_informed", "score-informed",
                               "score_only", "score-only"}));
    train_cmd->add_option("--family", train_args.family,
                          "Orchestral family to separate (strings, woodwinds, "
                          "brass, percussion)");
    train_cmd->add_option("--instruments", train_args.instruments,
                          "Explicit comma-separated instrument list (overrides "
                          "--family)")
        ->delimiter(',');
    train_cmd->add_option("--epochs", train_args.epochs, "Training epochs");
    train_cmd->add_option("--steps-per-epoch", train_args.steps_per_epoch,
                          "Optimizer steps per epoch");
    train_cmd->add_option("--batch-size", train_args.batch_size,
                          "Segments per optimizer step");
    train_cmd->add_option("--segment-sec", train_args.segment_sec,
                          "Training segment length in seconds");
    train_cmd->add_option("--lr", train_args.learning_rate, "Learning rate");
    train_cmd->add_option("--lambda", train_args.lambda,
                          "Weight of the time-domain loss term");
    train_cmd->add_option("--seed", train_args.seed, "Random seed");
    train_cmd->add_option("--window", train_args.window_size,
                          "STFT window size in samples");
    train_cmd->add_option("--hop", train_args.hop_size,
                          "STFT hop size in samples");
    train_cmd->add_option("--precision", train_args.precision,
                          "Numeric precision mode (float64)");
    train_cmd->add_option("--hidden", train_args.hidden_size,
                          "LSTM hidden size per direction");
    train_cmd->add_option("--encoder-out", train_args.encoder_out,
                          "Encoder output width");
    train_cmd->add_option("--score-features", train_args.score_feature_size,
                          "Score feature width (score_informed variant)");
    train_cmd->add_flag("--no-io-norm", train_args.no_io_norm,
                        "Disable input/output normalization layers");
    add_common(train_cmd, train_args.common);

    SeparateArgs separate_args;
    CLI::App* separate_cmd = app.add_subcommand(
        "separate", "Split a mixture into stems using a trained checkpoint");
    separate_cmd->add_option("--model", separate_args.model, "Checkpoint path")
        ->required();
    separate_cmd->add_option("--mix", separate_args.mix, "Mixture WAV path")
        ->required();
    separate_cmd->add_option("--score", separate_args.score,
                             "Aligned note CSV (required by score-informed and "
                             "score-only models)");
    separate_cmd->add_option("--out", separate_args.out,
                             "Directory for one WAV per instrument")
        ->required();
    add_common(separate_cmd, separate_args.common);

    EvaluateArgs evaluate_args;
    CLI::App* evaluate_cmd = app.add_subcommand(
        "evaluate", "Frame-wise SDR of estimated stems against references");
    evaluate_cmd->add_option("--est", evaluate_args.est,
                             "Estimates directory (<song>/<instrument>.wav)")
        ->required();
    evaluate_cmd->add_option("--ref", evaluate_args.ref,
                             "References directory (<song>/<instrument>.wav or "
                             "dataset layout with stems/)")
        ->required();
    evaluate_cmd->add_option("--silence-threshold",
                             evaluate_args.silence_threshold,
                             "Peak level below which a reference window is "
                             "zeroed")
        ->capture_default_str();
    evaluate_cmd->add_option("--frame-sec", evaluate_args.frame_sec,
                             "Metric frame length in seconds")
        ->capture_default_str();
    evaluate_cmd->add_option("--report", evaluate_args.report,
                             "Write the JSON report here (otherwise stdout)");
    add_common(evaluate_cmd, evaluate_args.common);

    DenoiseArgs denoise_args;
    CLI::App* denoise_cmd = app.add_subcommand(
        "denoise", "Wiener-filter a recording using its silent-region noise");
    denoise_cmd->add_option("--in", denoise_args.in, "Input WAV path")
        ->required();
    denoise_cmd->add_option("--out", denoise_args.out, "Output WAV path")
        ->required();
    denoise_cmd->add_option("--threshold", denoise_args.threshold,
                            "Peak level below which a window counts as silent")
        ->capture_default_str();
    denoise_cmd->add_option("--noise", denoise_args.noise,
                            "Optional noise-only WAV to estimate the noise "
                            "spectrum from");
    add_common(denoise_cmd, denoise_args.common);

    RollArgs roll_args;
    CLI::App* roll_cmd = app.add_subcommand(
        "roll", "Rasterize a note CSV to a frame-by-pitch piano-roll CSV");
    roll_cmd->add_option("--score", roll_args.score, "Note CSV path")
        ->required();
    roll_cmd->add_option("--frames", roll_args.frames, "Number of frames")
        ->required()
        ->check(CLI::PositiveNumber);
    roll_cmd->add_option("--sr", roll_args.sample_rate, "Sample rate")
        ->capture_default_str();
    roll_cmd->add_option("--hop", roll_args.hop_size, "Hop size in samples")
        ->capture_default_str();
    roll_cmd->add_option("--out", roll_args.out, "Output CSV path")->required();
    add_common(roll_cmd, roll_args.common);

    try {
        app.parse(argc, argv);
        if (toygen->parsed()) run_toygen(toygen_args);
        if (train_cmd->parsed()) run_train(train_args, train_cmd);
        if (separate_cmd->parsed()) run_separate(separate_args, separate_cmd);
        if (evaluate_cmd->parsed()) run_evaluate(evaluate_args, evaluate_cmd);
        if (denoise_cmd->parsed()) run_denoise(denoise_args, denoise_cmd);
        if (roll_cmd->parsed()) run_roll(roll_args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
