// zsl: command-line driver for data preparation, training, evaluation and
// prediction with the zero-shot semantic embedding network.
//
// Exit codes: 0 success, 2 usage or input error, 3 numeric failure,
// 4 checkpoint or artifact mismatch.

#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zsl/zsl.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitArtifact = 4;

/// Input files shared by most commands. Empty paths fall back to the data directory.
struct DataPaths {
    std::string data_dir;
    std::string images;
    std::string texts;
    std::string classes;
    std::string manifest;
    std::string split;
    std::string checkpoint;

    fs::path dir() const { return data_dir.empty() ? fs::path(".") : fs::path(data_dir); }
    fs::path resolve(const std::string& given, const char* default_name) const {
        return given.empty() ? dir() / default_name : fs::path(given);
    }
    fs::path images_path() const { return resolve(images, "images.zslf"); }
    fs::path texts_path() const { return resolve(texts, "texts.zslf"); }
    fs::path classes_path() const { return resolve(classes, "classes.zslf"); }
    fs::path manifest_path() const { return resolve(manifest, "manifest.json"); }
    fs::path split_path() const { return resolve(split, "split.json"); }
    fs::path checkpoint_path() const { return resolve(checkpoint, "model.zsla"); }
};

void add_data_options(CLI::App* cmd, DataPaths& p) {
    cmd->add_option("--data-dir", p.data_dir, "Directory holding the default input files ($ZSL_DATA_DIR)");
    cmd->add_option("--images", p.images, "Image feature ZSLF file");
    cmd->add_option("--texts", p.texts, "Text document feature ZSLF file");
    cmd->add_option("--classes", p.classes, "Class vector ZSLF file");
    cmd->add_option("--manifest", p.manifest, "Manifest JSON");
    cmd->add_option("--split", p.split, "Split JSON");
    cmd->add_option("--checkpoint", p.checkpoint, "Model checkpoint archive");
}

/// Advisory lock on an output directory; a second command on the same directory fails.
class DirectoryLock {
  public:
    explicit DirectoryLock(const fs::path& dir) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        const auto path = dir / ".zsl.lock";
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) {
            throw zsl::IoError("cannot open lock file " + path.string());
        }
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            throw zsl::IoError("output directory " + dir.string() + " is in use by another zsl command");
        }
    }
    ~DirectoryLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

  private:
    int fd_ = -1;
};

fs::path parent_dir(const fs::path& file) {
    return file.has_parent_path() ? file.parent_path() : fs::path(".");
}

/// Any failure to read or match the checkpoint is an artifact mismatch.
zsl::Checkpoint load_checkpoint_or_mismatch(const fs::path& path) {
    try {
        return zsl::load_checkpoint(path);
    } catch (const zsl::ArtifactMismatchError&) {
        throw;
    } catch (const zsl::Error& e) {
        throw zsl::ArtifactMismatchError("cannot use checkpoint " + path.string() + ": " + e.what());
    }
}

struct LoadedData {
    zsl::FeatureTable images{1};
    zsl::FeatureTable texts{1};
    zsl::ClassVectorSet class_vectors;
    zsl::Manifest manifest;
};

LoadedData load_data(const DataPaths& p, bool need_manifest = true) {
    LoadedData d;
    d.images = zsl::load_feature_file(p.images_path());
    d.texts = zsl::load_feature_file(p.texts_path());
    d.class_vectors = zsl::load_class_vectors(p.classes_path());
    if (need_manifest) d.manifest = zsl::load_manifest(p.manifest_path());
    return d;
}

zsl::AssemblyResult assemble(const LoadedData& d, const zsl::SplitSpec& split) {
    auto result = zsl::assemble_dataset(d.images, d.texts, d.class_vectors, d.manifest, split);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    if (!result.dropped_without_class_vector.empty()) {
        std::cerr << "note: dropped " << result.dropped_without_class_vector.size()
                  << " class(es) without a class vector\n";
    }
    return result;
}

void check_model_fits(const zsl::Model<float>& model, const LoadedData& d) {
    const auto& c = model.config;
    if (c.visual_dim != d.images.dim() || c.text_dim != d.texts.dim() || c.semantic_dim != d.class_vectors.dim()) {
        throw zsl::ArtifactMismatchError(
            "checkpoint expects image/text/class dims " + std::to_string(c.visual_dim) + "/" +
            std::to_string(c.text_dim) + "/" + std::to_string(c.semantic_dim) + " but data has " +
            std::to_string(d.images.dim()) + "/" + std::to_string(d.texts.dim()) + "/" +
            std::to_string(d.class_vectors.dim()));
    }
}

std::string format_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string epoch_line(const zsl::EpochStats& s) {
    return "epoch=" + std::to_string(s.epoch) + " loss=" + format_fixed(s.mean_loss, 6) +
           " top1=" + format_fixed(s.train_top1, 4) + " secs=" + format_fixed(s.elapsed_seconds, 3);
}

// ---------------------------------------------------------------------------- synth

struct SynthArgs {
    std::int64_t classes = 20;
    std::int64_t per_class = 30;
    std::int64_t n1 = 64;
    std::int64_t n2 = 32;
    std::int64_t sem_dim = 16;
    double noise = 0.05;
    std::uint64_t seed = 0;
    bool nonnegative = false;
    std::string out;
};

int cmd_synth(const SynthArgs& a, const DataPaths& p) {
    const fs::path out = a.out.empty() ? p.dir() : fs::path(a.out);
    const DirectoryLock lock(out);
    const auto data = zsl::generate_synthetic(a.classes, a.n1, a.n2, a.sem_dim, a.per_class, a.noise, a.seed,
                                              zsl::SyntheticOptions{a.nonnegative});
    zsl::write_feature_file(data.images, out / "images.zslf");
    zsl::write_feature_file(data.texts, out / "texts.zslf");
    zsl::write_feature_file(data.class_vectors.table(), out / "classes.zslf");
    zsl::write_manifest(data.manifest, out / "manifest.json");
    std::cout << "wrote " << data.manifest.classes.size() << " classes, " << data.images.size() << " images to "
              << out.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------- split

struct SplitArgs {
    std::int64_t unseen = 25;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_split(const SplitArgs& a, const DataPaths& p) {
    const auto manifest = zsl::load_manifest(p.manifest_path());
    manifest.validate();
    const auto cv = zsl::load_class_vectors(p.classes_path());
    const auto labels = zsl::labels_with_class_vectors(manifest, cv);
    const auto split = zsl::make_split(labels, a.unseen, a.seed);
    const fs::path out = a.out.empty() ? p.split_path() : fs::path(a.out);
    const DirectoryLock lock(parent_dir(out));
    zsl::write_split(split, out);
    std::cout << "seen=" << split.seen_labels.size() << " unseen=" << split.unseen_labels.size() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------- train

struct TrainArgs {
    double lr = zsl::TrainConfig{}.learning_rate;
    std::size_t batch = zsl::TrainConfig{}.batch_size;
    std::size_t epochs = zsl::TrainConfig{}.max_epochs;
    std::size_t patience = zsl::TrainConfig{}.early_stop_patience;
    std::uint64_t seed = 0;
    std::string semantic_activation = "relu";
    std::string history;
};

int cmd_train(const TrainArgs& a, const DataPaths& p) {
    zsl::TrainConfig tc;
    tc.learning_rate = a.lr;
    tc.batch_size = a.batch;
    tc.max_epochs = a.epochs;
    tc.early_stop_patience = a.patience;
    tc.seed = a.seed;
    tc.validate();

    const auto d = load_data(p);
    const auto split = zsl::load_split(p.split_path());
    const auto data = assemble(d, split);
    if (data.train.empty()) throw zsl::ArgumentError("no training samples for the seen classes");

    const auto arch = zsl::ArchitectureConfig::tapered(d.images.dim(), d.texts.dim(), d.class_vectors.dim(),
                                                       zsl::activation_from_string(a.semantic_activation), a.seed);
    auto model = zsl::init_model<float>(d.class_vectors, data.train.label_order, arch);

    const fs::path ckpt = p.checkpoint_path();
    const fs::path out_dir = parent_dir(ckpt);
    const DirectoryLock lock(out_dir);
    const fs::path history_path = a.history.empty() ? out_dir / "history.log" : fs::path(a.history);
    std::ofstream history(history_path, std::ios::trunc);
    if (!history) throw zsl::IoError("cannot write " + history_path.string());
    fs::path best_path = ckpt;
    best_path.replace_extension(".best.zsla");

    const auto on_epoch = [&](const zsl::EpochStats& s, const zsl::Model<float>& m) {
        const auto line = epoch_line(s);
        std::cout << line << "\n";
        history << line << "\n";
        if (s.best_so_far) zsl::save_checkpoint(m, best_path, tc);
    };
    const auto hist = zsl::train(model, data.train, tc, on_epoch);
    zsl::save_checkpoint(model, ckpt, tc);
    std::cerr << "trained " << hist.epochs.size() << " epoch(s); checkpoint " << ckpt.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------- eval

struct EvalArgs {
    std::string mode = "unseen";
    double holdout = 0.3;
    std::uint64_t seed = 0;
    std::string format = "text";
    std::vector<std::size_t> ks{1, 5, 10};
    std::size_t repeats = 1;
    bool normalize = false;
    bool samples = false;
    std::string out;
};

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Mean and sample standard deviation of top-k accuracy across repeated runs.
std::string render_repeats(const std::vector<zsl::EvalReport>& runs, const std::vector<std::size_t>& ks,
                           zsl::ReportFormat format) {
    nlohmann::json summary = nlohmann::json::object();
    std::ostringstream text;
    text << "repeats=" << runs.size() << "\n";
    for (auto k : ks) {
        std::vector<double> acc;
        for (const auto& r : runs) {
            if (const auto a = r.accuracy(k)) acc.push_back(*a);
        }
        const std::string key = "top" + std::to_string(k);
        if (acc.empty()) {
            summary[key] = nullptr;
            text << "top-" << k << " (%): n/a\n";
            continue;
        }
        summary[key] = {{"mean", mean_of(acc)}, {"std", sample_std(acc)}};
        text << "top-" << k << " (%): " << format_fixed(mean_of(acc) * 100.0, 2) << " +- "
             << format_fixed(sample_std(acc) * 100.0, 2) << "\n";
    }
    if (format == zsl::ReportFormat::text) return text.str();
    nlohmann::json j;
    j["repeats"] = runs.size();
    j["summary"] = std::move(summary);
    j["runs"] = nlohmann::json::array();
    for (const auto& r : runs) {
        auto rj = zsl::report_to_json(r);
        rj.erase("samples");
        j["runs"].push_back(std::move(rj));
    }
    return j.dump(2) + "\n";
}

int cmd_eval(const EvalArgs& a, const DataPaths& p) {
    zsl::EvalConfig ec;
    ec.ks = a.ks;
    ec.seen_holdout_fraction = a.holdout;
    ec.seed = a.seed;
    ec.normalize_class_vectors = a.normalize;
    ec.validate();
    const auto format = a.format == "json" ? zsl::ReportFormat::json : zsl::ReportFormat::text;
    if (a.repeats == 0) throw zsl::ArgumentError("--repeats must be positive");
    if (a.repeats > 1 && a.mode != "seen") {
        throw zsl::ArgumentError("--repeats retrains models and applies to --mode seen only");
    }

    const auto ckpt = load_checkpoint_or_mismatch(p.checkpoint_path());
    const auto d = load_data(p);
    check_model_fits(ckpt.model, d);
    const auto split = zsl::load_split(p.split_path());
    const auto data = assemble(d, split);
    const zsl::TrainConfig tc = ckpt.train_config.value_or(zsl::TrainConfig{});

    std::string rendered;
    if (a.mode == "seen") {
        std::vector<zsl::EvalReport> runs;
        for (std::size_t r = 0; r < a.repeats; ++r) {
            auto run_ec = ec;
            run_ec.seed = a.seed + r;
            auto run_tc = tc;
            run_tc.seed = tc.seed + r;
            auto arch = ckpt.model.config;
            arch.seed = ckpt.model.config.seed + r;
            auto result = zsl::seen_class_eval(arch, run_tc, d.class_vectors, data.train, run_ec);
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
            result.report.run = {{"train", zsl::to_json(run_tc)}, {"epochs_trained", result.history.epochs.size()}};
            runs.push_back(std::move(result.report));
        }
        rendered = runs.size() == 1 ? zsl::render_report(runs.front(), format, a.samples)
                                    : render_repeats(runs, ec.ks, format);
    } else {
        if (a.mode == "unseen") {
            ec.candidate_mode = zsl::CandidateMode::unseen_only;
        } else if (a.mode == "all") {
            ec.candidate_mode = zsl::CandidateMode::all_classes;
        } else {
            throw zsl::ArgumentError("unknown --mode '" + a.mode + "'");
        }
        if (ckpt.model.label_order != data.train.label_order) {
            throw zsl::ArtifactMismatchError("checkpoint was trained on a different set of seen classes");
        }
        auto report = zsl::evaluate(ckpt.model, data.zeroshot, d.class_vectors, ec);
        report.run = {{"train", zsl::to_json(tc)}, {"checkpoint", p.checkpoint_path().string()}};
        rendered = zsl::render_report(report, format, a.samples);
    }
    std::cout << rendered;
    if (!a.out.empty()) zsl::detail::write_file_bytes(a.out, rendered);
    return kExitOk;
}

// ---------------------------------------------------------------------------- predict

struct PredictArgs {
    std::string image_id;
    std::string doc_id;
    std::vector<float> image_values;
    std::vector<float> text_values;
    std::size_t k = 5;
    std::string candidates = "all";
};

int cmd_predict(const PredictArgs& a, const DataPaths& p) {
    if (a.k == 0) throw zsl::ArgumentError("--k must be positive");
    const auto ckpt = load_checkpoint_or_mismatch(p.checkpoint_path());
    const auto cv = zsl::load_class_vectors(p.classes_path());

    std::vector<float> x = a.image_values;
    std::vector<float> t = a.text_values;
    if (x.empty()) {
        if (a.image_id.empty()) throw zsl::ArgumentError("give --image-id or --image-values");
        const auto images = zsl::load_feature_file(p.images_path());
        const auto row = images.find(a.image_id);
        if (row < 0) throw zsl::ArgumentError("unknown image id '" + a.image_id + "'");
        const auto v = images.vector(static_cast<std::size_t>(row));
        x.assign(v.begin(), v.end());
    }
    if (t.empty()) {
        if (a.doc_id.empty()) throw zsl::ArgumentError("give --doc-id or --text-values");
        const auto texts = zsl::load_feature_file(p.texts_path());
        const auto row = texts.find(a.doc_id);
        if (row < 0) throw zsl::ArgumentError("unknown text document id '" + a.doc_id + "'");
        const auto v = texts.vector(static_cast<std::size_t>(row));
        t.assign(v.begin(), v.end());
    }
    const auto& c = ckpt.model.config;
    if (x.size() != c.visual_dim || t.size() != c.text_dim || cv.dim() != c.semantic_dim) {
        throw zsl::ArtifactMismatchError("input or class vector dims do not match the checkpoint");
    }

    std::optional<std::vector<std::string>> candidates;
    if (a.candidates == "seen" || a.candidates == "unseen") {
        const auto split = zsl::load_split(p.split_path());
        candidates = a.candidates == "seen" ? split.seen_labels : split.unseen_labels;
        std::erase_if(*candidates, [&](const std::string& l) { return !cv.contains(l); });
    } else if (a.candidates != "all") {
        throw zsl::ArgumentError("unknown --candidates '" + a.candidates + "'");
    }
    const zsl::SemanticIndex index(cv, candidates);
    const auto s = zsl::predict_semantic(ckpt.model, x, t);
    const auto ranked = index.query(std::span<const float>(s.data(), static_cast<std::size_t>(s.size())), a.k);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        std::cout << i + 1 << " " << ranked[i].label << " " << format_fixed(ranked[i].distance, 6) << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------- gradcheck

struct GradcheckArgs {
    std::uint64_t seed = 0;
    std::size_t classes = 5;
    std::size_t batch = 4;
    bool batch_statistics = false;
    std::string semantic_activation = "relu";
};

int cmd_gradcheck(const GradcheckArgs& a) {
    zsl::GradientCheckOptions opt;
    opt.batch_size = a.batch;
    opt.batch_statistics = a.batch_statistics;
    const auto arch = zsl::tiny_gradcheck_architecture(zsl::activation_from_string(a.semantic_activation));
    const auto r = zsl::gradient_check(arch, a.classes, a.seed, opt);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", r.max_relative_error);
    std::cout << "max_rel_err=" << buf << " checked=" << r.checked << " excluded=" << r.excluded << "\n";
    return r.max_relative_error < 1e-4 ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot image classification via a learned semantic embedding"};
    app.require_subcommand(1);

    DataPaths paths;
    if (const char* env = std::getenv("ZSL_DATA_DIR")) paths.data_dir = env;

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset (four files)");
    synth_cmd->add_option("--classes", synth.classes, "Number of classes")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--per-class", synth.per_class, "Images per class")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--n1", synth.n1, "Image feature dim")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--n2", synth.n2, "Text feature dim")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--sem-dim", synth.sem_dim, "Class vector dim")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--noise", synth.noise, "Image noise standard deviation")->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--seed", synth.seed, "Random seed");
    synth_cmd->add_flag("--nonnegative", synth.nonnegative, "Draw class vectors as |N(0,1)|");
    synth_cmd->add_option("--out", synth.out, "Output directory (default: data directory)");
    synth_cmd->add_option("--data-dir", paths.data_dir, "Data directory ($ZSL_DATA_DIR)");

    SplitArgs split;
    auto* split_cmd = app.add_subcommand("split", "Choose seen and unseen classes");
    add_data_options(split_cmd, paths);
    split_cmd->add_option("--unseen", split.unseen, "Number of unseen classes");
    split_cmd->add_option("--seed", split.seed, "Random seed");
    split_cmd->add_option("--out", split.out, "Output split JSON (default: --split)");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train on the seen classes");
    add_data_options(train_cmd, paths);
    train_cmd->add_option("--lr", train.lr, "Learning rate");
    train_cmd->add_option("--batch", train.batch, "Mini-batch size")->check(CLI::PositiveNumber);
    train_cmd->add_option("--epochs", train.epochs, "Maximum epochs");
    train_cmd->add_option("--patience", train.patience, "Early-stop patience in epochs (0 disables)");
    train_cmd->add_option("--seed", train.seed, "Random seed (weights, shuffling, dropout)");
    train_cmd->add_option("--semantic-activation", train.semantic_activation, "Semantic layer activation")
        ->check(CLI::IsMember({"relu", "linear"}));
    train_cmd->add_option("--history", train.history, "History log (default: history.log next to checkpoint)");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Score top-k accuracy");
    add_data_options(eval_cmd, paths);
    eval_cmd->add_option("--mode", eval.mode, "unseen: zero-shot; seen: retrain on a holdout split; all")
        ->check(CLI::IsMember({"unseen", "seen", "all"}));
    eval_cmd->add_option("--holdout", eval.holdout, "Seen-class test fraction");
    eval_cmd->add_option("--seed", eval.seed, "Holdout seed");
    eval_cmd->add_option("--format", eval.format, "Report format")->check(CLI::IsMember({"text", "json"}));
    eval_cmd->add_option("--k", eval.ks, "Ascending list of k")->delimiter(',');
    eval_cmd->add_option("--repeats", eval.repeats, "Seen-mode repetitions reported as mean +- std");
    eval_cmd->add_flag("--normalize", eval.normalize, "Rank by cosine distance");
    eval_cmd->add_flag("--samples", eval.samples, "Include per-sample rankings");
    eval_cmd->add_option("--out", eval.out, "Also write the report to this file");

    PredictArgs predict;
    auto* predict_cmd = app.add_subcommand("predict", "Rank labels for one image and text document");
    add_data_options(predict_cmd, paths);
    predict_cmd->add_option("--image-id", predict.image_id, "Image id in the image feature file");
    predict_cmd->add_option("--doc-id", predict.doc_id, "Document id in the text feature file");
    predict_cmd->add_option("--image-values", predict.image_values, "Raw image vector")->delimiter(',');
    predict_cmd->add_option("--text-values", predict.text_values, "Raw text vector")->delimiter(',');
    predict_cmd->add_option("--k", predict.k, "Number of labels");
    predict_cmd->add_option("--candidates", predict.candidates, "Candidate labels")
        ->check(CLI::IsMember({"all", "seen", "unseen"}));

    GradcheckArgs gradcheck;
    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients on a tiny model");
    gradcheck_cmd->add_option("--seed", gradcheck.seed, "Random seed");
    gradcheck_cmd->add_option("--classes", gradcheck.classes, "Output classes")->check(CLI::PositiveNumber);
    gradcheck_cmd->add_option("--batch", gradcheck.batch, "Batch size")->check(CLI::PositiveNumber);
    gradcheck_cmd->add_flag("--batch-statistics", gradcheck.batch_statistics, "Check training-mode batchnorm");
    gradcheck_cmd->add_option("--semantic-activation", gradcheck.semantic_activation, "Semantic layer activation")
        ->check(CLI::IsMember({"relu", "linear"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*synth_cmd) return cmd_synth(synth, paths);
        if (*split_cmd) return cmd_split(split, paths);
        if (*train_cmd) return cmd_train(train, paths);
        if (*eval_cmd) return cmd_eval(eval, paths);
        if (*predict_cmd) return cmd_predict(predict, paths);
        if (*gradcheck_cmd) return cmd_gradcheck(gradcheck);
    } catch (const zsl::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const zsl::ArtifactMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitArtifact;
    } catch (const zsl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
