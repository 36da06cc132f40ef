#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zsl/dataset.hpp"
#include "zsl/errors.hpp"
#include "zsl/network.hpp"
#include "zsl/random.hpp"
#include "zsl/semantic_space.hpp"
#include "zsl/trainer.hpp"

namespace zsl {

enum class CandidateMode { all_classes, unseen_only, seen_only };

inline std::string to_string(CandidateMode m) {
    switch (m) {
        case CandidateMode::all_classes: return "all_classes";
        case CandidateMode::unseen_only: return "unseen_only";
        case CandidateMode::seen_only: return "seen_only";
    }
    return "?";
}

inline CandidateMode candidate_mode_from_string(const std::string& s) {
    if (s == "all_classes") return CandidateMode::all_classes;
    if (s == "unseen_only") return CandidateMode::unseen_only;
    if (s == "seen_only") return CandidateMode::seen_only;
    throw ArgumentError("unknown candidate mode '" + s + "'");
}

enum class SearchBackend { kd_tree, linear_scan };

struct EvalConfig {
    std::vector<std::size_t> ks{1, 5, 10};
    CandidateMode candidate_mode = CandidateMode::unseen_only;
    double seen_holdout_fraction = 0.3;
    std::uint64_t seed = 0;
    bool normalize_class_vectors = false;
    SearchBackend search = SearchBackend::kd_tree;
    /// Also score against every class vector when the primary mode is restricted.
    bool report_all_classes = true;

    void validate() const {
        if (ks.empty()) throw ArgumentError("at least one k is required");
        for (std::size_t i = 0; i < ks.size(); ++i) {
            if (ks[i] == 0) throw ArgumentError("k must be positive");
            if (i > 0 && ks[i] <= ks[i - 1]) throw ArgumentError("ks must be strictly ascending");
        }
        if (!(seen_holdout_fraction > 0.0 && seen_holdout_fraction < 1.0)) {
            throw ArgumentError("seen holdout fraction must be in (0, 1)");
        }
    }
};

/// Top-k hit counts for one candidate set.
struct ModeResult {
    CandidateMode mode = CandidateMode::unseen_only;
    std::size_t n = 0;
    std::size_t candidates = 0;
    std::vector<std::size_t> ks;
    std::vector<std::size_t> hits;  // parallel to ks

    /// hits / n, or nullopt when there are no samples.
    std::optional<double> accuracy(std::size_t k) const {
        const auto it = std::find(ks.begin(), ks.end(), k);
        if (it == ks.end()) throw ArgumentError("k=" + std::to_string(k) + " was not evaluated");
        if (n == 0) return std::nullopt;
        return static_cast<double>(hits[static_cast<std::size_t>(it - ks.begin())]) / static_cast<double>(n);
    }
};

struct SamplePrediction {
    std::string id;
    std::string true_label;
    RankedLabels ranked;  // truncated to max k
};

struct EvalReport {
    EvalConfig config;
    /// Free-form provenance echoed into the report (training settings, data paths).
    nlohmann::json run = nlohmann::json::object();
    std::vector<ModeResult> modes;  // primary mode first
    std::vector<SamplePrediction> samples;

    const ModeResult& primary() const { return modes.at(0); }
    std::size_t n() const { return modes.empty() ? 0 : primary().n; }
    std::optional<double> accuracy(std::size_t k) const { return primary().accuracy(k); }

    const ModeResult* mode(CandidateMode m) const {
        for (const auto& r : modes) {
            if (r.mode == m) return &r;
        }
        return nullptr;
    }
};

/// True iff `true_label` is among the first k entries of `ranked`.
inline bool top_k_hit(const RankedLabels& ranked, const std::string& true_label, std::size_t k) {
    if (k > ranked.size()) {
        throw ArgumentError("k=" + std::to_string(k) + " exceeds ranked list length " + std::to_string(ranked.size()));
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (ranked[i].label == true_label) return true;
    }
    return false;
}

namespace detail {

inline ModeResult score_mode(const MatrixF& predicted, const AssembledDataset& dataset, const ClassVectorSet& cv,
                             CandidateMode mode, const std::vector<std::string>& candidates, const EvalConfig& config,
                             std::vector<SamplePrediction>* samples) {
    const auto max_k = config.ks.back();
    if (candidates.size() < max_k) {
        throw ArgumentError(to_string(mode) + " candidate set has " + std::to_string(candidates.size()) +
                            " labels, fewer than k=" + std::to_string(max_k));
    }
    const std::set<std::string> candidate_set(candidates.begin(), candidates.end());
    for (const auto& label : dataset.label_order) {
        if (!candidate_set.contains(label)) {
            throw ArgumentError("label '" + label + "' is not in the " + to_string(mode) + " candidate set");
        }
    }
    if (static_cast<std::size_t>(predicted.rows()) != dataset.size() ||
        static_cast<std::size_t>(predicted.cols()) != cv.dim()) {
        throw ArgumentError("prediction matrix does not match dataset rows and class vector dim");
    }

    const SemanticIndex index(cv, candidates, IndexOptions{8, config.normalize_class_vectors});
    ModeResult result{mode, dataset.size(), candidates.size(), config.ks, std::vector<std::size_t>(config.ks.size(), 0)};
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        const float* row = predicted.data() + r * static_cast<std::size_t>(predicted.cols());
        std::vector<float> query(row, row + predicted.cols());
        if (config.normalize_class_vectors) query = l2_normalized(query);
        auto ranked = config.search == SearchBackend::kd_tree ? index.query(query, max_k)
                                                              : index.linear_scan(query, max_k);
        const auto& truth = dataset.label(r);
        for (std::size_t i = 0; i < config.ks.size(); ++i) {
            result.hits[i] += top_k_hit(ranked, truth, config.ks[i]) ? 1 : 0;
        }
        if (samples) samples->push_back({dataset.sample_ids[r], truth, std::move(ranked)});
    }
    return result;
}

}  // namespace detail

/// Scores precomputed semantic predictions (one row per dataset row).
inline EvalReport evaluate_predictions(const MatrixF& predicted, const AssembledDataset& dataset,
                                       const ClassVectorSet& cv, const EvalConfig& config) {
    config.validate();
    EvalReport report;
    report.config = config;
    const auto& primary_candidates =
        config.candidate_mode == CandidateMode::all_classes ? cv.labels() : dataset.label_order;
    report.modes.push_back(detail::score_mode(predicted, dataset, cv, config.candidate_mode, primary_candidates,
                                              config, &report.samples));
    if (config.candidate_mode != CandidateMode::all_classes && config.report_all_classes) {
        report.modes.push_back(
            detail::score_mode(predicted, dataset, cv, CandidateMode::all_classes, cv.labels(), config, nullptr));
    }
    return report;
}

/// Predicts the semantic vector of every row and ranks candidate labels by distance.
/// Candidates are the dataset's own classes (unseen_only / seen_only) or every class
/// vector in `cv` (all_classes).
inline EvalReport evaluate(const Model<float>& model, const AssembledDataset& dataset, const ClassVectorSet& cv,
                           const EvalConfig& config) {
    const MatrixF predicted = dataset.empty()
                                  ? MatrixF(0, static_cast<Eigen::Index>(cv.dim()))
                                  : predict_semantic_batch(model, dataset.images, dataset.texts);
    return evaluate_predictions(predicted, dataset, cv, config);
}

struct HoldoutSplit {
    AssembledDataset train;
    AssembledDataset test;
    std::vector<std::string> warnings;
};

/// Per-class (stratified) seeded split: round(n * fraction) rows of each class,
/// clamped to [1, n-1], go to the test part. Classes with fewer than two rows are
/// dropped from both parts.
inline HoldoutSplit stratified_holdout(const AssembledDataset& data, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ArgumentError("holdout fraction must be in (0, 1)");
    }
    std::vector<std::vector<std::size_t>> rows_by_class(data.num_classes());
    for (std::size_t r = 0; r < data.size(); ++r) {
        rows_by_class[static_cast<std::size_t>(data.label_index[r])].push_back(r);
    }

    HoldoutSplit out;
    std::vector<std::string> kept_labels;
    std::vector<int> remap(data.num_classes(), -1);
    for (std::size_t c = 0; c < data.num_classes(); ++c) {
        if (rows_by_class[c].size() < 2) {
            out.warnings.push_back("class '" + data.label_order[c] + "' has " + std::to_string(rows_by_class[c].size()) +
                                   " sample(s); excluded from holdout evaluation");
            continue;
        }
        remap[c] = static_cast<int>(kept_labels.size());
        kept_labels.push_back(data.label_order[c]);
    }

    Rng rng(seed);
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (std::size_t c = 0; c < data.num_classes(); ++c) {
        auto rows = rows_by_class[c];
        if (remap[c] < 0) continue;
        for (std::size_t i = rows.size() - 1; i > 0; --i) {
            std::swap(rows[i], rows[rng.index(i + 1)]);
        }
        const auto n = static_cast<double>(rows.size());
        auto test_count = static_cast<std::size_t>(std::llround(n * fraction));
        test_count = std::clamp<std::size_t>(test_count, 1, rows.size() - 1);
        test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(test_count));
        train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(test_count), rows.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());

    auto relabel = [&](AssembledDataset ds) {
        ds.label_order = kept_labels;
        for (auto& idx : ds.label_index) idx = remap[static_cast<std::size_t>(idx)];
        return ds;
    };
    out.train = relabel(data.subset(train_rows));
    out.test = relabel(data.subset(test_rows));
    return out;
}

struct SeenEvalResult {
    EvalReport report;
    TrainHistory history;
    std::vector<std::string> warnings;
};

/// Seen-class protocol: split each class's rows (1 - fraction):fraction, train a
/// fresh model on the larger part and score the held-out part against the seen
/// classes.
inline SeenEvalResult seen_class_eval(const ArchitectureConfig& architecture, const TrainConfig& train_config,
                                      const ClassVectorSet& cv, const AssembledDataset& data_seen,
                                      EvalConfig config, const EpochCallback& on_epoch = {}) {
    config.validate();
    config.candidate_mode = CandidateMode::seen_only;
    auto split = stratified_holdout(data_seen, config.seen_holdout_fraction, config.seed);
    if (split.train.empty()) {
        throw ArgumentError("no class has enough samples for a holdout split");
    }
    auto model = init_model<float>(cv, split.train.label_order, architecture);
    SeenEvalResult result;
    result.history = train(model, split.train, train_config, on_epoch);
    result.report = evaluate(model, split.test, cv, config);
    result.warnings = std::move(split.warnings);
    return result;
}

inline nlohmann::json to_json(const EvalConfig& c) {
    return {{"ks", c.ks},
            {"candidate_mode", to_string(c.candidate_mode)},
            {"seen_holdout_fraction", c.seen_holdout_fraction},
            {"seed", c.seed},
            {"normalize_class_vectors", c.normalize_class_vectors},
            {"search", c.search == SearchBackend::kd_tree ? "kd_tree" : "linear_scan"}};
}

namespace detail {

inline nlohmann::json accuracy_json(const ModeResult& m) {
    nlohmann::json acc = nlohmann::json::object();
    for (auto k : m.ks) {
        const auto a = m.accuracy(k);
        acc["top" + std::to_string(k)] = a ? nlohmann::json(*a) : nlohmann::json(nullptr);
    }
    return acc;
}

inline std::string percent(std::optional<double> a) {
    if (!a) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *a * 100.0);
    return buf;
}

inline std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

}  // namespace detail

/// Machine-stable JSON form (object keys sorted).
inline nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json config = to_json(report.config);
    config["run"] = report.run;
    nlohmann::json modes = nlohmann::json::object();
    for (const auto& m : report.modes) {
        modes[to_string(m.mode)] = {{"n", m.n}, {"candidates", m.candidates}, {"accuracy", detail::accuracy_json(m)}};
    }
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : report.samples) {
        nlohmann::json ranked = nlohmann::json::array();
        for (const auto& r : s.ranked) ranked.push_back({{"label", r.label}, {"dist", r.distance}});
        samples.push_back({{"id", s.id}, {"true", s.true_label}, {"ranked", std::move(ranked)}});
    }
    return {{"config", std::move(config)},
            {"n", report.n()},
            {"accuracy", report.modes.empty() ? nlohmann::json::object() : detail::accuracy_json(report.primary())},
            {"modes", std::move(modes)},
            {"samples", std::move(samples)}};
}

enum class ReportFormat { text, json };

/// Text form: one row per candidate mode with top-k accuracies in percent, then
/// (optionally) each sample's ranked labels, nearest on the left.
inline std::string render_report(const EvalReport& report, ReportFormat format, bool include_samples = false) {
    if (format == ReportFormat::json) {
        auto j = report_to_json(report);
        if (!include_samples) j.erase("samples");
        return j.dump(2) + "\n";
    }
    std::ostringstream out;
    const auto& ks = report.config.ks;
    out << detail::pad("mode", 14) << detail::pad("n", 8) << detail::pad("candidates", 12);
    for (auto k : ks) out << detail::pad("top-" + std::to_string(k) + " (%)", 14);
    out << "\n";
    for (const auto& m : report.modes) {
        out << detail::pad(to_string(m.mode), 14) << detail::pad(std::to_string(m.n), 8)
            << detail::pad(std::to_string(m.candidates), 12);
        for (auto k : ks) out << detail::pad(detail::percent(m.accuracy(k)), 14);
        out << "\n";
    }
    if (report.modes.empty()) {
        out << detail::pad(to_string(report.config.candidate_mode), 14) << detail::pad("0", 8) << detail::pad("0", 12);
        for (std::size_t i = 0; i < ks.size(); ++i) out << detail::pad("n/a", 14);
        out << "\n";
    }
    if (include_samples) {
        out << "\n";
        for (const auto& s : report.samples) {
            out << s.id << "  true=" << s.true_label << "  nearest:";
            for (const auto& r : s.ranked) {
                char dist[32];
                std::snprintf(dist, sizeof dist, "%.4f", r.distance);
                out << " " << r.label << " (" << dist << ")";
            }
            out << "\n";
        }
    }
    return out.str();
}

}  // namespace zsl
