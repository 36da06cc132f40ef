#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zsl/errors.hpp"
#include "zsl/random.hpp"
#include "zsl/types.hpp"
#include "zsl/zslf.hpp"

namespace zsl {

/// Label-keyed semantic class vectors. Stored as a ZSLF table with labels as ids.
class ClassVectorSet {
  public:
    ClassVectorSet() = default;
    explicit ClassVectorSet(FeatureTable table) : table_(std::move(table)) { table_.validate(); }

    std::uint32_t dim() const { return table_.dim(); }
    std::size_t size() const { return table_.size(); }
    bool empty() const { return table_.empty(); }
    const std::vector<std::string>& labels() const { return table_.ids(); }
    bool contains(std::string_view label) const { return table_.contains(label); }

    /// Throws ArgumentError for an unknown label.
    std::span<const float> at(std::string_view label) const {
        const auto row = table_.find(label);
        if (row < 0) {
            throw ArgumentError("no class vector for label '" + std::string(label) + "'");
        }
        return table_.vector(static_cast<std::size_t>(row));
    }

    const FeatureTable& table() const { return table_; }

    friend bool operator==(const ClassVectorSet&, const ClassVectorSet&) = default;

  private:
    FeatureTable table_;
};

inline ClassVectorSet load_class_vectors(const std::filesystem::path& path) {
    return ClassVectorSet(load_feature_file(path));
}

struct ManifestClass {
    std::string label;
    std::string text_doc_id;
    friend bool operator==(const ManifestClass&, const ManifestClass&) = default;
};

struct ManifestSample {
    std::string image_id;
    std::string class_label;
    friend bool operator==(const ManifestSample&, const ManifestSample&) = default;
};

/// Which images and which text document belong to which class.
struct Manifest {
    std::vector<ManifestClass> classes;
    std::vector<ManifestSample> samples;

    /// Unique class labels; every sample references a listed class.
    void validate() const {
        std::set<std::string_view> labels;
        for (const auto& c : classes) {
            if (!labels.insert(c.label).second) {
                throw ValidationError("manifest lists class '" + c.label + "' twice");
            }
        }
        for (const auto& s : samples) {
            if (!labels.contains(s.class_label)) {
                throw ValidationError("sample '" + s.image_id + "' references unknown class '" +
                                      s.class_label + "'");
            }
        }
    }

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        out.reserve(classes.size());
        for (const auto& c : classes) {
            out.push_back(c.label);
        }
        return out;
    }

    friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline nlohmann::json to_json(const Manifest& m) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : m.classes) {
        classes.push_back({{"label", c.label}, {"text_doc_id", c.text_doc_id}});
    }
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : m.samples) {
        samples.push_back({{"image_id", s.image_id}, {"class_label", s.class_label}});
    }
    return {{"classes", std::move(classes)}, {"samples", std::move(samples)}};
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
    try {
        Manifest m;
        for (const auto& c : j.at("classes")) {
            m.classes.push_back({c.at("label").get<std::string>(), c.at("text_doc_id").get<std::string>()});
        }
        for (const auto& s : j.at("samples")) {
            m.samples.push_back({s.at("image_id").get<std::string>(), s.at("class_label").get<std::string>()});
        }
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    }
}

inline nlohmann::json parse_json_file(const std::filesystem::path& path) {
    const auto text = detail::read_file_bytes(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

inline void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
    detail::write_file_bytes(path, j.dump(2) + "\n");
}

inline Manifest load_manifest(const std::filesystem::path& path) {
    return manifest_from_json(parse_json_file(path));
}

inline void write_manifest(const Manifest& m, const std::filesystem::path& path) {
    write_json_file(to_json(m), path);
}

/// Seeded partition of class labels into seen (training) and unseen (zero-shot) classes.
struct SplitSpec {
    std::uint64_t seed = 0;
    std::vector<std::string> seen_labels;
    std::vector<std::string> unseen_labels;

    friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

inline nlohmann::json to_json(const SplitSpec& s) {
    return {{"seed", s.seed}, {"seen", s.seen_labels}, {"unseen", s.unseen_labels}};
}

inline SplitSpec split_from_json(const nlohmann::json& j) {
    try {
        SplitSpec s;
        s.seed = j.at("seed").get<std::uint64_t>();
        s.seen_labels = j.at("seen").get<std::vector<std::string>>();
        s.unseen_labels = j.at("unseen").get<std::vector<std::string>>();
        std::set<std::string_view> all;
        for (const auto* list : {&s.seen_labels, &s.unseen_labels}) {
            for (const auto& l : *list) {
                if (!all.insert(l).second) {
                    throw ValidationError("split lists label '" + l + "' more than once");
                }
            }
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed split: ") + e.what());
    }
}

inline SplitSpec load_split(const std::filesystem::path& path) { return split_from_json(parse_json_file(path)); }

inline void write_split(const SplitSpec& s, const std::filesystem::path& path) {
    write_json_file(to_json(s), path);
}

/// Fisher-Yates shuffle of the sorted labels; the first `unseen_count` become unseen.
/// Both output lists are sorted, so the result does not depend on input order.
inline SplitSpec make_split(std::vector<std::string> labels, std::int64_t unseen_count, std::uint64_t seed) {
    std::sort(labels.begin(), labels.end());
    if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
        throw ArgumentError("split labels must be unique");
    }
    if (unseen_count <= 0 || unseen_count >= static_cast<std::int64_t>(labels.size())) {
        throw ArgumentError("unseen count must be in [1, " + std::to_string(labels.size()) + "), got " +
                            std::to_string(unseen_count));
    }
    Rng rng(seed);
    for (std::size_t i = labels.size() - 1; i > 0; --i) {
        std::swap(labels[i], labels[rng.index(i + 1)]);
    }
    const auto cut = labels.begin() + unseen_count;
    SplitSpec split;
    split.seed = seed;
    split.unseen_labels.assign(labels.begin(), cut);
    split.seen_labels.assign(cut, labels.end());
    std::sort(split.unseen_labels.begin(), split.unseen_labels.end());
    std::sort(split.seen_labels.begin(), split.seen_labels.end());
    return split;
}

/// Manifest class labels that have a class vector, in manifest order.
inline std::vector<std::string> labels_with_class_vectors(const Manifest& manifest, const ClassVectorSet& cv) {
    std::vector<std::string> out;
    for (const auto& c : manifest.classes) {
        if (cv.contains(c.label)) {
            out.push_back(c.label);
        }
    }
    return out;
}

/// Training or zero-shot rows ready for the network. Row i pairs images.row(i) with
/// texts.row(i); texts rows are the class's single document vector, replicated.
struct AssembledDataset {
    std::vector<std::string> label_order;
    std::vector<std::string> sample_ids;
    std::vector<int> label_index;
    MatrixF images;
    MatrixF texts;

    std::size_t size() const { return sample_ids.size(); }
    bool empty() const { return sample_ids.empty(); }
    std::size_t num_classes() const { return label_order.size(); }
    const std::string& label(std::size_t row) const { return label_order.at(label_index.at(row)); }

    /// Rows `rows` (in the given order); label_order is kept.
    AssembledDataset subset(std::span<const std::size_t> rows) const {
        AssembledDataset out;
        out.label_order = label_order;
        out.images.resize(static_cast<Eigen::Index>(rows.size()), images.cols());
        out.texts.resize(static_cast<Eigen::Index>(rows.size()), texts.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(rows[i]);
            out.sample_ids.push_back(sample_ids.at(rows[i]));
            out.label_index.push_back(label_index.at(rows[i]));
            out.images.row(static_cast<Eigen::Index>(i)) = images.row(r);
            out.texts.row(static_cast<Eigen::Index>(i)) = texts.row(r);
        }
        return out;
    }
};

struct AssemblyResult {
    AssembledDataset train;
    AssembledDataset zeroshot;
    std::vector<std::string> dropped_without_class_vector;
    std::vector<std::string> warnings;
};

/// Builds the seen (train) and unseen (zero-shot) datasets. Classes without a class
/// vector are dropped from both; classes without samples are left out of label_order.
inline AssemblyResult assemble_dataset(const FeatureTable& img, const FeatureTable& txt, const ClassVectorSet& cv,
                                       const Manifest& manifest, const SplitSpec& split) {
    manifest.validate();

    std::vector<std::string> missing;
    for (const auto& s : manifest.samples) {
        if (!img.contains(s.image_id)) {
            missing.push_back("image '" + s.image_id + "'");
        }
    }
    for (const auto& c : manifest.classes) {
        if (!txt.contains(c.text_doc_id)) {
            missing.push_back("text '" + c.text_doc_id + "' (class '" + c.label + "')");
        }
    }
    if (!missing.empty()) {
        std::string msg = "manifest references ids missing from feature files:";
        for (const auto& m : missing) {
            msg += " " + m + ";";
        }
        throw ReferentialIntegrityError(msg);
    }

    AssemblyResult result;
    std::map<std::string, const ManifestClass*> class_by_label;
    for (const auto& c : manifest.classes) {
        if (cv.contains(c.label)) {
            class_by_label.emplace(c.label, &c);
        } else {
            result.dropped_without_class_vector.push_back(c.label);
        }
    }

    std::map<std::string, std::size_t> sample_counts;
    for (const auto& s : manifest.samples) {
        ++sample_counts[s.class_label];
    }

    std::set<std::string> in_split;
    for (const auto* list : {&split.seen_labels, &split.unseen_labels}) {
        for (const auto& l : *list) {
            if (!cv.contains(l)) {
                continue;
            }
            if (!class_by_label.contains(l)) {
                throw ArgumentError("split label '" + l + "' is not a manifest class");
            }
            if (!in_split.insert(l).second) {
                throw ArgumentError("split lists label '" + l + "' as both seen and unseen");
            }
        }
    }
    for (const auto& [label, _] : class_by_label) {
        if (!in_split.contains(label)) {
            throw ArgumentError("class '" + label + "' is in neither the seen nor the unseen split");
        }
    }

    auto order_for = [&](const std::vector<std::string>& labels) {
        std::vector<std::string> order;
        for (const auto& l : labels) {
            if (!class_by_label.contains(l)) {
                continue;
            }
            if (sample_counts[l] == 0) {
                result.warnings.push_back("class '" + l + "' has no samples; excluded");
                continue;
            }
            order.push_back(l);
        }
        return order;
    };

    auto fill = [&](AssembledDataset& ds, std::vector<std::string> order) {
        ds.label_order = std::move(order);
        std::map<std::string, int> index;
        for (std::size_t i = 0; i < ds.label_order.size(); ++i) {
            index.emplace(ds.label_order[i], static_cast<int>(i));
        }
        std::vector<const ManifestSample*> rows;
        for (const auto& s : manifest.samples) {
            if (index.contains(s.class_label)) {
                rows.push_back(&s);
            }
        }
        const auto n = static_cast<Eigen::Index>(rows.size());
        ds.images.resize(n, img.dim());
        ds.texts.resize(n, txt.dim());
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto& s = *rows[static_cast<std::size_t>(r)];
            const auto iv = img.vector(static_cast<std::size_t>(img.find(s.image_id)));
            const auto& doc = class_by_label.at(s.class_label)->text_doc_id;
            const auto tv = txt.vector(static_cast<std::size_t>(txt.find(doc)));
            ds.images.row(r) = Eigen::Map<const RowVectorF>(iv.data(), static_cast<Eigen::Index>(iv.size()));
            ds.texts.row(r) = Eigen::Map<const RowVectorF>(tv.data(), static_cast<Eigen::Index>(tv.size()));
            ds.sample_ids.push_back(s.image_id);
            ds.label_index.push_back(index.at(s.class_label));
        }
    };

    fill(result.train, order_for(split.seen_labels));
    fill(result.zeroshot, order_for(split.unseen_labels));
    return result;
}

struct SyntheticOptions {
    /// Draw class vectors as |N(0,1)| so a ReLU semantic layer can reach them.
    bool nonnegative_class_vectors = false;
};

struct SyntheticData {
    FeatureTable images;
    FeatureTable texts;
    ClassVectorSet class_vectors;
    Manifest manifest;
};

/// Desk-scale stand-in for image features, text features and word vectors.
///
/// Class vectors are i.i.d. N(0,1) in `sem_dim`. Image vectors are a fixed random
/// linear map of the class vector plus N(0, noise_sigma) noise per sample; each
/// class's single text vector is a second fixed random linear map of its class
/// vector. Map entries are N(0, 1/sqrt(sem_dim)).
inline SyntheticData generate_synthetic(std::int64_t num_classes, std::int64_t n1, std::int64_t n2,
                                        std::int64_t sem_dim, std::int64_t per_class, double noise_sigma,
                                        std::uint64_t seed, SyntheticOptions options = {}) {
    if (num_classes <= 0 || n1 <= 0 || n2 <= 0 || sem_dim <= 0 || per_class <= 0) {
        throw ArgumentError("synthetic dimensions and counts must be positive");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw ArgumentError("noise_sigma must be finite and >= 0");
    }

    Rng class_rng(derive_seed(seed, 0));
    Rng map_rng(derive_seed(seed, 1));
    Rng noise_rng(derive_seed(seed, 2));

    const double map_sigma = 1.0 / std::sqrt(static_cast<double>(sem_dim));
    auto random_map = [&](std::int64_t rows) {
        Matrix<double> m(rows, sem_dim);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            m.data()[i] = map_rng.normal(0.0, map_sigma);
        }
        return m;
    };
    const Matrix<double> image_map = random_map(n1);
    const Matrix<double> text_map = random_map(n2);

    auto label_of = [](std::int64_t c) {
        std::string digits = std::to_string(c);
        return "class_" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') + digits;
    };

    SyntheticData out{FeatureTable(static_cast<std::uint32_t>(n1)), FeatureTable(static_cast<std::uint32_t>(n2)),
                      {}, {}};
    FeatureTable cv_table(static_cast<std::uint32_t>(sem_dim));
    std::vector<float> cvf(static_cast<std::size_t>(sem_dim));
    std::vector<float> buf;

    for (std::int64_t c = 0; c < num_classes; ++c) {
        Eigen::VectorXd cvec(sem_dim);
        for (Eigen::Index d = 0; d < sem_dim; ++d) {
            const double v = class_rng.normal();
            cvec[d] = options.nonnegative_class_vectors ? std::abs(v) : v;
        }
        // Features are generated from the float-rounded class vector that gets stored.
        for (Eigen::Index d = 0; d < sem_dim; ++d) {
            cvf[static_cast<std::size_t>(d)] = static_cast<float>(cvec[d]);
            cvec[d] = cvf[static_cast<std::size_t>(d)];
        }
        const auto label = label_of(c);
        cv_table.add(label, cvf);

        const Eigen::VectorXd text = text_map * cvec;
        buf.assign(text.data(), text.data() + text.size());
        const std::string doc_id = "doc_" + label;
        out.texts.add(doc_id, buf);
        out.manifest.classes.push_back({label, doc_id});

        const Eigen::VectorXd image_mean = image_map * cvec;
        for (std::int64_t s = 0; s < per_class; ++s) {
            buf.resize(static_cast<std::size_t>(n1));
            for (Eigen::Index d = 0; d < n1; ++d) {
                const double noise = noise_sigma > 0.0 ? noise_rng.normal(0.0, noise_sigma) : 0.0;
                buf[static_cast<std::size_t>(d)] = static_cast<float>(image_mean[d] + noise);
            }
            const std::string image_id = label + "/img_" + std::to_string(s);
            out.images.add(image_id, buf);
            out.manifest.samples.push_back({image_id, label});
        }
    }
    out.class_vectors = ClassVectorSet(std::move(cv_table));
    return out;
}

}  // namespace zsl
