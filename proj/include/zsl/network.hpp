#pragma once

// Visual reducer -> fusion trunk -> semantic layer -> frozen class-vector output layer.
//
// The reducer maps the visual feature vector to a lower dimension. Its output is
// concatenated with the text feature vector and fed through the trunk, whose last
// layer is the semantic layer. The output layer's weight matrix holds the seen
// classes' class vectors as columns, so the logits are inner products between the
// semantic activation and each class vector; softmax over them gives class
// probabilities during training. At zero-shot time the softmax is dropped and the
// semantic activation is the prediction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zsl/dataset.hpp"
#include "zsl/errors.hpp"
#include "zsl/random.hpp"
#include "zsl/types.hpp"

namespace zsl {

enum class Activation { relu, linear, softmax };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::linear: return "linear";
        case Activation::softmax: return "softmax";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "linear") return Activation::linear;
    if (s == "softmax") return Activation::softmax;
    throw ConfigError("unknown activation '" + s + "'");
}

struct LayerSpec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Activation activation = Activation::relu;
    bool has_batchnorm = false;
    double dropout_rate = 0.0;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ArchitectureConfig {
    std::size_t visual_dim = 0;
    std::size_t text_dim = 0;
    std::size_t semantic_dim = 0;
    /// Visual reducer; empty means the raw visual vector goes to the trunk.
    std::vector<LayerSpec> reducer;
    /// Fusion trunk; the last layer is the semantic layer (out_dim == semantic_dim).
    std::vector<LayerSpec> trunk;
    bool train_output_layer = false;
    double batchnorm_momentum = 0.99;
    double batchnorm_epsilon = 1e-3;
    std::uint64_t seed = 0;

    std::size_t reduced_dim() const { return reducer.empty() ? visual_dim : reducer.back().out_dim; }

    void validate() const {
        if (visual_dim == 0 || text_dim == 0 || semantic_dim == 0) {
            throw ConfigError("visual, text and semantic dims must be positive");
        }
        if (trunk.empty()) {
            throw ConfigError("trunk needs at least the semantic layer");
        }
        auto check_chain = [](const std::vector<LayerSpec>& layers, std::size_t in, const char* name) {
            for (std::size_t i = 0; i < layers.size(); ++i) {
                const auto& l = layers[i];
                if (l.in_dim != in) {
                    throw ConfigError(std::string(name) + " layer " + std::to_string(i) + " expects input " +
                                      std::to_string(l.in_dim) + " but receives " + std::to_string(in));
                }
                if (l.out_dim == 0) {
                    throw ConfigError(std::string(name) + " layer " + std::to_string(i) + " has zero width");
                }
                if (l.activation == Activation::softmax) {
                    throw ConfigError("softmax is reserved for the output layer");
                }
                if (!(l.dropout_rate >= 0.0 && l.dropout_rate < 1.0)) {
                    throw ConfigError("dropout rate must be in [0, 1)");
                }
                in = l.out_dim;
            }
        };
        check_chain(reducer, visual_dim, "reducer");
        check_chain(trunk, reduced_dim() + text_dim, "trunk");
        if (trunk.back().out_dim != semantic_dim) {
            throw ConfigError("semantic layer width " + std::to_string(trunk.back().out_dim) +
                              " differs from class vector dim " + std::to_string(semantic_dim));
        }
        if (!(batchnorm_momentum >= 0.0 && batchnorm_momentum < 1.0) || !(batchnorm_epsilon > 0.0)) {
            throw ConfigError("batchnorm momentum must be in [0,1) and epsilon positive");
        }
    }

    /// Hidden layers of the default architecture are never narrower than this.
    static constexpr std::size_t kMinHiddenWidth = 256;

    /// Default tapering architecture. For 4096/1024/300 inputs this gives the reducer
    /// 4096->2048->1536->1024 and trunk 2048->1536->1024->768->512->300; other
    /// sizes scale the same fractions, floored at kMinHiddenWidth. The reducer's
    /// output matches the text dim.
    static ArchitectureConfig tapered(std::size_t visual_dim, std::size_t text_dim, std::size_t semantic_dim,
                                      Activation semantic_activation = Activation::relu, std::uint64_t seed = 0) {
        ArchitectureConfig c;
        c.visual_dim = visual_dim;
        c.text_dim = text_dim;
        c.semantic_dim = semantic_dim;
        c.seed = seed;
        auto width = [](std::size_t base, std::size_t num, std::size_t den) {
            return std::max<std::size_t>(kMinHiddenWidth, base * num / den);
        };
        const std::size_t reducer_out[] = {width(visual_dim, 1, 2), width(visual_dim, 3, 8), text_dim};
        std::size_t in = visual_dim;
        for (auto out : reducer_out) {
            c.reducer.push_back({in, out, Activation::relu, true, 0.3});
            in = out;
        }
        const std::size_t trunk_in = in + text_dim;
        const std::size_t trunk_out[] = {width(trunk_in, 3, 4), width(trunk_in, 1, 2), width(trunk_in, 3, 8),
                                         width(trunk_in, 1, 4)};
        in = trunk_in;
        for (auto out : trunk_out) {
            c.trunk.push_back({in, out, Activation::relu, false, 0.2});
            in = out;
        }
        c.trunk.push_back({in, semantic_dim, semantic_activation, false, 0.0});
        return c;
    }

    friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

inline nlohmann::json to_json(const LayerSpec& l) {
    return {{"in_dim", l.in_dim},
            {"out_dim", l.out_dim},
            {"activation", to_string(l.activation)},
            {"batchnorm", l.has_batchnorm},
            {"dropout", l.dropout_rate}};
}

inline LayerSpec layer_spec_from_json(const nlohmann::json& j) {
    return {j.at("in_dim").get<std::size_t>(), j.at("out_dim").get<std::size_t>(),
            activation_from_string(j.at("activation").get<std::string>()), j.at("batchnorm").get<bool>(),
            j.at("dropout").get<double>()};
}

inline nlohmann::json to_json(const ArchitectureConfig& c) {
    nlohmann::json reducer = nlohmann::json::array();
    for (const auto& l : c.reducer) reducer.push_back(to_json(l));
    nlohmann::json trunk = nlohmann::json::array();
    for (const auto& l : c.trunk) trunk.push_back(to_json(l));
    return {{"visual_dim", c.visual_dim},
            {"text_dim", c.text_dim},
            {"semantic_dim", c.semantic_dim},
            {"reducer", std::move(reducer)},
            {"trunk", std::move(trunk)},
            {"train_output_layer", c.train_output_layer},
            {"batchnorm_momentum", c.batchnorm_momentum},
            {"batchnorm_epsilon", c.batchnorm_epsilon},
            {"seed", c.seed}};
}

inline ArchitectureConfig architecture_from_json(const nlohmann::json& j) {
    try {
        ArchitectureConfig c;
        c.visual_dim = j.at("visual_dim").get<std::size_t>();
        c.text_dim = j.at("text_dim").get<std::size_t>();
        c.semantic_dim = j.at("semantic_dim").get<std::size_t>();
        for (const auto& l : j.at("reducer")) c.reducer.push_back(layer_spec_from_json(l));
        for (const auto& l : j.at("trunk")) c.trunk.push_back(layer_spec_from_json(l));
        c.train_output_layer = j.at("train_output_layer").get<bool>();
        c.batchnorm_momentum = j.at("batchnorm_momentum").get<double>();
        c.batchnorm_epsilon = j.at("batchnorm_epsilon").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed architecture config: ") + e.what());
    }
}

template <typename T>
struct Layer {
    LayerSpec spec;
    Matrix<T> weight;  // in x out
    Matrix<T> bias;    // 1 x out
    Matrix<T> gamma;   // 1 x out, batchnorm only
    Matrix<T> beta;
    Matrix<T> running_mean;
    Matrix<T> running_var;
};

template <typename T>
struct Model {
    ArchitectureConfig config;
    std::vector<Layer<T>> reducer;
    std::vector<Layer<T>> trunk;
    Matrix<T> output_weights;  // semantic_dim x C_seen; column c is label_order[c]'s class vector
    std::vector<std::string> label_order;

    std::size_t num_classes() const { return label_order.size(); }

    /// Visits every trainable tensor in a fixed order.
    template <typename Fn>
    void for_each_trainable(Fn&& fn) {
        visit_layers([&](const std::string& prefix, Layer<T>& l) {
            fn(prefix + ".weight", l.weight);
            fn(prefix + ".bias", l.bias);
            if (l.spec.has_batchnorm) {
                fn(prefix + ".gamma", l.gamma);
                fn(prefix + ".beta", l.beta);
            }
        });
        if (config.train_output_layer) {
            fn(std::string("output.weight"), output_weights);
        }
    }

    /// Visits every stored tensor (trainable, running statistics, output layer).
    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        visit_layers([&](const std::string& prefix, Layer<T>& l) {
            fn(prefix + ".weight", l.weight);
            fn(prefix + ".bias", l.bias);
            if (l.spec.has_batchnorm) {
                fn(prefix + ".gamma", l.gamma);
                fn(prefix + ".beta", l.beta);
                fn(prefix + ".running_mean", l.running_mean);
                fn(prefix + ".running_var", l.running_var);
            }
        });
        fn(std::string("output.weight"), output_weights);
    }

    template <typename Fn>
    void for_each_tensor(Fn&& fn) const {
        const_cast<Model*>(this)->for_each_tensor(
            [&](const std::string& name, Matrix<T>& m) { fn(name, static_cast<const Matrix<T>&>(m)); });
    }

    std::size_t trainable_parameter_count() const {
        std::size_t n = 0;
        const_cast<Model*>(this)->for_each_trainable([&](const std::string&, Matrix<T>& m) {
            n += static_cast<std::size_t>(m.size());
        });
        return n;
    }

    template <typename U>
    Model<U> cast() const {
        Model<U> out;
        out.config = config;
        out.label_order = label_order;
        out.output_weights = output_weights.template cast<U>();
        auto cast_layers = [](const std::vector<Layer<T>>& in) {
            std::vector<Layer<U>> layers;
            for (const auto& l : in) {
                layers.push_back({l.spec, l.weight.template cast<U>(), l.bias.template cast<U>(),
                                  l.gamma.template cast<U>(), l.beta.template cast<U>(),
                                  l.running_mean.template cast<U>(), l.running_var.template cast<U>()});
            }
            return layers;
        };
        out.reducer = cast_layers(reducer);
        out.trunk = cast_layers(trunk);
        return out;
    }

  private:
    template <typename Fn>
    void visit_layers(Fn&& fn) {
        for (std::size_t i = 0; i < reducer.size(); ++i) fn("reducer." + std::to_string(i), reducer[i]);
        for (std::size_t i = 0; i < trunk.size(); ++i) fn("trunk." + std::to_string(i), trunk[i]);
    }
};

/// Builds a model whose output layer holds the class vectors of `label_order`.
/// Trainable weights are He-uniform (limit sqrt(6 / fan_in)) from config.seed; biases
/// and batchnorm shifts start at zero, scales and running variances at one.
template <typename T = float>
Model<T> init_model(const ClassVectorSet& cv, const std::vector<std::string>& label_order,
                    const ArchitectureConfig& config) {
    config.validate();
    if (label_order.empty()) {
        throw ArgumentError("label order is empty");
    }
    if (cv.dim() != config.semantic_dim) {
        throw ConfigError("class vectors have dim " + std::to_string(cv.dim()) + ", semantic layer has " +
                          std::to_string(config.semantic_dim));
    }
    Model<T> model;
    model.config = config;
    model.label_order = label_order;
    model.output_weights.resize(static_cast<Eigen::Index>(config.semantic_dim),
                                static_cast<Eigen::Index>(label_order.size()));
    for (std::size_t c = 0; c < label_order.size(); ++c) {
        const auto v = cv.at(label_order[c]);
        for (std::size_t d = 0; d < v.size(); ++d) {
            model.output_weights(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c)) = static_cast<T>(v[d]);
        }
    }

    Rng rng(derive_seed(config.seed, 100));
    auto make_layer = [&](const LayerSpec& spec) {
        const auto in = static_cast<Eigen::Index>(spec.in_dim);
        const auto out = static_cast<Eigen::Index>(spec.out_dim);
        Layer<T> l{spec, Matrix<T>(in, out), Matrix<T>::Zero(1, out), {}, {}, {}, {}};
        const double limit = std::sqrt(6.0 / static_cast<double>(spec.in_dim));
        for (Eigen::Index i = 0; i < l.weight.size(); ++i) {
            l.weight.data()[i] = static_cast<T>(rng.uniform(-limit, limit));
        }
        if (spec.has_batchnorm) {
            l.gamma = Matrix<T>::Ones(1, out);
            l.beta = Matrix<T>::Zero(1, out);
            l.running_mean = Matrix<T>::Zero(1, out);
            l.running_var = Matrix<T>::Ones(1, out);
        }
        return l;
    };
    for (const auto& spec : config.reducer) model.reducer.push_back(make_layer(spec));
    for (const auto& spec : config.trunk) model.trunk.push_back(make_layer(spec));
    return model;
}

/// How a forward pass treats dropout and batchnorm.
struct ForwardMode {
    bool dropout = false;
    bool batch_statistics = false;

    static constexpr ForwardMode training() { return {true, true}; }
    static constexpr ForwardMode inference() { return {false, false}; }
};

template <typename T>
struct LayerTrace {
    Matrix<T> input;        // B x in
    Matrix<T> normalized;   // batchnorm xhat, B x out
    Matrix<T> inv_std;      // 1 x out (batch or running)
    Matrix<T> batch_mean;   // 1 x out, batch statistics mode only
    Matrix<T> batch_var;
    Matrix<T> preactivation;  // input to the activation, B x out
    Matrix<T> dropout_scale;  // B x out: 0 or 1/(1-p); empty when dropout is off
    Matrix<T> output;         // B x out
};

/// Everything backward() needs from one forward pass over a batch.
template <typename T>
struct ForwardTrace {
    ForwardMode mode;
    std::vector<LayerTrace<T>> reducer;
    std::vector<LayerTrace<T>> trunk;
    Matrix<T> semantic;  // B x semantic_dim
    Matrix<T> logits;    // B x C
    Matrix<T> probs;     // B x C, rows sum to 1

    std::size_t batch_size() const { return static_cast<std::size_t>(probs.rows()); }
};

namespace detail {

template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits) {
    Matrix<T> out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const T max = logits.row(r).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            const T e = std::exp(logits(r, c) - max);
            out(r, c) = e;
            sum += static_cast<double>(e);
        }
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            out(r, c) = static_cast<T>(static_cast<double>(out(r, c)) / sum);
        }
    }
    return out;
}

template <typename T>
Matrix<T> layer_forward(const Layer<T>& layer, const Matrix<T>& input, ForwardMode mode, double bn_eps, Rng* rng,
                        LayerTrace<T>* trace) {
    const auto& spec = layer.spec;
    Matrix<T> z = input * layer.weight;
    z.rowwise() += layer.bias.row(0);

    if (spec.has_batchnorm) {
        const auto rows = z.rows();
        const auto cols = z.cols();
        Matrix<T> mean(1, cols);
        Matrix<T> var(1, cols);
        if (mode.batch_statistics) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                double m = 0.0;
                for (Eigen::Index r = 0; r < rows; ++r) m += static_cast<double>(z(r, c));
                m /= static_cast<double>(rows);
                double v = 0.0;
                for (Eigen::Index r = 0; r < rows; ++r) {
                    const double d = static_cast<double>(z(r, c)) - m;
                    v += d * d;
                }
                mean(0, c) = static_cast<T>(m);
                var(0, c) = static_cast<T>(v / static_cast<double>(rows));
            }
        } else {
            mean = layer.running_mean;
            var = layer.running_var;
        }
        Matrix<T> inv_std(1, cols);
        for (Eigen::Index c = 0; c < cols; ++c) {
            inv_std(0, c) = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var(0, c)) + bn_eps));
        }
        Matrix<T> xhat(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            xhat.row(r) = ((z.row(r) - mean.row(0)).array() * inv_std.row(0).array()).matrix();
        }
        z = xhat;
        for (Eigen::Index r = 0; r < rows; ++r) {
            z.row(r) = (xhat.row(r).array() * layer.gamma.row(0).array() + layer.beta.row(0).array()).matrix();
        }
        if (trace) {
            trace->normalized = std::move(xhat);
            trace->inv_std = std::move(inv_std);
            if (mode.batch_statistics) {
                trace->batch_mean = std::move(mean);
                trace->batch_var = std::move(var);
            }
        }
    }

    Matrix<T> out = z;
    if (spec.activation == Activation::relu) {
        out = out.cwiseMax(T(0));
    }

    if (mode.dropout && spec.dropout_rate > 0.0) {
        if (!rng) {
            throw InternalError("dropout requires a random source");
        }
        const T keep_scale = static_cast<T>(1.0 / (1.0 - spec.dropout_rate));
        Matrix<T> scale(out.rows(), out.cols());
        for (Eigen::Index i = 0; i < scale.size(); ++i) {
            scale.data()[i] = rng->bernoulli(spec.dropout_rate) ? T(0) : keep_scale;
        }
        out = out.cwiseProduct(scale);
        if (trace) trace->dropout_scale = std::move(scale);
    }

    if (trace) {
        trace->input = input;
        trace->preactivation = std::move(z);
        trace->output = out;
    }
    return out;
}

template <typename T>
void check_inputs(const Model<T>& model, const Matrix<T>& images, const Matrix<T>& texts) {
    const auto& c = model.config;
    if (images.rows() != texts.rows()) {
        throw ArgumentError("image and text batches differ in size");
    }
    if (static_cast<std::size_t>(images.cols()) != c.visual_dim) {
        throw ArgumentError("visual input has dim " + std::to_string(images.cols()) + ", model expects " +
                            std::to_string(c.visual_dim));
    }
    if (static_cast<std::size_t>(texts.cols()) != c.text_dim) {
        throw ArgumentError("text input has dim " + std::to_string(texts.cols()) + ", model expects " +
                            std::to_string(c.text_dim));
    }
    if (!images.allFinite() || !texts.allFinite()) {
        throw NumericError("non-finite value in network input");
    }
}

template <typename T>
Matrix<T> run_reducer(const Model<T>& model, const Matrix<T>& images, ForwardMode mode, Rng* rng,
                      std::vector<LayerTrace<T>>* traces) {
    Matrix<T> h = images;
    if (traces) traces->resize(model.reducer.size());
    for (std::size_t i = 0; i < model.reducer.size(); ++i) {
        h = layer_forward(model.reducer[i], h, mode, model.config.batchnorm_epsilon, rng,
                          traces ? &(*traces)[i] : nullptr);
    }
    return h;
}

template <typename T>
Matrix<T> run_semantic(const Model<T>& model, const Matrix<T>& images, const Matrix<T>& texts, ForwardMode mode,
                       Rng* rng, ForwardTrace<T>* trace) {
    check_inputs(model, images, texts);
    const Matrix<T> reduced = run_reducer(model, images, mode, rng, trace ? &trace->reducer : nullptr);
    Matrix<T> h(images.rows(), reduced.cols() + texts.cols());
    h << reduced, texts;
    if (trace) trace->trunk.resize(model.trunk.size());
    for (std::size_t i = 0; i < model.trunk.size(); ++i) {
        h = layer_forward(model.trunk[i], h, mode, model.config.batchnorm_epsilon, rng,
                          trace ? &trace->trunk[i] : nullptr);
    }
    return h;
}

}  // namespace detail

/// Probabilities over the seen classes, from the semantic activation through the
/// output layer. The same function serves forward() and any caller holding a
/// predict_semantic() result.
template <typename T>
Matrix<T> class_probabilities(const Model<T>& model, const Matrix<T>& semantic) {
    return detail::softmax_rows<T>(semantic * model.output_weights);
}

/// Batch forward pass. `rng` is required when mode.dropout is set.
template <typename T>
ForwardTrace<T> forward_batch(const Model<T>& model, const Matrix<T>& images, const Matrix<T>& texts,
                              ForwardMode mode, Rng* rng = nullptr) {
    ForwardTrace<T> trace;
    trace.mode = mode;
    trace.semantic = detail::run_semantic(model, images, texts, mode, rng, &trace);
    trace.logits = trace.semantic * model.output_weights;
    trace.probs = detail::softmax_rows<T>(trace.logits);
    return trace;
}

struct ForwardResult {
    RowVectorF probs;
    ForwardTrace<float> trace;
};

/// Single-sample forward pass. Training mode applies dropout and batch statistics.
inline ForwardResult forward(const Model<float>& model, std::span<const float> x, std::span<const float> t,
                             bool training, Rng* rng = nullptr) {
    const MatrixF images = Eigen::Map<const MatrixF>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
    const MatrixF texts = Eigen::Map<const MatrixF>(t.data(), 1, static_cast<Eigen::Index>(t.size()));
    auto trace = forward_batch(model, images, texts, training ? ForwardMode::training() : ForwardMode::inference(),
                               rng);
    RowVectorF probs = trace.probs.row(0);
    return {std::move(probs), std::move(trace)};
}

/// Reduced visual vector for one sample.
inline RowVectorF reduce_visual(const Model<float>& model, std::span<const float> x, bool training,
                                Rng* rng = nullptr) {
    if (x.size() != model.config.visual_dim) {
        throw ArgumentError("visual input has dim " + std::to_string(x.size()) + ", model expects " +
                            std::to_string(model.config.visual_dim));
    }
    const MatrixF images = Eigen::Map<const MatrixF>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
    if (!images.allFinite()) {
        throw NumericError("non-finite value in network input");
    }
    const auto mode = training ? ForwardMode::training() : ForwardMode::inference();
    return detail::run_reducer<float>(model, images, mode, rng, nullptr).row(0);
}

/// Semantic-layer activations in inference mode (the output layer popped).
template <typename T>
Matrix<T> predict_semantic_batch(const Model<T>& model, const Matrix<T>& images, const Matrix<T>& texts) {
    return detail::run_semantic<T>(model, images, texts, ForwardMode::inference(), nullptr, nullptr);
}

inline RowVectorF predict_semantic(const Model<float>& model, std::span<const float> x, std::span<const float> t) {
    const MatrixF images = Eigen::Map<const MatrixF>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
    const MatrixF texts = Eigen::Map<const MatrixF>(t.data(), 1, static_cast<Eigen::Index>(t.size()));
    return predict_semantic_batch(model, images, texts).row(0);
}

}  // namespace zsl
