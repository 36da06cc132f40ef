#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "zsl/dataset.hpp"
#include "zsl/errors.hpp"
#include "zsl/network.hpp"
#include "zsl/random.hpp"

namespace zsl {

inline constexpr double kLogEpsilon = 1e-12;

namespace detail {

/// -log(p + 1e-12), via log1p near p = 1 where 1 + 1e-12 would round.
inline double neg_log_prob(double p) {
    return p > 0.5 ? -std::log1p((p - 1.0) + kLogEpsilon) : -std::log(p + kLogEpsilon);
}

}  // namespace detail

/// -log(probs[index] + 1e-12).
template <typename T>
double cross_entropy_loss(std::span<const T> probs, std::size_t one_hot_index) {
    if (one_hot_index >= probs.size()) {
        throw ArgumentError("class index " + std::to_string(one_hot_index) + " out of range for " +
                            std::to_string(probs.size()) + " classes");
    }
    return detail::neg_log_prob(static_cast<double>(probs[one_hot_index]));
}

/// Mean cross-entropy over the rows of a batch.
template <typename T>
double batch_loss(const Matrix<T>& probs, std::span<const int> labels) {
    if (static_cast<std::size_t>(probs.rows()) != labels.size()) {
        throw ArgumentError("label count does not match batch size");
    }
    double total = 0.0;
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        const auto label = labels[static_cast<std::size_t>(r)];
        if (label < 0 || label >= probs.cols()) {
            throw ArgumentError("class index " + std::to_string(label) + " out of range");
        }
        total += detail::neg_log_prob(static_cast<double>(probs(r, label)));
    }
    return probs.rows() == 0 ? 0.0 : total / static_cast<double>(probs.rows());
}

template <typename T>
struct LayerGradients {
    Matrix<T> weight;
    Matrix<T> bias;
    Matrix<T> gamma;
    Matrix<T> beta;
};

/// Gradients of the mean batch loss, shaped like the model's trainable tensors.
template <typename T>
struct Gradients {
    std::vector<LayerGradients<T>> reducer;
    std::vector<LayerGradients<T>> trunk;
    Matrix<T> output_weights;  // empty unless the output layer is trainable

    /// Visits gradient tensors in Model::for_each_trainable order.
    template <typename Fn>
    void for_each(Fn&& fn) const {
        auto visit = [&](const std::vector<LayerGradients<T>>& layers) {
            for (const auto& g : layers) {
                fn(g.weight);
                fn(g.bias);
                if (g.gamma.size() > 0) {
                    fn(g.gamma);
                    fn(g.beta);
                }
            }
        };
        visit(reducer);
        visit(trunk);
        if (output_weights.size() > 0) fn(output_weights);
    }

    std::vector<T> flatten() const {
        std::vector<T> out;
        for_each([&](const Matrix<T>& m) { out.insert(out.end(), m.data(), m.data() + m.size()); });
        return out;
    }
};

namespace detail {

template <typename T>
Matrix<T> layer_backward(const Layer<T>& layer, const LayerTrace<T>& trace, Matrix<T> grad_out, bool batch_stats,
                         LayerGradients<T>& grads) {
    if (trace.dropout_scale.size() > 0) {
        grad_out = grad_out.cwiseProduct(trace.dropout_scale);
    }
    if (layer.spec.activation == Activation::relu) {
        grad_out = (trace.preactivation.array() > T(0)).select(grad_out, T(0));
    }
    if (layer.spec.has_batchnorm) {
        const auto rows = grad_out.rows();
        const auto cols = grad_out.cols();
        grads.gamma = Matrix<T>::Zero(1, cols);
        grads.beta = Matrix<T>::Zero(1, cols);
        Matrix<T> dxhat(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            dxhat.row(r) = (grad_out.row(r).array() * layer.gamma.row(0).array()).matrix();
        }
        Matrix<T> dz(rows, cols);
        for (Eigen::Index c = 0; c < cols; ++c) {
            double dgamma = 0.0;
            double dbeta = 0.0;
            double sum_dxhat = 0.0;
            double sum_dxhat_xhat = 0.0;
            for (Eigen::Index r = 0; r < rows; ++r) {
                dgamma += static_cast<double>(grad_out(r, c)) * static_cast<double>(trace.normalized(r, c));
                dbeta += static_cast<double>(grad_out(r, c));
                sum_dxhat += static_cast<double>(dxhat(r, c));
                sum_dxhat_xhat += static_cast<double>(dxhat(r, c)) * static_cast<double>(trace.normalized(r, c));
            }
            grads.gamma(0, c) = static_cast<T>(dgamma);
            grads.beta(0, c) = static_cast<T>(dbeta);
            const double inv_std = static_cast<double>(trace.inv_std(0, c));
            if (batch_stats) {
                const double n = static_cast<double>(rows);
                for (Eigen::Index r = 0; r < rows; ++r) {
                    dz(r, c) = static_cast<T>(inv_std / n *
                                              (n * static_cast<double>(dxhat(r, c)) - sum_dxhat -
                                               static_cast<double>(trace.normalized(r, c)) * sum_dxhat_xhat));
                }
            } else {
                for (Eigen::Index r = 0; r < rows; ++r) {
                    dz(r, c) = static_cast<T>(static_cast<double>(dxhat(r, c)) * inv_std);
                }
            }
        }
        grad_out = std::move(dz);
    }
    grads.weight = trace.input.transpose() * grad_out;
    grads.bias = grad_out.colwise().sum();
    return grad_out * layer.weight.transpose();
}

}  // namespace detail

/// Gradient of the mean softmax cross-entropy with respect to the logits:
/// (probs - onehot) / batch_size.
template <typename T>
Matrix<T> logit_gradient(const Matrix<T>& probs, std::span<const int> labels) {
    if (static_cast<std::size_t>(probs.rows()) != labels.size()) {
        throw ArgumentError("label count does not match batch size");
    }
    Matrix<T> grad = probs;
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        const int label = labels[static_cast<std::size_t>(r)];
        if (label < 0 || label >= grad.cols()) {
            throw ArgumentError("class index " + std::to_string(label) + " out of range");
        }
        grad(r, label) -= T(1);
    }
    if (probs.rows() > 0) grad /= static_cast<T>(probs.rows());
    return grad;
}

/// Backpropagates the mean cross-entropy of a batch through every trainable tensor.
template <typename T>
Gradients<T> backward(const Model<T>& model, const ForwardTrace<T>& trace, std::span<const int> labels) {
    if (trace.batch_size() != labels.size() || trace.reducer.size() != model.reducer.size() ||
        trace.trunk.size() != model.trunk.size() ||
        trace.probs.cols() != static_cast<Eigen::Index>(model.num_classes())) {
        throw InternalError("forward trace does not match model or labels");
    }
    Matrix<T> grad = logit_gradient(trace.probs, labels);

    Gradients<T> out;
    if (model.config.train_output_layer) {
        out.output_weights = trace.semantic.transpose() * grad;
    }
    grad = grad * model.output_weights.transpose();

    const bool batch_stats = trace.mode.batch_statistics;
    out.trunk.resize(model.trunk.size());
    for (auto i = model.trunk.size(); i-- > 0;) {
        grad = detail::layer_backward(model.trunk[i], trace.trunk[i], std::move(grad), batch_stats, out.trunk[i]);
    }
    // The trunk input is [reduced visual | text]; only the visual part flows back.
    grad = grad.leftCols(static_cast<Eigen::Index>(model.config.reduced_dim())).eval();
    out.reducer.resize(model.reducer.size());
    for (auto i = model.reducer.size(); i-- > 0;) {
        grad = detail::layer_backward(model.reducer[i], trace.reducer[i], std::move(grad), batch_stats,
                                      out.reducer[i]);
    }
    return out;
}

/// w <- w - lr * g for every trainable tensor. Rejects the whole step if any
/// gradient component is non-finite.
template <typename T>
void sgd_step(Model<T>& model, const Gradients<T>& grads, double lr) {
    std::vector<const Matrix<T>*> gs;
    grads.for_each([&](const Matrix<T>& g) { gs.push_back(&g); });
    std::size_t i = 0;
    bool shape_ok = true;
    model.for_each_trainable([&](const std::string&, Matrix<T>& w) {
        if (i >= gs.size() || gs[i]->rows() != w.rows() || gs[i]->cols() != w.cols()) shape_ok = false;
        ++i;
    });
    if (!shape_ok || i != gs.size()) {
        throw InternalError("gradient shapes do not match model");
    }
    for (const auto* g : gs) {
        if (!g->allFinite()) {
            throw NumericError("non-finite gradient component; step aborted");
        }
    }
    i = 0;
    const T step = static_cast<T>(lr);
    model.for_each_trainable([&](const std::string&, Matrix<T>& w) { w -= step * *gs[i++]; });
}

/// Moves batchnorm running statistics toward the batch statistics in `trace`.
template <typename T>
void update_running_statistics(Model<T>& model, const ForwardTrace<T>& trace) {
    if (!trace.mode.batch_statistics) return;
    const T momentum = static_cast<T>(model.config.batchnorm_momentum);
    auto update = [&](std::vector<Layer<T>>& layers, const std::vector<LayerTrace<T>>& traces) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (!layers[i].spec.has_batchnorm) continue;
            layers[i].running_mean = momentum * layers[i].running_mean + (T(1) - momentum) * traces[i].batch_mean;
            layers[i].running_var = momentum * layers[i].running_var + (T(1) - momentum) * traces[i].batch_var;
        }
    };
    update(model.reducer, trace.reducer);
    update(model.trunk, trace.trunk);
}

struct TrainConfig {
    // 0.1 diverges for the default architecture on unit-variance class vectors; see README.
    double learning_rate = 0.02;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 300;
    std::size_t early_stop_patience = 10;
    std::uint64_t seed = 0;
    bool shuffle = true;

    void validate() const {
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
            throw ArgumentError("learning rate must be positive and finite");
        }
        if (batch_size == 0) {
            throw ArgumentError("batch size must be positive");
        }
    }
};

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},       {"early_stop_patience", c.early_stop_patience},
            {"seed", c.seed},                   {"shuffle", c.shuffle}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.early_stop_patience = j.at("early_stop_patience").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.shuffle = j.at("shuffle").get<bool>();
    return c;
}

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double mean_loss = 0.0;
    double train_top1 = 0.0;
    double elapsed_seconds = 0.0;
    bool best_so_far = false;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

/// Called after every completed epoch (e.g. for logging or checkpointing).
using EpochCallback = std::function<void(const EpochStats&, const Model<float>&)>;

/// Fraction of rows whose highest-probability class is the true class (inference mode).
inline double train_top1(const Model<float>& model, const AssembledDataset& data) {
    if (data.empty()) return 0.0;
    const MatrixF probs = class_probabilities(model, predict_semantic_batch(model, data.images, data.texts));
    std::size_t hits = 0;
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        Eigen::Index best = 0;
        probs.row(r).maxCoeff(&best);
        hits += best == data.label_index[static_cast<std::size_t>(r)] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

/// Mini-batch SGD on the mean cross-entropy. Stops after max_epochs, or once the
/// epoch loss has not improved by more than 1e-5 for `early_stop_patience` epochs.
/// Deterministic in (model weights, config.seed).
inline TrainHistory train(Model<float>& model, const AssembledDataset& data, const TrainConfig& config,
                          const EpochCallback& on_epoch = {}) {
    config.validate();
    if (data.empty()) {
        throw ArgumentError("training dataset is empty");
    }
    if (data.label_order != model.label_order) {
        throw ArgumentError("dataset label order does not match the model's output layer");
    }
    constexpr double kMinImprovement = 1e-5;

    Rng shuffle_rng(derive_seed(config.seed, 1));
    Rng dropout_rng(derive_seed(config.seed, 2));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    TrainHistory history;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t stale_epochs = 0;
    const auto batch_size = std::min(config.batch_size, data.size());

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        if (config.shuffle) {
            for (std::size_t i = order.size() - 1; i > 0; --i) {
                std::swap(order[i], order[shuffle_rng.index(i + 1)]);
            }
        }
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
            const auto end = std::min(begin + batch_size, order.size());
            const auto rows = std::span<const std::size_t>(order).subspan(begin, end - begin);
            MatrixF images(static_cast<Eigen::Index>(rows.size()), data.images.cols());
            MatrixF texts(static_cast<Eigen::Index>(rows.size()), data.texts.cols());
            std::vector<int> labels(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                images.row(static_cast<Eigen::Index>(i)) = data.images.row(static_cast<Eigen::Index>(rows[i]));
                texts.row(static_cast<Eigen::Index>(i)) = data.texts.row(static_cast<Eigen::Index>(rows[i]));
                labels[i] = data.label_index[rows[i]];
            }
            const auto trace = forward_batch(model, images, texts, ForwardMode::training(), &dropout_rng);
            const double loss = batch_loss(trace.probs, labels);
            if (!std::isfinite(loss)) {
                throw NumericError("training diverged: non-finite loss in epoch " + std::to_string(epoch));
            }
            loss_sum += loss * static_cast<double>(rows.size());
            const auto grads = backward(model, trace, labels);
            try {
                sgd_step(model, grads, config.learning_rate);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")");
            }
            update_running_statistics(model, trace);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.mean_loss = loss_sum / static_cast<double>(data.size());
        if (!std::isfinite(stats.mean_loss)) {
            throw NumericError("training diverged: non-finite loss in epoch " + std::to_string(epoch));
        }
        stats.train_top1 = train_top1(model, data);
        stats.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (stats.mean_loss < best_loss - kMinImprovement) {
            best_loss = stats.mean_loss;
            stale_epochs = 0;
            stats.best_so_far = true;
        } else {
            ++stale_epochs;
        }
        history.epochs.push_back(stats);
        if (on_epoch) on_epoch(stats, model);
        if (stale_epochs >= config.early_stop_patience && config.early_stop_patience > 0) {
            break;
        }
    }
    return history;
}

struct GradientCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t excluded = 0;
};

struct GradientCheckOptions {
    double eps = 1e-5;
    std::size_t batch_size = 4;
    /// Use batch statistics in batchnorm layers instead of running statistics.
    bool batch_statistics = false;
};

namespace detail {

template <typename T>
bool relu_sign_changed(const Model<T>& model, const ForwardTrace<T>& a, const ForwardTrace<T>& b) {
    auto check = [&](const std::vector<Layer<T>>& layers, const std::vector<LayerTrace<T>>& ta,
                     const std::vector<LayerTrace<T>>& tb) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (layers[i].spec.activation != Activation::relu) continue;
            if (((ta[i].preactivation.array() > T(0)) != (tb[i].preactivation.array() > T(0))).any()) return true;
        }
        return false;
    };
    return check(model.reducer, a.reducer, b.reducer) || check(model.trunk, a.trunk, b.trunk);
}

}  // namespace detail

/// Compares backward() against central differences on a float64 copy of the
/// model, over a random batch with dropout disabled.
///
/// A parameter is excluded when the unperturbed pass has a ReLU pre-activation within
/// 10*eps of zero on a unit the parameter feeds, or when perturbing the parameter
/// flips the sign of any ReLU pre-activation (the difference quotient straddles a
/// kink). Batchnorm-layer biases are excluded in batch-statistics mode. Returns max |a - n| / max(|a|, |n|, 1e-8) over the remaining parameters.
inline GradientCheckResult gradient_check(const Model<double>& model_in, const Matrix<double>& images,
                                          const Matrix<double>& texts, std::span<const int> labels,
                                          const GradientCheckOptions& options = {}) {
    Model<double> model = model_in;
    const ForwardMode mode{false, options.batch_statistics};
    const auto base = forward_batch(model, images, texts, mode);
    const auto analytic = backward(model, base, labels).flatten();

    // Unit-level kink test: which output unit of which layer each parameter feeds.
    std::vector<bool> near_kink;
    auto mark = [&](const std::vector<Layer<double>>& layers, const std::vector<LayerTrace<double>>& traces) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            std::vector<bool> unit(l.spec.out_dim, false);
            if (l.spec.activation == Activation::relu) {
                for (Eigen::Index r = 0; r < traces[i].preactivation.rows(); ++r) {
                    for (Eigen::Index c = 0; c < traces[i].preactivation.cols(); ++c) {
                        if (std::abs(traces[i].preactivation(r, c)) < 10.0 * options.eps) {
                            unit[static_cast<std::size_t>(c)] = true;
                        }
                    }
                }
            }
            // weight is in x out row-major: element (row, col) feeds unit col
            for (std::size_t k = 0; k < l.spec.in_dim * l.spec.out_dim; ++k) near_kink.push_back(unit[k % l.spec.out_dim]);
            // Under batch statistics the mean subtraction cancels a batchnorm layer's bias
            // exactly, so its true gradient is zero and the quotient is pure roundoff.
            const bool bias_cancelled = options.batch_statistics && l.spec.has_batchnorm;
            for (std::size_t k = 0; k < l.spec.out_dim; ++k) near_kink.push_back(unit[k] || bias_cancelled);
            if (l.spec.has_batchnorm) {
                for (int rep = 0; rep < 2; ++rep) {
                    for (std::size_t k = 0; k < l.spec.out_dim; ++k) near_kink.push_back(unit[k]);
                }
            }
        }
    };
    mark(model.reducer, base.reducer);
    mark(model.trunk, base.trunk);
    if (model.config.train_output_layer) near_kink.resize(analytic.size(), false);
    if (near_kink.size() != analytic.size()) {
        throw InternalError("gradient check bookkeeping mismatch");
    }

    GradientCheckResult result;
    std::size_t index = 0;
    auto loss_at = [&](ForwardTrace<double>& trace_out) {
        trace_out = forward_batch(model, images, texts, mode);
        return batch_loss(trace_out.probs, labels);
    };
    model.for_each_trainable([&](const std::string&, Matrix<double>& w) {
        for (Eigen::Index p = 0; p < w.size(); ++p, ++index) {
            const double original = w.data()[p];
            ForwardTrace<double> plus_trace;
            ForwardTrace<double> minus_trace;
            w.data()[p] = original + options.eps;
            const double plus = loss_at(plus_trace);
            w.data()[p] = original - options.eps;
            const double minus = loss_at(minus_trace);
            w.data()[p] = original;
            if (near_kink[index] || detail::relu_sign_changed(model, plus_trace, minus_trace)) {
                ++result.excluded;
                continue;
            }
            const double numeric = (plus - minus) / (2.0 * options.eps);
            const double a = analytic[index];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
            ++result.checked;
        }
    });
    return result;
}

/// Random tiny-model gradient check: random class vectors, inputs, labels and
/// batchnorm running statistics, all drawn from `seed`.
inline GradientCheckResult gradient_check(const ArchitectureConfig& architecture, std::size_t num_classes,
                                          std::uint64_t seed, const GradientCheckOptions& options = {}) {
    ArchitectureConfig config = architecture;
    config.seed = seed;
    Rng rng(derive_seed(seed, 7));

    FeatureTable cv_table(static_cast<std::uint32_t>(config.semantic_dim));
    std::vector<std::string> labels;
    std::vector<float> v(config.semantic_dim);
    for (std::size_t c = 0; c < num_classes; ++c) {
        for (auto& x : v) x = static_cast<float>(rng.normal());
        labels.push_back("c" + std::to_string(c));
        cv_table.add(labels.back(), v);
    }
    auto model = init_model<double>(ClassVectorSet(std::move(cv_table)), labels, config);
    auto perturb_stats = [&](std::vector<Layer<double>>& layers) {
        for (auto& l : layers) {
            if (!l.spec.has_batchnorm) continue;
            for (Eigen::Index i = 0; i < l.running_mean.size(); ++i) {
                l.running_mean.data()[i] = rng.normal(0.0, 0.5);
                l.running_var.data()[i] = rng.uniform(0.5, 2.0);
                l.gamma.data()[i] = rng.uniform(0.5, 1.5);
                l.beta.data()[i] = rng.normal(0.0, 0.1);
            }
        }
    };
    perturb_stats(model.reducer);
    perturb_stats(model.trunk);

    const auto batch = static_cast<Eigen::Index>(options.batch_size);
    Matrix<double> images(batch, static_cast<Eigen::Index>(config.visual_dim));
    Matrix<double> texts(batch, static_cast<Eigen::Index>(config.text_dim));
    for (Eigen::Index i = 0; i < images.size(); ++i) images.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < texts.size(); ++i) texts.data()[i] = rng.normal();
    std::vector<int> targets(options.batch_size);
    for (auto& t : targets) t = static_cast<int>(rng.index(num_classes));
    return gradient_check(model, images, texts, targets, options);
}

/// The small architecture used by `zsl gradcheck`: reducer 6->4, trunk 8->5->3.
inline ArchitectureConfig tiny_gradcheck_architecture(Activation semantic_activation = Activation::relu) {
    ArchitectureConfig c;
    c.visual_dim = 6;
    c.text_dim = 4;
    c.semantic_dim = 3;
    c.reducer = {{6, 4, Activation::relu, true, 0.3}};
    c.trunk = {{8, 5, Activation::relu, false, 0.2}, {5, 3, semantic_activation, false, 0.0}};
    return c;
}

}  // namespace zsl
