/**
 * @file nn.hpp
 * @brief Branched dense classifier, softmax cross-entropy, AdamW and early-stopped training.
 *
 * Architecture: the TSDAE stream and the USE stream each pass through their own
 * stack of Dense -> ReLU -> Dropout layers. The two reduced vectors are
 * concatenated (TSDAE part first) and a single dense head produces K+1 logits.
 *
 * Everything is templated on the scalar type. `Model` (float) is the storage and
 * training type; `Model64` exists for finite-difference gradient verification.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "deter/rng.hpp"
#include "deter/types.hpp"

namespace deter {

// ============================================================================
// Dense row-major matrix
// ============================================================================

template <typename Real>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Real> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, Real(0)) {}

    Real& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    Real operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<Real> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const Real> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    // Reshape without shrinking capacity; contents are unspecified afterwards.
    void resize(std::size_t r, std::size_t c) {
        rows = r;
        cols = c;
        data.resize(r * c);
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Copies the selected embedding rows (all rows when `rows` is empty) into a matrix.
template <typename Real>
Matrix<Real> to_matrix(const EmbeddingMatrix& m, std::span<const std::size_t> rows = {});

// ============================================================================
// Configuration
// ============================================================================

enum class Activation : std::uint8_t { relu = 0 };

struct ModelConfig {
    std::size_t d_tsdae = kDefaultTsdaeDim;
    std::size_t d_use = kDefaultUseDim;
    std::vector<std::size_t> tsdae_hidden{512, 256};
    std::vector<std::size_t> use_hidden{512, 256};
    double dropout_rate = 0.1;
    std::size_t n_classes = 2;
    Activation activation = Activation::relu;
    std::uint64_t seed = 0;

    // Throws Error(configuration) on the first broken invariant.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
    std::size_t batch_size = 200;
    std::size_t max_epochs = 1000;
    std::size_t patience = 100;
    double learning_rate = 1e-3;
    double weight_decay = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::optional<std::vector<double>> class_weights;
    std::uint64_t seed = 0;

    void validate() const;
};

// ============================================================================
// Parameters
// ============================================================================

// y = x W + b, W stored row-major as in_dim rows by out_dim columns.
template <typename Real>
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<Real> weights;
    std::vector<Real> bias;

    DenseLayer() = default;
    DenseLayer(std::size_t in_dim, std::size_t out_dim)
        : in(in_dim), out(out_dim), weights(in_dim * out_dim, Real(0)), bias(out_dim, Real(0)) {}

    std::size_t param_count() const noexcept { return weights.size() + bias.size(); }

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Layers in declaration order: TSDAE branch, USE branch, head.
// The same container shape doubles as a gradient and as optimizer moments.
template <typename Real>
struct ParamSet {
    std::vector<DenseLayer<Real>> tsdae_branch;
    std::vector<DenseLayer<Real>> use_branch;
    DenseLayer<Real> head;

    template <typename F>
    void for_each_layer(F&& f) {
        for (auto& l : tsdae_branch) f(l);
        for (auto& l : use_branch) f(l);
        f(head);
    }
    template <typename F>
    void for_each_layer(F&& f) const {
        for (const auto& l : tsdae_branch) f(l);
        for (const auto& l : use_branch) f(l);
        f(head);
    }

    // Zero-filled copy with identical shapes.
    ParamSet zeros_like() const;

    friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

template <typename Real>
using Gradients = ParamSet<Real>;

template <typename Real>
struct BasicModel {
    ModelConfig config;
    ParamSet<Real> params;

    friend bool operator==(const BasicModel&, const BasicModel&) = default;
};

using Model = BasicModel<float>;
using Model64 = BasicModel<double>;

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, drawn from cfg.seed.
template <typename Real = float>
BasicModel<Real> init_model(const ModelConfig& cfg);

// Same weights, different scalar type.
template <typename To, typename From>
BasicModel<To> convert_model(const BasicModel<From>& m);

// Sum of in*out + out over every layer the config implies.
std::size_t param_count(const ModelConfig& cfg);

template <typename Real>
std::size_t param_count(const BasicModel<Real>& m);

// ============================================================================
// Forward / loss / backward
// ============================================================================

// Activations retained for backward().
template <typename Real>
struct ForwardCache {
    std::vector<Matrix<Real>> tsdae_inputs;  // input of each branch layer
    std::vector<Matrix<Real>> tsdae_gates;   // relu'(z) * dropout scale
    std::vector<Matrix<Real>> use_inputs;
    std::vector<Matrix<Real>> use_gates;
    Matrix<Real> tsdae_out;
    Matrix<Real> use_out;
};

// Logits of shape (rows, n_classes). Dropout only when train_mode; rng may be
// null in eval mode.
template <typename Real>
Matrix<Real> forward(const BasicModel<Real>& m, const Matrix<Real>& batch_tsdae, const Matrix<Real>& batch_use,
                     bool train_mode, Rng* rng, ForwardCache<Real>* cache = nullptr);

// Max-subtracted softmax. Throws on NaN input.
std::vector<double> softmax(std::span<const double> logits);

template <typename Real>
Matrix<Real> softmax_rows(const Matrix<Real>& logits);

// Mean over rows of -w_y * max(log p_y, log 1e-12).
template <typename Real>
double cross_entropy_loss(const Matrix<Real>& probs, std::span<const int> targets,
                          std::span<const double> class_weights = {});

// Gradient of cross_entropy_loss(softmax(forward(...))) for the cached forward pass.
template <typename Real>
Gradients<Real> backward(const BasicModel<Real>& m, const ForwardCache<Real>& cache, const Matrix<Real>& probs,
                         std::span<const int> targets, std::span<const double> class_weights = {});

template <typename Real>
struct LossAndGrad {
    double loss = 0.0;
    Gradients<Real> grads;
};

// forward + softmax + loss + backward in one call.
template <typename Real>
LossAndGrad<Real> loss_and_gradients(const BasicModel<Real>& m, const Matrix<Real>& batch_tsdae,
                                     const Matrix<Real>& batch_use, std::span<const int> targets,
                                     std::span<const double> class_weights, bool train_mode, Rng* rng);

// ============================================================================
// Optimizer
// ============================================================================

template <typename Real>
struct OptState {
    ParamSet<Real> first_moment;
    ParamSet<Real> second_moment;
    std::uint64_t step = 0;

    static OptState for_model(const BasicModel<Real>& m);
};

// Decoupled weight decay: w <- w (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps).
template <typename Real>
void adamw_step(BasicModel<Real>& m, const Gradients<Real>& g, OptState<Real>& state, const TrainConfig& tc);

// ============================================================================
// Training
// ============================================================================

struct TrainHistory {
    std::vector<double> train_loss;    // per epoch, mean over batches
    std::vector<double> val_accuracy;  // per epoch, eval mode
    std::size_t best_epoch = 0;        // 1-based
    std::size_t stopped_epoch = 0;     // 1-based

    friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct TrainResult {
    Model model;
    TrainHistory history;
};

struct TrainHooks {
    // Called before each epoch (1-based) with the mutable training set, e.g. to
    // regenerate synthetic outliers.
    std::function<void(std::size_t epoch, DualDataset& train)> before_epoch;
};

// Mini-batch AdamW with early stopping on validation accuracy. Returns the
// parameters of the best epoch.
TrainResult train(const Model& initial, const DualDataset& train_set, const DualDataset& val_set,
                  const TrainConfig& tc, const TrainHooks& hooks = {});

// Eval-mode logits for a whole dataset, processed in fixed-size chunks.
Matrix<float> predict_logits(const Model& m, const DualDataset& ds, std::size_t chunk = 512);

// Fraction of rows whose eval-mode argmax equals the label.
double accuracy(const Model& m, const DualDataset& ds);

// First index of the maximum.
template <typename Real>
std::size_t argmax(std::span<const Real> v);

}  // namespace deter
