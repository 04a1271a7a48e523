#include "deter/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "deter/error.hpp"

namespace deter {

namespace {

constexpr double kLogClamp = -27.631021115928547;  // log(1e-12)

// C[n x m] += A[n x k] * B[k x m]. Zero entries of A (post-ReLU) are skipped.
template <typename Real>
void gemm_acc(const Real* a, std::size_t n, std::size_t k, const Real* b, std::size_t m, Real* c) {
    for (std::size_t r = 0; r < n; ++r) {
        const Real* arow = a + r * k;
        Real* crow = c + r * m;
        for (std::size_t i = 0; i < k; ++i) {
            const Real av = arow[i];
            if (av == Real(0)) continue;
            const Real* brow = b + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

// G[k x m] += A[n x k]^T * D[n x m].
template <typename Real>
void gemm_at_b_acc(const Real* a, std::size_t n, std::size_t k, const Real* d, std::size_t m, Real* g) {
    for (std::size_t r = 0; r < n; ++r) {
        const Real* arow = a + r * k;
        const Real* drow = d + r * m;
        for (std::size_t i = 0; i < k; ++i) {
            const Real av = arow[i];
            if (av == Real(0)) continue;
            Real* grow = g + i * m;
            for (std::size_t j = 0; j < m; ++j) grow[j] += av * drow[j];
        }
    }
}

// X[n x k] = D[n x m] * B[k x m]^T, via an explicit transpose so the inner loop is an axpy.
template <typename Real>
void gemm_a_bt(const Real* d, std::size_t n, std::size_t m, const Real* b, std::size_t k, Real* x,
               std::vector<Real>& scratch) {
    scratch.resize(m * k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < m; ++j) scratch[j * k + i] = b[i * m + j];
    }
    std::fill(x, x + n * k, Real(0));
    gemm_acc(d, n, m, scratch.data(), k, x);
}

template <typename Real>
void add_bias_rows(Matrix<Real>& out, const std::vector<Real>& bias) {
    for (std::size_t r = 0; r < out.rows; ++r) std::copy(bias.begin(), bias.end(), out.data.begin() + r * out.cols);
}

template <typename Real>
void column_sums_acc(const Matrix<Real>& d, std::vector<Real>& acc) {
    for (std::size_t r = 0; r < d.rows; ++r) {
        const Real* drow = d.data.data() + r * d.cols;
        for (std::size_t j = 0; j < d.cols; ++j) acc[j] += drow[j];
    }
}

template <typename Real>
std::vector<DenseLayer<Real>> make_branch(std::size_t in, const std::vector<std::size_t>& widths) {
    std::vector<DenseLayer<Real>> layers;
    for (std::size_t w : widths) {
        layers.emplace_back(in, w);
        in = w;
    }
    return layers;
}

template <typename Real>
ParamSet<Real> make_params(const ModelConfig& cfg) {
    ParamSet<Real> p;
    p.tsdae_branch = make_branch<Real>(cfg.d_tsdae, cfg.tsdae_hidden);
    p.use_branch = make_branch<Real>(cfg.d_use, cfg.use_hidden);
    const std::size_t t_out = cfg.tsdae_hidden.empty() ? cfg.d_tsdae : cfg.tsdae_hidden.back();
    const std::size_t u_out = cfg.use_hidden.empty() ? cfg.d_use : cfg.use_hidden.back();
    p.head = DenseLayer<Real>(t_out + u_out, cfg.n_classes);
    return p;
}

// Runs one branch, filling per-layer inputs and gates. `out` receives the branch output.
template <typename Real>
void run_branch(const std::vector<DenseLayer<Real>>& layers, const Matrix<Real>& input, bool train_mode,
                double dropout, Rng* rng, std::vector<Matrix<Real>>& inputs, std::vector<Matrix<Real>>& gates,
                Matrix<Real>& out) {
    inputs.resize(layers.size());
    gates.resize(layers.size());
    const bool drop = train_mode && dropout > 0.0;
    const Real keep_scale = drop ? static_cast<Real>(1.0 / (1.0 - dropout)) : Real(1);
    Matrix<Real> x = input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        Matrix<Real> z(x.rows, layer.out);
        add_bias_rows(z, layer.bias);
        gemm_acc(x.data.data(), x.rows, layer.in, layer.weights.data(), layer.out, z.data.data());
        Matrix<Real>& gate = gates[l];
        gate.resize(z.rows, z.cols);
        for (std::size_t i = 0; i < z.data.size(); ++i) {
            Real g = z.data[i] > Real(0) ? Real(1) : Real(0);
            if (drop) g = rng->bernoulli(dropout) ? Real(0) : g * keep_scale;
            gate.data[i] = g;
            z.data[i] *= g;
        }
        inputs[l] = std::move(x);
        x = std::move(z);
    }
    out = std::move(x);
}

}  // namespace

// ============================================================================
// Matrix helpers
// ============================================================================

template <typename Real>
Matrix<Real> to_matrix(const EmbeddingMatrix& m, std::span<const std::size_t> rows) {
    const std::size_t n = rows.empty() ? m.count() : rows.size();
    Matrix<Real> out(n, m.dim());
    for (std::size_t r = 0; r < n; ++r) {
        const auto src = m.row(rows.empty() ? r : rows[r]);
        std::transform(src.begin(), src.end(), out.data.begin() + r * out.cols,
                       [](float v) { return static_cast<Real>(v); });
    }
    return out;
}

template <typename Real>
std::size_t argmax(std::span<const Real> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

// ============================================================================
// Configuration
// ============================================================================

void ModelConfig::validate() const {
    auto check = [](bool ok, const std::string& what) { require(ok, ErrorKind::configuration, what); };
    check(d_tsdae > 0, "d_tsdae must be positive");
    check(d_use > 0, "d_use must be positive");
    for (std::size_t w : tsdae_hidden) check(w > 0, "tsdae branch widths must be positive");
    for (std::size_t w : use_hidden) check(w > 0, "use branch widths must be positive");
    check(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must lie in [0, 1)");
    check(n_classes >= 2, "n_classes must be at least 2");
    check(activation == Activation::relu, "unsupported activation");
}

void TrainConfig::validate() const {
    auto check = [](bool ok, const std::string& what) { require(ok, ErrorKind::configuration, what); };
    check(batch_size >= 1, "batch_size must be at least 1");
    check(max_epochs >= 1, "max_epochs must be at least 1");
    check(patience <= max_epochs, "patience must not exceed max_epochs");
    check(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
    check(weight_decay >= 0.0 && std::isfinite(weight_decay), "weight_decay must be non-negative");
    check(beta1 >= 0.0 && beta1 < 1.0, "beta1 must lie in [0, 1)");
    check(beta2 >= 0.0 && beta2 < 1.0, "beta2 must lie in [0, 1)");
    check(epsilon > 0.0, "epsilon must be positive");
    if (class_weights) {
        for (double w : *class_weights) check(w > 0.0 && std::isfinite(w), "class weights must be positive");
    }
}

// ============================================================================
// Parameters
// ============================================================================

template <typename Real>
ParamSet<Real> ParamSet<Real>::zeros_like() const {
    ParamSet out = *this;
    out.for_each_layer([](DenseLayer<Real>& l) {
        std::fill(l.weights.begin(), l.weights.end(), Real(0));
        std::fill(l.bias.begin(), l.bias.end(), Real(0));
    });
    return out;
}

template <typename Real>
BasicModel<Real> init_model(const ModelConfig& cfg) {
    cfg.validate();
    BasicModel<Real> m{cfg, make_params<Real>(cfg)};
    Rng rng(cfg.seed);
    m.params.for_each_layer([&](DenseLayer<Real>& l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
        for (auto& w : l.weights) w = static_cast<Real>(rng.uniform(-bound, bound));
    });
    return m;
}

template <typename To, typename From>
BasicModel<To> convert_model(const BasicModel<From>& m) {
    BasicModel<To> out{m.config, make_params<To>(m.config)};
    std::vector<const DenseLayer<From>*> src;
    m.params.for_each_layer([&](const DenseLayer<From>& l) { src.push_back(&l); });
    std::size_t i = 0;
    out.params.for_each_layer([&](DenseLayer<To>& l) {
        const auto& s = *src[i++];
        std::transform(s.weights.begin(), s.weights.end(), l.weights.begin(), [](From v) { return To(v); });
        std::transform(s.bias.begin(), s.bias.end(), l.bias.begin(), [](From v) { return To(v); });
    });
    return out;
}

std::size_t param_count(const ModelConfig& cfg) {
    std::size_t total = 0;
    auto branch = [&](std::size_t in, const std::vector<std::size_t>& widths) {
        for (std::size_t w : widths) {
            total += in * w + w;
            in = w;
        }
        return in;
    };
    const std::size_t t_out = branch(cfg.d_tsdae, cfg.tsdae_hidden);
    const std::size_t u_out = branch(cfg.d_use, cfg.use_hidden);
    total += (t_out + u_out) * cfg.n_classes + cfg.n_classes;
    return total;
}

template <typename Real>
std::size_t param_count(const BasicModel<Real>& m) {
    std::size_t total = 0;
    m.params.for_each_layer([&](const DenseLayer<Real>& l) { total += l.param_count(); });
    return total;
}

// ============================================================================
// Forward
// ============================================================================

template <typename Real>
Matrix<Real> forward(const BasicModel<Real>& m, const Matrix<Real>& batch_tsdae, const Matrix<Real>& batch_use,
                     bool train_mode, Rng* rng, ForwardCache<Real>* cache) {
    const auto& cfg = m.config;
    require(batch_tsdae.cols == cfg.d_tsdae, ErrorKind::invalid_input,
            "tsdae batch has " + std::to_string(batch_tsdae.cols) + " columns, model expects " +
                std::to_string(cfg.d_tsdae));
    require(batch_use.cols == cfg.d_use, ErrorKind::invalid_input,
            "use batch has " + std::to_string(batch_use.cols) + " columns, model expects " +
                std::to_string(cfg.d_use));
    require(batch_tsdae.rows == batch_use.rows, ErrorKind::invalid_input, "stream batches differ in row count");
    const bool drop = train_mode && cfg.dropout_rate > 0.0;
    require(!drop || rng != nullptr, ErrorKind::invalid_input, "train-mode dropout needs an rng");

    ForwardCache<Real> local;
    ForwardCache<Real>& c = cache ? *cache : local;
    run_branch(m.params.tsdae_branch, batch_tsdae, train_mode, cfg.dropout_rate, rng, c.tsdae_inputs,
               c.tsdae_gates, c.tsdae_out);
    run_branch(m.params.use_branch, batch_use, train_mode, cfg.dropout_rate, rng, c.use_inputs, c.use_gates,
               c.use_out);

    const auto& head = m.params.head;
    const std::size_t t_w = c.tsdae_out.cols;
    Matrix<Real> logits(batch_tsdae.rows, head.out);
    add_bias_rows(logits, head.bias);
    gemm_acc(c.tsdae_out.data.data(), logits.rows, t_w, head.weights.data(), head.out, logits.data.data());
    gemm_acc(c.use_out.data.data(), logits.rows, c.use_out.cols, head.weights.data() + t_w * head.out, head.out,
             logits.data.data());
    return logits;
}

// ============================================================================
// Softmax / loss
// ============================================================================

std::vector<double> softmax(std::span<const double> logits) {
    require(!logits.empty(), ErrorKind::invalid_input, "softmax of an empty vector");
    for (double v : logits) require(!std::isnan(v), ErrorKind::invalid_input, "softmax input contains NaN");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

template <typename Real>
Matrix<Real> softmax_rows(const Matrix<Real>& logits) {
    Matrix<Real> probs(logits.rows, logits.cols);
    std::vector<double> row(logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        const auto src = logits.row(r);
        std::transform(src.begin(), src.end(), row.begin(), [](Real v) { return static_cast<double>(v); });
        const auto p = softmax(row);
        std::transform(p.begin(), p.end(), probs.data.begin() + r * probs.cols,
                       [](double v) { return static_cast<Real>(v); });
    }
    return probs;
}

template <typename Real>
double cross_entropy_loss(const Matrix<Real>& probs, std::span<const int> targets,
                          std::span<const double> class_weights) {
    require(targets.size() == probs.rows, ErrorKind::invalid_input, "targets length differs from batch rows");
    require(class_weights.empty() || class_weights.size() == probs.cols, ErrorKind::invalid_input,
            "class_weights length differs from class count");
    if (probs.rows == 0) return 0.0;
    double total = 0.0;
    for (std::size_t r = 0; r < probs.rows; ++r) {
        const int y = targets[r];
        require(y >= 0 && static_cast<std::size_t>(y) < probs.cols, ErrorKind::invalid_input,
                "target " + std::to_string(y) + " out of range");
        const double p = static_cast<double>(probs(r, static_cast<std::size_t>(y)));
        const double logp = p > 0.0 ? std::max(std::log(p), kLogClamp) : kLogClamp;
        const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(y)];
        total += -w * logp;
    }
    return total / static_cast<double>(probs.rows);
}

// ============================================================================
// Backward
// ============================================================================

namespace {

// Propagates dout (gradient w.r.t. the branch output) down the branch.
template <typename Real>
void backward_branch(const std::vector<DenseLayer<Real>>& layers, const std::vector<Matrix<Real>>& inputs,
                     const std::vector<Matrix<Real>>& gates, Matrix<Real> dout, std::vector<DenseLayer<Real>>& grads,
                     std::vector<Real>& scratch) {
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& layer = layers[li];
        const auto& gate = gates[li];
        for (std::size_t i = 0; i < dout.data.size(); ++i) dout.data[i] *= gate.data[i];
        auto& g = grads[li];
        gemm_at_b_acc(inputs[li].data.data(), dout.rows, layer.in, dout.data.data(), layer.out, g.weights.data());
        column_sums_acc(dout, g.bias);
        if (li == 0) break;
        Matrix<Real> dx(dout.rows, layer.in);
        gemm_a_bt(dout.data.data(), dout.rows, layer.out, layer.weights.data(), layer.in, dx.data.data(), scratch);
        dout = std::move(dx);
    }
}

}  // namespace

// The loss clamp is ignored here: the gradient is the unclamped w_y (p - onehot) / N,
// so confidently wrong rows still receive signal.
template <typename Real>
Gradients<Real> backward(const BasicModel<Real>& m, const ForwardCache<Real>& cache, const Matrix<Real>& probs,
                         std::span<const int> targets, std::span<const double> class_weights) {
    require(targets.size() == probs.rows, ErrorKind::invalid_input, "targets length differs from batch rows");
    require(class_weights.empty() || class_weights.size() == probs.cols, ErrorKind::invalid_input,
            "class_weights length differs from class count");
    Gradients<Real> g = m.params.zeros_like();
    const std::size_t n = probs.rows;
    if (n == 0) return g;

    Matrix<Real> dlogits(n, probs.cols);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        const int y = targets[r];
        require(y >= 0 && static_cast<std::size_t>(y) < probs.cols, ErrorKind::invalid_input,
                "target " + std::to_string(y) + " out of range");
        const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(y)];
        for (std::size_t c = 0; c < probs.cols; ++c) {
            const double onehot = static_cast<int>(c) == y ? 1.0 : 0.0;
            dlogits(r, c) = static_cast<Real>(w * (static_cast<double>(probs(r, c)) - onehot) * inv_n);
        }
    }

    const auto& head = m.params.head;
    const std::size_t t_w = cache.tsdae_out.cols;
    const std::size_t u_w = cache.use_out.cols;
    gemm_at_b_acc(cache.tsdae_out.data.data(), n, t_w, dlogits.data.data(), head.out, g.head.weights.data());
    gemm_at_b_acc(cache.use_out.data.data(), n, u_w, dlogits.data.data(), head.out,
                  g.head.weights.data() + t_w * head.out);
    column_sums_acc(dlogits, g.head.bias);

    std::vector<Real> scratch;
    if (!m.params.tsdae_branch.empty()) {
        Matrix<Real> dt(n, t_w);
        gemm_a_bt(dlogits.data.data(), n, head.out, head.weights.data(), t_w, dt.data.data(), scratch);
        backward_branch(m.params.tsdae_branch, cache.tsdae_inputs, cache.tsdae_gates, std::move(dt), g.tsdae_branch,
                        scratch);
    }
    if (!m.params.use_branch.empty()) {
        Matrix<Real> du(n, u_w);
        gemm_a_bt(dlogits.data.data(), n, head.out, head.weights.data() + t_w * head.out, u_w, du.data.data(),
                  scratch);
        backward_branch(m.params.use_branch, cache.use_inputs, cache.use_gates, std::move(du), g.use_branch,
                        scratch);
    }
    return g;
}

template <typename Real>
LossAndGrad<Real> loss_and_gradients(const BasicModel<Real>& m, const Matrix<Real>& batch_tsdae,
                                     const Matrix<Real>& batch_use, std::span<const int> targets,
                                     std::span<const double> class_weights, bool train_mode, Rng* rng) {
    ForwardCache<Real> cache;
    const auto logits = forward(m, batch_tsdae, batch_use, train_mode, rng, &cache);
    const auto probs = softmax_rows(logits);
    LossAndGrad<Real> out;
    out.loss = cross_entropy_loss(probs, targets, class_weights);
    out.grads = backward(m, cache, probs, targets, class_weights);
    return out;
}

// ============================================================================
// AdamW
// ============================================================================

template <typename Real>
OptState<Real> OptState<Real>::for_model(const BasicModel<Real>& m) {
    OptState s;
    s.first_moment = m.params.zeros_like();
    s.second_moment = m.params.zeros_like();
    return s;
}

template <typename Real>
void adamw_step(BasicModel<Real>& m, const Gradients<Real>& g, OptState<Real>& state, const TrainConfig& tc) {
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(tc.beta1, t);
    const double bc2 = 1.0 - std::pow(tc.beta2, t);
    const double decay = 1.0 - tc.learning_rate * tc.weight_decay;

    auto update = [&](std::vector<Real>& w, const std::vector<Real>& grad, std::vector<Real>& m1,
                      std::vector<Real>& m2) {
        require(w.size() == grad.size() && w.size() == m1.size() && w.size() == m2.size(),
                ErrorKind::invalid_input, "adamw_step: parameter shape mismatch");
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = static_cast<double>(grad[i]);
            const double mi = tc.beta1 * static_cast<double>(m1[i]) + (1.0 - tc.beta1) * gi;
            const double vi = tc.beta2 * static_cast<double>(m2[i]) + (1.0 - tc.beta2) * gi * gi;
            m1[i] = static_cast<Real>(mi);
            m2[i] = static_cast<Real>(vi);
            const double step = tc.learning_rate * (mi / bc1) / (std::sqrt(vi / bc2) + tc.epsilon);
            w[i] = static_cast<Real>(static_cast<double>(w[i]) * decay - step);
        }
    };

    std::vector<DenseLayer<Real>*> params, first, second;
    std::vector<const DenseLayer<Real>*> grads;
    m.params.for_each_layer([&](DenseLayer<Real>& l) { params.push_back(&l); });
    state.first_moment.for_each_layer([&](DenseLayer<Real>& l) { first.push_back(&l); });
    state.second_moment.for_each_layer([&](DenseLayer<Real>& l) { second.push_back(&l); });
    g.for_each_layer([&](const DenseLayer<Real>& l) { grads.push_back(&l); });
    require(params.size() == grads.size() && params.size() == first.size(), ErrorKind::invalid_input,
            "adamw_step: layer count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        update(params[i]->weights, grads[i]->weights, first[i]->weights, second[i]->weights);
        update(params[i]->bias, grads[i]->bias, first[i]->bias, second[i]->bias);
    }
}

// ============================================================================
// Training
// ============================================================================

Matrix<float> predict_logits(const Model& m, const DualDataset& ds, std::size_t chunk) {
    Matrix<float> out(ds.size(), m.config.n_classes);
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < ds.size(); start += chunk) {
        const std::size_t end = std::min(ds.size(), start + chunk);
        rows.resize(end - start);
        std::iota(rows.begin(), rows.end(), start);
        const auto t = to_matrix<float>(ds.tsdae, rows);
        const auto u = to_matrix<float>(ds.use, rows);
        const auto logits = forward(m, t, u, false, nullptr);
        std::copy(logits.data.begin(), logits.data.end(), out.data.begin() + start * out.cols);
    }
    return out;
}

double accuracy(const Model& m, const DualDataset& ds) {
    if (ds.size() == 0) return 0.0;
    const auto logits = predict_logits(m, ds);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < ds.size(); ++r) {
        if (static_cast<int>(argmax(logits.row(r))) == ds.labels[r]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ds.size());
}

TrainResult train(const Model& initial, const DualDataset& train_set, const DualDataset& val_set,
                  const TrainConfig& tc, const TrainHooks& hooks) {
    tc.validate();
    require(train_set.size() > 0, ErrorKind::invalid_input, "training set is empty");
    require(val_set.size() > 0, ErrorKind::invalid_input, "validation set is empty");
    {
        auto labels = train_set.labels;
        std::sort(labels.begin(), labels.end());
        require(std::unique(labels.begin(), labels.end()) - labels.begin() >= 2, ErrorKind::insufficient_classes,
                "training labels cover fewer than 2 classes");
    }
    const std::size_t n_classes = initial.config.n_classes;
    std::span<const double> weights;
    if (tc.class_weights) {
        require(tc.class_weights->size() == n_classes, ErrorKind::configuration,
                "class_weights has " + std::to_string(tc.class_weights->size()) + " entries, model has " +
                    std::to_string(n_classes) + " classes");
        weights = *tc.class_weights;
    }

    Rng shuffle_rng(mix_seed(tc.seed, 1));
    Rng dropout_rng(mix_seed(tc.seed, 2));

    Model model = initial;
    auto opt = OptState<float>::for_model(model);
    DualDataset working = train_set;
    TrainResult result{model, {}};
    double best_acc = -1.0;
    std::size_t wait = 0;

    ForwardCache<float> cache;
    std::vector<std::size_t> order;
    std::vector<int> targets;
    for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        if (hooks.before_epoch) hooks.before_epoch(epoch, working);
        order.resize(working.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_rng.shuffle(std::span<std::size_t>(order));

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
            const std::size_t end = std::min(order.size(), start + tc.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, end - start);
            const auto t = to_matrix<float>(working.tsdae, rows);
            const auto u = to_matrix<float>(working.use, rows);
            targets.resize(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) targets[i] = working.labels[rows[i]];

            const auto logits = forward(model, t, u, true, &dropout_rng, &cache);
            const auto probs = softmax_rows(logits);
            loss_sum += cross_entropy_loss(probs, targets, weights);
            const auto grads = backward(model, cache, probs, targets, weights);
            adamw_step(model, grads, opt, tc);
            ++batches;
        }

        const double val_acc = accuracy(model, val_set);
        result.history.train_loss.push_back(loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1)));
        result.history.val_accuracy.push_back(val_acc);
        result.history.stopped_epoch = epoch;

        // Only strict improvements reset patience.
        if (val_acc > best_acc) {
            best_acc = val_acc;
            result.history.best_epoch = epoch;
            result.model = model;
            wait = 0;
        } else if (++wait >= tc.patience) {
            break;
        }
    }
    return result;
}

// ============================================================================
// Explicit instantiations
// ============================================================================

#define DETER_INSTANTIATE(Real)                                                                                   \
    template struct ParamSet<Real>;                                                                               \
    template Matrix<Real> to_matrix<Real>(const EmbeddingMatrix&, std::span<const std::size_t>);                  \
    template std::size_t argmax<Real>(std::span<const Real>);                                                     \
    template BasicModel<Real> init_model<Real>(const ModelConfig&);                                               \
    template std::size_t param_count<Real>(const BasicModel<Real>&);                                              \
    template Matrix<Real> forward<Real>(const BasicModel<Real>&, const Matrix<Real>&, const Matrix<Real>&, bool,  \
                                        Rng*, ForwardCache<Real>*);                                               \
    template Matrix<Real> softmax_rows<Real>(const Matrix<Real>&);                                                \
    template double cross_entropy_loss<Real>(const Matrix<Real>&, std::span<const int>, std::span<const double>); \
    template Gradients<Real> backward<Real>(const BasicModel<Real>&, const ForwardCache<Real>&,                   \
                                            const Matrix<Real>&, std::span<const int>, std::span<const double>);  \
    template LossAndGrad<Real> loss_and_gradients<Real>(const BasicModel<Real>&, const Matrix<Real>&,             \
                                                        const Matrix<Real>&, std::span<const int>,                \
                                                        std::span<const double>, bool, Rng*);                     \
    template struct OptState<Real>;                                                                               \
    template void adamw_step<Real>(BasicModel<Real>&, const Gradients<Real>&, OptState<Real>&, const TrainConfig&);

DETER_INSTANTIATE(float)
DETER_INSTANTIATE(double)
#undef DETER_INSTANTIATE

template BasicModel<double> convert_model<double, float>(const BasicModel<float>&);
template BasicModel<float> convert_model<float, double>(const BasicModel<double>&);
template BasicModel<float> convert_model<float, float>(const BasicModel<float>&);
template BasicModel<double> convert_model<double, double>(const BasicModel<double>&);

}  // namespace deter
