#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fpd/dataset.hpp"
#include "fpd/errors.hpp"
#include "fpd/rng.hpp"
#include "fpd/vecmath.hpp"

namespace fpd {

struct IndexRange {
    std::size_t offset = 0;
    std::size_t length = 0;
};

// One-hidden-layer MLP (ReLU hidden, softmax output) over a flat parameter
// vector. Layout: hidden weights row-major, hidden biases, output weights
// row-major, output biases. The output-weight block is the "last two layers"
// slice the denoiser operates on.
class Model {
public:
    Model(int input, int hidden, int out, ParamVector params)
        : input_(input), hidden_(hidden), out_(out), params_(std::move(params)) {
        if (params_.dim() != flat_dim(input, hidden, out))
            throw DimensionMismatch("Model: parameter vector has wrong length");
    }

    static std::size_t flat_dim(int input, int hidden, int out) {
        return static_cast<std::size_t>(hidden) * input + hidden +
               static_cast<std::size_t>(out) * hidden + out;
    }

    // Xavier-uniform weights, zero biases, deterministic per seed.
    static Model init(int input, int hidden, int out, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<double> p(flat_dim(input, hidden, out), 0.0);
        double lim1 = std::sqrt(6.0 / (input + hidden));
        double lim2 = std::sqrt(6.0 / (hidden + out));
        std::size_t i = 0;
        for (int j = 0; j < hidden * input; ++j) p[i++] = (2.0 * rng.uniform01() - 1.0) * lim1;
        i += hidden;  // hidden biases zero
        for (int j = 0; j < out * hidden; ++j) p[i++] = (2.0 * rng.uniform01() - 1.0) * lim2;
        return Model(input, hidden, out, ParamVector(std::move(p)));
    }

    int input_dim() const noexcept { return input_; }
    int hidden_dim() const noexcept { return hidden_; }
    int out_dim() const noexcept { return out_; }
    std::size_t dim() const noexcept { return params_.dim(); }
    const ParamVector& params() const noexcept { return params_; }

    IndexRange last_two_layers_slice() const noexcept {
        return {static_cast<std::size_t>(hidden_) * input_ + hidden_,
                static_cast<std::size_t>(out_) * hidden_};
    }

    // Class probabilities for one sample (softmax, numerically stable).
    std::vector<double> predict_proba(const std::vector<double>& x) const {
        std::vector<double> a1(hidden_), z(out_);
        forward(params_.values(), x, a1, z);
        double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (double& zi : z) {
            zi = std::exp(zi - zmax);
            denom += zi;
        }
        for (double& zi : z) zi /= denom;
        return z;
    }

    // Mean cross-entropy over a dataset.
    double mean_loss(const LabeledDataset& ds) const {
        if (ds.empty()) throw EvalError("mean_loss: empty dataset");
        double total = 0.0;
        std::vector<double> a1(hidden_), z(out_);
        for (std::size_t s = 0; s < ds.size(); ++s) {
            forward(params_.values(), ds.features[s], a1, z);
            total += ce_from_logits(z, ds.labels[s]);
        }
        return total / static_cast<double>(ds.size());
    }

    // Mean cross-entropy gradient over a dataset (flat, analytic backprop).
    std::vector<double> loss_gradient(const LabeledDataset& ds) const {
        if (ds.empty()) throw EvalError("loss_gradient: empty dataset");
        std::vector<double> grad(dim(), 0.0);
        accumulate_gradient(params_.values(), ds, 0, ds.size(), grad);
        double inv = 1.0 / static_cast<double>(ds.size());
        for (double& g : grad) g *= inv;
        return grad;
    }

private:
    friend ParamVector local_train(const Model&, const LabeledDataset&, int, double, int,
                                   std::uint64_t);
    friend double evaluate(const Model&, const LabeledDataset&);
    friend Model apply_global(const Model&, const ParamVector&);

    void forward(const std::vector<double>& p, const std::vector<double>& x,
                 std::vector<double>& a1, std::vector<double>& z) const {
        const std::size_t w1 = 0;
        const std::size_t b1 = static_cast<std::size_t>(hidden_) * input_;
        const std::size_t w2 = b1 + hidden_;
        const std::size_t b2 = w2 + static_cast<std::size_t>(out_) * hidden_;
        for (int h = 0; h < hidden_; ++h) {
            double s = p[b1 + h];
            const double* row = &p[w1 + static_cast<std::size_t>(h) * input_];
            for (int i = 0; i < input_; ++i) s += row[i] * x[i];
            a1[h] = s > 0.0 ? s : 0.0;
        }
        for (int o = 0; o < out_; ++o) {
            double s = p[b2 + o];
            const double* row = &p[w2 + static_cast<std::size_t>(o) * hidden_];
            for (int h = 0; h < hidden_; ++h) s += row[h] * a1[h];
            z[o] = s;
        }
    }

    static double ce_from_logits(const std::vector<double>& z, int label) {
        double zmax = *std::max_element(z.begin(), z.end());
        double lse = 0.0;
        for (double zi : z) lse += std::exp(zi - zmax);
        return std::log(lse) + zmax - z[label];
    }

    // Adds sum-of-sample gradients for samples [lo, hi) to grad.
    void accumulate_gradient(const std::vector<double>& p, const LabeledDataset& ds,
                             std::size_t lo, std::size_t hi, std::vector<double>& grad) const {
        const std::size_t w1 = 0;
        const std::size_t b1 = static_cast<std::size_t>(hidden_) * input_;
        const std::size_t w2 = b1 + hidden_;
        const std::size_t b2 = w2 + static_cast<std::size_t>(out_) * hidden_;
        std::vector<double> a1(hidden_), z(out_), dz(out_), da1(hidden_);
        for (std::size_t s = lo; s < hi; ++s) {
            const auto& x = ds.features[s];
            forward(p, x, a1, z);
            double zmax = *std::max_element(z.begin(), z.end());
            double denom = 0.0;
            for (int o = 0; o < out_; ++o) {
                dz[o] = std::exp(z[o] - zmax);
                denom += dz[o];
            }
            for (int o = 0; o < out_; ++o) dz[o] /= denom;
            dz[ds.labels[s]] -= 1.0;  // softmax + cross-entropy

            for (int o = 0; o < out_; ++o) {
                double* wrow = &grad[w2 + static_cast<std::size_t>(o) * hidden_];
                for (int h = 0; h < hidden_; ++h) wrow[h] += dz[o] * a1[h];
                grad[b2 + o] += dz[o];
            }
            for (int h = 0; h < hidden_; ++h) {
                double s2 = 0.0;
                for (int o = 0; o < out_; ++o)
                    s2 += p[w2 + static_cast<std::size_t>(o) * hidden_ + h] * dz[o];
                da1[h] = a1[h] > 0.0 ? s2 : 0.0;  // ReLU gate
            }
            for (int h = 0; h < hidden_; ++h) {
                if (da1[h] == 0.0) continue;
                double* wrow = &grad[w1 + static_cast<std::size_t>(h) * input_];
                for (int i = 0; i < input_; ++i) wrow[i] += da1[h] * x[i];
                grad[b1 + h] += da1[h];
            }
        }
    }

    int input_, hidden_, out_;
    ParamVector params_;
};

// E epochs of seeded mini-batch SGD with cross-entropy loss; returns the local
// update w_local - w_global.
inline ParamVector local_train(const Model& global, const LabeledDataset& ds, int epochs,
                               double lr, int batch, std::uint64_t seed) {
    if (ds.empty()) throw TrainError("local_train: empty dataset");
    if (batch < 1) throw ConfigError("batch", "batch size must be >= 1");

    std::vector<double> p = global.params().values();
    Rng rng(seed);
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0u);

    LabeledDataset view;  // batch view, reused
    view.num_labels = ds.num_labels;
    std::vector<double> grad(p.size());
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            std::size_t stop = std::min(order.size(), start + batch);
            view.features.clear();
            view.labels.clear();
            for (std::size_t i = start; i < stop; ++i) {
                view.features.push_back(ds.features[order[i]]);
                view.labels.push_back(ds.labels[order[i]]);
            }
            std::fill(grad.begin(), grad.end(), 0.0);
            global.accumulate_gradient(p, view, 0, view.size(), grad);
            double scale = lr / static_cast<double>(view.size());
            for (std::size_t i = 0; i < p.size(); ++i) p[i] -= scale * grad[i];
        }
    }

    std::vector<double> delta(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) delta[i] = p[i] - global.params()[i];
    return ParamVector(std::move(delta));
}

inline Model apply_global(const Model& w, const ParamVector& agg) {
    return Model(w.input_, w.hidden_, w.out_, w.params_ + agg);
}

// Fraction of argmax-correct predictions; logit ties break toward the lowest
// label index.
inline double evaluate(const Model& w, const LabeledDataset& test) {
    if (test.empty()) throw EvalError("evaluate: empty test set");
    std::size_t correct = 0;
    std::vector<double> a1(w.hidden_dim()), z(w.out_dim());
    for (std::size_t s = 0; s < test.size(); ++s) {
        w.forward(w.params().values(), test.features[s], a1, z);
        int best = 0;
        for (int o = 1; o < w.out_dim(); ++o)
            if (z[o] > z[best]) best = o;
        if (best == test.labels[s]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

struct LocalUpdate {
    ClientId client_id = 0;
    ParamVector delta;
    int claimed_size = 0;  // n_k as reported; untrusted
};

}  // namespace fpd
