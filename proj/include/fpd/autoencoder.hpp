#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <span>
#include <vector>

#include "fpd/errors.hpp"
#include "fpd/rng.hpp"

namespace fpd {

// Feed-forward autoencoder: tanh encoder, linear decoder, trained by seeded
// mini-batch SGD on sum-of-squares reconstruction loss.
class Autoencoder {
public:
    Autoencoder(int input_dim, int hidden_dim, std::uint64_t seed)
        : in_(input_dim), hid_(hidden_dim),
          params_(static_cast<std::size_t>(hid_) * in_ + hid_ +
                      static_cast<std::size_t>(in_) * hid_ + in_,
                  0.0) {
        Rng rng(seed);
        double lim = std::sqrt(6.0 / (in_ + hid_));
        for (int j = 0; j < hid_ * in_; ++j)
            params_[j] = (2.0 * rng.uniform01() - 1.0) * lim;
        std::size_t wd = static_cast<std::size_t>(hid_) * in_ + hid_;
        for (int j = 0; j < in_ * hid_; ++j)
            params_[wd + j] = (2.0 * rng.uniform01() - 1.0) * lim;
    }

    int input_dim() const noexcept { return in_; }
    int hidden_dim() const noexcept { return hid_; }
    std::vector<double>& params() noexcept { return params_; }
    const std::vector<double>& params() const noexcept { return params_; }

    std::vector<double> reconstruct(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != in_)
            throw DimensionMismatch("Autoencoder: input dimension mismatch");
        std::vector<double> z(hid_), out(in_);
        encode(x, z);
        decode(z, out);
        return out;
    }

    // ||x - ae(x)||^2
    double reconstruction_error(std::span<const double> x) const {
        std::vector<double> r = reconstruct(x);
        double e = 0.0;
        for (int i = 0; i < in_; ++i) {
            double d = x[i] - r[i];
            e += d * d;
        }
        return e;
    }

    // Gradient of ||x - ae(x)||^2 with respect to the flat parameters.
    std::vector<double> loss_gradient(std::span<const double> x) const {
        std::vector<double> grad(params_.size(), 0.0);
        accumulate_gradient(x, grad);
        return grad;
    }

    // SGD over the buffer: sum-squared loss averaged per batch.
    void train(const std::deque<std::vector<double>>& buffer, int epochs, int batch,
               double lr, Rng& rng) {
        if (buffer.empty()) return;
        std::vector<std::size_t> order(buffer.size());
        std::iota(order.begin(), order.end(), 0u);
        std::vector<double> grad(params_.size());
        for (int e = 0; e < epochs; ++e) {
            rng.shuffle(order);
            for (std::size_t start = 0; start < order.size(); start += batch) {
                std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch));
                std::fill(grad.begin(), grad.end(), 0.0);
                for (std::size_t i = start; i < stop; ++i)
                    accumulate_gradient(buffer[order[i]], grad);
                double scale = lr / static_cast<double>(stop - start);
                for (std::size_t i = 0; i < params_.size(); ++i)
                    params_[i] -= scale * grad[i];
            }
        }
    }

private:
    void encode(std::span<const double> x, std::vector<double>& z) const {
        const std::size_t be = static_cast<std::size_t>(hid_) * in_;
        for (int h = 0; h < hid_; ++h) {
            double s = params_[be + h];
            const double* row = &params_[static_cast<std::size_t>(h) * in_];
            for (int i = 0; i < in_; ++i) s += row[i] * x[i];
            z[h] = std::tanh(s);
        }
    }

    void decode(const std::vector<double>& z, std::vector<double>& out) const {
        const std::size_t wd = static_cast<std::size_t>(hid_) * in_ + hid_;
        const std::size_t bd = wd + static_cast<std::size_t>(in_) * hid_;
        for (int i = 0; i < in_; ++i) {
            double s = params_[bd + i];
            const double* row = &params_[wd + static_cast<std::size_t>(i) * hid_];
            for (int h = 0; h < hid_; ++h) s += row[h] * z[h];
            out[i] = s;
        }
    }

    void accumulate_gradient(std::span<const double> x, std::vector<double>& grad) const {
        const std::size_t be = static_cast<std::size_t>(hid_) * in_;
        const std::size_t wd = be + hid_;
        const std::size_t bd = wd + static_cast<std::size_t>(in_) * hid_;

        std::vector<double> z(hid_), out(in_);
        encode(x, z);
        decode(z, out);

        std::vector<double> dout(in_), dz(hid_, 0.0);
        for (int i = 0; i < in_; ++i) dout[i] = 2.0 * (out[i] - x[i]);
        for (int i = 0; i < in_; ++i) {
            const double* row = &params_[wd + static_cast<std::size_t>(i) * hid_];
            double* grow = &grad[wd + static_cast<std::size_t>(i) * hid_];
            for (int h = 0; h < hid_; ++h) {
                grow[h] += dout[i] * z[h];
                dz[h] += row[h] * dout[i];
            }
            grad[bd + i] += dout[i];
        }
        for (int h = 0; h < hid_; ++h) {
            double dpre = dz[h] * (1.0 - z[h] * z[h]);  // tanh'
            double* grow = &grad[static_cast<std::size_t>(h) * in_];
            for (int i = 0; i < in_; ++i) grow[i] += dpre * x[i];
            grad[be + h] += dpre;
        }
    }

    int in_, hid_;
    std::vector<double> params_;
};

}  // namespace fpd
