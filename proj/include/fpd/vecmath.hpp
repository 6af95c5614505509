#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "fpd/errors.hpp"
#include "fpd/rng.hpp"

namespace fpd {

using ClientId = int;

// Flat vector of model parameters or updates. The one invariant enforced at
// construction: non-empty and every entry finite.
class ParamVector {
public:
    ParamVector() = default;

    explicit ParamVector(std::vector<double> values) : v_(std::move(values)) {
        if (v_.empty()) throw InvalidValue("ParamVector: empty");
        for (double x : v_) {
            if (!std::isfinite(x)) throw InvalidValue("ParamVector: non-finite entry");
        }
    }

    static ParamVector zeros(std::size_t dim) {
        return ParamVector(std::vector<double>(dim, 0.0));
    }

    std::size_t dim() const noexcept { return v_.size(); }
    bool empty() const noexcept { return v_.empty(); }

    double operator[](std::size_t i) const { return v_[i]; }
    const std::vector<double>& values() const noexcept { return v_; }
    std::span<const double> span() const noexcept { return v_; }

    auto begin() const noexcept { return v_.begin(); }
    auto end() const noexcept { return v_.end(); }

    friend bool operator==(const ParamVector& a, const ParamVector& b) = default;

private:
    std::vector<double> v_;
};

inline void require_same_dim(const ParamVector& a, const ParamVector& b) {
    if (a.dim() != b.dim()) throw DimensionMismatch("vector dimensions differ");
}

inline double dot(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const ParamVector& a) { return std::sqrt(dot(a, a)); }

inline ParamVector operator+(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b);
    std::vector<double> r(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) r[i] = a[i] + b[i];
    return ParamVector(std::move(r));
}

inline ParamVector operator-(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b);
    std::vector<double> r(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) r[i] = a[i] - b[i];
    return ParamVector(std::move(r));
}

inline ParamVector operator*(double s, const ParamVector& a) {
    std::vector<double> r(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) r[i] = s * a[i];
    return ParamVector(std::move(r));
}

// Cosine similarity, clamped to [-1, 1] against floating-point overshoot.
inline double cosine(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b);
    double na = norm(a);
    double nb = norm(b);
    if (na == 0.0 || nb == 0.0) throw DegenerateVector("cosine: zero-norm input");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

inline ParamVector normalize(const ParamVector& a) {
    double n = norm(a);
    if (n == 0.0) throw DegenerateVector("normalize: zero-norm input");
    return (1.0 / n) * a;
}

// Rows of normalized vectors minus their mean, ids aligned with rows.
class CenteredMatrix {
public:
    CenteredMatrix(std::vector<ParamVector> rows, std::vector<ClientId> row_ids)
        : rows_(std::move(rows)), ids_(std::move(row_ids)) {
        if (rows_.size() != ids_.size())
            throw DimensionMismatch("CenteredMatrix: rows/ids length mismatch");
        for (const auto& r : rows_) require_same_dim(r, rows_.front());
    }

    // Center the given vectors about their mean.
    static CenteredMatrix center(const std::map<ClientId, ParamVector>& vectors) {
        if (vectors.empty()) throw DegenerateMatrix("center: no rows");
        std::size_t d = vectors.begin()->second.dim();
        std::vector<double> mu(d, 0.0);
        for (const auto& [id, v] : vectors) {
            require_same_dim(v, vectors.begin()->second);
            for (std::size_t i = 0; i < d; ++i) mu[i] += v[i];
        }
        for (double& m : mu) m /= static_cast<double>(vectors.size());
        std::vector<ParamVector> rows;
        std::vector<ClientId> ids;
        rows.reserve(vectors.size());
        for (const auto& [id, v] : vectors) {
            std::vector<double> r(d);
            for (std::size_t i = 0; i < d; ++i) r[i] = v[i] - mu[i];
            rows.emplace_back(std::move(r));
            ids.push_back(id);
        }
        return CenteredMatrix(std::move(rows), std::move(ids));
    }

    std::size_t num_rows() const noexcept { return rows_.size(); }
    std::size_t num_cols() const noexcept { return rows_.empty() ? 0 : rows_.front().dim(); }
    const std::vector<ParamVector>& rows() const noexcept { return rows_; }
    const std::vector<ClientId>& row_ids() const noexcept { return ids_; }

    bool all_zero() const noexcept {
        for (const auto& r : rows_)
            for (double x : r)
                if (x != 0.0) return false;
        return true;
    }

private:
    std::vector<ParamVector> rows_;
    std::vector<ClientId> ids_;
};

struct SingularVectorResult {
    ParamVector v;    // unit norm, largest-magnitude entry positive
    bool converged;
};

namespace detail {

// One application of x -> G^T (G x) without forming G^T G.
inline std::vector<double> gram_apply(const CenteredMatrix& g, const std::vector<double>& x) {
    std::vector<double> out(x.size(), 0.0);
    for (const auto& row : g.rows()) {
        double rx = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) rx += row[i] * x[i];
        for (std::size_t i = 0; i < x.size(); ++i) out[i] += rx * row[i];
    }
    return out;
}

inline void canonicalize_sign(std::vector<double>& v) {
    std::size_t imax = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
    if (v[imax] < 0.0)
        for (double& x : v) x = -x;
}

}  // namespace detail

// Top right singular vector of G by power iteration on x -> G^T (G x).
// Converged when successive unit iterates satisfy 1 - |cos| < 1e-10, capped at
// 500 iterations (the last iterate is returned with converged = false).
inline SingularVectorResult top_right_singular_vector(const CenteredMatrix& g,
                                                      std::uint64_t seed) {
    if (g.num_rows() < 2) throw DegenerateMatrix("singular vector: fewer than 2 rows");
    if (g.all_zero()) throw DegenerateMatrix("singular vector: all-zero matrix");

    constexpr double kTol = 1e-10;
    constexpr int kMaxIter = 500;
    const std::size_t d = g.num_cols();

    Rng rng(seed);
    std::vector<double> x(d);
    auto random_unit = [&] {
        for (;;) {
            double n2 = 0.0;
            for (double& xi : x) {
                xi = rng.normal();
                n2 += xi * xi;
            }
            if (n2 > 0.0) {
                double inv = 1.0 / std::sqrt(n2);
                for (double& xi : x) xi *= inv;
                return;
            }
        }
    };
    random_unit();

    bool converged = false;
    for (int it = 0; it < kMaxIter; ++it) {
        std::vector<double> y = detail::gram_apply(g, x);
        double ny = 0.0;
        for (double yi : y) ny += yi * yi;
        ny = std::sqrt(ny);
        if (ny == 0.0) {
            // start vector fell in the null space; redraw
            random_unit();
            continue;
        }
        double c = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            y[i] /= ny;
            c += y[i] * x[i];
        }
        x = std::move(y);
        if (1.0 - std::abs(c) < kTol) {
            converged = true;
            break;
        }
    }
    detail::canonicalize_sign(x);
    return {ParamVector(std::move(x)), converged};
}

// tau_k = (row_k . v)^2 for each centered row.
inline std::map<ClientId, double> outlier_scores(const CenteredMatrix& g,
                                                 const ParamVector& v) {
    std::map<ClientId, double> scores;
    for (std::size_t r = 0; r < g.num_rows(); ++r) {
        const ParamVector& row = g.rows()[r];
        double p = dot(row, v);
        scores[g.row_ids()[r]] = p * p;
    }
    return scores;
}

struct TwoMeansSplit {
    std::set<ClientId> larger;   // cluster with the larger mean
    std::set<ClientId> smaller;
};

// Exact optimal 2-clustering of scalars: the optimum is a contiguous split of
// the sorted sequence, so every split point is scanned. Ties between splits go
// to the one putting fewer points in the larger-mean cluster. All-equal scores
// are defined as "no outliers": larger cluster empty.
inline TwoMeansSplit two_means_1d(const std::vector<std::pair<ClientId, double>>& scores) {
    if (scores.size() < 2) throw ClusterError("two_means_1d: fewer than 2 points");

    std::vector<std::pair<ClientId, double>> s(scores);
    std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });

    const std::size_t n = s.size();
    if (s.front().second == s.back().second) {
        TwoMeansSplit out;
        for (const auto& [id, sc] : s) out.smaller.insert(id);
        return out;
    }

    std::vector<double> pre(n + 1, 0.0), pre2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        pre[i + 1] = pre[i] + s[i].second;
        pre2[i + 1] = pre2[i] + s[i].second * s[i].second;
    }
    auto sse = [&](std::size_t lo, std::size_t hi) {  // [lo, hi)
        double cnt = static_cast<double>(hi - lo);
        double sum = pre[hi] - pre[lo];
        return (pre2[hi] - pre2[lo]) - sum * sum / cnt;
    };

    std::size_t best = 1;
    double best_cost = sse(0, 1) + sse(1, n);
    for (std::size_t i = 2; i < n; ++i) {
        double cost = sse(0, i) + sse(i, n);
        if (cost <= best_cost) {  // ties -> larger i -> fewer points above the split
            best_cost = cost;
            best = i;
        }
    }

    TwoMeansSplit out;
    for (std::size_t i = 0; i < best; ++i) out.smaller.insert(s[i].first);
    for (std::size_t i = best; i < n; ++i) out.larger.insert(s[i].first);
    return out;
}

// Per-coordinate median; even counts take the midpoint of the two middle values.
inline ParamVector coordinate_median(const std::vector<ParamVector>& updates) {
    if (updates.empty()) throw EmptyAggregation("coordinate_median: no input");
    const std::size_t d = updates.front().dim();
    for (const auto& u : updates) require_same_dim(u, updates.front());

    std::vector<double> out(d);
    std::vector<double> col(updates.size());
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t k = 0; k < updates.size(); ++k) col[k] = updates[k][i];
        std::sort(col.begin(), col.end());
        std::size_t m = col.size() / 2;
        out[i] = (col.size() % 2 == 1) ? col[m] : 0.5 * (col[m - 1] + col[m]);
    }
    return ParamVector(std::move(out));
}

}  // namespace fpd
