#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "fpd/errors.hpp"
#include "fpd/model.hpp"
#include "fpd/vecmath.hpp"

namespace fpd {

// Size-weighted averaging using the claimed (untrusted) dataset sizes.
inline ParamVector fedavg(const std::vector<LocalUpdate>& updates) {
    if (updates.empty()) throw EmptyAggregation("fedavg: no updates");
    long total = 0;
    for (const auto& u : updates) total += u.claimed_size;
    if (total <= 0) throw EmptyAggregation("fedavg: zero total claimed size");

    std::vector<double> out(updates.front().delta.dim(), 0.0);
    for (const auto& u : updates) {
        require_same_dim(u.delta, updates.front().delta);
        double w = static_cast<double>(u.claimed_size) / static_cast<double>(total);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * u.delta[i];
    }
    return ParamVector(std::move(out));
}

// Krum: each update is scored by the summed squared distances to its
// n - f - 2 nearest neighbors; the minimum-score update wins (ties to the
// lowest index). Single-Krum, not Multi-Krum.
inline ParamVector krum(const std::vector<ParamVector>& updates, int attackers) {
    const int n = static_cast<int>(updates.size());
    if (n < attackers + 3) throw ConfigError("compromised", "krum requires n >= f + 3");

    std::vector<std::vector<double>> dist2(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            require_same_dim(updates[i], updates[j]);
            double d2 = 0.0;
            for (std::size_t c = 0; c < updates[i].dim(); ++c) {
                double d = updates[i][c] - updates[j][c];
                d2 += d * d;
            }
            dist2[i][j] = dist2[j][i] = d2;
        }

    int best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    std::vector<double> others;
    for (int i = 0; i < n; ++i) {
        others.clear();
        for (int j = 0; j < n; ++j)
            if (j != i) others.push_back(dist2[i][j]);
        std::sort(others.begin(), others.end());
        double score = 0.0;
        for (int k = 0; k < n - attackers - 2; ++k) score += others[k];
        if (score < best_score) {
            best_score = score;
            best = i;
        }
    }
    return updates[best];
}

// FABA: remove, f times, the update farthest (L2) from the mean of the
// remaining ones, then average the rest. Farthest ties go to the lowest index.
inline ParamVector faba(const std::vector<ParamVector>& updates, int attackers) {
    const int n = static_cast<int>(updates.size());
    if (n <= attackers) throw ConfigError("compromised", "faba requires n > f");
    const std::size_t d = updates.front().dim();
    for (const auto& u : updates) require_same_dim(u, updates.front());

    std::vector<int> alive(n);
    std::iota(alive.begin(), alive.end(), 0);
    for (int round = 0; round < attackers; ++round) {
        std::vector<double> mean(d, 0.0);
        for (int idx : alive)
            for (std::size_t c = 0; c < d; ++c) mean[c] += updates[idx][c];
        for (double& m : mean) m /= static_cast<double>(alive.size());

        int worst_pos = 0;
        double worst_d2 = -1.0;
        for (std::size_t p = 0; p < alive.size(); ++p) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                double diff = updates[alive[p]][c] - mean[c];
                d2 += diff * diff;
            }
            if (d2 > worst_d2) {
                worst_d2 = d2;
                worst_pos = static_cast<int>(p);
            }
        }
        alive.erase(alive.begin() + worst_pos);
    }

    std::vector<double> out(d, 0.0);
    for (int idx : alive)
        for (std::size_t c = 0; c < d; ++c) out[c] += updates[idx][c];
    for (double& x : out) x /= static_cast<double>(alive.size());
    return ParamVector(std::move(out));
}

}  // namespace fpd
