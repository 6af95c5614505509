#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "fpd/autoencoder.hpp"
#include "fpd/errors.hpp"
#include "fpd/model.hpp"
#include "fpd/rng.hpp"
#include "fpd/vecmath.hpp"

namespace fpd {

// Per-client reputation state. Overall counts cover the whole history; the
// recent FIFO keeps the verdicts from the last `recent_window` rounds the
// client was selected and judged.
struct ClientRecord {
    long overall_benign = 0;     // B^O
    long overall_malicious = 0;  // M^O
    std::deque<bool> recent;     // true = benign verdict
    ParamVector momentum;        // empty until the first accepted update
    std::optional<int> last_selected;  // t_k

    long recent_benign() const {
        long b = 0;
        for (bool v : recent)
            if (v) ++b;
        return b;
    }
    long recent_malicious() const { return static_cast<long>(recent.size()) - recent_benign(); }
};

struct StageVerdicts {
    std::set<ClientId> selected;
    std::set<ClientId> removed_colluding;
    std::set<ClientId> removed_spectral;
    std::set<ClientId> denoised;
    std::set<ClientId> survivors;  // selected minus both removed sets
};

struct FpdParams {
    double alpha = 1.0;        // Beta prior
    double beta = 1.0;
    double gamma = 0.8;        // tolerable cosine similarity (Stage II)
    double lambda = 0.1;       // momentum discount base
    double delta = -0.1;       // acceptable difference between clusters (Stage III)
    int bootstrap_rounds = 10; // everyone participates while t <= this
    int recent_window = 10;
    int selection_floor = 4;
    int denoise_warmup = 64;   // buffer size before Stage IV activates
    int denoise_capacity = 500;
    int denoise_epochs = 5;
    int denoise_batch = 32;
    double denoise_lr = 0.01;
    bool stage1 = true;        // ablation switches
    bool stage2 = true;
    bool stage3 = true;
    bool stage4 = true;
};

namespace detail {

// Branch choice of the reputation sampler: the Beta posterior of whichever of
// overall/recent looks worse under Laplace-smoothed ratios.
struct BetaBranch {
    double a;
    double b;
    double mean() const { return a / (a + b); }
};

inline BetaBranch active_branch(const ClientRecord& r, double alpha, double beta) {
    double bo = static_cast<double>(r.overall_benign);
    double mo = static_cast<double>(r.overall_malicious);
    double br = static_cast<double>(r.recent_benign());
    double mr = static_cast<double>(r.recent_malicious());
    double ratio_overall = (bo + alpha) / (bo + mo + alpha + beta);
    double ratio_recent = (br + alpha) / (br + mr + alpha + beta);
    if (ratio_overall < ratio_recent) return {alpha + bo, beta + mo};
    return {alpha + br, beta + mr};
}

}  // namespace detail

// Stage I: reliable client selection. All clients participate during the
// bootstrap; afterwards each client is kept with probability p_k drawn from
// the Beta posterior of its worse-looking reputation window. A floor keeps at
// least `selection_floor` clients per round (topped up by posterior mean).
inline std::set<ClientId> select_clients(const std::map<ClientId, ClientRecord>& records,
                                         int t, const FpdParams& params, Rng& rng) {
    std::set<ClientId> selected;
    if (t <= params.bootstrap_rounds) {
        for (const auto& [id, r] : records) selected.insert(id);
        return selected;
    }
    for (const auto& [id, r] : records) {
        auto branch = detail::active_branch(r, params.alpha, params.beta);
        double p = rng.beta(branch.a, branch.b);
        if (rng.bernoulli(p)) selected.insert(id);
    }
    std::size_t floor = std::min<std::size_t>(params.selection_floor, records.size());
    if (selected.size() < floor) {
        std::vector<std::pair<double, ClientId>> ranked;  // (-mean, id): best first
        for (const auto& [id, r] : records) {
            if (selected.count(id)) continue;
            ranked.emplace_back(-detail::active_branch(r, params.alpha, params.beta).mean(), id);
        }
        std::sort(ranked.begin(), ranked.end());
        for (const auto& [negmean, id] : ranked) {
            if (selected.size() >= floor) break;
            selected.insert(id);
        }
    }
    return selected;
}

struct ColludingResult {
    std::map<ClientId, int> scores;   // cs_k
    std::set<ClientId> removed;       // cs_k > 0, plus zero-norm submissions
};

// Stage II: count, for each client, how many other clients uploaded an update
// with cosine similarity above gamma; a positive count is treated as collusion.
// Zero-norm updates are marked malicious outright and skipped in the pairwise
// pass.
inline ColludingResult colluding_scores(const std::map<ClientId, ParamVector>& updates,
                                        double gamma) {
    ColludingResult res;
    std::vector<ClientId> ids;
    for (const auto& [id, u] : updates) {
        res.scores[id] = 0;
        if (norm(u) == 0.0)
            res.removed.insert(id);  // DegenerateUpdate verdict
        else
            ids.push_back(id);
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
            if (cosine(updates.at(ids[i]), updates.at(ids[j])) > gamma) {
                ++res.scores[ids[i]];
                ++res.scores[ids[j]];
            }
        }
    }
    for (ClientId id : ids)
        if (res.scores[id] > 0) res.removed.insert(id);
    return res;
}

// Momentum accumulation with obsolescence discount: g + lambda^(t - t_k) * m_prev.
// First selection (no stored momentum) yields g itself. The caller commits the
// result to the record only after the round's verdicts.
inline ParamVector update_momentum(const ClientRecord& record, const ParamVector& g, int t,
                                   double lambda) {
    if (!record.last_selected.has_value() || record.momentum.empty()) return g;
    double gap = static_cast<double>(t - *record.last_selected);
    return g + std::pow(lambda, gap) * record.momentum;
}

// Stage III: spectral outlier detector over unit momentum vectors. Clusters
// the squared projections onto the top singular direction of the centered
// matrix; the larger-score cluster is dropped unless its mean direction stays
// within delta of the rest.
inline std::set<ClientId> spectral_filter(const std::map<ClientId, ParamVector>& normed,
                                          double delta, std::uint64_t seed) {
    if (normed.size() < 2) return {};

    CenteredMatrix g = CenteredMatrix::center(normed);
    if (g.all_zero()) return {};  // all directions identical

    auto svr = top_right_singular_vector(g, seed);
    auto tau = outlier_scores(g, svr.v);
    std::vector<std::pair<ClientId, double>> scores(tau.begin(), tau.end());
    TwoMeansSplit split = two_means_1d(scores);
    if (split.larger.empty()) return {};

    auto cluster_mean = [&](const std::set<ClientId>& ids) {
        std::vector<double> m(normed.begin()->second.dim(), 0.0);
        for (ClientId id : ids) {
            const auto& v = normed.at(id);
            for (std::size_t i = 0; i < m.size(); ++i) m[i] += v[i];
        }
        for (double& x : m) x /= static_cast<double>(ids.size());
        return ParamVector(std::move(m));
    };
    ParamVector m_l = cluster_mean(split.larger);
    ParamVector m_s = cluster_mean(split.smaller);
    double similarity;
    try {
        similarity = cosine(m_l, m_s);
    } catch (const DegenerateVector&) {
        // a cluster whose directions cancel out has no coherent mean; treat as
        // dissimilar
        similarity = -1.0;
    }
    if (similarity > delta) return {};
    return split.larger;
}

// Stage IV state: the autoencoder over the last-two-layers slice plus the FIFO
// of historically reliable slices it trains on.
class DenoiserState {
public:
    DenoiserState(std::size_t slice_dim, std::size_t capacity, std::uint64_t seed)
        : ae_(static_cast<int>(slice_dim), hidden_for(slice_dim), derive_seed(seed, 1)),
          capacity_(capacity), rng_(derive_seed(seed, 2)) {}

    static int hidden_for(std::size_t slice_dim) {
        return static_cast<int>(std::max<std::size_t>(8, (slice_dim + 3) / 4));
    }

    const Autoencoder& autoencoder() const noexcept { return ae_; }
    Autoencoder& autoencoder() noexcept { return ae_; }
    std::size_t buffer_size() const noexcept { return buffer_.size(); }
    Rng& rng() noexcept { return rng_; }

    void push(std::vector<double> slice) {
        buffer_.push_back(std::move(slice));
        while (buffer_.size() > capacity_) buffer_.pop_front();
    }

    void train(int epochs, int batch, double lr) {
        ae_.train(buffer_, epochs, batch, lr, rng_);
    }

private:
    Autoencoder ae_;
    std::deque<std::vector<double>> buffer_;
    std::size_t capacity_;
    Rng rng_;
};

struct DenoiseResult {
    std::map<ClientId, ParamVector> vectors;  // unit norm
    std::set<ClientId> denoised;
};

// Stage IV: reconstruction-error split over the last-two-layers slice. The
// larger-error group gets its slice replaced by the autoencoder output (then
// the whole vector is re-normalized); the smaller-error group is appended to
// the training buffer and the autoencoder takes its per-round training pass.
// Until the buffer reaches the warm-up size, vectors pass through unchanged
// while the buffer fills.
inline DenoiseResult denoise(const std::map<ClientId, ParamVector>& normed_survivors,
                             DenoiserState& state, IndexRange slice, const FpdParams& params) {
    DenoiseResult res;
    res.vectors = normed_survivors;

    auto slice_of = [&](const ParamVector& v) {
        return std::vector<double>(v.values().begin() + slice.offset,
                                   v.values().begin() + slice.offset + slice.length);
    };

    if (state.buffer_size() < static_cast<std::size_t>(params.denoise_warmup)) {
        for (const auto& [id, v] : normed_survivors) state.push(slice_of(v));
        state.train(params.denoise_epochs, params.denoise_batch, params.denoise_lr);
        return res;
    }

    std::vector<std::pair<ClientId, double>> errors;
    std::map<ClientId, std::vector<double>> slices;
    for (const auto& [id, v] : normed_survivors) {
        auto s = slice_of(v);
        errors.emplace_back(id, state.autoencoder().reconstruction_error(s));
        slices.emplace(id, std::move(s));
    }

    if (errors.size() >= 2) {
        TwoMeansSplit split = two_means_1d(errors);
        for (ClientId id : split.larger) {
            std::vector<double> repaired = state.autoencoder().reconstruct(slices.at(id));
            std::vector<double> full = normed_survivors.at(id).values();
            std::copy(repaired.begin(), repaired.end(), full.begin() + slice.offset);
            double n2 = 0.0;
            for (double x : full) n2 += x * x;
            if (n2 > 0.0) {
                double inv = 1.0 / std::sqrt(n2);
                for (double& x : full) x *= inv;
                res.vectors[id] = ParamVector(std::move(full));
                res.denoised.insert(id);
            }
        }
        for (ClientId id : split.smaller) state.push(std::move(slices.at(id)));
    } else {
        for (auto& [id, s] : slices) state.push(std::move(s));
    }
    state.train(params.denoise_epochs, params.denoise_batch, params.denoise_lr);
    return res;
}

// Final combining rule: direction from the mean of the surviving unit vectors,
// magnitude from the median raw momentum norm.
inline ParamVector aggregate_fpd(const std::map<ClientId, ParamVector>& final_vectors,
                                 const std::map<ClientId, ParamVector>& raw_momenta) {
    if (final_vectors.empty()) throw EmptyAggregation("aggregate_fpd: no survivors");

    std::vector<double> norms;
    norms.reserve(raw_momenta.size());
    for (const auto& [id, m] : raw_momenta) norms.push_back(norm(m));
    std::sort(norms.begin(), norms.end());
    std::size_t mid = norms.size() / 2;
    double scale = (norms.size() % 2 == 1) ? norms[mid] : 0.5 * (norms[mid - 1] + norms[mid]);

    std::vector<double> mean(final_vectors.begin()->second.dim(), 0.0);
    for (const auto& [id, v] : final_vectors)
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
    double f = scale / static_cast<double>(final_vectors.size());
    for (double& x : mean) x *= f;
    return ParamVector(std::move(mean));
}

// Post-round bookkeeping. Removed clients take a malicious verdict and keep
// their previous momentum and t_k (the rejected update is discarded);
// survivors, including denoised ones, take a benign verdict and commit this
// round's momentum.
inline void record_verdicts(std::map<ClientId, ClientRecord>& records,
                            const StageVerdicts& verdicts,
                            const std::map<ClientId, ParamVector>& momenta, int t,
                            int recent_window) {
    auto push_verdict = [&](ClientRecord& r, bool benign) {
        r.recent.push_back(benign);
        while (static_cast<int>(r.recent.size()) > recent_window) r.recent.pop_front();
    };
    for (ClientId id : verdicts.removed_colluding) {
        ClientRecord& r = records.at(id);
        ++r.overall_malicious;
        push_verdict(r, false);
    }
    for (ClientId id : verdicts.removed_spectral) {
        ClientRecord& r = records.at(id);
        ++r.overall_malicious;
        push_verdict(r, false);
    }
    for (ClientId id : verdicts.survivors) {
        ClientRecord& r = records.at(id);
        ++r.overall_benign;
        push_verdict(r, true);
        r.momentum = momenta.at(id);
        r.last_selected = t;
    }
}

struct FpdRoundResult {
    StageVerdicts verdicts;
    ParamVector aggregate;  // zero vector when no survivors
};

// Sequential four-stage pipeline for one round, operating on the raw updates
// of the already-selected clients. Owns reputation records, denoiser state,
// and the per-round RNG streams.
class FpdPipeline {
public:
    FpdPipeline(int num_clients, IndexRange slice, FpdParams params, std::uint64_t seed)
        : params_(params), slice_(slice),
          denoiser_(slice.length, params.denoise_capacity, derive_seed(seed, 0xD)),
          selection_seed_(derive_seed(seed, 0x5)),
          spectral_seed_(derive_seed(seed, 0x3)) {
        for (int k = 0; k < num_clients; ++k) records_[k] = ClientRecord{};
    }

    const std::map<ClientId, ClientRecord>& records() const noexcept { return records_; }
    std::map<ClientId, ClientRecord>& records() noexcept { return records_; }
    const FpdParams& params() const noexcept { return params_; }

    std::set<ClientId> select(int t) {
        if (!params_.stage1) {
            std::set<ClientId> all;
            for (const auto& [id, r] : records_) all.insert(id);
            return all;
        }
        Rng rng(derive_seed(selection_seed_, static_cast<std::uint64_t>(t)));
        return select_clients(records_, t, params_, rng);
    }

    FpdRoundResult process_round(int t, const std::map<ClientId, ParamVector>& updates,
                                 std::size_t model_dim) {
        FpdRoundResult res;
        for (const auto& [id, u] : updates) res.verdicts.selected.insert(id);

        // Stage II: colluding filter on raw updates.
        std::map<ClientId, ParamVector> after_stage2 = updates;
        if (params_.stage2) {
            ColludingResult cr = colluding_scores(updates, params_.gamma);
            res.verdicts.removed_colluding = cr.removed;
            for (ClientId id : cr.removed) after_stage2.erase(id);
        } else {
            // degenerate zero-norm updates still cannot proceed (no direction)
            for (auto it = after_stage2.begin(); it != after_stage2.end();) {
                if (norm(it->second) == 0.0) {
                    res.verdicts.removed_colluding.insert(it->first);
                    it = after_stage2.erase(it);
                } else {
                    ++it;
                }
            }
        }

        // Momentum and normalization for everything that survived Stage II.
        std::map<ClientId, ParamVector> momenta;
        std::map<ClientId, ParamVector> normed;
        for (const auto& [id, g] : after_stage2) {
            ParamVector m = update_momentum(records_.at(id), g, t, params_.lambda);
            if (norm(m) == 0.0) {
                res.verdicts.removed_spectral.insert(id);  // no usable direction
                continue;
            }
            normed.emplace(id, normalize(m));
            momenta.emplace(id, std::move(m));
        }

        // Stage III: spectral outlier detection on unit momenta.
        if (params_.stage3 && normed.size() >= 2) {
            std::set<ClientId> removed = spectral_filter(
                normed, params_.delta, derive_seed(spectral_seed_, static_cast<std::uint64_t>(t)));
            for (ClientId id : removed) {
                res.verdicts.removed_spectral.insert(id);
                normed.erase(id);
                momenta.erase(id);
            }
        }

        for (const auto& [id, v] : normed) res.verdicts.survivors.insert(id);

        // Stage IV: denoise the survivors' last-layer slices.
        std::map<ClientId, ParamVector> final_vectors = normed;
        if (params_.stage4 && !normed.empty()) {
            DenoiseResult dr = denoise(normed, denoiser_, slice_, params_);
            final_vectors = std::move(dr.vectors);
            res.verdicts.denoised = std::move(dr.denoised);
        }

        if (final_vectors.empty()) {
            res.aggregate = ParamVector::zeros(model_dim);
        } else {
            res.aggregate = aggregate_fpd(final_vectors, momenta);
        }

        record_verdicts(records_, res.verdicts, momenta, t, params_.recent_window);
        return res;
    }

private:
    FpdParams params_;
    IndexRange slice_;
    std::map<ClientId, ClientRecord> records_;
    DenoiserState denoiser_;
    std::uint64_t selection_seed_;
    std::uint64_t spectral_seed_;
};

}  // namespace fpd
