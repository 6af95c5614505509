#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "fpd/dataset.hpp"
#include "fpd/errors.hpp"
#include "fpd/rng.hpp"
#include "fpd/vecmath.hpp"

namespace fpd {

enum class AttackKind { None, Lie, Ipm, LabelFlip, SignFlip, Mixed };

struct AttackSpec {
    AttackKind kind = AttackKind::None;
    std::set<ClientId> compromised;
    double z_max = -1.0;     // < 0 means: derive from counts
    double epsilon = 0.5;    // IPM scale
};

inline std::string attack_name(AttackKind k) {
    switch (k) {
        case AttackKind::None: return "none";
        case AttackKind::Lie: return "lie";
        case AttackKind::Ipm: return "ipm";
        case AttackKind::LabelFlip: return "lf";
        case AttackKind::SignFlip: return "sf";
        case AttackKind::Mixed: return "mixed";
    }
    return "?";
}

// z such that Phi(z) = (K - f - s)/(K - f) with s = floor(K/2) + 1 - f; falls
// back to 0.3 whenever the order-statistic formula gives no positive z.
inline double lie_default_z(int total_clients, int attackers) {
    int s = total_clients / 2 + 1 - attackers;
    double denom = static_cast<double>(total_clients - attackers);
    if (denom <= 0.0) return 0.3;
    double p = (total_clients - attackers - s) / denom;
    if (p <= 0.5 || p >= 1.0) return 0.3;
    double z = normal_quantile(p);
    return z > 0.0 ? z : 0.3;
}

// "A little is enough": the shared malicious update mu - z * sigma, built from
// the per-coordinate mean and (population) standard deviation of the benign
// updates. Every colluding attacker submits this same vector.
inline ParamVector lie_attack(const std::vector<ParamVector>& benign_updates, int attackers,
                              int total_clients, double z_max) {
    if (benign_updates.empty()) throw AttackError("lie_attack: no benign updates");
    double z = z_max >= 0.0 ? z_max : lie_default_z(total_clients, attackers);
    const std::size_t d = benign_updates.front().dim();
    std::vector<double> mu(d, 0.0), var(d, 0.0);
    for (const auto& u : benign_updates) {
        require_same_dim(u, benign_updates.front());
        for (std::size_t i = 0; i < d; ++i) mu[i] += u[i];
    }
    const double n = static_cast<double>(benign_updates.size());
    for (double& m : mu) m /= n;
    for (const auto& u : benign_updates)
        for (std::size_t i = 0; i < d; ++i) {
            double c = u[i] - mu[i];
            var[i] += c * c;
        }
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = mu[i] - z * std::sqrt(var[i] / n);
    return ParamVector(std::move(out));
}

// Inner-product manipulation: -epsilon times the benign mean, shared by all
// colluding attackers.
inline ParamVector ipm_attack(const std::vector<ParamVector>& benign_updates, double epsilon) {
    if (benign_updates.empty()) throw AttackError("ipm_attack: no benign updates");
    if (epsilon <= 0.0) throw AttackError("ipm_attack: epsilon must be > 0");
    const std::size_t d = benign_updates.front().dim();
    std::vector<double> mu(d, 0.0);
    for (const auto& u : benign_updates) {
        require_same_dim(u, benign_updates.front());
        for (std::size_t i = 0; i < d; ++i) mu[i] += u[i];
    }
    const double scale = -epsilon / static_cast<double>(benign_updates.size());
    for (double& m : mu) m *= scale;
    return ParamVector(std::move(mu));
}

// Mixed attack: the first half of the sorted compromised ids runs LIE, the
// rest label flipping.
struct MixedSplit {
    std::set<ClientId> lie;
    std::set<ClientId> flip;
};

inline MixedSplit mixed_split(const std::set<ClientId>& compromised) {
    MixedSplit out;
    std::size_t half = (compromised.size() + 1) / 2;
    std::size_t i = 0;
    for (ClientId id : compromised) (i++ < half ? out.lie : out.flip).insert(id);
    return out;
}

// Label flipping: l -> L - 1 - l; the attacker then trains honestly on the
// flipped data.
inline LabeledDataset label_flip(const LabeledDataset& ds, int num_labels) {
    LabeledDataset out = ds;
    for (int& l : out.labels) l = num_labels - 1 - l;
    return out;
}

// Sign flipping: the attacker negates its own honestly trained update.
inline ParamVector sign_flip(const ParamVector& honest_update) {
    return -1.0 * honest_update;
}

}  // namespace fpd
