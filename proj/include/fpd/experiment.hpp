#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fpd/attacks.hpp"
#include "fpd/baselines.hpp"
#include "fpd/config.hpp"
#include "fpd/dataset.hpp"
#include "fpd/defense.hpp"
#include "fpd/model.hpp"
#include "fpd/vecmath.hpp"

namespace fpd {

struct RoundOutcome {
    int round = 0;
    std::set<ClientId> selected;
    std::set<ClientId> removed_colluding;
    std::set<ClientId> removed_spectral;
    std::set<ClientId> denoised;
    std::set<ClientId> survivors;
    double accuracy = 0.0;
    std::optional<double> precision;
    std::optional<double> recall;
};

// Precision/recall of the round's removals against the ground-truth
// compromised set. Empty removal set: precision 1.0 if no compromised client
// was selected, undefined otherwise. Recall undefined when no compromised
// client was selected.
inline std::pair<std::optional<double>, std::optional<double>> detection_metrics(
    const StageVerdicts& verdicts, const std::set<ClientId>& compromised) {
    std::set<ClientId> removed = verdicts.removed_colluding;
    removed.insert(verdicts.removed_spectral.begin(), verdicts.removed_spectral.end());

    std::size_t removed_bad = 0;
    for (ClientId id : removed)
        if (compromised.count(id)) ++removed_bad;
    std::size_t selected_bad = 0;
    for (ClientId id : verdicts.selected)
        if (compromised.count(id)) ++selected_bad;

    std::optional<double> precision, recall;
    if (!removed.empty())
        precision = static_cast<double>(removed_bad) / static_cast<double>(removed.size());
    else if (selected_bad == 0)
        precision = 1.0;
    if (selected_bad > 0)
        recall = static_cast<double>(removed_bad) / static_cast<double>(selected_bad);
    return {precision, recall};
}

namespace detail {

inline std::string join_ids(const std::set<ClientId>& ids) {
    std::string out;
    for (ClientId id : ids) {
        if (!out.empty()) out.push_back(';');
        out += std::to_string(id);
    }
    return out;
}

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline std::string format_opt(const std::optional<double>& v) {
    return v.has_value() ? format_real(*v) : "";
}

}  // namespace detail

inline const char* kCsvHeader =
    "round,defense,attack,selected,removed_colluding,removed_spectral,denoised,"
    "accuracy,precision,recall,seed";

inline std::string outcomes_to_csv(const std::vector<RoundOutcome>& outcomes,
                                   const ExperimentConfig& cfg) {
    std::string csv = kCsvHeader;
    csv.push_back('\n');
    for (const auto& o : outcomes) {
        csv += std::to_string(o.round);
        csv += "," + defense_name(cfg.defense);
        csv += "," + attack_name(cfg.attack);
        csv += "," + detail::join_ids(o.selected);
        csv += "," + detail::join_ids(o.removed_colluding);
        csv += "," + detail::join_ids(o.removed_spectral);
        csv += "," + detail::join_ids(o.denoised);
        csv += "," + detail::format_real(o.accuracy);
        csv += "," + detail::format_opt(o.precision);
        csv += "," + detail::format_opt(o.recall);
        csv += "," + std::to_string(cfg.seed);
        csv.push_back('\n');
    }
    return csv;
}

// Runs one experiment cell: T rounds of select -> local training -> adversary
// overrides -> defense -> aggregation -> evaluation. Deterministic in the
// config's seeds.
inline std::vector<RoundOutcome> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();

    // Data.
    LabeledDataset train, test;
    if (cfg.dataset == "synthetic") {
        train = generate_synthetic(cfg.synthetic_train, cfg.synthetic_labels, cfg.synthetic_dim,
                                   derive_seed(cfg.data_seed(), 1));
        test = generate_synthetic(cfg.synthetic_test, cfg.synthetic_labels, cfg.synthetic_dim,
                                  derive_seed(cfg.data_seed(), 2));
    } else {
        train = load_idx(cfg.idx_train_images, cfg.idx_train_labels);
        test = load_idx(cfg.idx_test_images, cfg.idx_test_labels);
    }
    const int L = train.num_labels;

    PartitionSpec pspec;
    pspec.clients = cfg.clients;
    pspec.q = cfg.q;
    pspec.seed = derive_seed(cfg.data_seed(), 3);
    Rng size_rng(derive_seed(cfg.data_seed(), 4));
    for (int k = 0; k < cfg.clients; ++k)
        pspec.sizes.push_back(cfg.size_min +
                              static_cast<int>(size_rng.uniform_below(cfg.size_max - cfg.size_min + 1)));
    std::vector<LabeledDataset> shards = partition_noniid(train, pspec);

    AttackSpec attack = cfg.attack_spec();

    std::set<ClientId> lie_ids, lf_ids;
    if (attack.kind == AttackKind::Mixed) {
        MixedSplit split = mixed_split(attack.compromised);
        lie_ids = std::move(split.lie);
        lf_ids = std::move(split.flip);
    } else if (attack.kind == AttackKind::Lie) {
        lie_ids = attack.compromised;
    } else if (attack.kind == AttackKind::LabelFlip) {
        lf_ids = attack.compromised;
    }

    std::vector<LabeledDataset> flipped(cfg.clients);
    for (ClientId id : lf_ids)
        if (!shards[id].empty()) flipped[id] = label_flip(shards[id], L);

    // Model and defense state.
    Model model = Model::init(train.features.front().size(), cfg.hidden, L,
                              derive_seed(cfg.train_seed(), 0));
    FpdPipeline pipeline(cfg.clients, model.last_two_layers_slice(), cfg.fpd_params(),
                         cfg.select_seed());

    std::set<ClientId> all_ids;
    for (int k = 0; k < cfg.clients; ++k) all_ids.insert(k);

    std::vector<RoundOutcome> outcomes;
    outcomes.reserve(cfg.rounds);
    for (int t = 1; t <= cfg.rounds; ++t) {
        std::set<ClientId> selected =
            (cfg.defense == DefenseKind::Fpd) ? pipeline.select(t) : all_ids;

        // Honest local updates. Colluding attackers (LIE/IPM) don't train:
        // their submissions are crafted below from the benign updates.
        std::map<ClientId, ParamVector> updates;
        std::vector<ParamVector> benign_updates;
        for (ClientId id : selected) {
            bool is_attacker = attack.compromised.count(id) > 0;
            bool colluding = is_attacker && (attack.kind == AttackKind::Ipm || lie_ids.count(id));
            if (colluding) continue;
            if (shards[id].empty()) {
                updates.emplace(id, ParamVector::zeros(model.dim()));
                continue;
            }
            const LabeledDataset& ds =
                (is_attacker && lf_ids.count(id)) ? flipped[id] : shards[id];
            ParamVector delta =
                local_train(model, ds, cfg.local_epochs, cfg.lr, cfg.batch,
                            derive_seed(cfg.train_seed(), static_cast<std::uint64_t>(t),
                                        static_cast<std::uint64_t>(id)));
            if (is_attacker && attack.kind == AttackKind::SignFlip) delta = sign_flip(delta);
            if (!is_attacker) benign_updates.push_back(delta);
            updates.emplace(id, std::move(delta));
        }

        // Colluding overrides, crafted with full knowledge of benign updates.
        if (!benign_updates.empty()) {
            if (attack.kind == AttackKind::Ipm) {
                ParamVector mal = ipm_attack(benign_updates, attack.epsilon);
                for (ClientId id : attack.compromised)
                    if (selected.count(id)) updates.insert_or_assign(id, mal);
            } else if (!lie_ids.empty()) {
                ParamVector mal = lie_attack(benign_updates, static_cast<int>(attack.compromised.size()),
                                             cfg.clients, attack.z_max);
                for (ClientId id : lie_ids)
                    if (selected.count(id)) updates.insert_or_assign(id, mal);
            }
        } else {
            // no benign update to imitate; colluding attackers fall back to
            // honest training
            for (ClientId id : selected) {
                if (updates.count(id) || shards[id].empty()) continue;
                updates.emplace(id, local_train(model, shards[id], cfg.local_epochs, cfg.lr,
                                                cfg.batch,
                                                derive_seed(cfg.train_seed(),
                                                            static_cast<std::uint64_t>(t),
                                                            static_cast<std::uint64_t>(id))));
            }
        }

        // Defense + aggregation.
        RoundOutcome out;
        out.round = t;
        out.selected = selected;
        ParamVector aggregate = ParamVector::zeros(model.dim());
        if (cfg.defense == DefenseKind::Fpd) {
            FpdRoundResult rr = pipeline.process_round(t, updates, model.dim());
            aggregate = rr.aggregate;
            out.removed_colluding = rr.verdicts.removed_colluding;
            out.removed_spectral = rr.verdicts.removed_spectral;
            out.denoised = rr.verdicts.denoised;
            out.survivors = rr.verdicts.survivors;
            auto [prec, rec] = detection_metrics(rr.verdicts, attack.compromised);
            out.precision = prec;
            out.recall = rec;
        } else {
            out.survivors = selected;
            std::vector<ParamVector> deltas;
            deltas.reserve(updates.size());
            for (const auto& [id, u] : updates) deltas.push_back(u);
            switch (cfg.defense) {
                case DefenseKind::FedAvg: {
                    std::vector<LocalUpdate> lu;
                    for (const auto& [id, u] : updates)
                        lu.push_back({id, u, static_cast<int>(shards[id].size())});
                    aggregate = fedavg(lu);
                    break;
                }
                case DefenseKind::Krum:
                    aggregate = krum(deltas, cfg.compromised);
                    break;
                case DefenseKind::Faba:
                    aggregate = faba(deltas, cfg.compromised);
                    break;
                case DefenseKind::Median:
                    aggregate = coordinate_median(deltas);
                    break;
                case DefenseKind::Fpd:
                    break;
            }
            StageVerdicts v;
            v.selected = selected;
            v.survivors = selected;
            auto [prec, rec] = detection_metrics(v, attack.compromised);
            out.precision = prec;
            out.recall = rec;
        }

        model = apply_global(model, aggregate);
        out.accuracy = evaluate(model, test);
        outcomes.push_back(std::move(out));
    }
    return outcomes;
}

// One summary cell: mean final accuracy over the repetitions of a config.
struct SummaryRow {
    std::string defense;
    std::string attack;
    int compromised = 0;
    double q = 0.0;
    double mean_final_accuracy = 0.0;
    int repetitions = 0;
};

inline std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
    std::string csv = "defense,attack,compromised,q,mean_final_accuracy,repetitions\n";
    for (const auto& r : rows) {
        csv += r.defense + "," + r.attack + "," + std::to_string(r.compromised) + "," +
               detail::format_real(r.q) + "," + detail::format_real(r.mean_final_accuracy) +
               "," + std::to_string(r.repetitions) + "\n";
    }
    return csv;
}

inline std::string summary_to_table(const std::vector<SummaryRow>& rows) {
    char buf[160];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-8s %-7s %12s %6s %10s %5s\n", "defense", "attack",
                  "compromised", "q", "accuracy", "reps");
    out += buf;
    out += std::string(53, '-') + "\n";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-8s %-7s %12d %6.3g %10.4f %5d\n", r.defense.c_str(),
                      r.attack.c_str(), r.compromised, r.q, r.mean_final_accuracy, r.repetitions);
        out += buf;
    }
    return out;
}

}  // namespace fpd
