#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fpd/attacks.hpp"
#include "fpd/defense.hpp"
#include "fpd/errors.hpp"

namespace fpd {

enum class DefenseKind { Fpd, FedAvg, Krum, Faba, Median };

inline std::string defense_name(DefenseKind d) {
    switch (d) {
        case DefenseKind::Fpd: return "fpd";
        case DefenseKind::FedAvg: return "fedavg";
        case DefenseKind::Krum: return "krum";
        case DefenseKind::Faba: return "faba";
        case DefenseKind::Median: return "median";
    }
    return "?";
}

// Every knob of one experiment cell. Defaults follow the evaluated settings
// (gamma 0.8, lambda 0.1, delta -0.1, alpha = beta = 1, E = 3, q = 0.5),
// scaled down to a desk-size synthetic task.
struct ExperimentConfig {
    DefenseKind defense = DefenseKind::Fpd;
    AttackKind attack = AttackKind::None;
    int clients = 20;        // K
    int compromised = 0;     // f; compromised ids are 0..f-1
    int rounds = 40;         // T
    int local_epochs = 3;    // E
    double q = 0.5;
    double gamma = 0.8;
    double lambda = 0.1;
    double delta = -0.1;
    double alpha = 1.0;
    double beta = 1.0;
    double lr = 0.05;
    int batch = 32;
    double ipm_epsilon = 0.5;
    double lie_zmax = -1.0;  // < 0: derive from (K, f)

    std::string dataset = "synthetic";  // synthetic | idx
    int synthetic_labels = 10;
    int synthetic_dim = 20;
    int synthetic_train = 3000;
    int synthetic_test = 1000;
    std::string idx_train_images, idx_train_labels, idx_test_images, idx_test_labels;

    int hidden = 32;
    int size_min = 30;
    int size_max = 120;

    std::uint64_t seed = 1;  // base; stream seeds derived unless set explicitly
    std::uint64_t seed_data = 0, seed_train = 0, seed_select = 0, seed_attack = 0;
    bool seed_data_set = false, seed_train_set = false, seed_select_set = false,
         seed_attack_set = false;

    int repetitions = 3;
    int bootstrap_rounds = 10;
    int recent_window = 10;
    int selection_floor = 4;
    int denoise_warmup = 64;
    int denoise_capacity = 500;
    int denoise_epochs = 5;
    int denoise_batch = 32;
    double denoise_lr = 0.01;
    bool fpd_stage1 = true, fpd_stage2 = true, fpd_stage3 = true, fpd_stage4 = true;

    std::string out = "out";

    std::uint64_t data_seed() const { return seed_data_set ? seed_data : derive_seed(seed, 101); }
    std::uint64_t train_seed() const { return seed_train_set ? seed_train : derive_seed(seed, 202); }
    std::uint64_t select_seed() const {
        return seed_select_set ? seed_select : derive_seed(seed, 303);
    }
    std::uint64_t attack_seed() const {
        return seed_attack_set ? seed_attack : derive_seed(seed, 404);
    }

    FpdParams fpd_params() const {
        FpdParams p;
        p.alpha = alpha;
        p.beta = beta;
        p.gamma = gamma;
        p.lambda = lambda;
        p.delta = delta;
        p.bootstrap_rounds = bootstrap_rounds;
        p.recent_window = recent_window;
        p.selection_floor = selection_floor;
        p.denoise_warmup = denoise_warmup;
        p.denoise_capacity = denoise_capacity;
        p.denoise_epochs = denoise_epochs;
        p.denoise_batch = denoise_batch;
        p.denoise_lr = denoise_lr;
        p.stage1 = fpd_stage1;
        p.stage2 = fpd_stage2;
        p.stage3 = fpd_stage3;
        p.stage4 = fpd_stage4;
        return p;
    }

    void validate() const {
        if (clients < 1) throw ConfigError("clients", "must be >= 1");
        if (compromised < 0 || compromised >= clients)
            throw ConfigError("compromised", "need 0 <= f < K");
        if (rounds < 1) throw ConfigError("rounds", "must be >= 1");
        if (local_epochs < 0) throw ConfigError("local_epochs", "must be >= 0");
        if (batch < 1) throw ConfigError("batch", "must be >= 1");
        if (lr < 0.0) throw ConfigError("lr", "must be >= 0");
        if (alpha <= 0.0) throw ConfigError("alpha", "must be > 0");
        if (beta <= 0.0) throw ConfigError("beta", "must be > 0");
        if (lambda <= 0.0 || lambda >= 1.0) throw ConfigError("lambda", "must lie in (0, 1)");
        if (gamma < -1.0 || gamma > 1.0) throw ConfigError("gamma", "must lie in [-1, 1]");
        if (size_min < 1 || size_max < size_min)
            throw ConfigError("size_min", "need 1 <= size_min <= size_max");
        if (repetitions < 1) throw ConfigError("repetitions", "must be >= 1");
        if (dataset != "synthetic" && dataset != "idx")
            throw ConfigError("dataset", "must be 'synthetic' or 'idx'");
        if (dataset == "synthetic") {
            int L = synthetic_labels;
            if (L < 2) throw ConfigError("synthetic_labels", "must be >= 2");
            if (synthetic_dim < 2) throw ConfigError("synthetic_dim", "must be >= 2");
            if (q < 1.0 / L - 1e-12 || q > 1.0 + 1e-12)
                throw ConfigError("q", "must lie in [1/L, 1]");
            if (clients < L)
                throw ConfigError("clients", "need at least one client per label group");
        } else if (idx_train_images.empty() || idx_train_labels.empty() ||
                   idx_test_images.empty() || idx_test_labels.empty()) {
            throw ConfigError("idx_train_images", "idx dataset requires all four file paths");
        }
        if (defense == DefenseKind::Krum && clients < compromised + 3)
            throw ConfigError("compromised", "krum requires K >= f + 3");
        if (defense == DefenseKind::Faba && clients <= compromised)
            throw ConfigError("compromised", "faba requires K > f");
        if (ipm_epsilon <= 0.0) throw ConfigError("ipm_epsilon", "must be > 0");
    }

    AttackSpec attack_spec() const {
        AttackSpec spec;
        spec.kind = attack;
        for (int k = 0; k < compromised; ++k) spec.compromised.insert(k);
        spec.z_max = lie_zmax;
        spec.epsilon = ipm_epsilon;
        return spec;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected an integer, got '" + v + "'");
    }
}

inline double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + v + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        std::uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "off" || v == "0" || v == "no") return false;
    throw ConfigError(key, "expected a boolean, got '" + v + "'");
}

inline DefenseKind parse_defense(const std::string& v) {
    if (v == "fpd") return DefenseKind::Fpd;
    if (v == "fedavg") return DefenseKind::FedAvg;
    if (v == "krum") return DefenseKind::Krum;
    if (v == "faba") return DefenseKind::Faba;
    if (v == "median") return DefenseKind::Median;
    throw ConfigError("defense", "unknown defense '" + v + "'");
}

inline AttackKind parse_attack(const std::string& v) {
    if (v == "none") return AttackKind::None;
    if (v == "lie") return AttackKind::Lie;
    if (v == "ipm") return AttackKind::Ipm;
    if (v == "lf") return AttackKind::LabelFlip;
    if (v == "sf") return AttackKind::SignFlip;
    if (v == "mixed") return AttackKind::Mixed;
    throw ConfigError("attack", "unknown attack '" + v + "'");
}

}  // namespace detail

// Applies one `key = value` setting. Unknown keys are a ConfigError carrying
// the key name.
inline void apply_config_key(ExperimentConfig& cfg, const std::string& key,
                             const std::string& value) {
    using namespace detail;
    if (key == "defense") cfg.defense = parse_defense(value);
    else if (key == "attack") cfg.attack = parse_attack(value);
    else if (key == "clients") cfg.clients = parse_int(key, value);
    else if (key == "compromised") cfg.compromised = parse_int(key, value);
    else if (key == "rounds") cfg.rounds = parse_int(key, value);
    else if (key == "local_epochs") cfg.local_epochs = parse_int(key, value);
    else if (key == "q") cfg.q = parse_real(key, value);
    else if (key == "gamma") cfg.gamma = parse_real(key, value);
    else if (key == "lambda") cfg.lambda = parse_real(key, value);
    else if (key == "delta") cfg.delta = parse_real(key, value);
    else if (key == "alpha") cfg.alpha = parse_real(key, value);
    else if (key == "beta") cfg.beta = parse_real(key, value);
    else if (key == "lr") cfg.lr = parse_real(key, value);
    else if (key == "batch") cfg.batch = parse_int(key, value);
    else if (key == "ipm_epsilon") cfg.ipm_epsilon = parse_real(key, value);
    else if (key == "lie_zmax") cfg.lie_zmax = (value == "auto") ? -1.0 : parse_real(key, value);
    else if (key == "dataset") cfg.dataset = value;
    else if (key == "synthetic_labels") cfg.synthetic_labels = parse_int(key, value);
    else if (key == "synthetic_dim") cfg.synthetic_dim = parse_int(key, value);
    else if (key == "synthetic_train") cfg.synthetic_train = parse_int(key, value);
    else if (key == "synthetic_test") cfg.synthetic_test = parse_int(key, value);
    else if (key == "idx_train_images") cfg.idx_train_images = value;
    else if (key == "idx_train_labels") cfg.idx_train_labels = value;
    else if (key == "idx_test_images") cfg.idx_test_images = value;
    else if (key == "idx_test_labels") cfg.idx_test_labels = value;
    else if (key == "hidden") cfg.hidden = parse_int(key, value);
    else if (key == "size_min") cfg.size_min = parse_int(key, value);
    else if (key == "size_max") cfg.size_max = parse_int(key, value);
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "seed_data") { cfg.seed_data = parse_u64(key, value); cfg.seed_data_set = true; }
    else if (key == "seed_train") { cfg.seed_train = parse_u64(key, value); cfg.seed_train_set = true; }
    else if (key == "seed_select") { cfg.seed_select = parse_u64(key, value); cfg.seed_select_set = true; }
    else if (key == "seed_attack") { cfg.seed_attack = parse_u64(key, value); cfg.seed_attack_set = true; }
    else if (key == "repetitions") cfg.repetitions = parse_int(key, value);
    else if (key == "bootstrap_rounds") cfg.bootstrap_rounds = parse_int(key, value);
    else if (key == "recent_window") cfg.recent_window = parse_int(key, value);
    else if (key == "selection_floor") cfg.selection_floor = parse_int(key, value);
    else if (key == "denoise_warmup") cfg.denoise_warmup = parse_int(key, value);
    else if (key == "denoise_capacity") cfg.denoise_capacity = parse_int(key, value);
    else if (key == "denoise_epochs") cfg.denoise_epochs = parse_int(key, value);
    else if (key == "denoise_batch") cfg.denoise_batch = parse_int(key, value);
    else if (key == "denoise_lr") cfg.denoise_lr = parse_real(key, value);
    else if (key == "fpd_stage1") cfg.fpd_stage1 = parse_bool(key, value);
    else if (key == "fpd_stage2") cfg.fpd_stage2 = parse_bool(key, value);
    else if (key == "fpd_stage3") cfg.fpd_stage3 = parse_bool(key, value);
    else if (key == "fpd_stage4") cfg.fpd_stage4 = parse_bool(key, value);
    else if (key == "out") cfg.out = value;
    else throw ConfigError(key, "unknown configuration key");
}

// Flat `key = value` config text, one setting per line, `#` comments.
inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
        apply_config_key(cfg, key, value);
    }
    if (const char* env = std::getenv("FPD_SEED")) {
        cfg.seed = detail::parse_u64("FPD_SEED", env);
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace fpd
