// Experiment runner for the federated-learning Byzantine defense library.
//
//   fpd run --config cfg.txt [--sweep key=v1,v2,...] [--out DIR]
//   fpd summarize --in DIR
//
// `run` executes every cell of the (optionally swept) experiment matrix with
// `repetitions` seeds each and writes one per-round CSV per run plus a summary.
// `summarize` rebuilds the summary from the CSVs in a directory.
// Exit code 2 signals a configuration error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fpd/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct SweepAxis {
    std::string key;
    std::vector<std::string> values;
};

SweepAxis parse_sweep(const std::string& arg) {
    auto eq = arg.find('=');
    if (eq == std::string::npos)
        throw fpd::ConfigError("sweep", "expected key=v1,v2,... got '" + arg + "'");
    SweepAxis axis;
    axis.key = arg.substr(0, eq);
    std::string rest = arg.substr(eq + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
        std::size_t comma = rest.find(',', pos);
        if (comma == std::string::npos) comma = rest.size();
        axis.values.push_back(rest.substr(pos, comma - pos));
        pos = comma + 1;
    }
    if (axis.values.empty()) throw fpd::ConfigError("sweep", "no values for key " + axis.key);
    return axis;
}

std::string trim_zeros(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string run_file_name(const fpd::ExperimentConfig& cfg) {
    return "run_" + fpd::defense_name(cfg.defense) + "_" + fpd::attack_name(cfg.attack) + "_f" +
           std::to_string(cfg.compromised) + "_q" + trim_zeros(cfg.q) + "_s" +
           std::to_string(cfg.seed) + ".csv";
}

void expand_cells(const fpd::ExperimentConfig& base, const std::vector<SweepAxis>& axes,
                  std::size_t axis, std::vector<fpd::ExperimentConfig>& out) {
    if (axis == axes.size()) {
        out.push_back(base);
        return;
    }
    for (const std::string& v : axes[axis].values) {
        fpd::ExperimentConfig cfg = base;
        fpd::apply_config_key(cfg, axes[axis].key, v);
        expand_cells(cfg, axes, axis + 1, out);
    }
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& sweeps,
            std::string out_dir) {
    fpd::ExperimentConfig base = fpd::load_config(config_path);
    if (!out_dir.empty()) base.out = out_dir;

    std::vector<SweepAxis> axes;
    for (const auto& s : sweeps) axes.push_back(parse_sweep(s));
    std::vector<fpd::ExperimentConfig> cells;
    expand_cells(base, axes, 0, cells);

    fs::create_directories(base.out);

    std::map<std::tuple<std::string, std::string, int, double>, std::vector<double>> final_acc;
    for (const auto& cell : cells) {
        for (int rep = 0; rep < cell.repetitions; ++rep) {
            fpd::ExperimentConfig cfg = cell;
            cfg.seed = cell.seed + static_cast<std::uint64_t>(rep);
            auto outcomes = fpd::run_experiment(cfg);

            fs::path file = fs::path(base.out) / run_file_name(cfg);
            std::ofstream os(file, std::ios::binary);
            os << fpd::outcomes_to_csv(outcomes, cfg);

            double acc = outcomes.empty() ? 0.0 : outcomes.back().accuracy;
            final_acc[{fpd::defense_name(cfg.defense), fpd::attack_name(cfg.attack),
                       cfg.compromised, cfg.q}]
                .push_back(acc);
            std::cout << file.string() << "  final_accuracy=" << acc << "\n";
        }
    }

    std::vector<fpd::SummaryRow> rows;
    for (const auto& [key, accs] : final_acc) {
        fpd::SummaryRow r;
        r.defense = std::get<0>(key);
        r.attack = std::get<1>(key);
        r.compromised = std::get<2>(key);
        r.q = std::get<3>(key);
        double s = 0.0;
        for (double a : accs) s += a;
        r.mean_final_accuracy = s / static_cast<double>(accs.size());
        r.repetitions = static_cast<int>(accs.size());
        rows.push_back(r);
    }
    std::ofstream(fs::path(base.out) / "summary.csv", std::ios::binary)
        << fpd::summary_to_csv(rows);
    std::string table = fpd::summary_to_table(rows);
    std::ofstream(fs::path(base.out) / "summary.txt", std::ios::binary) << table;
    std::cout << table;
    return 0;
}

// Parses the cell key out of a run CSV name:
// run_<defense>_<attack>_f<f>_q<q>_s<seed>.csv
bool parse_run_name(const std::string& name, std::string& defense, std::string& attack, int& f,
                    double& q) {
    if (name.rfind("run_", 0) != 0 || name.size() < 9) return false;
    std::string stem = name.substr(4, name.size() - 8);  // strip run_ and .csv
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= stem.size()) {
        std::size_t us = stem.find('_', pos);
        if (us == std::string::npos) us = stem.size();
        parts.push_back(stem.substr(pos, us - pos));
        pos = us + 1;
    }
    if (parts.size() != 5) return false;
    if (parts[2].size() < 2 || parts[2][0] != 'f') return false;
    if (parts[3].size() < 2 || parts[3][0] != 'q') return false;
    if (parts[4].size() < 2 || parts[4][0] != 's') return false;
    try {
        defense = parts[0];
        attack = parts[1];
        f = std::stoi(parts[2].substr(1));
        q = std::stod(parts[3].substr(1));
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

int cmd_summarize(const std::string& in_dir) {
    std::map<std::tuple<std::string, std::string, int, double>, std::vector<double>> final_acc;
    for (const auto& entry : fs::directory_iterator(in_dir)) {
        std::string name = entry.path().filename().string();
        std::string defense, attack;
        int f = 0;
        double q = 0.0;
        if (!parse_run_name(name, defense, attack, f, q)) continue;

        std::ifstream is(entry.path());
        std::string line, last;
        std::getline(is, line);  // header
        while (std::getline(is, line))
            if (!line.empty()) last = line;
        if (last.empty()) continue;
        // accuracy is column 8 (0-based 7)
        std::vector<std::string> cols;
        std::size_t pos = 0;
        while (pos <= last.size()) {
            std::size_t comma = last.find(',', pos);
            if (comma == std::string::npos) comma = last.size();
            cols.push_back(last.substr(pos, comma - pos));
            pos = comma + 1;
        }
        if (cols.size() < 8) continue;
        final_acc[{defense, attack, f, q}].push_back(std::stod(cols[7]));
    }

    std::vector<fpd::SummaryRow> rows;
    for (const auto& [key, accs] : final_acc) {
        fpd::SummaryRow r;
        r.defense = std::get<0>(key);
        r.attack = std::get<1>(key);
        r.compromised = std::get<2>(key);
        r.q = std::get<3>(key);
        double s = 0.0;
        for (double a : accs) s += a;
        r.mean_final_accuracy = s / static_cast<double>(accs.size());
        r.repetitions = static_cast<int>(accs.size());
        rows.push_back(r);
    }
    std::ofstream(fs::path(in_dir) / "summary.csv", std::ios::binary)
        << fpd::summary_to_csv(rows);
    std::string table = fpd::summary_to_table(rows);
    std::ofstream(fs::path(in_dir) / "summary.txt", std::ios::binary) << table;
    std::cout << table;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated-learning Byzantine defense experiment runner"};
    app.require_subcommand(1);

    std::string config_path, out_dir, in_dir;
    std::vector<std::string> sweeps;

    CLI::App* run = app.add_subcommand("run", "execute an experiment matrix");
    run->add_option("--config", config_path, "flat key=value config file")->required();
    run->add_option("--sweep", sweeps, "sweep axis key=v1,v2,... (repeatable)");
    run->add_option("--out", out_dir, "output directory (overrides config)");

    CLI::App* summ = app.add_subcommand("summarize", "summarize run CSVs in a directory");
    summ->add_option("--in", in_dir, "directory of run_*.csv files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, sweeps, out_dir);
        if (summ->parsed()) return cmd_summarize(in_dir);
    } catch (const fpd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
