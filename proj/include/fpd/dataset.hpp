#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fpd/errors.hpp"
#include "fpd/rng.hpp"

namespace fpd {

struct LabeledDataset {
    std::vector<std::vector<double>> features;
    std::vector<int> labels;     // each in [0, num_labels)
    int num_labels = 0;

    std::size_t size() const noexcept { return labels.size(); }
    bool empty() const noexcept { return labels.empty(); }
};

struct PartitionSpec {
    int clients = 0;                 // K
    double q = 0.0;                  // non-IID degree; q = 1/L is IID
    std::vector<int> sizes;          // per-client target sample counts
    std::uint64_t seed = 0;
};

// Synthetic classification task: L unit-covariance Gaussian clusters with
// centers 6 sigma apart (scaled-basis simplex when the dimension allows it, a
// circle in the first two coordinates otherwise). Labels round-robin.
inline LabeledDataset generate_synthetic(int n, int num_labels, int dim, std::uint64_t seed) {
    if (num_labels < 1 || n < num_labels || dim < 2)
        throw ConfigError("synthetic", "need n >= L >= 1 and dim >= 2");

    std::vector<std::vector<double>> centers(num_labels, std::vector<double>(dim, 0.0));
    if (dim >= num_labels) {
        const double s = 6.0 / std::sqrt(2.0);  // pairwise distance s*sqrt(2) = 6
        for (int l = 0; l < num_labels; ++l) centers[l][l] = s;
    } else {
        const double r = 3.0 / std::sin(M_PI / num_labels);  // adjacent chord = 6
        for (int l = 0; l < num_labels; ++l) {
            double phi = 2.0 * M_PI * l / num_labels;
            centers[l][0] = r * std::cos(phi);
            centers[l][1] = r * std::sin(phi);
        }
    }

    Rng rng(seed);
    LabeledDataset ds;
    ds.num_labels = num_labels;
    ds.features.reserve(n);
    ds.labels.reserve(n);
    for (int i = 0; i < n; ++i) {
        int label = i % num_labels;
        std::vector<double> x(dim);
        for (int j = 0; j < dim; ++j) x[j] = centers[label][j] + rng.normal();
        ds.features.push_back(std::move(x));
        ds.labels.push_back(label);
    }
    return ds;
}

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const char* what) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4))
        throw FormatError(std::string("IDX: truncated ") + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

// IDX image/label pair (the MNIST container format). Pixels scaled to [0, 1],
// flattened row-major; label count inferred from the data.
inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw FormatError("IDX: cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError("IDX: cannot open " + labels_path);

    if (detail::read_be_u32(img, "image magic") != 0x00000803u)
        throw FormatError("IDX: bad image magic");
    std::uint32_t n_img = detail::read_be_u32(img, "image count");
    std::uint32_t rows = detail::read_be_u32(img, "row count");
    std::uint32_t cols = detail::read_be_u32(img, "column count");

    if (detail::read_be_u32(lab, "label magic") != 0x00000801u)
        throw FormatError("IDX: bad label magic");
    std::uint32_t n_lab = detail::read_be_u32(lab, "label count");
    if (n_img != n_lab) throw FormatError("IDX: image/label count mismatch");

    LabeledDataset ds;
    ds.features.reserve(n_img);
    ds.labels.reserve(n_img);
    const std::size_t pixels = std::size_t(rows) * cols;
    std::vector<unsigned char> buf(pixels);
    int max_label = -1;
    for (std::uint32_t i = 0; i < n_img; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels)))
            throw FormatError("IDX: truncated image data");
        int label = lab.get();
        if (label == EOF) throw FormatError("IDX: truncated label data");
        std::vector<double> x(pixels);
        for (std::size_t p = 0; p < pixels; ++p) x[p] = buf[p] / 255.0;
        ds.features.push_back(std::move(x));
        ds.labels.push_back(label);
        max_label = std::max(max_label, label);
    }
    ds.num_labels = max_label + 1;
    return ds;
}

// Group assignment for the label-skew partition: clients are placed round-robin
// into L groups; a sample with label l goes to group l with probability q and
// to each other group with probability (1-q)/(L-1), then uniformly to a client
// within the chosen group. Returns per-client sample indices (no duplicates).
inline std::vector<std::vector<std::size_t>> assign_clients(const LabeledDataset& ds,
                                                            const PartitionSpec& spec) {
    const int L = ds.num_labels;
    if (L < 1) throw ConfigError("dataset", "no labels");
    if (spec.clients < L) throw ConfigError("clients", "need at least one client per label group");
    if (spec.q < 1.0 / L - 1e-12 || spec.q > 1.0 + 1e-12)
        throw ConfigError("q", "non-IID degree must lie in [1/L, 1]");

    std::vector<std::vector<int>> groups(L);
    for (int k = 0; k < spec.clients; ++k) groups[k % L].push_back(k);

    Rng rng(spec.seed);
    std::vector<std::vector<std::size_t>> pools(spec.clients);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        int l = ds.labels[i];
        int g;
        if (rng.bernoulli(spec.q)) {
            g = l;
        } else {
            g = static_cast<int>(rng.uniform_below(L - 1));
            if (g >= l) ++g;
        }
        const auto& members = groups[g];
        int k = members[rng.uniform_below(members.size())];
        pools[k].push_back(i);
    }
    return pools;
}

// Full label-skew partition; per-client pools are trimmed (seeded shuffle then
// truncate) or resampled with replacement from the client's own pool to hit the
// target sizes.
inline std::vector<LabeledDataset> partition_noniid(const LabeledDataset& ds,
                                                    const PartitionSpec& spec) {
    if (static_cast<int>(spec.sizes.size()) != spec.clients)
        throw ConfigError("sizes", "one target size per client required");

    auto pools = assign_clients(ds, spec);
    Rng rng(derive_seed(spec.seed, 0x5a)), pick(derive_seed(spec.seed, 0xa5));

    std::vector<LabeledDataset> parts(spec.clients);
    for (int k = 0; k < spec.clients; ++k) {
        auto& pool = pools[k];
        std::size_t target = static_cast<std::size_t>(spec.sizes[k]);
        if (pool.size() > target) {
            rng.shuffle(pool);
            pool.resize(target);
        } else if (!pool.empty()) {
            while (pool.size() < target)
                pool.push_back(pool[pick.uniform_below(pool.size())]);
        }
        parts[k].num_labels = ds.num_labels;
        parts[k].features.reserve(pool.size());
        parts[k].labels.reserve(pool.size());
        for (std::size_t idx : pool) {
            parts[k].features.push_back(ds.features[idx]);
            parts[k].labels.push_back(ds.labels[idx]);
        }
    }
    return parts;
}

}  // namespace fpd
