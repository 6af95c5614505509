#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <limits>
#include <vector>

#include "fpd/baselines.hpp"
#include "fpd/rng.hpp"

using namespace fpd;
using Catch::Approx;

namespace {

ParamVector pv(std::vector<double> v) { return ParamVector(std::move(v)); }

std::vector<ParamVector> random_updates(Rng& rng, int n, int d) {
    std::vector<ParamVector> out;
    for (int i = 0; i < n; ++i) {
        std::vector<double> v(d);
        for (double& x : v) x = rng.normal();
        out.push_back(pv(v));
    }
    return out;
}

// Independent Krum oracle: full distance matrix, per-candidate sort.
ParamVector krum_oracle(const std::vector<ParamVector>& u, int f) {
    const int n = static_cast<int>(u.size());
    double best = std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<double> d2;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (std::size_t c = 0; c < u[i].dim(); ++c) {
                double d = u[i][c] - u[j][c];
                s += d * d;
            }
            d2.push_back(s);
        }
        std::sort(d2.begin(), d2.end());
        double score = 0.0;
        for (int k = 0; k < n - f - 2; ++k) score += d2[k];
        if (score < best) {
            best = score;
            best_i = i;
        }
    }
    return u[best_i];
}

// Independent FABA oracle: recompute the mean and drop the farthest, f times.
ParamVector faba_oracle(std::vector<ParamVector> u, int f) {
    for (int round = 0; round < f; ++round) {
        std::vector<double> mean(u.front().dim(), 0.0);
        for (const auto& v : u)
            for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += v[c];
        for (double& m : mean) m /= static_cast<double>(u.size());
        std::size_t worst = 0;
        double worst_d = -1.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            double s = 0.0;
            for (std::size_t c = 0; c < mean.size(); ++c) {
                double d = u[i][c] - mean[c];
                s += d * d;
            }
            if (s > worst_d) {
                worst_d = s;
                worst = i;
            }
        }
        u.erase(u.begin() + worst);
    }
    std::vector<double> mean(u.front().dim(), 0.0);
    for (const auto& v : u)
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += v[c];
    for (double& m : mean) m /= static_cast<double>(u.size());
    return pv(mean);
}

}  // namespace

TEST_CASE("fedavg weighted arithmetic") {
    std::vector<LocalUpdate> eq = {{0, pv({2, 0}), 5}, {1, pv({0, 4}), 5}};
    ParamVector mean = fedavg(eq);
    CHECK(mean[0] == Approx(1.0));
    CHECK(mean[1] == Approx(2.0));

    std::vector<LocalUpdate> weighted = {{0, pv({4, 0}), 1}, {1, pv({0, 4}), 3}};
    ParamVector w = fedavg(weighted);
    CHECK(w[0] == Approx(1.0));
    CHECK(w[1] == Approx(3.0));

    CHECK_THROWS_AS(fedavg({}), EmptyAggregation);
    std::vector<LocalUpdate> zero = {{0, pv({1, 1}), 0}};
    CHECK_THROWS_AS(fedavg(zero), EmptyAggregation);
}

TEST_CASE("fedavg matches a direct weighted-sum oracle") {
    Rng rng(41);
    std::vector<LocalUpdate> updates;
    for (int i = 0; i < 5; ++i) {
        std::vector<double> v(6);
        for (double& x : v) x = rng.normal();
        updates.push_back({i, pv(v), static_cast<int>(1 + rng.uniform_below(40))});
    }
    ParamVector got = fedavg(updates);
    long total = 0;
    for (const auto& u : updates) total += u.claimed_size;
    for (int c = 0; c < 6; ++c) {
        double expect = 0.0;
        for (const auto& u : updates)
            expect += (static_cast<double>(u.claimed_size) / total) * u.delta[c];
        CHECK(got[c] == Approx(expect).margin(1e-12));
    }
}

TEST_CASE("krum picks a benign update against a far outlier") {
    std::vector<ParamVector> u = {pv({1, 1}), pv({1, 1}), pv({1, 1}), pv({1, 1}),
                                  pv({100, -50})};
    ParamVector r = krum(u, 1);
    CHECK(r == pv({1, 1}));
}

TEST_CASE("krum tie-breaks to the lowest index and returns an input") {
    std::vector<ParamVector> u(5, pv({2, 3}));
    CHECK(krum(u, 1) == u[0]);

    Rng rng(43);
    auto r = random_updates(rng, 8, 4);
    ParamVector k = krum(r, 2);
    CHECK(std::count(r.begin(), r.end(), k) >= 1);  // selection, never a blend
}

TEST_CASE("krum matches the exhaustive-distance oracle") {
    Rng rng(44);
    for (int trial = 0; trial < 50; ++trial) {
        auto u = random_updates(rng, 8, 5);
        CHECK(krum(u, 2) == krum_oracle(u, 2));
    }
    auto small = random_updates(rng, 4, 3);
    CHECK_THROWS_AS(krum(small, 2), ConfigError);
}

TEST_CASE("faba with f = 0 is the plain mean") {
    Rng rng(45);
    auto u = random_updates(rng, 6, 4);
    ParamVector m = faba(u, 0);
    std::vector<LocalUpdate> eq;
    for (int i = 0; i < 6; ++i) eq.push_back({i, u[i], 7});
    ParamVector avg = fedavg(eq);
    for (int c = 0; c < 4; ++c) CHECK(m[c] == Approx(avg[c]).margin(1e-12));
}

TEST_CASE("faba drops the extreme outlier") {
    std::vector<ParamVector> u = {pv({1, 0}), pv({2, 0}), pv({3, 0}), pv({500, 500})};
    ParamVector r = faba(u, 1);
    CHECK(r[0] == Approx(2.0));
    CHECK(r[1] == Approx(0.0));
    CHECK_THROWS_AS(faba(u, 4), ConfigError);
}

TEST_CASE("faba matches the step-by-step removal oracle") {
    Rng rng(46);
    for (int trial = 0; trial < 50; ++trial) {
        auto u = random_updates(rng, 7, 4);
        ParamVector got = faba(u, 2);
        ParamVector expect = faba_oracle(u, 2);
        for (int c = 0; c < 4; ++c) CHECK(got[c] == Approx(expect[c]).margin(1e-12));
    }
}

TEST_CASE("baselines are permutation equivariant") {
    Rng rng(47);
    auto u = random_updates(rng, 7, 5);
    ParamVector k0 = krum(u, 2);
    ParamVector f0 = faba(u, 2);
    for (int shuffle = 0; shuffle < 5; ++shuffle) {
        rng.shuffle(u);
        CHECK(krum(u, 2) == k0);
        ParamVector f1 = faba(u, 2);
        for (int c = 0; c < 5; ++c) CHECK(f1[c] == Approx(f0[c]).margin(1e-12));
    }
}
