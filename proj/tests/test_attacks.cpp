#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fpd/attacks.hpp"
#include "fpd/dataset.hpp"
#include "fpd/rng.hpp"
#include "fpd/vecmath.hpp"

using namespace fpd;
using Catch::Approx;

namespace {

ParamVector pv(std::vector<double> v) { return ParamVector(std::move(v)); }

}  // namespace

TEST_CASE("LIE default z follows the order-statistic prescription") {
    // K = 50, f = 15: s = 11, Phi(z) = 24/35, z about 0.484
    double z = lie_default_z(50, 15);
    CHECK(normal_cdf(z) == Approx(24.0 / 35.0).margin(1e-6));
    CHECK(z == Approx(0.484).margin(1e-3));

    // independent bisection oracle on the same CDF
    double lo = 0.0, hi = 4.0;
    while (hi - lo > 1e-9) {
        double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < 24.0 / 35.0 ? lo : hi) = mid;
    }
    CHECK(z == Approx(0.5 * (lo + hi)).margin(1e-6));

    // formula yields z <= 0: fall back to 0.3
    CHECK(lie_default_z(20, 2) == 0.3);
}

TEST_CASE("LIE with z = 0 reproduces the benign mean") {
    std::vector<ParamVector> benign = {pv({1, 2}), pv({3, 6}), pv({5, 1})};
    ParamVector mal = lie_attack(benign, 2, 10, 0.0);
    CHECK(mal[0] == Approx(3.0).margin(1e-12));
    CHECK(mal[1] == Approx(3.0).margin(1e-12));
}

TEST_CASE("LIE with a single benign update returns that update") {
    std::vector<ParamVector> benign = {pv({0.5, -2.0, 4.0})};
    ParamVector mal = lie_attack(benign, 3, 10, 1.5);  // sigma = 0
    CHECK(mal == benign[0]);
}

TEST_CASE("LIE is mean minus z sigma per coordinate") {
    Rng rng(3);
    std::vector<ParamVector> benign;
    for (int i = 0; i < 7; ++i) {
        std::vector<double> v(4);
        for (double& x : v) x = rng.normal();
        benign.push_back(pv(v));
    }
    double z = 0.7;
    ParamVector mal = lie_attack(benign, 2, 10, z);
    for (int c = 0; c < 4; ++c) {
        double mu = 0.0;
        for (const auto& b : benign) mu += b[c];
        mu /= 7.0;
        double var = 0.0;
        for (const auto& b : benign) var += (b[c] - mu) * (b[c] - mu);
        var /= 7.0;
        CHECK(mal[c] == Approx(mu - z * std::sqrt(var)).margin(1e-12));
    }
    CHECK_THROWS_AS(lie_attack({}, 2, 10, 0.5), AttackError);
}

TEST_CASE("IPM reverses and scales the benign mean") {
    std::vector<ParamVector> benign = {pv({1, -3}), pv({3, -5})};  // mean (2, -4)
    ParamVector mal = ipm_attack(benign, 0.5);
    CHECK(mal[0] == Approx(-1.0).margin(1e-12));
    CHECK(mal[1] == Approx(2.0).margin(1e-12));

    ParamVector tiny = ipm_attack(benign, 1e-9);
    CHECK(std::abs(tiny[0]) < 1e-8);
    CHECK(std::abs(tiny[1]) < 1e-8);

    // negative inner product with the benign mean for any nonzero mean
    ParamVector mean = pv({2, -4});
    CHECK(dot(mal, mean) < 0.0);

    CHECK_THROWS_AS(ipm_attack({}, 0.5), AttackError);
    CHECK_THROWS_AS(ipm_attack(benign, 0.0), AttackError);
}

TEST_CASE("label flipping maps l to L-1-l and is an involution") {
    LabeledDataset ds;
    ds.num_labels = 10;
    for (int l = 0; l < 10; ++l) {
        ds.features.push_back({static_cast<double>(l)});
        ds.labels.push_back(l);
    }
    LabeledDataset flipped = label_flip(ds, 10);
    CHECK(flipped.labels[0] == 9);
    CHECK(flipped.labels[4] == 5);
    CHECK(label_flip(flipped, 10).labels == ds.labels);
    CHECK(flipped.features == ds.features);

    // histogram is reversed
    std::vector<int> h0(10, 0), h1(10, 0);
    for (int l : ds.labels) ++h0[l];
    for (int l : flipped.labels) ++h1[l];
    for (int l = 0; l < 10; ++l) CHECK(h1[l] == h0[9 - l]);
}

TEST_CASE("sign flipping negates elementwise and preserves norm") {
    ParamVector u = pv({1, -2, 0});
    ParamVector f = sign_flip(u);
    CHECK(f[0] == -1.0);
    CHECK(f[1] == 2.0);
    CHECK(f[2] == 0.0);
    CHECK(norm(f) == Approx(norm(u)).margin(1e-15));
    CHECK(cosine(u, f) == Approx(-1.0).margin(1e-15));
    CHECK(u[0] == 1.0);  // input untouched
}

TEST_CASE("colluding attacks emit pairwise-identical vectors") {
    Rng rng(9);
    std::vector<ParamVector> benign;
    for (int i = 0; i < 5; ++i) {
        std::vector<double> v(6);
        for (double& x : v) x = rng.normal();
        benign.push_back(pv(v));
    }
    ParamVector lie1 = lie_attack(benign, 3, 10, -1.0);
    ParamVector lie2 = lie_attack(benign, 3, 10, -1.0);
    CHECK(lie1 == lie2);
    CHECK(cosine(lie1, lie2) == 1.0);

    ParamVector ipm1 = ipm_attack(benign, 0.5);
    ParamVector ipm2 = ipm_attack(benign, 0.5);
    CHECK(ipm1 == ipm2);
}

TEST_CASE("mixed attack splits the sorted compromised set in half") {
    MixedSplit s = mixed_split({3, 7, 1, 9, 5});
    CHECK(s.lie == std::set<ClientId>{1, 3, 5});  // first ceil(5/2) by id
    CHECK(s.flip == std::set<ClientId>{7, 9});

    MixedSplit even = mixed_split({2, 4, 6, 8});
    CHECK(even.lie == std::set<ClientId>{2, 4});
    CHECK(even.flip == std::set<ClientId>{6, 8});
}

TEST_CASE("benign inputs are never mutated by attack crafting") {
    std::vector<ParamVector> benign = {pv({1, 2}), pv({3, 4})};
    std::vector<ParamVector> copy = benign;
    lie_attack(benign, 1, 4, 0.5);
    ipm_attack(benign, 0.5);
    CHECK(benign[0] == copy[0]);
    CHECK(benign[1] == copy[1]);
}
