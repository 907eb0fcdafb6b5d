#include <doctest.h>

#include <cmath>

#include "fedmr/error.hpp"
#include "fedmr/model.hpp"
#include "fedmr/net.hpp"
#include "fedmr/rng.hpp"
#include "helpers.hpp"

using namespace fedmr;
using test::bitwise_equal;
using test::random_list;
using test::vector_model;

TEST_CASE("init_model is deterministic and seed-sensitive") {
    const auto arch = ArchitectureSpec::mlp(2, {}, 2);  // one 2x2 weight layer
    const auto a = init_model(arch, 17);
    const auto b = init_model(arch, 17);
    CHECK(bitwise_equal(a, b));

    const auto c = init_model(arch, 18);
    CHECK(max_abs_difference(a, c) > 0.0);
}

TEST_CASE("init_model zeroes every bias block") {
    const auto arch = ArchitectureSpec::mlp(3, {5, 4}, 2);
    const auto model = init_model(arch, 99);
    for (size_t i = 1; i < model.layers.size(); i += 2) {
        for (double v : model.layers[i].values) CHECK(v == 0.0);
    }
    // Weight entries stay inside the init bound.
    for (size_t i = 0; i < model.layers.size(); i += 2) {
        const auto& w = model.layers[i];
        const double bound = std::sqrt(6.0 / (w.shape[0] + w.shape[1]));
        for (double v : w.values) CHECK(std::abs(v) <= bound);
    }
}

TEST_CASE("init_model rejects an empty architecture") {
    ArchitectureSpec arch;
    CHECK_THROWS_AS(init_model(arch, 1), Error);
    try {
        init_model(arch, 1);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidArchitecture);
    }
}

TEST_CASE("aggregate_mean of identical models is the model") {
    Rng rng(1);
    auto models = random_list(rng, 1, 3);
    // Power-of-two K keeps the division exact, so equality is bitwise.
    ModelList same(8, models.front());
    CHECK(max_abs_difference(aggregate_mean(same), models.front()) == 0.0);
    // Odd K: still equal to within one rounding of the division.
    ModelList odd(5, models.front());
    const auto mean = aggregate_mean(odd);
    for (size_t li = 0; li < mean.layers.size(); ++li) {
        for (size_t e = 0; e < mean.layers[li].values.size(); ++e) {
            CHECK(mean.layers[li].values[e] ==
                  doctest::Approx(models.front().layers[li].values[e]).epsilon(1e-15));
        }
    }
}

TEST_CASE("aggregate_mean matches hand arithmetic") {
    const ModelList models{vector_model({1.0, 2.0}), vector_model({3.0, 4.0})};
    const auto mean = aggregate_mean(models);
    CHECK(mean.layers[0].values[0] == 2.0);
    CHECK(mean.layers[0].values[1] == 3.0);
}

TEST_CASE("aggregate_mean matches a per-element loop oracle") {
    Rng rng(7);
    const auto models = random_list(rng, 7, 4);
    const auto mean = aggregate_mean(models);
    for (size_t li = 0; li < mean.layers.size(); ++li) {
        for (size_t e = 0; e < mean.layers[li].values.size(); ++e) {
            double acc = 0.0;
            for (const auto& m : models) acc += m.layers[li].values[e];
            acc /= static_cast<double>(models.size());
            CHECK(mean.layers[li].values[e] == doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("aggregate errors: empty list and arch mismatch") {
    CHECK_THROWS_AS(aggregate_mean({}), Error);
    Rng rng(2);
    auto models = random_list(rng, 2, 3);
    models[1].layers[0].values.push_back(0.0);
    models[1].layers[0].shape = {static_cast<int>(models[1].layers[0].values.size())};
    models[1].arch_id = compute_arch_id(models[1]);
    CHECK_THROWS_AS(aggregate_mean(models), Error);
}

TEST_CASE("sum_models identities") {
    Rng rng(3);
    const auto single = random_list(rng, 1, 2);
    CHECK(bitwise_equal(sum_models(single), single.front()));

    auto pos = single.front();
    auto neg = pos;
    for (auto& layer : neg.layers) {
        for (auto& v : layer.values) v = -v;
    }
    const auto zero = sum_models({pos, neg});
    for (const auto& layer : zero.layers) {
        for (double v : layer.values) CHECK(v == 0.0);
    }
}

TEST_CASE("sum equals K times the mean") {
    Rng rng(4);
    const auto models = random_list(rng, 5, 3);
    const auto sum = sum_models(models);
    const auto mean = aggregate_mean(models);
    for (size_t li = 0; li < sum.layers.size(); ++li) {
        for (size_t e = 0; e < sum.layers[li].values.size(); ++e) {
            const double lhs = sum.layers[li].values[e];
            const double rhs = 5.0 * mean.layers[li].values[e];
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
    }
}

TEST_CASE("sq_distance_sum basics and oracle") {
    Rng rng(5);
    const auto models = random_list(rng, 4, 3);
    CHECK(sq_distance_sum({models[0], models[0]}, models[0]) == 0.0);

    const auto m34 = vector_model({3.0, 4.0});
    const auto origin = vector_model({0.0, 0.0});
    CHECK(sq_distance_sum({m34}, origin) == 25.0);

    // Naive double loop over flattened vectors as the oracle.
    const auto six = random_list(rng, 6, 3);
    const auto x = six.back();
    const auto xf = x.flatten();
    double oracle = 0.0;
    for (const auto& m : six) {
        const auto mf = m.flatten();
        REQUIRE(mf.size() == xf.size());
        for (size_t i = 0; i < mf.size(); ++i) {
            oracle += (mf[i] - xf[i]) * (mf[i] - xf[i]);
        }
    }
    CHECK(sq_distance_sum(six, x) == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("pairwise_cosine_mean basics") {
    const auto a = vector_model({1.0, 0.0});
    const auto b = vector_model({0.0, 1.0});
    CHECK(pairwise_cosine_mean({a, b}) == 0.0);

    const auto c = vector_model({2.0, 1.0});
    CHECK(pairwise_cosine_mean({c, c, c}) == doctest::Approx(1.0).epsilon(1e-15));

    const auto zero = vector_model({0.0, 0.0});
    CHECK_THROWS_AS(pairwise_cosine_mean({a, zero}), Error);
}

TEST_CASE("pairwise_cosine_mean matches pair enumeration") {
    Rng rng(8);
    const auto models = random_list(rng, 4, 3);
    std::vector<std::vector<double>> flats;
    for (const auto& m : models) flats.push_back(m.flatten());
    auto dot = [](const std::vector<double>& u, const std::vector<double>& v) {
        double acc = 0.0;
        for (size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
        return acc;
    };
    double oracle = 0.0;
    int pairs = 0;
    for (size_t i = 0; i < flats.size(); ++i) {
        for (size_t j = i + 1; j < flats.size(); ++j) {
            oracle += dot(flats[i], flats[j]) /
                      (std::sqrt(dot(flats[i], flats[i])) *
                       std::sqrt(dot(flats[j], flats[j])));
            ++pairs;
        }
    }
    oracle /= pairs;
    CHECK(pairwise_cosine_mean(models) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("reductions are permutation-invariant") {
    Rng rng(9);
    auto models = random_list(rng, 6, 4);
    const auto mean_a = aggregate_mean(models);
    const auto sum_a = sum_models(models);
    const auto x = models.front();
    const double dist_a = sq_distance_sum(models, x);

    auto shuffled = models;
    Rng perm_rng(10);
    perm_rng.shuffle(shuffled);
    const auto mean_b = aggregate_mean(shuffled);
    const auto sum_b = sum_models(shuffled);

    for (size_t li = 0; li < mean_a.layers.size(); ++li) {
        for (size_t e = 0; e < mean_a.layers[li].values.size(); ++e) {
            CHECK(mean_a.layers[li].values[e] ==
                  doctest::Approx(mean_b.layers[li].values[e]).epsilon(1e-12));
            CHECK(sum_a.layers[li].values[e] ==
                  doctest::Approx(sum_b.layers[li].values[e]).epsilon(1e-12));
        }
    }
    CHECK(dist_a == doctest::Approx(sq_distance_sum(shuffled, x)).epsilon(1e-12));
}

TEST_CASE("flatten round-trips bitwise") {
    Rng rng(11);
    const auto model = random_list(rng, 1, 5).front();
    const auto flat = model.flatten();
    const auto back = unflatten_like(model, flat);
    CHECK(bitwise_equal(model, back));
}
