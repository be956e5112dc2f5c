#include <doctest.h>

#include <random>

#include "eqsr/score.hpp"
#include "support.hpp"

using namespace eqsr;

TEST_CASE("mse anchors") {
    const std::vector<double> y{1.0, -2.0, 3.5};
    CHECK(mse(y, y) == 0.0);
    CHECK(mse(std::vector<double>{0, 0}, std::vector<double>{1, 1}) == 1.0);
    CHECK(mse(std::vector<double>{1, 2}, std::vector<double>{0, 0}) == 2.5);
    CHECK_THROWS_AS((void)mse(std::vector<double>{1}, std::vector<double>{1, 2}), std::invalid_argument);
    CHECK_THROWS_AS((void)mse(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("nmse anchors") {
    const std::vector<double> y{1.0, 4.0, -2.0, 0.5};
    CHECK(nmse(y, y) == 0.0);
    const double mean = (1.0 + 4.0 - 2.0 + 0.5) / 4.0;
    CHECK(nmse(std::vector<double>(4, mean), y) == 1.0);
    CHECK(nmse(std::vector<double>{0, 2}, std::vector<double>{1, 3}) == 1.0);
    CHECK_THROWS_AS((void)nmse(std::vector<double>{1, 1}, std::vector<double>{2, 2}), NormalizationError);
}

TEST_CASE("nmse is invariant under a shared affine map") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> y(20);
        std::vector<double> yh(20);
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] = n(rng);
            yh[i] = y[i] + 0.3 * n(rng);
        }
        const double a = trial % 2 ? -3.7 : 0.25;
        const double b = n(rng) * 10;
        std::vector<double> y2;
        std::vector<double> yh2;
        for (std::size_t i = 0; i < y.size(); ++i) {
            y2.push_back(a * y[i] + b);
            yh2.push_back(a * yh[i] + b);
        }
        CHECK(nmse(yh2, y2) == doctest::Approx(nmse(yh, y)).epsilon(1e-9));
    }
}

TEST_CASE("ranking by fitness equals ranking by negative nmse") {
    auto data = eqsr::testing::random_dataset(8, {"x"}, 40);
    auto p = parse("return params[0] * x + params[1]", {"x"});
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0, 1);
    std::vector<Score> scores;
    for (int i = 0; i < 30; ++i) {
        const std::vector<double> params{n(rng), n(rng)};
        scores.push_back(fitness(p, params, data));
    }
    for (const auto& a : scores) {
        for (const auto& b : scores) {
            CHECK((a.fitness > b.fitness) == (-*a.nmse > -*b.nmse));
        }
    }
}

TEST_CASE("fitness: perfect skeleton and discarded sentinel") {
    auto data = eqsr::testing::make_dataset({"x"}, {{0}, {1}, {2}}, {1, 3, 5});
    auto p = parse("return params[0] * x + params[1]", {"x"});
    auto s = fitness(p, std::vector<double>{2, 1}, data);
    CHECK_FALSE(s.discarded);
    CHECK(s.fitness == 0.0);
    CHECK(*s.nmse == 0.0);

    auto bad = fitness(parse("return log(x)", {"x"}), {}, data);
    CHECK(bad.discarded);
}

TEST_CASE("fitness: s equals -mse exactly") {
    auto data = eqsr::testing::random_dataset(3, {"x"}, 17);
    auto p = parse("return params[0] * sin(x)", {"x"});
    const std::vector<double> params{0.4};
    auto pred = evaluate(p, params, data);
    CHECK(fitness(p, params, data).fitness == -mse(pred.predictions, data.targets()));
}
