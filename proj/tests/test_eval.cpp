#include <doctest.h>

#include <cmath>
#include <cstring>

#include "eqsr/eval.hpp"
#include "support.hpp"

using namespace eqsr;
using eqsr::testing::make_dataset;

namespace {

bool grad_of(const SkeletonProgram& p, const std::vector<double>& params, const Dataset& d, std::vector<double>& g) {
    auto out = evaluate_with_gradient(p, params, d);
    if (!out.ok()) {
        return false;
    }
    g = out.grad;
    return true;
}

} // namespace

TEST_CASE("evaluate: linear arithmetic") {
    auto p = parse("return params[0]*x + params[1]", {"x"});
    auto d = make_dataset({"x"}, {{0}, {1}, {2}}, {0, 0, 0});
    const std::vector<double> params{2, 1};
    auto out = evaluate(p, params, d);
    REQUIRE(out.ok());
    CHECK(out.predictions == std::vector<double>{1, 3, 5});
}

TEST_CASE("evaluate: log of zero is invalid") {
    auto p = parse("return log(x)", {"x"});
    auto d = make_dataset({"x"}, {{1}, {0}}, {0, 0});
    auto out = evaluate(p, {}, d);
    CHECK_FALSE(out.ok());
    CHECK(*out.invalid == "non-finite");
    CHECK(out.predictions.empty());
    CHECK_FALSE(evaluate_with_gradient(p, {}, d).ok());
}

TEST_CASE("evaluate: first oscillator law at (x, v) = (0.5, 0.5)") {
    auto p = parse("return params[0]*sin(params[4]*x) - params[1]*v**3 - params[2]*x**3 - params[3]*x*v - x*cos(x)",
                   {"x", "v"});
    auto d = make_dataset({"x", "v"}, {{0.5, 0.5}}, {0});
    const std::vector<double> params{0.8, 0.5, 0.2, 0.5, 1.0};
    auto out = evaluate(p, params, d);
    REQUIRE(out.ok());
    // 0.8 sin(0.5) - 0.5*0.125 - 0.2*0.125 - 0.5*0.25 - 0.5 cos(0.5), computed independently
    CHECK(out.predictions[0] == doctest::Approx(-0.267750850061824).epsilon(1e-14));
}

TEST_CASE("evaluate: let bindings are visible to later lines") {
    auto p = parse("a = x * 2\nb = a + v\nreturn a * b", {"x", "v"});
    auto d = make_dataset({"x", "v"}, {{1, 3}, {2, 0}}, {0, 0});
    auto out = evaluate(p, {}, d);
    REQUIRE(out.ok());
    CHECK(out.predictions == std::vector<double>{10, 16});
}

TEST_CASE("evaluate_with_gradient: single-parameter hand example") {
    auto p = parse("return params[0]*x", {"x"});
    auto d = make_dataset({"x"}, {{1}, {2}}, {2, 4});
    const std::vector<double> params{0};
    auto out = evaluate_with_gradient(p, params, d);
    REQUIRE(out.ok());
    // mse = ((0-2)^2 + (0-4)^2)/2 = 10; d/dp = (2/2)((-2)(1) + (-4)(2)) = -10
    CHECK(out.mse == 10.0);
    REQUIRE(out.grad.size() == 1);
    CHECK(out.grad[0] == -10.0);
}

TEST_CASE("evaluate_with_gradient: stationary at the least-squares optimum") {
    auto p = parse("return params[0]*x + params[1]", {"x"});
    // y = 0.7 x - 0.3 plus a residual orthogonal to [x, 1]
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    const double noise[] = {0.1, -0.1, -0.1, 0.1};
    for (int i = 0; i < 4; ++i) {
        rows.push_back({static_cast<double>(i)});
        y.push_back(0.7 * i - 0.3 + noise[i]);
    }
    auto d = make_dataset({"x"}, rows, y);
    // closed form: slope = cov(x,y)/var(x), intercept = ybar - slope * xbar
    double xbar = 1.5;
    double ybar = 0.0;
    for (double v : y) {
        ybar += v / 4.0;
    }
    double sxy = 0.0;
    double sxx = 0.0;
    for (int i = 0; i < 4; ++i) {
        sxy += (i - xbar) * (y[static_cast<std::size_t>(i)] - ybar);
        sxx += (i - xbar) * (i - xbar);
    }
    const std::vector<double> params{sxy / sxx, ybar - sxy / sxx * xbar};
    auto out = evaluate_with_gradient(p, params, d);
    REQUIRE(out.ok());
    CHECK(std::fabs(out.grad[0]) <= 1e-9);
    CHECK(std::fabs(out.grad[1]) <= 1e-9);
}

TEST_CASE("evaluate_with_gradient: agrees with finite differences on random programs") {
    auto rep = eqsr::testing::gradient_check(77, 40, grad_of);
    CHECK(rep.triples == 40);
    CHECK(rep.coordinates > 40);
    CHECK(rep.failures == 0);
    MESSAGE("worst relative error " << rep.worst_relative_error);
}

TEST_CASE("evaluate_with_gradient: non-smooth and singular operators") {
    auto d = eqsr::testing::random_dataset(5, {"x", "v"}, 30, 0.3, 1.7);
    const char* programs[] = {
        "return params[0] * log(x) + sqrt(params[1] * v)",
        "return exp(params[0] * x) / (1 + params[1] * v * v)",
        "return abs(params[0] - x) + params[1] * tan(v / 2)",
        "return min(params[0] * x, v) + max(x, params[1] * v)",
        "return x ** params[0] + params[1] ** v",
        "return params[0] * sigmoid(params[1] * x - 1)",
        "a = tanh(params[0] * x)\nreturn a * a - params[1] * cos(v)",
    };
    const std::vector<double> params{0.8, 1.3};
    for (const char* text : programs) {
        CAPTURE(text);
        auto p = parse(text, {"x", "v"});
        auto out = evaluate_with_gradient(p, params, d);
        REQUIRE(out.ok());
        auto fd = eqsr::testing::finite_difference_gradient(p, params, d);
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(out.grad[j] == doctest::Approx(fd[j]).epsilon(1e-6));
        }
    }
}

TEST_CASE("subgradient convention at kinks") {
    auto d = make_dataset({"x"}, {{1.0}}, {-1.0});
    const std::vector<double> at_kink{1.0};
    // |p - x| at p = x: right branch, slope +1; residual 1 => grad 2
    CHECK(evaluate_with_gradient(parse("return abs(params[0] - x)", {"x"}), at_kink, d).grad[0] == 2.0);
    // ties in min/max take the right operand
    CHECK(evaluate_with_gradient(parse("return min(params[0], x)", {"x"}), at_kink, d).grad[0] == 0.0);
    CHECK(evaluate_with_gradient(parse("return max(params[0], x)", {"x"}), at_kink, d).grad[0] == 0.0);
    CHECK(evaluate_with_gradient(parse("return min(x, params[0])", {"x"}), at_kink, d).grad[0] == 4.0);
}

TEST_CASE("sqrt at zero leaves parameter-independent branches differentiable") {
    auto d = make_dataset({"x"}, {{0.0}, {1.0}}, {0.0, 1.0});
    auto p = parse("return sqrt(x) + params[0] * x", {"x"});
    const std::vector<double> params{0.5};
    auto out = evaluate_with_gradient(p, params, d);
    REQUIRE(out.ok());
    // residuals: 0, 0.5 -> grad = (2/2)(0.5 * 1)
    CHECK(out.grad[0] == doctest::Approx(0.5));
}

TEST_CASE("sigmoid clamp keeps extreme arguments finite") {
    auto d = make_dataset({"x"}, {{1.0}, {-1.0}}, {0.0, 0.0});
    auto p = parse("return sigmoid(params[0] * x)", {"x"});
    const std::vector<double> params{1e6};
    auto out = evaluate_with_gradient(p, params, d);
    REQUIRE(out.ok());
    CHECK(out.grad[0] == 0.0);
    auto pred = evaluate(p, params, d);
    CHECK(pred.predictions[0] == doctest::Approx(1.0));
    CHECK(pred.predictions[1] == doctest::Approx(std::exp(-50.0)));
}

TEST_CASE("evaluation is bitwise deterministic") {
    eqsr::testing::ProgramGen gen(9, 2, 5);
    auto d = eqsr::testing::random_dataset(1, {"x", "v"}, 50);
    for (int i = 0; i < 50; ++i) {
        auto p = gen.program({"x", "v"}, 1, 4);
        std::vector<double> params(static_cast<std::size_t>(p.param_count()), 0.7);
        auto a = evaluate(p, params, d);
        auto b = evaluate(p, params, d);
        REQUIRE(a.ok() == b.ok());
        if (a.ok()) {
            CHECK(std::memcmp(a.predictions.data(), b.predictions.data(), a.predictions.size() * sizeof(double)) == 0);
        }
    }
}

TEST_CASE("step cap and shape errors") {
    auto p = parse("return params[0] * x", {"x"});
    auto d = make_dataset({"x"}, {{1.0}}, {1.0});
    const std::vector<double> params{1.0};
    EvalOptions tight;
    tight.step_factor = 0;
    auto out = evaluate(p, params, d, tight);
    CHECK_FALSE(out.ok());
    CHECK(*out.invalid == "step cap exceeded");

    CHECK_THROWS_AS((void)evaluate(p, std::vector<double>{1.0, 2.0}, d), DataError);
    auto other = make_dataset({"z"}, {{1.0}}, {1.0});
    CHECK_THROWS_AS((void)evaluate(p, params, other), DataError);
}
