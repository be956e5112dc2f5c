#include <doctest.h>

#include <cmath>
#include <set>

#include "buffer_support.hpp"
#include "eqsr/buffer.hpp"

using namespace eqsr;
using testing::ClusterSpec;
using testing::buffer_from_islands;
using testing::make_candidate;

namespace {

const std::vector<std::string> kInputs{"x", "v"};
const std::string kSeedText = "return ((params[0] * x) + (params[1] * v))";

Candidate seed_candidate(double fitness = -2.0) {
    return make_candidate(linear_seed_text(kInputs), kInputs, fitness);
}

// Softmax written out directly in long double.
std::vector<double> softmax_oracle(const std::vector<double>& z) {
    long double top = z[0];
    for (double v : z) {
        top = std::max<long double>(top, v);
    }
    long double sum = 0;
    for (double v : z) {
        sum += std::exp(static_cast<long double>(v) - top);
    }
    std::vector<double> p;
    for (double v : z) {
        p.push_back(static_cast<double>(std::exp(static_cast<long double>(v) - top) / sum));
    }
    return p;
}

double l1(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += std::fabs(a[i] - b[i]);
    }
    return d;
}

} // namespace

TEST_CASE("init_population places the seed on every island") {
    const auto buf = ExperienceBuffer::init_population(seed_candidate(), BufferConfig{}, 7);
    REQUIRE(buf.islands().size() == 10);
    for (const auto& isl : buf.islands()) {
        CHECK(isl.programs == 1);
        CHECK(isl.clusters.size() == 1);
        CHECK(isl.best == -2.0);
        CHECK(isl.best_candidate().text == kSeedText);
    }
    CHECK(buf.registrations() == 10);
    buf.validate();
}

TEST_CASE("init_population rejects bad configurations") {
    BufferConfig cfg;
    cfg.islands = 3;
    CHECK_THROWS_AS((void)ExperienceBuffer::init_population(seed_candidate(), cfg, 1), ConfigError);
    cfg.islands = 0;
    CHECK_THROWS_AS((void)ExperienceBuffer::init_population(seed_candidate(), cfg, 1), ConfigError);
    cfg = BufferConfig{};
    cfg.t0 = 0.0;
    CHECK_THROWS_AS((void)ExperienceBuffer::init_population(seed_candidate(), cfg, 1), ConfigError);
    cfg = BufferConfig{};
    cfg.tau_p = -1.0;
    CHECK_THROWS_AS((void)ExperienceBuffer::init_population(seed_candidate(), cfg, 1), ConfigError);

    auto bad = seed_candidate();
    bad.discarded = true;
    CHECK_THROWS_AS((void)ExperienceBuffer::init_population(bad, BufferConfig{}, 1), ConfigError);

    cfg = BufferConfig{};
    cfg.islands = 1;
    cfg.mode = SamplingMode::TopK;
    CHECK(ExperienceBuffer::init_population(seed_candidate(), cfg, 1).islands().size() == 1);
}

TEST_CASE("registration is strict improvement per island") {
    auto buf = ExperienceBuffer::init_population(seed_candidate(-1.0), BufferConfig{}, 3);
    CHECK(buf.register_candidate(make_candidate("return x", kInputs, -0.5), 4));
    CHECK(buf.islands()[4].best == -0.5);
    CHECK(buf.islands()[4].programs == 2);
    CHECK(buf.islands()[3].best == -1.0);

    CHECK_FALSE(buf.register_candidate(make_candidate("return v", kInputs, -0.5), 4));
    CHECK_FALSE(buf.register_candidate(make_candidate("return v", kInputs, -0.7), 4));
    auto discarded = make_candidate("return v", kInputs, 5.0);
    discarded.discarded = true;
    CHECK_FALSE(buf.register_candidate(discarded, 4));
    CHECK_FALSE(buf.register_candidate(make_candidate("return v", kInputs, std::nan("")), 4));
    CHECK(buf.islands()[4].programs == 2);
    CHECK(buf.registrations() == 11);
    CHECK_THROWS_AS((void)buf.register_candidate(make_candidate("return v", kInputs, 0.0), 10), std::out_of_range);
    buf.validate();
}

TEST_CASE("signature rounds to six significant digits") {
    CHECK(signature(-0.123456789) == -0.123457);
    CHECK(signature(-0.123456781) == -0.123457);
    CHECK(signature(-1234567.0) == -1234570.0);
    CHECK(signature(0.0) == 0.0);
    CHECK(signature(-2.5e-12) == -2.5e-12);

    auto buf = ExperienceBuffer::init_population(seed_candidate(-1.0), BufferConfig{}, 3);
    REQUIRE(buf.register_candidate(make_candidate("return x", kInputs, -0.123456789), 0));
    REQUIRE(buf.register_candidate(make_candidate("return v", kInputs, -0.123456781), 0));
    const auto& isl = buf.islands()[0];
    CHECK(isl.clusters.size() == 2);
    CHECK(isl.clusters.at(-0.123457).members.size() == 2);
    CHECK(isl.clusters.at(-0.123457).members[0].text == "return x");
    buf.validate();
}

TEST_CASE("cluster temperature schedule") {
    CHECK(cluster_temperature(0, 0.1, 10000) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(cluster_temperature(5000, 0.1, 10000) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(cluster_temperature(10000, 0.1, 10000) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(cluster_temperature(9999, 0.1, 10000) == doctest::Approx(1e-5).epsilon(1e-9));
    CHECK(cluster_temperature(10000, 0.0, 10000) == 1e-6);
}

TEST_CASE("cluster probabilities match an independent softmax") {
    const std::vector<double> s{-1.0, -2.0};
    const auto p = cluster_probabilities(s, 0);
    const auto o = softmax_oracle({-10.0, -20.0});
    CHECK(p[0] == doctest::Approx(0.9999546).epsilon(1e-7));
    CHECK(p[1] == doctest::Approx(4.54e-5).epsilon(1e-3));
    CHECK(std::fabs(p[0] - o[0]) < 1e-15);
    CHECK(std::fabs(p[1] - o[1]) < 1e-15);

    // extreme scores stay finite
    const std::vector<double> big{-1e6, -2e6, -1e6 - 1};
    const auto q = cluster_probabilities(big, 9999);
    double sum = 0;
    for (double v : q) {
        CHECK(std::isfinite(v));
        sum += v;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);
    CHECK(q[0] == 1.0);

    // argmax as u -> N-
    const std::vector<double> close{-0.30, -0.2999, -0.31};
    CHECK(cluster_probabilities(close, 9999)[1] > 0.9999);
}

TEST_CASE("length probabilities follow the literal formula") {
    const std::vector<std::size_t> two{10, 20};
    const auto p = length_probabilities(two);
    // l = [-10,-20], normalised [-1, 0] up to the 1e-6 term
    const double lt0 = (-10.0 + 20.0) / (-10.0 + 1e-6);
    const auto o = softmax_oracle({-lt0, 0.0});
    CHECK(p[0] == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(0.2689).epsilon(1e-3));
    CHECK(std::fabs(p[0] - o[0]) < 1e-15);
    CHECK(p[0] > p[1]);

    const std::vector<std::size_t> one{42};
    CHECK(length_probabilities(one) == std::vector<double>{1.0});
    const std::vector<std::size_t> same{7, 7, 7};
    for (double v : length_probabilities(same)) {
        CHECK(v == doctest::Approx(1.0 / 3.0));
    }
    const std::vector<std::size_t> three{10, 20, 40};
    const auto q = length_probabilities(three);
    CHECK(q[0] > q[1]);
    CHECK(q[1] > q[2]);
}

TEST_CASE("single program island yields identical demos") {
    BufferConfig cfg;
    cfg.islands = 2;
    auto buf = ExperienceBuffer::init_population(seed_candidate(), cfg, 11);
    const auto s = buf.sample(3);
    REQUIRE(s.demos.size() == 3);
    for (const auto& d : s.demos) {
        CHECK(d.text == kSeedText);
    }
}

TEST_CASE("demos are sorted ascending by fitness") {
    auto buf = ExperienceBuffer::init_population(seed_candidate(-5.0), BufferConfig{}, 19);
    for (int i = 0; i < 10; ++i) {
        for (int j = 1; j <= 6; ++j) {
            (void)buf.register_candidate(make_candidate(j % 2 ? "return x" : "return (x * v)", kInputs, -5.0 + j * 0.01),
                                         i);
        }
    }
    for (int t = 0; t < 500; ++t) {
        const auto s = buf.sample(4);
        REQUIRE(s.demos.size() == 4);
        CHECK(s.island >= 0);
        CHECK(s.island < 10);
        for (std::size_t i = 1; i < s.demos.size(); ++i) {
            CHECK(s.demos[i - 1].fitness <= s.demos[i].fitness);
        }
    }
}

TEST_CASE("island choice is uniform") {
    auto buf = ExperienceBuffer::init_population(seed_candidate(), BufferConfig{}, 23);
    std::vector<double> freq(10, 0.0);
    const int n = 100000;
    for (int t = 0; t < n; ++t) {
        freq[static_cast<std::size_t>(buf.sample(1).island)] += 1.0 / n;
    }
    CHECK(l1(freq, std::vector<double>(10, 0.1)) < 0.02);
}

TEST_CASE("empirical cluster frequencies match the Boltzmann law") {
    for (std::size_t u : {std::size_t{2}, std::size_t{5000}}) {
        const std::vector<ClusterSpec> island{{-1.05, {"return x"}, u / 2}, {-1.0, {"return v"}, u - u / 2}};
        auto buf = buffer_from_islands({island, island}, kInputs, BufferConfig{}, 5 + u);
        const std::vector<double> means{-1.05, -1.0};
        const auto expected = cluster_probabilities(means, u);
        std::vector<double> freq(2, 0.0);
        const int n = 100000;
        for (int t = 0; t < n; ++t) {
            freq[buf.sample(1).demos[0].fitness == -1.0 ? 1 : 0] += 1.0 / n;
        }
        CHECK(l1(freq, expected) < 0.01);
    }
}

TEST_CASE("empirical length frequencies match the length law") {
    const std::vector<std::string> inputs{"abc", "abcdefghijklm", "abcdefghijklmnopqrstuvwxyzabcdefg"};
    const std::vector<ClusterSpec> island{{-1.0, {"return abc", "return abcdefghijklm",
                                                  "return abcdefghijklmnopqrstuvwxyzabcdefg"},
                                           3}};
    auto buf = buffer_from_islands({island, island}, inputs, BufferConfig{}, 99);
    const auto& members = buf.islands()[0].clusters.begin()->second.members;
    REQUIRE(members[0].length() == 10);
    REQUIRE(members[1].length() == 20);
    REQUIRE(members[2].length() == 40);
    const std::vector<std::size_t> lengths{10, 20, 40};
    const auto expected = length_probabilities(lengths);
    std::vector<double> freq(3, 0.0);
    const int n = 100000;
    for (int t = 0; t < n; ++t) {
        const auto len = buf.sample(1).demos[0].length();
        freq[len == 10 ? 0 : len == 20 ? 1 : 2] += 1.0 / n;
    }
    CHECK(l1(freq, expected) < 0.01);
    CHECK(freq[0] > freq[1]);
    CHECK(freq[0] > freq[2]);
}

TEST_CASE("top-k sampling is deterministic and ordered") {
    BufferConfig cfg;
    cfg.islands = 1;
    cfg.mode = SamplingMode::TopK;
    auto buf = ExperienceBuffer::init_population(seed_candidate(-3.0), cfg, 5);
    CHECK(buf.register_candidate(make_candidate("return x", kInputs, -2.0), 0));
    CHECK(buf.register_candidate(make_candidate("return v", kInputs, -1.0), 0));
    const auto s = buf.sample(2);
    REQUIRE(s.demos.size() == 2);
    CHECK(s.demos[0].text == "return x");
    CHECK(s.demos[1].text == "return v");
    CHECK(buf.sample(5).demos.size() == 3);
}

TEST_CASE("reset replaces the worst half") {
    auto buf = ExperienceBuffer::init_population(seed_candidate(-100.0), BufferConfig{}, 31);
    // island i best = -(10 - i), so islands 0..4 are the worst
    for (int i = 0; i < 10; ++i) {
        REQUIRE(buf.register_candidate(make_candidate(i % 2 ? "return x" : "return v", kInputs, -(10.0 - i)), i));
    }
    const auto before = buf.islands();
    const auto reset = buf.reset_islands();
    CHECK(reset == std::vector<int>{0, 1, 2, 3, 4});
    std::set<std::string> survivor_best;
    for (int i = 5; i < 10; ++i) {
        CHECK(buf.islands()[static_cast<std::size_t>(i)].programs == before[static_cast<std::size_t>(i)].programs);
    }
    for (int i : reset) {
        const auto& isl = buf.islands()[static_cast<std::size_t>(i)];
        CHECK(isl.programs == 1);
        CHECK(isl.clusters.size() == 1);
        const auto& c = isl.best_candidate();
        bool matches = false;
        for (int s = 5; s < 10; ++s) {
            const auto& b = before[static_cast<std::size_t>(s)].best_candidate();
            matches = matches || (b.text == c.text && b.fitness == c.fitness && b.order == c.order);
        }
        CHECK(matches);
        CHECK(isl.best >= -5.0);
    }
    buf.validate();
}

TEST_CASE("reset tie at the cut treats the lower index as worse") {
    auto buf = ExperienceBuffer::init_population(seed_candidate(-100.0), BufferConfig{}, 37);
    const double bests[10] = {-1, -2, -3, -4, -5, -5, -0.5, -0.4, -0.3, -0.2};
    for (int i = 0; i < 10; ++i) {
        REQUIRE(buf.register_candidate(make_candidate("return x", kInputs, bests[i]), i));
    }
    CHECK(buf.reset_islands() == std::vector<int>{1, 2, 3, 4, 5});

    auto flat = ExperienceBuffer::init_population(seed_candidate(-1.0), BufferConfig{}, 37);
    CHECK(flat.reset_islands() == std::vector<int>{0, 1, 2, 3, 4});
    flat.validate();
}

TEST_CASE("reset copies the oldest of tied best members") {
    // two members share the best score; the older one must be copied
    const std::vector<ClusterSpec> strong{{-1.0, {"return x", "return v"}, 2}};
    const std::vector<ClusterSpec> weak{{-9.0, {"return (x * v)"}, 1}};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto buf = buffer_from_islands({weak, strong}, kInputs, BufferConfig{}, seed);
        CHECK(buf.reset_islands() == std::vector<int>{0});
        const auto& isl = buf.islands()[0];
        REQUIRE(isl.programs == 1);
        CHECK(isl.best_candidate().text == "return x");
        CHECK(isl.best == -1.0);
    }
}

TEST_CASE("best is non-decreasing between resets and invariants hold") {
    auto buf = ExperienceBuffer::init_population(seed_candidate(-10.0), BufferConfig{}, 41);
    Rng rng(8);
    std::vector<double> last(10, -10.0);
    for (int t = 0; t < 2000; ++t) {
        const auto s = buf.sample(2);
        const double f = -10.0 * uniform01(rng);
        (void)buf.register_candidate(make_candidate(t % 3 ? "return x" : "return (v + x)", kInputs, f), s.island);
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(buf.islands()[i].best >= last[i]);
            last[i] = buf.islands()[i].best;
        }
        if (t % 500 == 499) {
            (void)buf.reset_islands();
            for (std::size_t i = 0; i < 10; ++i) {
                last[i] = buf.islands()[i].best;
            }
        }
        buf.validate();
    }
}

TEST_CASE("snapshots are deterministic and round-trip") {
    auto run = [](std::uint64_t seed) {
        auto buf = ExperienceBuffer::init_population(seed_candidate(-10.0), BufferConfig{}, seed);
        Rng rng(seed);
        for (int t = 0; t < 300; ++t) {
            const auto s = buf.sample(2);
            (void)buf.register_candidate(make_candidate("return x", kInputs, -10.0 * uniform01(rng)), s.island);
            if (t == 150) {
                (void)buf.reset_islands();
            }
        }
        return buf;
    };
    const auto a = run(5);
    const auto b = run(5);
    CHECK(a.snapshot().dump() == b.snapshot().dump());
    CHECK(a.snapshot().dump() != run(6).snapshot().dump());

    auto restored = ExperienceBuffer::restore(nlohmann::json::parse(a.snapshot().dump()), kInputs);
    CHECK(restored.snapshot().dump() == a.snapshot().dump());
    auto original = a;
    for (int t = 0; t < 50; ++t) {
        const auto x = original.sample(2);
        const auto y = restored.sample(2);
        CHECK(x.island == y.island);
        CHECK(x.demos[0].order == y.demos[0].order);
        CHECK(x.demos[1].order == y.demos[1].order);
    }
}

TEST_CASE("restore rejects broken snapshots") {
    auto buf = ExperienceBuffer::init_population(seed_candidate(-1.0), BufferConfig{}, 1);
    auto snap = nlohmann::json::parse(buf.snapshot().dump());
    snap["islands"][0]["best"] = 5.0;
    CHECK_THROWS_AS((void)ExperienceBuffer::restore(snap, kInputs), std::logic_error);
    snap = nlohmann::json::parse(buf.snapshot().dump());
    snap["islands"].erase(0);
    CHECK_THROWS((void)ExperienceBuffer::restore(snap, kInputs));
}
