#include "eqsr/bench.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "eqsr/rng.hpp"

namespace eqsr {

namespace {

using State = std::array<double, 2>;

std::string number(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

/// Seeded Fisher-Yates over `rows`, then the first round(f * n) go to train.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(std::vector<std::size_t> rows,
                                                                          std::uint64_t seed, double train_fraction) {
    Rng rng(derive_seed(seed, "split"));
    for (std::size_t i = rows.size(); i > 1; --i) {
        std::swap(rows[i - 1], rows[uniform_index(rng, i)]);
    }
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
    std::vector<std::size_t> train(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> id(rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
    std::sort(train.begin(), train.end());
    std::sort(id.begin(), id.end());
    return {train, id};
}

SplitSet make_splits(const Dataset& data, const std::vector<std::size_t>& in_domain,
                     const std::vector<std::size_t>& ood, std::uint64_t seed, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
        throw GenerationError("train fraction must lie in (0, 1]");
    }
    auto [train, id] = split_rows(in_domain, seed, train_fraction);
    if (train.empty()) {
        throw GenerationError("split leaves the training set empty");
    }
    if (id.empty() || ood.empty()) {
        throw GenerationError("split leaves a validation set empty");
    }
    return {data.subset(train, Split::Train), data.subset(id, Split::IdValid), data.subset(ood, Split::OodValid)};
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

} // namespace

OscillatorSpec OscillatorSpec::defaults(Oscillator which) {
    OscillatorSpec s;
    s.which = which;
    if (which == Oscillator::Osc2) {
        s.F = 0.3;
        s.alpha = 0.5;
        s.beta = 1.0;
        s.delta = 5.0;
        s.gamma = 0.5;
        s.omega = 1.0;
    }
    return s;
}

void OscillatorSpec::validate() const {
    const double all[] = {F, omega, alpha, beta, gamma, delta, t0, t1, x0, v0, atol, rtol};
    for (double v : all) {
        if (!std::isfinite(v)) {
            throw GenerationError("oscillator spec has a non-finite field");
        }
    }
    if (!(t1 > t0)) {
        throw GenerationError("oscillator time range must satisfy t1 > t0");
    }
    if (n < 2) {
        throw GenerationError("oscillator sample count must be at least 2");
    }
    if (!(atol > 0.0) || !(rtol > 0.0)) {
        throw GenerationError("integrator tolerances must be positive");
    }
}

double oscillator_rhs(const OscillatorSpec& s, double t, double x, double v) noexcept {
    if (s.which == Oscillator::Osc1) {
        return s.F * std::sin(s.omega * x) - s.alpha * v * v * v - s.beta * x * x * x - s.gamma * x * v -
               x * std::cos(x);
    }
    return s.F * std::sin(s.omega * t) - s.alpha * v * v * v - s.beta * x * v - s.delta * x * std::exp(s.gamma * x);
}

Trajectory integrate_oscillator(const OscillatorSpec& spec) {
    spec.validate();
    auto f = [&](double t, const State& y) { return State{y[1], oscillator_rhs(spec, t, y[0], y[1])}; };

    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;

    Trajectory out;
    out.t.resize(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        out.t[i] = i + 1 == spec.n ? spec.t1
                                   : spec.t0 + (spec.t1 - spec.t0) * static_cast<double>(i) /
                                                   static_cast<double>(spec.n - 1);
    }
    out.x.push_back(spec.x0);
    out.v.push_back(spec.v0);

    State y{spec.x0, spec.v0};
    double t = spec.t0;
    double h = std::min(1e-3, (spec.t1 - spec.t0) / static_cast<double>(spec.n - 1));
    State k1 = f(t, y);
    for (std::size_t i = 1; i < spec.n; ++i) {
        const double target = out.t[i];
        while (t < target) {
            const bool last = t + h >= target;
            const double step = last ? target - t : h;
            if (step <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(t))) {
                throw GenerationError("integrator step size underflow at t=" + number(t));
            }
            State s;
            for (int j = 0; j < 2; ++j) s[j] = y[j] + step * a21 * k1[j];
            const State k2 = f(t + step / 5, s);
            for (int j = 0; j < 2; ++j) s[j] = y[j] + step * (a31 * k1[j] + a32 * k2[j]);
            const State k3 = f(t + 3 * step / 10, s);
            for (int j = 0; j < 2; ++j) s[j] = y[j] + step * (a41 * k1[j] + a42 * k2[j] + a43 * k3[j]);
            const State k4 = f(t + 4 * step / 5, s);
            for (int j = 0; j < 2; ++j) s[j] = y[j] + step * (a51 * k1[j] + a52 * k2[j] + a53 * k3[j] + a54 * k4[j]);
            const State k5 = f(t + 8 * step / 9, s);
            for (int j = 0; j < 2; ++j)
                s[j] = y[j] + step * (a61 * k1[j] + a62 * k2[j] + a63 * k3[j] + a64 * k4[j] + a65 * k5[j]);
            const State k6 = f(t + step, s);
            State yn;
            for (int j = 0; j < 2; ++j)
                yn[j] = y[j] + step * (b1 * k1[j] + b3 * k3[j] + b4 * k4[j] + b5 * k5[j] + b6 * k6[j]);
            const double t_new = last ? target : t + step;
            const State k7 = f(t_new, yn);

            double err = 0.0;
            for (int j = 0; j < 2; ++j) {
                const double e =
                    step * (e1 * k1[j] + e3 * k3[j] + e4 * k4[j] + e5 * k5[j] + e6 * k6[j] + e7 * k7[j]);
                const double scale = spec.atol + spec.rtol * std::max(std::fabs(y[j]), std::fabs(yn[j]));
                err += (e / scale) * (e / scale);
            }
            err = std::sqrt(err / 2.0);
            if (!std::isfinite(err) || !std::isfinite(yn[0]) || !std::isfinite(yn[1])) {
                h = step * 0.2;
                ++out.rejected;
                continue;
            }
            if (err <= 1.0) {
                t = t_new;
                y = yn;
                k1 = k7;
                ++out.steps;
                const double grow = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
                // a step clipped to the grid does not shrink the next one
                h = std::max(h, step) * grow;
            } else {
                h = step * std::max(0.2, 0.9 * std::pow(err, -0.2));
                ++out.rejected;
            }
        }
        out.x.push_back(y[0]);
        out.v.push_back(y[1]);
    }
    return out;
}

Dataset simulate_oscillator(const OscillatorSpec& spec) {
    const auto traj = integrate_oscillator(spec);
    const bool forced = spec.which == Oscillator::Osc2;
    std::vector<double> inputs;
    std::vector<double> y;
    for (std::size_t i = 0; i < spec.n; ++i) {
        if (forced) {
            inputs.push_back(traj.t[i]);
        }
        inputs.push_back(traj.x[i]);
        inputs.push_back(traj.v[i]);
        y.push_back(oscillator_rhs(spec, traj.t[i], traj.x[i], traj.v[i]));
    }
    std::vector<std::string> names = forced ? std::vector<std::string>{"t", "x", "v"}
                                            : std::vector<std::string>{"x", "v"};
    Dataset d(std::move(names), std::move(inputs), std::move(y), Split::Train,
              DatasetMeta{forced ? "osc2" : "osc1", 0.0});
    d.set_times(traj.t);
    return d;
}

SplitSet split_oscillator(const Dataset& data, std::uint64_t seed, double ood_before, double train_fraction) {
    if (data.times().size() != data.rows()) {
        throw GenerationError("oscillator split needs per-row times");
    }
    std::vector<std::size_t> in_domain;
    std::vector<std::size_t> ood;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        (data.times()[i] < ood_before ? ood : in_domain).push_back(i);
    }
    return make_splits(data, in_domain, ood, seed, train_fraction);
}

void EcoliSpec::validate() const {
    if (!(pH_min < pH_opt && pH_opt < pH_max)) {
        throw GenerationError("E. coli spec needs pH_min < pH_opt < pH_max");
    }
    for (const Range& r : {B, S, T, pH}) {
        if (!(r.lo < r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
            throw GenerationError("E. coli sampling ranges must be non-degenerate");
        }
    }
    if (!(id_fraction > 0.0 && id_fraction < 1.0)) {
        throw GenerationError("E. coli id_fraction must lie in (0, 1)");
    }
    if (n < 2) {
        throw GenerationError("E. coli sample count must be at least 2");
    }
}

double ecoli_rate(const EcoliSpec& s, double B, double S, double T, double pH) noexcept {
    const double substrate = S / (s.Ks + S);
    const double dT = T - s.x_decay;
    const double temperature = std::tanh(s.k * (T - s.x0)) / (1.0 + s.c * dT * dT * dT * dT);
    const double acidity = std::sin((pH - s.pH_min) * std::numbers::pi / (s.pH_max - s.pH_min));
    return s.mu_max * B * substrate * temperature * std::exp(-std::fabs(pH - s.pH_opt)) * acidity * acidity;
}

SplitSet generate_ecoli(const EcoliSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(derive_seed(seed, "ecoli"));
    const Range ranges[4] = {spec.B, spec.S, spec.T, spec.pH};
    std::vector<double> inputs;
    std::vector<double> y;
    std::vector<std::size_t> in_domain;
    std::vector<std::size_t> ood;
    for (std::size_t i = 0; i < spec.n; ++i) {
        double v[4];
        bool inside = true;
        for (int j = 0; j < 4; ++j) {
            const Range& r = ranges[j];
            v[j] = r.lo + (r.hi - r.lo) * uniform01(rng);
            const double centre = 0.5 * (r.lo + r.hi);
            const double half = 0.5 * spec.id_fraction * (r.hi - r.lo);
            inside = inside && v[j] >= centre - half && v[j] <= centre + half;
            inputs.push_back(v[j]);
        }
        y.push_back(ecoli_rate(spec, v[0], v[1], v[2], v[3]));
        (inside ? in_domain : ood).push_back(i);
    }
    const Dataset all({"B", "S", "T", "pH"}, std::move(inputs), std::move(y), Split::Train, DatasetMeta{"ecoli", 0.0});
    return make_splits(all, in_domain, ood, seed, spec.train_fraction);
}

Dataset read_stress_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            break;
        }
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
        throw DataError(path.string() + ": empty file");
    }
    const auto header = split_csv_line(line);
    auto column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw DataError(path.string() + ": missing column '" + name + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_strain = column("strain");
    const std::size_t c_temp = column("temp_C");
    const std::size_t c_stress = column("stress_MPa");

    std::vector<double> inputs;
    std::vector<double> y;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
        }
        auto value = [&](std::size_t c) {
            double v = 0.0;
            const auto& s = cells[c];
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + s + "'");
            }
            return v;
        };
        inputs.push_back(value(c_strain));
        inputs.push_back(value(c_temp));
        y.push_back(value(c_stress));
    }
    if (y.empty()) {
        throw DataError(path.string() + ": no data rows");
    }
    return Dataset({"strain", "T"}, std::move(inputs), std::move(y), Split::Train, DatasetMeta{"stress", 0.0});
}

void write_stress_csv(const Dataset& data, const std::filesystem::path& path) {
    if (data.input_names() != std::vector<std::string>{"strain", "T"}) {
        throw DataError("stress-strain data must have inputs (strain, T)");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << "strain,temp_C,stress_MPa\n";
    for (std::size_t i = 0; i < data.rows(); ++i) {
        out << number(data.at(i, 0)) << ',' << number(data.at(i, 1)) << ',' << number(data.targets()[i]) << '\n';
    }
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

SplitSet split_stress_strain(const Dataset& data, std::uint64_t seed, double ood_temp, double train_fraction) {
    std::vector<std::size_t> in_domain;
    std::vector<std::size_t> ood;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        (std::fabs(data.at(i, 1) - ood_temp) <= 1e-9 ? ood : in_domain).push_back(i);
    }
    return make_splits(data, in_domain, ood, seed, train_fraction);
}

SplitSet load_stress_strain(const std::filesystem::path& path, std::uint64_t seed, double ood_temp) {
    return split_stress_strain(read_stress_csv(path), seed, ood_temp);
}

Dataset add_noise(const Dataset& data, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("noise sigma must be finite and non-negative");
    }
    auto meta = data.meta();
    meta.noise_sigma = sigma;
    if (sigma == 0.0) {
        return data.with_meta(meta);
    }
    Rng rng(derive_seed(seed, "noise"));
    std::vector<double> y = data.targets();
    for (double& v : y) {
        v += sigma * standard_normal(rng);
    }
    return data.with_targets(std::move(y)).with_meta(meta);
}

const std::vector<std::string>& benchmark_names() {
    static const std::vector<std::string> names{"osc1", "osc2", "ecoli", "stress"};
    return names;
}

std::vector<std::string> benchmark_inputs(const std::string& name) {
    if (name == "osc1") return {"x", "v"};
    if (name == "osc2") return {"t", "x", "v"};
    if (name == "ecoli") return {"B", "S", "T", "pH"};
    if (name == "stress") return {"strain", "T"};
    throw std::invalid_argument("unknown benchmark '" + name + "'");
}

} // namespace eqsr
