#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "eqsr/dataset.hpp"

namespace eqsr {

/// Integration failure or an invalid generator spec.
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Oscillator { Osc1, Osc2 };

struct OscillatorSpec {
    Oscillator which{Oscillator::Osc1};
    double F{0.8};
    double omega{1.0};
    double alpha{0.5};
    double beta{0.2};
    double gamma{0.5};
    double delta{0.0};
    double t0{0.0};
    double t1{50.0};
    double x0{0.5};
    double v0{0.5};
    std::size_t n{1000};
    double atol{1e-8};
    double rtol{1e-8};

    /// Table values for the given oscillator.
    [[nodiscard]] static OscillatorSpec defaults(Oscillator which);
    void validate() const;
};

/// Acceleration law: the right-hand side of v' for the configured oscillator.
[[nodiscard]] double oscillator_rhs(const OscillatorSpec& spec, double t, double x, double v) noexcept;

struct Trajectory {
    std::vector<double> t;
    std::vector<double> x;
    std::vector<double> v;
    std::size_t steps{0};
    std::size_t rejected{0};
};

/// Dormand-Prince 5(4) with step control, sampled at n uniform times over
/// [t0, t1] (both ends included).
[[nodiscard]] Trajectory integrate_oscillator(const OscillatorSpec& spec);

/// Rows (x, v) for osc1 or (t, x, v) for osc2 with target v'. Row times are
/// kept in Dataset::times().
[[nodiscard]] Dataset simulate_oscillator(const OscillatorSpec& spec);

/// OOD = rows with t < ood_before; the rest is shuffled and split
/// train_fraction / rest into train and id_valid.
[[nodiscard]] SplitSet split_oscillator(const Dataset& data, std::uint64_t seed, double ood_before = 20.0,
                                        double train_fraction = 0.8);

struct Range {
    double lo;
    double hi;
};

struct EcoliSpec {
    double mu_max{1.0};
    double Ks{1.0};
    double k{0.3};
    double x0{15.0};
    double c{3e-6};
    double x_decay{40.0};
    double pH_opt{6.5};
    double pH_min{3.0};
    double pH_max{10.0};
    Range B{0.1, 2.0};
    Range S{0.1, 5.0};
    Range T{15.0, 45.0};
    Range pH{4.0, 9.0};
    /// Width of the centred in-domain box on every axis, as a fraction.
    double id_fraction{0.6};
    std::size_t n{2500};
    double train_fraction{0.8};

    void validate() const;
};

[[nodiscard]] double ecoli_rate(const EcoliSpec& spec, double B, double S, double T, double pH) noexcept;
[[nodiscard]] SplitSet generate_ecoli(const EcoliSpec& spec, std::uint64_t seed);

/// Stress-strain CSV with columns strain, temp_C, stress_MPa (any order).
/// Inputs are named strain and T.
[[nodiscard]] Dataset read_stress_csv(const std::filesystem::path& path);
void write_stress_csv(const Dataset& data, const std::filesystem::path& path);
/// Rows at ood_temp are OOD; the rest is split train/id.
[[nodiscard]] SplitSet split_stress_strain(const Dataset& data, std::uint64_t seed, double ood_temp = 200.0,
                                           double train_fraction = 0.8);
[[nodiscard]] SplitSet load_stress_strain(const std::filesystem::path& path, std::uint64_t seed,
                                          double ood_temp = 200.0);

/// y + N(0, sigma^2) per row, seeded; inputs untouched.
[[nodiscard]] Dataset add_noise(const Dataset& data, double sigma, std::uint64_t seed);

/// Benchmarks known to the generator: osc1, osc2, ecoli, stress.
[[nodiscard]] const std::vector<std::string>& benchmark_names();
[[nodiscard]] std::vector<std::string> benchmark_inputs(const std::string& name);

} // namespace eqsr
