#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eqsr {

enum class Split { Train, IdValid, OodValid };

[[nodiscard]] std::string_view to_string(Split s) noexcept;
[[nodiscard]] std::optional<Split> split_from_string(std::string_view s) noexcept;

/// Thrown for malformed data files and shape mismatches between a program
/// and the data it is evaluated on.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetMeta {
    std::string benchmark;
    double noise_sigma{0.0};

    friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

/// Column-named numeric table: n rows of d inputs plus a target.
/// Inputs are stored row-major.
class Dataset {
public:
    Dataset() = default;
    /// Throws DataError on shape mismatch, empty data or non-finite entries.
    Dataset(std::vector<std::string> input_names, std::vector<double> inputs, std::vector<double> targets,
            Split split = Split::Train, DatasetMeta meta = {});

    [[nodiscard]] std::size_t rows() const noexcept { return targets_.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return names_.size(); }
    [[nodiscard]] const std::vector<std::string>& input_names() const noexcept { return names_; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept {
        return {inputs_.data() + i * names_.size(), names_.size()};
    }
    [[nodiscard]] double at(std::size_t row, std::size_t col) const noexcept {
        return inputs_[row * names_.size() + col];
    }
    [[nodiscard]] const std::vector<double>& inputs() const noexcept { return inputs_; }
    [[nodiscard]] const std::vector<double>& targets() const noexcept { return targets_; }
    [[nodiscard]] Split split() const noexcept { return split_; }
    [[nodiscard]] const DatasetMeta& meta() const noexcept { return meta_; }

    /// Optional per-row time stamps (oscillators); not an input column.
    [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }
    void set_times(std::vector<double> t);

    [[nodiscard]] Dataset with_targets(std::vector<double> y) const;
    [[nodiscard]] Dataset with_split(Split s) const;
    [[nodiscard]] Dataset with_meta(DatasetMeta m) const;
    /// Rows selected by index, in the given order.
    [[nodiscard]] Dataset subset(std::span<const std::size_t> rows, Split s) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::vector<std::string> names_;
    std::vector<double> inputs_;
    std::vector<double> targets_;
    std::vector<double> times_;
    Split split_{Split::Train};
    DatasetMeta meta_{};
};

/// CSV: header of input names followed by `y`; numbers printed with
/// round-trip precision.
void write_csv(const Dataset& data, const std::filesystem::path& path);
[[nodiscard]] Dataset read_csv(const std::filesystem::path& path, Split split = Split::Train, DatasetMeta meta = {});

/// The three splits of one benchmark.
struct SplitSet {
    Dataset train;
    Dataset id_valid;
    Dataset ood_valid;
};

/// Writes train.csv, id_valid.csv, ood_valid.csv and metadata.json.
void write_split_dir(const SplitSet& splits, const std::filesystem::path& dir, std::uint64_t seed,
                     std::string_view ood_rule);
[[nodiscard]] SplitSet read_split_dir(const std::filesystem::path& dir);

} // namespace eqsr
