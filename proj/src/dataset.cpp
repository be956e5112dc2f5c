#include "eqsr/dataset.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace eqsr {

namespace {

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::string trim(std::string_view s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) {
        ++a;
    }
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) {
        --b;
    }
    return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? pos : pos - start)));
        if (pos == std::string::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

} // namespace

std::string_view to_string(Split s) noexcept {
    switch (s) {
    case Split::Train: return "train";
    case Split::IdValid: return "id_valid";
    case Split::OodValid: return "ood_valid";
    }
    return "train";
}

std::optional<Split> split_from_string(std::string_view s) noexcept {
    if (s == "train") {
        return Split::Train;
    }
    if (s == "id_valid") {
        return Split::IdValid;
    }
    if (s == "ood_valid") {
        return Split::OodValid;
    }
    return std::nullopt;
}

Dataset::Dataset(std::vector<std::string> input_names, std::vector<double> inputs, std::vector<double> targets,
                 Split split, DatasetMeta meta)
    : names_(std::move(input_names)), inputs_(std::move(inputs)), targets_(std::move(targets)), split_(split),
      meta_(std::move(meta)) {
    if (names_.empty()) {
        throw DataError("dataset needs at least one input column");
    }
    if (targets_.empty()) {
        throw DataError("dataset has no rows");
    }
    if (inputs_.size() != targets_.size() * names_.size()) {
        throw DataError("input matrix does not match row count");
    }
    for (double v : inputs_) {
        if (!std::isfinite(v)) {
            throw DataError("non-finite input value");
        }
    }
    for (double v : targets_) {
        if (!std::isfinite(v)) {
            throw DataError("non-finite target value");
        }
    }
}

void Dataset::set_times(std::vector<double> t) {
    if (!t.empty() && t.size() != rows()) {
        throw DataError("time column length does not match row count");
    }
    times_ = std::move(t);
}

Dataset Dataset::with_targets(std::vector<double> y) const {
    Dataset d(names_, inputs_, std::move(y), split_, meta_);
    d.times_ = times_;
    return d;
}

Dataset Dataset::with_split(Split s) const {
    Dataset d = *this;
    d.split_ = s;
    return d;
}

Dataset Dataset::with_meta(DatasetMeta m) const {
    Dataset d = *this;
    d.meta_ = std::move(m);
    return d;
}

Dataset Dataset::subset(std::span<const std::size_t> rows, Split s) const {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> t;
    x.reserve(rows.size() * cols());
    y.reserve(rows.size());
    for (std::size_t r : rows) {
        if (r >= this->rows()) {
            throw DataError("subset row out of range");
        }
        auto src = row(r);
        x.insert(x.end(), src.begin(), src.end());
        y.push_back(targets_[r]);
        if (!times_.empty()) {
            t.push_back(times_[r]);
        }
    }
    Dataset d(names_, std::move(x), std::move(y), s, meta_);
    d.times_ = std::move(t);
    return d;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    for (const auto& n : data.input_names()) {
        out << n << ',';
    }
    out << "y\n";
    for (std::size_t i = 0; i < data.rows(); ++i) {
        for (double v : data.row(i)) {
            out << format_double(v) << ',';
        }
        out << format_double(data.targets()[i]) << '\n';
    }
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

Dataset read_csv(const std::filesystem::path& path, Split split, DatasetMeta meta) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_commas(line);
            break;
        }
    }
    if (header.empty()) {
        throw DataError(path.string() + ": empty file");
    }
    if (header.size() < 2 || header.back() != "y") {
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": header must list input columns followed by 'y'");
    }
    std::vector<std::string> names(header.begin(), header.end() - 1);
    std::vector<double> x;
    std::vector<double> y;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_commas(line);
        if (fields.size() != header.size()) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v = 0.0;
            const auto& f = fields[c];
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v)) {
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + f + "'");
            }
            (c + 1 == fields.size() ? y : x).push_back(v);
        }
    }
    if (y.empty()) {
        throw DataError(path.string() + ": no data rows");
    }
    return Dataset(std::move(names), std::move(x), std::move(y), split, std::move(meta));
}

void write_split_dir(const SplitSet& splits, const std::filesystem::path& dir, std::uint64_t seed,
                     std::string_view ood_rule) {
    std::filesystem::create_directories(dir);
    write_csv(splits.train, dir / "train.csv");
    write_csv(splits.id_valid, dir / "id_valid.csv");
    write_csv(splits.ood_valid, dir / "ood_valid.csv");
    nlohmann::ordered_json meta;
    meta["benchmark"] = splits.train.meta().benchmark;
    meta["inputs"] = splits.train.input_names();
    meta["noise_sigma"] = splits.train.meta().noise_sigma;
    meta["seed"] = seed;
    meta["ood_rule"] = std::string(ood_rule);
    meta["rows"] = {{"train", splits.train.rows()},
                    {"id_valid", splits.id_valid.rows()},
                    {"ood_valid", splits.ood_valid.rows()}};
    std::ofstream out(dir / "metadata.json", std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + (dir / "metadata.json").string());
    }
    out << meta.dump(2) << '\n';
}

SplitSet read_split_dir(const std::filesystem::path& dir) {
    DatasetMeta meta;
    const auto meta_path = dir / "metadata.json";
    std::ifstream in(meta_path);
    if (!in) {
        throw DataError("missing metadata sidecar " + meta_path.string());
    }
    try {
        auto j = nlohmann::json::parse(in);
        meta.benchmark = j.at("benchmark").get<std::string>();
        meta.noise_sigma = j.value("noise_sigma", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(meta_path.string() + ": " + e.what());
    }
    SplitSet s{read_csv(dir / "train.csv", Split::Train, meta), read_csv(dir / "id_valid.csv", Split::IdValid, meta),
               read_csv(dir / "ood_valid.csv", Split::OodValid, meta)};
    if (s.id_valid.input_names() != s.train.input_names() || s.ood_valid.input_names() != s.train.input_names()) {
        throw DataError(dir.string() + ": split files disagree on input columns");
    }
    return s;
}

} // namespace eqsr
