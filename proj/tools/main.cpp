#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "eqsr/bench.hpp"
#include "eqsr/config.hpp"
#include "eqsr/engine.hpp"
#include "eqsr/errors.hpp"

using namespace eqsr;
namespace fs = std::filesystem;

namespace {

enum Exit : int {
    kOk = 0,
    kInternal = 1,
    kUsage = 2,
    kData = 3,
    kFilesystem = 4,
    kRunFailure = 5,
};

/// Output file could not be written.
class WriteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot open " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string nmse_text(const Score& s) {
    if (s.discarded) return "discarded";
    return s.nmse ? num(*s.nmse) : "n/a";
}

nlohmann::ordered_json score_json(const Score& s) {
    nlohmann::ordered_json j;
    j["mse"] = s.discarded ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(-s.fitness);
    j["nmse"] = (s.discarded || !s.nmse) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(*s.nmse);
    return j;
}

// ------------------------------------------------------------ generate-data

struct GenerateArgs {
    std::string benchmark;
    fs::path out;
    std::uint64_t seed{0};
    double noise{0.0};
    std::size_t n{0};
    double ood_before{20.0};
    fs::path source;
    bool json{false};
};

int generate_data(const GenerateArgs& a) {
    SplitSet splits;
    std::string rule;
    if (a.benchmark == "osc1" || a.benchmark == "osc2") {
        auto spec = OscillatorSpec::defaults(a.benchmark == "osc1" ? Oscillator::Osc1 : Oscillator::Osc2);
        if (a.n) spec.n = a.n;
        splits = split_oscillator(simulate_oscillator(spec), a.seed, a.ood_before);
        rule = "t < " + num(a.ood_before);
    } else if (a.benchmark == "ecoli") {
        EcoliSpec spec;
        if (a.n) spec.n = a.n;
        splits = generate_ecoli(spec, a.seed);
        rule = "outside the central box on any axis";
    } else if (a.benchmark == "stress") {
        if (a.source.empty()) {
            throw ConfigError("stress data is not generated: pass --source with a CSV from fetch-stress-data");
        }
        splits = load_stress_strain(a.source, a.seed);
        rule = "temp_C == 200";
    } else {
        throw ConfigError("unknown benchmark '" + a.benchmark + "'");
    }
    splits.train = add_noise(splits.train, a.noise, a.seed);
    fs::create_directories(a.out);
    try {
        write_split_dir(splits, a.out, a.seed, rule);
    } catch (const DataError&) {
        throw;
    } catch (const std::runtime_error& e) {
        throw WriteError(e.what());
    }
    if (a.json) {
        std::cout << nlohmann::ordered_json{{"benchmark", a.benchmark},
                                            {"dir", a.out.string()},
                                            {"train", splits.train.rows()},
                                            {"id_valid", splits.id_valid.rows()},
                                            {"ood_valid", splits.ood_valid.rows()},
                                            {"noise_sigma", a.noise}}
                         .dump()
                  << "\n";
    } else {
        std::cout << a.benchmark << ": " << splits.train.rows() << " train, " << splits.id_valid.rows()
                  << " id_valid, " << splits.ood_valid.rows() << " ood_valid rows written to " << a.out.string()
                  << "\n";
    }
    return kOk;
}

// ---------------------------------------------------------------------- run

struct RunArgs {
    fs::path config;
    std::vector<std::string> overrides;
    bool resume{false};
    bool json{false};
};

RunConfig assemble(const fs::path& config, const std::vector<std::string>& overrides) {
    RunConfig cfg = config.empty() ? RunConfig{} : load_config(config);
    for (const auto& o : overrides) apply_override(cfg, o);
    cfg.validate();
    return cfg;
}

int run(const RunArgs& a) {
    const RunConfig cfg = assemble(a.config, a.overrides);
    if (cfg.data_dir.empty()) throw ConfigError("run.data_dir is not set");
    if (a.resume && cfg.out_dir.empty()) throw ConfigError("--resume needs run.out_dir");
    Engine engine(cfg, read_split_dir(cfg.data_dir));
    const RunResult r = a.resume ? engine.resume(cfg.out_dir / "checkpoint.json") : engine.run();
    if (a.json) {
        std::cout << report_json(r, cfg).dump() << "\n";
        return kOk;
    }
    std::cout << "best program:\n  " << r.best.text << "\n";
    std::cout << "params:";
    for (double p : r.best.params) std::cout << " " << num(p);
    std::cout << "\nnmse train " << nmse_text(r.scores.train) << "  id " << nmse_text(r.scores.id_valid) << "  ood "
              << nmse_text(r.scores.ood_valid) << "\n";
    const auto& c = r.counters;
    std::cout << "iterations " << c.iterations << ", responses " << c.responses << ", parsed " << c.parsed
              << ", accepted " << c.accepted << ", generator failures " << c.generator_failures << "\n";
    if (!cfg.out_dir.empty()) std::cout << "outputs in " << cfg.out_dir.string() << "\n";
    return kOk;
}

// ----------------------------------------------------------------- evaluate

struct EvaluateArgs {
    fs::path program;
    fs::path data;
    int restarts{10};
    double gtol{1e-12};
    int max_iterations{2000};
    std::uint64_t seed{0};
    bool json{false};
};

int evaluate(const EvaluateArgs& a) {
    const SplitSet data = read_split_dir(a.data);
    std::string text = read_text(a.program);
    if (text.find("```") != std::string::npos) text = extract_program_text(text);
    const auto program = parse(text, data.train.input_names());
    FitConfig fc;
    fc.restarts = a.restarts;
    fc.gradient_tolerance = a.gtol;
    fc.bfgs_max_iterations = a.max_iterations;
    fc.seed = a.seed;
    try {
        validate(fc);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto [cand, scores] = evaluate_program(program, data, fc);
    if (cand.discarded) throw DataError("program cannot be evaluated on the training data");
    if (a.json) {
        nlohmann::ordered_json j;
        j["program"] = cand.text;
        j["params"] = cand.params;
        j["train"] = score_json(scores.train);
        j["id_valid"] = score_json(scores.id_valid);
        j["ood_valid"] = score_json(scores.ood_valid);
        std::cout << j.dump() << "\n";
        return kOk;
    }
    std::cout << "program: " << cand.text << "\nparams:";
    for (double p : cand.params) std::cout << " " << num(p);
    std::cout << "\nnmse train " << nmse_text(scores.train) << "\nnmse id   " << nmse_text(scores.id_valid)
              << "\nnmse ood  " << nmse_text(scores.ood_valid) << "\n";
    return kOk;
}

// ------------------------------------------------------------------- report

struct ReportArgs {
    fs::path dir;
    fs::path csv;
    bool json{false};
};

int report(const ReportArgs& a) {
    nlohmann::ordered_json rep;
    try {
        rep = nlohmann::ordered_json::parse(read_text(a.dir / "report.json"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError((a.dir / "report.json").string() + ": " + e.what());
    }
    std::ifstream traj(a.dir / "trajectory.jsonl");
    if (!traj) throw DataError("cannot open " + (a.dir / "trajectory.jsonl").string());
    std::ostringstream curve;
    curve << "iteration,best_fitness,best_nmse\n";
    auto rows = nlohmann::ordered_json::array();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(traj, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json r;
        try {
            r = nlohmann::json::parse(line);
            const auto it = r.at("iteration").get<int>();
            const auto f = r.at("best_fitness").get<double>();
            const auto& s = r.at("best_train_nmse");
            curve << it << ',' << nlohmann::json(f).dump() << ',' << (s.is_null() ? "" : s.dump()) << '\n';
            rows.push_back({{"iteration", it}, {"best_fitness", f}, {"best_nmse", s}});
        } catch (const nlohmann::json::exception& e) {
            throw DataError("trajectory.jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!a.csv.empty()) {
        std::ofstream out(a.csv, std::ios::binary | std::ios::trunc);
        out << curve.str();
        if (!out) throw WriteError("cannot write " + a.csv.string());
    }
    if (a.json) {
        nlohmann::ordered_json j = rep;
        j["curve"] = std::move(rows);
        std::cout << j.dump() << "\n";
        return kOk;
    }
    auto nm = [](const nlohmann::ordered_json& s) { return s.at("nmse").is_null() ? std::string("n/a") : num(s.at("nmse")); };
    std::cout << "benchmark: " << rep.at("benchmark").get<std::string>() << "\n";
    std::cout << "best program:\n  " << rep.at("best").at("program").get<std::string>() << "\n";
    std::cout << "nmse train " << nm(rep.at("scores").at("train")) << "  id " << nm(rep.at("scores").at("id_valid"))
              << "  ood " << nm(rep.at("scores").at("ood_valid")) << "\n";
    if (a.csv.empty()) std::cout << "\n" << curve.str();
    return kOk;
}

// -------------------------------------------------------- fetch-stress-data

struct FetchArgs {
    std::vector<std::string> inputs;
    fs::path out;
    std::string strain_col{"strain"};
    std::string stress_col{"stress"};
    bool strain_percent{false};
};

constexpr const char* kStressProvenance =
    "Aluminium 6061-T651 uniaxial tension tests at six temperatures (20-300 C), Mendeley Data,\n"
    "https://data.mendeley.com/datasets/rd6jm9tyb6/1, licensed CC BY 4.0. Download the per-temperature\n"
    "files from that page and pass each as --input TEMP=FILE.\n";

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',' || c == ';' || c == '\t') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r' && c != '"') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

int fetch_stress_data(const FetchArgs& a) {
    std::cerr << kStressProvenance;
    std::vector<double> inputs;
    std::vector<double> targets;
    for (const auto& spec : a.inputs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ConfigError("--input must look like TEMP=FILE, got '" + spec + "'");
        double temp = 0.0;
        try {
            std::size_t used = 0;
            temp = std::stod(spec.substr(0, eq), &used);
            if (used != eq) throw std::invalid_argument("trailing text");
        } catch (const std::exception&) {
            throw ConfigError("bad temperature in --input '" + spec + "'");
        }
        const fs::path file = spec.substr(eq + 1);
        std::ifstream in(file);
        if (!in) throw DataError("cannot open " + file.string());
        std::string line;
        std::size_t line_no = 0;
        int c_strain = -1;
        int c_stress = -1;
        while (c_strain < 0 && std::getline(in, line)) {
            ++line_no;
            const auto fields = split_fields(line);
            for (std::size_t i = 0; i < fields.size(); ++i) {
                const auto f = lower(fields[i]);
                if (c_strain < 0 && f.find(lower(a.strain_col)) != std::string::npos) c_strain = static_cast<int>(i);
                if (c_stress < 0 && f.find(lower(a.stress_col)) != std::string::npos) c_stress = static_cast<int>(i);
            }
            if ((c_strain < 0) != (c_stress < 0)) {
                throw DataError(file.string() + ":" + std::to_string(line_no) + ": header lacks a strain or stress column");
            }
        }
        if (c_strain < 0) throw DataError(file.string() + ": no header with strain and stress columns");
        std::size_t rows = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r,;") == std::string::npos) continue;
            const auto fields = split_fields(line);
            const auto need = static_cast<std::size_t>(std::max(c_strain, c_stress));
            if (fields.size() <= need) {
                throw DataError(file.string() + ":" + std::to_string(line_no) + ": too few fields");
            }
            double strain = 0.0;
            double stress = 0.0;
            try {
                strain = std::stod(fields[static_cast<std::size_t>(c_strain)]);
                stress = std::stod(fields[static_cast<std::size_t>(c_stress)]);
            } catch (const std::exception&) {
                throw DataError(file.string() + ":" + std::to_string(line_no) + ": not a number");
            }
            if (a.strain_percent) strain /= 100.0;
            inputs.push_back(strain);
            inputs.push_back(temp);
            targets.push_back(stress);
            ++rows;
        }
        std::cerr << file.string() << ": " << rows << " rows at " << num(temp) << " C\n";
    }
    const Dataset data({"strain", "T"}, std::move(inputs), std::move(targets), Split::Train, DatasetMeta{"stress", 0.0});
    try {
        write_stress_csv(data, a.out);
    } catch (const DataError&) {
        throw;
    } catch (const std::runtime_error& e) {
        throw WriteError(e.what());
    }
    std::cout << data.rows() << " rows written to " << a.out.string() << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Equation discovery with an evolutionary program search"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate-data", "Write train/id_valid/ood_valid splits for a benchmark");
    g->add_option("benchmark", gen.benchmark, "osc1, osc2, ecoli or stress")->required();
    g->add_option("-o,--out", gen.out, "Output directory")->required();
    g->add_option("--seed", gen.seed, "Split and noise seed");
    g->add_option("--noise", gen.noise, "Gaussian noise sigma added to train targets")->check(CLI::NonNegativeNumber);
    g->add_option("--n", gen.n, "Sample count (oscillators, ecoli)");
    g->add_option("--ood-before", gen.ood_before, "Oscillators: rows with t below this are out of domain");
    g->add_option("--source", gen.source, "stress: CSV with columns strain,temp_C,stress_MPa");
    g->add_flag("--json", gen.json, "Machine-readable output");

    RunArgs run_args;
    auto* r = app.add_subcommand("run", "Run the search");
    r->add_option("-c,--config", run_args.config, "YAML configuration file");
    r->add_option("--set", run_args.overrides, "Override a key, e.g. --set buffer.islands=4")->take_all();
    r->add_flag("--resume", run_args.resume, "Continue from checkpoint.json in run.out_dir");
    r->add_flag("--json", run_args.json, "Machine-readable output");

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Fit a program to a dataset and print its NMSE on every split");
    e->add_option("program", ev.program, "File holding the program")->required();
    e->add_option("data", ev.data, "Dataset directory")->required();
    e->add_option("--restarts", ev.restarts, "Fit restarts");
    e->add_option("--gtol", ev.gtol, "Gradient tolerance");
    e->add_option("--max-iterations", ev.max_iterations, "Optimizer iterations per restart");
    e->add_option("--seed", ev.seed, "Restart seed");
    e->add_flag("--json", ev.json, "Machine-readable output");

    ReportArgs rep;
    auto* p = app.add_subcommand("report", "Summarise a finished run");
    p->add_option("dir", rep.dir, "Run output directory")->required();
    p->add_option("--csv", rep.csv, "Write the best-score curve here instead of printing it");
    p->add_flag("--json", rep.json, "Machine-readable output");

    FetchArgs fetch;
    auto* f = app.add_subcommand("fetch-stress-data", "Convert the public stress-strain tables to the CSV schema");
    f->add_option("--input", fetch.inputs, "TEMP=FILE for each temperature")->required();
    f->add_option("-o,--out", fetch.out, "Output CSV")->required();
    f->add_option("--strain-col", fetch.strain_col, "Header text identifying the strain column");
    f->add_option("--stress-col", fetch.stress_col, "Header text identifying the stress column");
    f->add_flag("--strain-percent", fetch.strain_percent, "Strain is given in percent");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*g) return generate_data(gen);
        if (*r) return run(run_args);
        if (*e) return evaluate(ev);
        if (*p) return report(rep);
        if (*f) return fetch_stress_data(fetch);
    } catch (const ConfigError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kUsage;
    } catch (const DataError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kData;
    } catch (const SyntaxError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kData;
    } catch (const ValidationError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kData;
    } catch (const fs::filesystem_error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kFilesystem;
    } catch (const WriteError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kFilesystem;
    } catch (const RunError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kRunFailure;
    } catch (const GenerationError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kRunFailure;
    } catch (const std::exception& err) {
        std::cerr << "internal error: " << err.what() << "\n";
        return kInternal;
    }
    return kInternal;
}
