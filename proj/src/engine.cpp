#include "eqsr/engine.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "eqsr/errors.hpp"
#include "eqsr/optimize.hpp"
#include "eqsr/rng.hpp"

namespace eqsr {

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json score_json(const Score& s) {
    nlohmann::ordered_json j;
    j["discarded"] = s.discarded;
    j["mse"] = s.discarded ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(-s.fitness);
    j["nmse"] = s.discarded ? nlohmann::ordered_json(nullptr) : optional_number(s.nmse);
    return j;
}

nlohmann::ordered_json counters_json(const RunCounters& c) {
    return {{"iterations", c.iterations},
            {"responses", c.responses},
            {"parsed", c.parsed},
            {"discarded", c.discarded},
            {"invalid", c.invalid},
            {"fit_calls", c.fit_calls},
            {"budget_exhausted", c.budget_exhausted},
            {"accepted", c.accepted},
            {"generator_failures", c.generator_failures},
            {"resets", c.resets}};
}

RunCounters counters_from_json(const nlohmann::json& j) {
    RunCounters c;
    c.iterations = j.at("iterations").get<std::uint64_t>();
    c.responses = j.at("responses").get<std::uint64_t>();
    c.parsed = j.at("parsed").get<std::uint64_t>();
    c.discarded = j.at("discarded").get<std::uint64_t>();
    c.invalid = j.at("invalid").get<std::uint64_t>();
    c.fit_calls = j.at("fit_calls").get<std::uint64_t>();
    c.budget_exhausted = j.at("budget_exhausted").get<std::uint64_t>();
    c.accepted = j.at("accepted").get<std::uint64_t>();
    c.generator_failures = j.at("generator_failures").get<std::uint64_t>();
    c.resets = j.at("resets").get<std::uint64_t>();
    return c;
}

TrajectoryRecord record_from_json(const nlohmann::json& j) {
    TrajectoryRecord r;
    r.iteration = j.at("iteration").get<int>();
    r.island = j.at("island").get<int>();
    r.responses = j.at("responses").get<int>();
    r.parsed = j.at("parsed").get<int>();
    r.discarded = j.at("discarded").get<int>();
    r.generator_failures = j.at("generator_failures").get<int>();
    r.best_fitness = j.at("best_fitness").get<double>();
    if (!j.at("best_train_nmse").is_null()) r.best_train_nmse = j.at("best_train_nmse").get<double>();
    r.best_program = j.at("best_program").get<std::string>();
    r.reset = j.at("reset").get<bool>();
    for (const auto& cj : j.at("candidates")) {
        CandidateRecord c;
        const auto status = cj.at("status").get<std::string>();
        for (auto s : {CandidateStatus::Accepted, CandidateStatus::Rejected, CandidateStatus::Unparsed,
                       CandidateStatus::Invalid}) {
            if (to_string(s) == status) c.status = s;
        }
        c.program = cj.at("program").get<std::string>();
        c.reason = cj.at("reason").get<std::string>();
        if (!cj.at("fitness").is_null()) c.fitness = cj.at("fitness").get<double>();
        if (!cj.at("train_nmse").is_null()) c.train_nmse = cj.at("train_nmse").get<double>();
        c.params = cj.at("params").get<std::vector<double>>();
        c.fit_status = cj.at("fit_status").get<std::string>();
        r.candidates.push_back(std::move(c));
    }
    return r;
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw RunError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw RunError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw RunError("cannot replace " + path.string() + ": " + ec.message());
}

/// Keys that may differ between a run and its resumption.
bool resumable_key(const std::string& key) {
    return key == "run.iterations" || key == "run.out_dir" || key == "run.data_dir" || key == "run.log_every" ||
           key == "run.checkpoint_period";
}

struct Evaluation {
    std::optional<Candidate> candidate;
    CandidateRecord record;
    bool fit_called{false};
    bool budget_exhausted{false};
};

Evaluation evaluate_parsed(const SkeletonProgram& program, const Dataset& train, FitConfig fit_cfg, bool skip_fit,
                           bool discard_on_budget) {
    Evaluation ev;
    ev.record.program = render(program);
    std::vector<double> params;
    if (!skip_fit) {
        ev.fit_called = true;
        const auto fr = fit(program, train, fit_cfg);
        ev.record.fit_status = std::string(to_string(fr.status));
        if (fr.status == FitStatus::InvalidProgram) {
            ev.record.status = CandidateStatus::Invalid;
            ev.record.reason = "evaluation: no finite fit";
            return ev;
        }
        if (fr.status == FitStatus::BudgetExhausted) {
            ev.budget_exhausted = true;
            if (discard_on_budget) {
                ev.record.status = CandidateStatus::Invalid;
                ev.record.reason = "evaluation: fit budget exhausted";
                return ev;
            }
        }
        params = fr.params;
    }
    const Score s = fitness(program, params, train);
    if (s.discarded) {
        ev.record.status = CandidateStatus::Invalid;
        ev.record.reason = "evaluation: non-finite prediction";
        return ev;
    }
    Candidate c;
    c.program = program;
    c.text = ev.record.program;
    c.params = params;
    c.fitness = s.fitness;
    c.train_nmse = s.nmse;
    ev.record.fitness = s.fitness;
    ev.record.train_nmse = s.nmse;
    ev.record.params = params;
    ev.candidate = std::move(c);
    return ev;
}

std::string literal_seed_text(const std::vector<std::string>& inputs) {
    std::string s = "return ";
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        s += (i ? " + 1 * " : "1 * ") + inputs[i];
    }
    return s;
}

} // namespace

std::string_view to_string(CandidateStatus s) noexcept {
    switch (s) {
    case CandidateStatus::Accepted: return "accepted";
    case CandidateStatus::Rejected: return "rejected";
    case CandidateStatus::Unparsed: return "unparsed";
    case CandidateStatus::Invalid: return "invalid";
    }
    return "unknown";
}

nlohmann::ordered_json to_json(const TrajectoryRecord& r) {
    nlohmann::ordered_json j;
    j["iteration"] = r.iteration;
    j["island"] = r.island;
    auto cands = nlohmann::ordered_json::array();
    for (const auto& c : r.candidates) {
        cands.push_back({{"status", std::string(to_string(c.status))},
                         {"program", c.program},
                         {"reason", c.reason},
                         {"fitness", optional_number(c.fitness)},
                         {"train_nmse", optional_number(c.train_nmse)},
                         {"params", c.params},
                         {"fit_status", c.fit_status}});
    }
    j["candidates"] = std::move(cands);
    j["responses"] = r.responses;
    j["parsed"] = r.parsed;
    j["discarded"] = r.discarded;
    j["generator_failures"] = r.generator_failures;
    j["best_fitness"] = r.best_fitness;
    j["best_train_nmse"] = optional_number(r.best_train_nmse);
    j["best_program"] = r.best_program;
    j["reset"] = r.reset;
    return j;
}

struct Engine::State {
    RunConfig cfg;
    SplitSet data;
    ProblemSpec spec;
    std::unique_ptr<Generator> generator;
    std::optional<ExperienceBuffer> buffer;
    Candidate seed;
    Candidate best;
    RunCounters counters;
    std::vector<TrajectoryRecord> trajectory;
    std::ofstream trajectory_out;
    std::ofstream timing_out;
    std::chrono::steady_clock::time_point started;
};

Engine::Engine(RunConfig cfg, SplitSet data, std::unique_ptr<Generator> generator) : st_(std::make_unique<State>()) {
    cfg.validate();
    st_->cfg = std::move(cfg);
    st_->data = std::move(data);
    st_->spec = builtin_problem(st_->cfg.benchmark);
    const auto names = st_->spec.input_names();
    if (st_->data.train.input_names() != names || st_->data.id_valid.input_names() != names ||
        st_->data.ood_valid.input_names() != names) {
        throw ConfigError("dataset columns do not match the inputs of benchmark '" + st_->cfg.benchmark + "'");
    }
    if (generator) {
        st_->generator = std::move(generator);
    } else {
        auto gcfg = st_->cfg.generator;
        gcfg.mock.seed = derive_seed(st_->cfg.seed, "mock");
        st_->generator = make_generator(gcfg, names);
    }
}

Engine::~Engine() = default;

RunResult Engine::run() {
    auto& st = *st_;
    const auto& cfg = st.cfg;
    const auto names = st.spec.input_names();
    const auto popts = cfg.parse_options();

    const std::string seed_text = cfg.ablation.no_skeleton_optimizer ? literal_seed_text(names) : st.spec.seed_text;
    const auto seed_program = parse(seed_text, names, popts);
    FitConfig fc = cfg.fit;
    fc.seed = derive_seed(cfg.seed, "fit-seed");
    auto ev = evaluate_parsed(seed_program, st.data.train, fc, cfg.ablation.no_skeleton_optimizer, false);
    st.counters.fit_calls += ev.fit_called ? 1 : 0;
    if (!ev.candidate) {
        throw ConfigError("seed program cannot be evaluated on the training data (" + ev.record.reason + ")");
    }
    st.seed = std::move(*ev.candidate);
    st.seed.generator = "seed";
    st.buffer = ExperienceBuffer::init_population(st.seed, cfg.effective_buffer(), derive_seed(cfg.seed, "buffer"));
    st.best = st.buffer->islands().front().best_candidate();
    st.trajectory.clear();

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        st.trajectory_out.open(cfg.out_dir / "trajectory.jsonl", std::ios::binary | std::ios::trunc);
        st.timing_out.open(cfg.out_dir / "timing.csv", std::ios::binary | std::ios::trunc);
        if (!st.trajectory_out || !st.timing_out) {
            throw RunError("cannot write to output directory " + cfg.out_dir.string());
        }
        st.timing_out << "iteration,wall_seconds\n";
    }
    return loop(0);
}

RunResult Engine::resume(const std::filesystem::path& checkpoint) {
    auto& st = *st_;
    const auto& cfg = st.cfg;
    const auto names = st.spec.input_names();
    std::ifstream in(checkpoint, std::ios::binary);
    if (!in) {
        throw RunError("checkpoint not found: " + checkpoint.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const std::exception& e) {
        throw RunError("corrupt checkpoint " + checkpoint.string() + ": " + e.what());
    }
    int next = 0;
    try {
        if (j.at("version").get<int>() != kCheckpointVersion) {
            throw RunError("checkpoint version " + std::to_string(j.at("version").get<int>()) + " is not supported");
        }
        const auto current = config_values(cfg);
        for (const auto& [key, value] : j.at("config").items()) {
            const auto it = current.find(key);
            if (!resumable_key(key) && (it == current.end() || it->second != value.get<std::string>())) {
                throw RunError("checkpoint was written with a different value of " + key);
            }
        }
        next = j.at("next_iteration").get<int>();
        st.buffer = ExperienceBuffer::restore(j.at("buffer"), names);
        st.seed = candidate_from_json(j.at("seed"), names);
        st.best = candidate_from_json(j.at("best"), names);
        st.counters = counters_from_json(j.at("counters"));
    } catch (const RunError&) {
        throw;
    } catch (const std::exception& e) {
        throw RunError("corrupt checkpoint " + checkpoint.string() + ": " + e.what());
    }

    st.trajectory.clear();
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        const auto tpath = cfg.out_dir / "trajectory.jsonl";
        std::vector<std::string> lines;
        {
            std::ifstream tin(tpath, std::ios::binary);
            std::string line;
            while (static_cast<int>(lines.size()) < next && std::getline(tin, line)) {
                lines.push_back(line);
            }
        }
        if (static_cast<int>(lines.size()) != next) {
            throw RunError("trajectory.jsonl has fewer records than the checkpoint");
        }
        std::string kept;
        for (const auto& l : lines) {
            st.trajectory.push_back(record_from_json(nlohmann::json::parse(l)));
            kept += l + "\n";
        }
        write_atomically(tpath, kept);

        // timing rows past the checkpoint are dropped; a missing file restarts with a header
        const auto wpath = cfg.out_dir / "timing.csv";
        std::string timing = "iteration,wall_seconds\n";
        {
            std::ifstream win(wpath, std::ios::binary);
            std::string line;
            if (std::getline(win, line)) {
                while (std::getline(win, line)) {
                    const auto comma = line.find(',');
                    if (comma == std::string::npos) continue;
                    try {
                        if (std::stoi(line.substr(0, comma)) < next) timing += line + "\n";
                    } catch (const std::exception&) {
                    }
                }
            }
        }
        write_atomically(wpath, timing);
        st.trajectory_out.open(tpath, std::ios::binary | std::ios::app);
        st.timing_out.open(wpath, std::ios::binary | std::ios::app);
        if (!st.trajectory_out || !st.timing_out) {
            throw RunError("cannot write to output directory " + cfg.out_dir.string());
        }
    }
    return loop(next);
}

RunResult Engine::loop(int start) {
    auto& st = *st_;
    const auto& cfg = st.cfg;
    const auto names = st.spec.input_names();
    const auto popts = cfg.parse_options();
    const auto prompt_opts = cfg.prompt_options();
    const int checkpoint_period = cfg.checkpoint_period > 0 ? cfg.checkpoint_period : cfg.reset_period;
    st.started = std::chrono::steady_clock::now();

    auto write_checkpoint = [&](int next_iteration) {
        if (cfg.out_dir.empty()) return;
        nlohmann::ordered_json j;
        j["version"] = kCheckpointVersion;
        j["config"] = config_values(cfg);
        j["next_iteration"] = next_iteration;
        j["buffer"] = st.buffer->snapshot();
        j["seed"] = candidate_to_json(st.seed);
        j["best"] = candidate_to_json(st.best);
        j["counters"] = counters_json(st.counters);
        write_atomically(cfg.out_dir / "checkpoint.json", j.dump());
    };

    for (int it = start; it < cfg.iterations; ++it) {
        TrajectoryRecord rec;
        rec.iteration = it;
        std::vector<Candidate> demos;
        if (cfg.ablation.no_refinement) {
            demos.push_back(st.seed);
        } else {
            auto sample = st.buffer->sample(cfg.demos);
            demos = std::move(sample.demos);
            rec.island = sample.island;
        }

        GenerationRequest req;
        req.prompt = build_prompt(st.spec, demos, prompt_opts);
        req.demos = demos;
        req.iteration = it;
        req.samples = cfg.generator.samples;
        req.parse = popts;
        const auto gen = st.generator->generate(req);
        rec.generator_failures = gen.failures;
        rec.responses = static_cast<int>(gen.responses.size());

        std::vector<std::optional<SkeletonProgram>> programs;
        rec.candidates.resize(gen.responses.size());
        for (std::size_t j = 0; j < gen.responses.size(); ++j) {
            auto parsed = parse_response(gen.responses[j], names, popts);
            if (!parsed.program) {
                rec.candidates[j].status = CandidateStatus::Unparsed;
                rec.candidates[j].reason = parsed.reason;
                ++rec.discarded;
            } else {
                ++rec.parsed;
            }
            programs.push_back(std::move(parsed.program));
        }

        std::vector<Evaluation> evals(programs.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t j = next++; j < programs.size(); j = next++) {
                if (!programs[j]) continue;
                FitConfig fc = cfg.fit;
                fc.seed = derive_seed(cfg.seed, "fit", static_cast<std::uint64_t>(it) * 1024 + j);
                try {
                    evals[j] = evaluate_parsed(*programs[j], st.data.train, fc, cfg.ablation.no_skeleton_optimizer,
                                               cfg.discard_on_budget);
                } catch (const std::exception& e) {
                    evals[j].record.program = render(*programs[j]);
                    evals[j].record.status = CandidateStatus::Invalid;
                    evals[j].record.reason = std::string("evaluation: ") + e.what();
                }
            }
        };
        const std::size_t parsed_count = static_cast<std::size_t>(rec.parsed);
        const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.evaluators), parsed_count);
        if (threads <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }

        // registration in sample order
        for (std::size_t j = 0; j < programs.size(); ++j) {
            if (!programs[j]) continue;
            auto& ev = evals[j];
            st.counters.fit_calls += ev.fit_called ? 1 : 0;
            st.counters.budget_exhausted += ev.budget_exhausted ? 1 : 0;
            if (!ev.candidate) {
                ++st.counters.invalid;
                rec.candidates[j] = ev.record;
                continue;
            }
            Candidate c = std::move(*ev.candidate);
            c.iteration = it;
            c.source_island = rec.island;
            c.generator = st.generator->id();
            bool accepted = false;
            if (!cfg.ablation.no_refinement) {
                accepted = st.buffer->register_candidate(c, rec.island);
            }
            ev.record.status = accepted ? CandidateStatus::Accepted : CandidateStatus::Rejected;
            st.counters.accepted += accepted ? 1 : 0;
            if (c.fitness > st.best.fitness) {
                st.best = c;
            }
            rec.candidates[j] = ev.record;
        }

        st.counters.responses += static_cast<std::uint64_t>(rec.responses);
        st.counters.parsed += static_cast<std::uint64_t>(rec.parsed);
        st.counters.discarded += static_cast<std::uint64_t>(rec.discarded);
        st.counters.generator_failures += static_cast<std::uint64_t>(rec.generator_failures);
        st.counters.iterations = static_cast<std::uint64_t>(it) + 1;

        if ((it + 1) % cfg.reset_period == 0 && !cfg.ablation.no_refinement) {
            (void)st.buffer->reset_islands();
            rec.reset = true;
            ++st.counters.resets;
        }
        rec.best_fitness = st.best.fitness;
        rec.best_train_nmse = st.best.train_nmse;
        rec.best_program = st.best.text;

        if (st.trajectory_out.is_open()) {
            st.trajectory_out << to_json(rec).dump() << '\n';
            st.trajectory_out.flush();
            const double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - st.started).count();
            st.timing_out << it << ',' << wall << '\n';
            st.timing_out.flush();
            if (!st.trajectory_out || !st.timing_out) {
                throw RunError("write failed in " + cfg.out_dir.string());
            }
        }
        if (cfg.log_every > 0 && (it + 1) % cfg.log_every == 0) {
            std::cerr << "iteration " << (it + 1) << "/" << cfg.iterations << "  best fitness " << st.best.fitness
                      << "  train nmse " << (st.best.train_nmse ? std::to_string(*st.best.train_nmse) : "n/a")
                      << "\n";
        }
        if (on_iteration) on_iteration(rec);
        st.trajectory.push_back(std::move(rec));
        if ((it + 1) % checkpoint_period == 0 && it + 1 < cfg.iterations) {
            write_checkpoint(it + 1);
        }
    }
    write_checkpoint(cfg.iterations);

    RunResult r;
    r.best = st.best;
    r.scores.train = fitness(st.best.program, st.best.params, st.data.train);
    r.scores.id_valid = fitness(st.best.program, st.best.params, st.data.id_valid);
    r.scores.ood_valid = fitness(st.best.program, st.best.params, st.data.ood_valid);
    r.counters = st.counters;
    r.trajectory = st.trajectory;
    r.registrations = st.buffer->registrations();
    r.buffer_snapshot = st.buffer->snapshot();

    if (!cfg.out_dir.empty()) {
        write_atomically(cfg.out_dir / "report.json", report_json(r, cfg).dump(2) + "\n");
        std::ostringstream curve;
        curve << "iteration,best_fitness,best_nmse\n";
        for (const auto& t : r.trajectory) {
            curve << t.iteration << ',' << nlohmann::json(t.best_fitness).dump() << ','
                  << (t.best_train_nmse ? nlohmann::json(*t.best_train_nmse).dump() : "") << '\n';
        }
        write_atomically(cfg.out_dir / "best_curve.csv", curve.str());
    }
    return r;
}

RunResult run_from_config(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.data_dir.empty()) {
        throw ConfigError("run.data_dir is not set");
    }
    Engine engine(cfg, read_split_dir(cfg.data_dir));
    return engine.run();
}

std::pair<Candidate, SplitScores> evaluate_program(const SkeletonProgram& program, const SplitSet& data,
                                                   const FitConfig& fit_cfg) {
    Candidate c;
    c.program = program;
    c.text = render(program);
    const auto fr = fit(program, data.train, fit_cfg);
    if (fr.status == FitStatus::InvalidProgram) {
        SplitScores s{Score::discard(Split::Train), Score::discard(Split::IdValid), Score::discard(Split::OodValid)};
        c.discarded = true;
        return {c, s};
    }
    c.params = fr.params;
    SplitScores s{fitness(program, c.params, data.train), fitness(program, c.params, data.id_valid),
                  fitness(program, c.params, data.ood_valid)};
    c.fitness = s.train.fitness;
    c.train_nmse = s.train.nmse;
    c.discarded = s.train.discarded;
    return {c, s};
}

nlohmann::ordered_json report_json(const RunResult& r, const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["benchmark"] = cfg.benchmark;
    j["seed"] = cfg.seed;
    j["iterations"] = cfg.iterations;
    j["ablation"] = {{"no_prior", cfg.ablation.no_prior},
                     {"no_program", cfg.ablation.no_program},
                     {"no_refinement", cfg.ablation.no_refinement},
                     {"no_skeleton_optimizer", cfg.ablation.no_skeleton_optimizer},
                     {"single_island", cfg.ablation.single_island}};
    j["best"] = {{"program", r.best.text},
                 {"params", r.best.params},
                 {"fitness", r.best.fitness},
                 {"iteration", r.best.iteration},
                 {"generator", r.best.generator}};
    j["scores"] = {{"train", score_json(r.scores.train)},
                   {"id_valid", score_json(r.scores.id_valid)},
                   {"ood_valid", score_json(r.scores.ood_valid)}};
    j["counters"] = counters_json(r.counters);
    j["registrations"] = r.registrations;
    return j;
}

} // namespace eqsr
