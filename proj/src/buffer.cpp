#include "eqsr/buffer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace eqsr {

namespace {

constexpr double kMinTemperature = 1e-6;

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.size());
    if (logits.empty()) {
        return p;
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - top);
        sum += p[i];
    }
    for (double& v : p) {
        v /= sum;
    }
    return p;
}

bool better(const Candidate& a, const Candidate& b) {
    return a.fitness > b.fitness || (a.fitness == b.fitness && a.order < b.order);
}

} // namespace

double signature(double fitness) {
    if (!std::isfinite(fitness)) {
        return fitness;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.5e", fitness);
    return std::strtod(buf, nullptr);
}

double cluster_temperature(std::size_t u, double t0, std::size_t period) {
    const double frac = static_cast<double>(u % period) / static_cast<double>(period);
    return std::max(t0 * (1.0 - frac), kMinTemperature);
}

std::vector<double> cluster_probabilities(std::span<const double> mean_scores, std::size_t u, double t0,
                                          std::size_t period) {
    const double tau = cluster_temperature(u, t0, period);
    std::vector<double> logits(mean_scores.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        logits[i] = mean_scores[i] / tau;
    }
    return softmax(logits);
}

std::vector<double> length_probabilities(std::span<const std::size_t> lengths, double tau_p) {
    std::vector<double> l(lengths.size());
    for (std::size_t i = 0; i < l.size(); ++i) {
        l[i] = -static_cast<double>(lengths[i]);
    }
    if (l.empty()) {
        return {};
    }
    const double lo = *std::min_element(l.begin(), l.end());
    const double hi = *std::max_element(l.begin(), l.end());
    std::vector<double> logits(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) {
        const double normalized = (l[i] - lo) / (hi + 1e-6);
        logits[i] = -normalized / tau_p;
    }
    return softmax(logits);
}

double Cluster::mean_score() const {
    double s = 0.0;
    for (const auto& m : members) {
        s += m.fitness;
    }
    return s / static_cast<double>(members.size());
}

const Candidate& Island::best_candidate() const {
    const Candidate* best_c = nullptr;
    for (const auto& [key, cluster] : clusters) {
        for (const auto& m : cluster.members) {
            if (best_c == nullptr || better(m, *best_c)) {
                best_c = &m;
            }
        }
    }
    if (best_c == nullptr) {
        throw std::logic_error("empty island");
    }
    return *best_c;
}

ExperienceBuffer ExperienceBuffer::init_population(const Candidate& seed, const BufferConfig& cfg,
                                                   std::uint64_t rng_seed) {
    if (cfg.mode == SamplingMode::TwoStage && (cfg.islands < 2 || cfg.islands % 2 != 0)) {
        throw ConfigError("buffer.islands must be even and at least 2, got " + std::to_string(cfg.islands));
    }
    if (cfg.islands < 1) {
        throw ConfigError("buffer.islands must be at least 1");
    }
    if (!(cfg.t0 > 0.0) || cfg.period == 0 || !(cfg.tau_p > 0.0)) {
        throw ConfigError("buffer hyperparameters must be positive");
    }
    if (seed.discarded || !std::isfinite(seed.fitness)) {
        throw ConfigError("seed program was discarded by evaluation; cannot initialise the buffer");
    }
    ExperienceBuffer b;
    b.cfg_ = cfg;
    b.rng_.seed(rng_seed);
    b.islands_.resize(static_cast<std::size_t>(cfg.islands));
    for (std::size_t i = 0; i < b.islands_.size(); ++i) {
        Candidate c = seed;
        c.source_island = static_cast<int>(i);
        b.insert(b.islands_[i], std::move(c));
        b.islands_[i].best = seed.fitness;
        ++b.registrations_;
    }
    return b;
}

void ExperienceBuffer::insert(Island& island, Candidate cand) {
    cand.order = next_order_++;
    const double key = signature(cand.fitness);
    auto& cluster = island.clusters[key];
    cluster.key = key;
    cluster.members.push_back(std::move(cand));
    ++island.programs;
}

bool ExperienceBuffer::register_candidate(Candidate cand, int island) {
    if (island < 0 || static_cast<std::size_t>(island) >= islands_.size()) {
        throw std::out_of_range("island index out of range");
    }
    auto& isl = islands_[static_cast<std::size_t>(island)];
    if (cand.discarded || !std::isfinite(cand.fitness) || !(cand.fitness > isl.best)) {
        return false;
    }
    isl.best = cand.fitness;
    insert(isl, std::move(cand));
    ++registrations_;
    return true;
}

Sample ExperienceBuffer::sample(int k) {
    Sample out;
    out.island = static_cast<int>(uniform_index(rng_, islands_.size()));
    const auto& isl = islands_[static_cast<std::size_t>(out.island)];

    if (cfg_.mode == SamplingMode::TopK) {
        std::vector<const Candidate*> all;
        for (const auto& [key, cluster] : isl.clusters) {
            for (const auto& m : cluster.members) {
                all.push_back(&m);
            }
        }
        std::sort(all.begin(), all.end(), [](const Candidate* a, const Candidate* b) { return better(*a, *b); });
        all.resize(std::min(all.size(), static_cast<std::size_t>(std::max(k, 0))));
        for (auto it = all.rbegin(); it != all.rend(); ++it) {
            out.demos.push_back(**it);
        }
        return out;
    }

    std::vector<const Cluster*> clusters;
    std::vector<double> means;
    for (const auto& [key, cluster] : isl.clusters) {
        clusters.push_back(&cluster);
        means.push_back(cluster.mean_score());
    }
    const auto cluster_p = cluster_probabilities(means, isl.programs, cfg_.t0, cfg_.period);
    for (int draw = 0; draw < k; ++draw) {
        const Cluster& c = *clusters[categorical(rng_, cluster_p)];
        std::vector<std::size_t> lengths;
        lengths.reserve(c.members.size());
        for (const auto& m : c.members) {
            lengths.push_back(m.length());
        }
        const auto member_p = length_probabilities(lengths, cfg_.tau_p);
        out.demos.push_back(c.members[categorical(rng_, member_p)]);
    }
    std::stable_sort(out.demos.begin(), out.demos.end(),
                     [](const Candidate& a, const Candidate& b) { return a.fitness < b.fitness; });
    return out;
}

std::vector<int> ExperienceBuffer::reset_islands() {
    const std::size_t m = islands_.size();
    const std::size_t drop = m / 2;
    if (drop == 0) {
        return {};
    }
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    // worst first; equal bests rank the lower index as worse
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return islands_[static_cast<std::size_t>(a)].best < islands_[static_cast<std::size_t>(b)].best;
    });
    std::vector<int> reset(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(drop));
    std::vector<int> survivors(order.begin() + static_cast<std::ptrdiff_t>(drop), order.end());
    std::sort(reset.begin(), reset.end());
    std::sort(survivors.begin(), survivors.end());
    for (int idx : reset) {
        const int donor = survivors[uniform_index(rng_, survivors.size())];
        Candidate copy = islands_[static_cast<std::size_t>(donor)].best_candidate();
        Island fresh;
        const double key = signature(copy.fitness);
        fresh.best = copy.fitness;
        fresh.programs = 1;
        auto& cluster = fresh.clusters[key];
        cluster.key = key;
        cluster.members.push_back(std::move(copy));
        islands_[static_cast<std::size_t>(idx)] = std::move(fresh);
    }
    return reset;
}

void ExperienceBuffer::validate() const {
    for (std::size_t i = 0; i < islands_.size(); ++i) {
        const auto& isl = islands_[i];
        std::size_t count = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& [key, cluster] : isl.clusters) {
            if (cluster.members.empty()) {
                throw std::logic_error("island " + std::to_string(i) + ": empty cluster");
            }
            if (cluster.key != key) {
                throw std::logic_error("island " + std::to_string(i) + ": cluster key mismatch");
            }
            for (std::size_t j = 0; j < cluster.members.size(); ++j) {
                const auto& m = cluster.members[j];
                if (signature(m.fitness) != key) {
                    throw std::logic_error("island " + std::to_string(i) + ": member signature differs from key");
                }
                if (j > 0 && cluster.members[j - 1].order > m.order) {
                    throw std::logic_error("island " + std::to_string(i) + ": cluster not in insertion order");
                }
                best = std::max(best, m.fitness);
                ++count;
            }
        }
        if (count == 0) {
            throw std::logic_error("island " + std::to_string(i) + " is empty");
        }
        if (count != isl.programs) {
            throw std::logic_error("island " + std::to_string(i) + ": program counter out of sync");
        }
        if (best != isl.best) {
            throw std::logic_error("island " + std::to_string(i) + ": best score out of sync");
        }
    }
}

nlohmann::ordered_json candidate_to_json(const Candidate& c) {
    nlohmann::ordered_json j;
    j["program"] = c.text;
    j["params"] = c.params;
    j["fitness"] = c.fitness;
    j["train_nmse"] = c.train_nmse ? nlohmann::ordered_json(*c.train_nmse) : nlohmann::ordered_json(nullptr);
    j["iteration"] = c.iteration;
    j["source_island"] = c.source_island;
    j["generator"] = c.generator;
    j["order"] = c.order;
    return j;
}

Candidate candidate_from_json(const nlohmann::json& j, const std::vector<std::string>& inputs) {
    Candidate c;
    c.text = j.at("program").get<std::string>();
    c.program = parse(c.text, inputs);
    c.params = j.at("params").get<std::vector<double>>();
    c.fitness = j.at("fitness").get<double>();
    if (!j.at("train_nmse").is_null()) {
        c.train_nmse = j.at("train_nmse").get<double>();
    }
    c.iteration = j.at("iteration").get<int>();
    c.source_island = j.at("source_island").get<int>();
    c.generator = j.at("generator").get<std::string>();
    c.order = j.at("order").get<std::uint64_t>();
    return c;
}

nlohmann::ordered_json ExperienceBuffer::snapshot() const {
    nlohmann::ordered_json j;
    j["config"] = {{"islands", cfg_.islands},
                   {"t0", cfg_.t0},
                   {"period", cfg_.period},
                   {"tau_p", cfg_.tau_p},
                   {"mode", cfg_.mode == SamplingMode::TwoStage ? "two_stage" : "top_k"}};
    j["rng"] = rng_state(rng_);
    j["next_order"] = next_order_;
    j["registrations"] = registrations_;
    auto& isl_json = j["islands"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < islands_.size(); ++i) {
        const auto& isl = islands_[i];
        nlohmann::ordered_json ij;
        ij["index"] = i;
        ij["best"] = isl.best;
        ij["programs"] = isl.programs;
        auto& cl = ij["clusters"] = nlohmann::ordered_json::array();
        for (const auto& [key, cluster] : isl.clusters) {
            nlohmann::ordered_json cj;
            cj["key"] = key;
            auto& mj = cj["members"] = nlohmann::ordered_json::array();
            for (const auto& m : cluster.members) {
                mj.push_back(candidate_to_json(m));
            }
            cl.push_back(std::move(cj));
        }
        isl_json.push_back(std::move(ij));
    }
    return j;
}

ExperienceBuffer ExperienceBuffer::restore(const nlohmann::json& snap, const std::vector<std::string>& inputs) {
    ExperienceBuffer b;
    const auto& cfg = snap.at("config");
    b.cfg_.islands = cfg.at("islands").get<int>();
    b.cfg_.t0 = cfg.at("t0").get<double>();
    b.cfg_.period = cfg.at("period").get<std::size_t>();
    b.cfg_.tau_p = cfg.at("tau_p").get<double>();
    b.cfg_.mode = cfg.at("mode").get<std::string>() == "top_k" ? SamplingMode::TopK : SamplingMode::TwoStage;
    restore_rng(b.rng_, snap.at("rng").get<std::string>());
    b.next_order_ = snap.at("next_order").get<std::uint64_t>();
    b.registrations_ = snap.at("registrations").get<std::uint64_t>();
    for (const auto& ij : snap.at("islands")) {
        Island isl;
        isl.best = ij.at("best").get<double>();
        isl.programs = ij.at("programs").get<std::size_t>();
        for (const auto& cj : ij.at("clusters")) {
            Cluster c;
            c.key = cj.at("key").get<double>();
            for (const auto& mj : cj.at("members")) {
                c.members.push_back(candidate_from_json(mj, inputs));
            }
            isl.clusters.emplace(c.key, std::move(c));
        }
        b.islands_.push_back(std::move(isl));
    }
    if (b.islands_.size() != static_cast<std::size_t>(b.cfg_.islands)) {
        throw std::runtime_error("buffer snapshot: island count mismatch");
    }
    b.validate();
    return b;
}

} // namespace eqsr
