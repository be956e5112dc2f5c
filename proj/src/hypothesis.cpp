#include "eqsr/hypothesis.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

#include "eqsr/errors.hpp"

namespace eqsr {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string score_text(double fitness) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", fitness);
    return buf;
}

bool is_assignment(const std::string& line) {
    std::size_t i = 0;
    if (i >= line.size() || !(std::isalpha(static_cast<unsigned char>(line[i])) || line[i] == '_')) {
        return false;
    }
    while (i < line.size() && (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '_')) {
        ++i;
    }
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
        ++i;
    }
    return i + 1 <= line.size() && line[i] == '=' && (i + 1 == line.size() || line[i + 1] != '=');
}

bool starts_with_return(const std::string& line) {
    return line.rfind("return", 0) == 0 &&
           (line.size() == 6 || !(std::isalnum(static_cast<unsigned char>(line[6])) || line[6] == '_'));
}

std::string render_prompt(const ProblemSpec& spec, std::span<const Candidate> demos, const PromptOptions& opts) {
    std::ostringstream p;
    const auto names = spec.input_names();
    std::string name_list;
    for (std::size_t i = 0; i < names.size(); ++i) {
        name_list += (i ? ", " : "") + names[i];
    }

    p << "You are helping to discover a mathematical equation from data.\n\n";
    p << "## Problem\n";
    if (opts.no_prior) {
        p << "Find a function of the inputs " << name_list << " that predicts the target y.\n";
        p << "Inputs: " << name_list << "\n";
    } else {
        p << spec.title << "\n" << spec.description << "\n";
        p << "Inputs:\n";
        for (const auto& v : spec.inputs) {
            p << "- " << v.name << ": " << v.meaning << "\n";
        }
        p << "Target: " << spec.target.meaning << "\n";
    }

    p << "\n## Equation language\n";
    if (opts.no_program) {
        p << "A candidate is a single line `return <expression>` with no helper lines.\n";
    } else {
        p << "A candidate is zero or more helper lines `name = <expression>` followed by `return <expression>`.\n";
    }
    p << "Operators: + - * / ** and unary minus. Functions: sin cos tan tanh exp log sqrt abs sigmoid, "
         "min(a, b), max(a, b).\n";
    p << "Inputs: " << name_list << ".\n";
    if (opts.literal_constants) {
        p << "Write every constant as a plain number. No parameters are fitted.\n";
    } else {
        p << "Write every constant as a parameter params[0], params[1], ... numbered from 0 without gaps, "
             "at most "
          << kMaxParams << " parameters. Do not write numeric constants.\n";
    }

    p << "\n## Scoring\n";
    if (opts.literal_constants) {
        p << "A candidate is evaluated as written on the training data. Its score is the negative mean squared "
             "error (higher is better, 0 is perfect).\n";
    } else {
        p << "The parameters of a candidate are fitted to the training data by minimising the mean squared error. "
             "Its score is the negative mean squared error after fitting (higher is better, 0 is perfect).\n";
    }

    p << "\n## Previous versions (worst first)\n";
    for (std::size_t i = 0; i < demos.size(); ++i) {
        p << "\nequation_v" << i << " (score " << score_text(demos[i].fitness) << "):\n```\n"
          << demos[i].text << "\n```\n";
    }
    const std::size_t k = demos.size();
    p << "\n## Task\nWrite equation_v" << k << ", an improved version of equation_v" << (k ? k - 1 : 0)
      << ". Reply with the program only, inside one fenced code block.\n";
    return p.str();
}

} // namespace

std::vector<std::string> ProblemSpec::input_names() const {
    std::vector<std::string> out;
    for (const auto& v : inputs) {
        out.push_back(v.name);
    }
    return out;
}

void ProblemSpec::validate() const {
    if (inputs.empty()) {
        throw ConfigError("problem '" + benchmark + "' has no inputs");
    }
    try {
        (void)parse(seed_text, input_names());
    } catch (const std::exception& e) {
        throw ConfigError("seed program of '" + benchmark + "' is invalid: " + e.what());
    }
}

ProblemSpec builtin_problem(const std::string& benchmark) {
    ProblemSpec s;
    s.benchmark = benchmark;
    if (benchmark == "osc1") {
        s.title = "Nonlinear damped oscillator";
        s.description =
            "A unit mass moves along a line under a nonlinear restoring force, nonlinear damping and a "
            "position-dependent driving force. Find the acceleration of the mass as a function of its position "
            "and velocity.";
        s.inputs = {{"x", "position (m)"}, {"v", "velocity (m/s)"}};
        s.target = {"a", "acceleration dv/dt (m/s^2)"};
    } else if (benchmark == "osc2") {
        s.title = "Forced nonlinear damped oscillator";
        s.description =
            "A unit mass moves along a line under a nonlinear restoring force, nonlinear damping and a periodic "
            "external forcing. Find the acceleration of the mass as a function of time, position and velocity.";
        s.inputs = {{"t", "time (s)"}, {"x", "position (m)"}, {"v", "velocity (m/s)"}};
        s.target = {"a", "acceleration dv/dt (m/s^2)"};
    } else if (benchmark == "ecoli") {
        s.title = "E. coli population growth";
        s.description =
            "Growth rate of an E. coli population in a batch culture. The rate depends on the current population "
            "density, the concentration of the limiting nutrient, the temperature and the acidity of the medium.";
        s.inputs = {{"B", "population density"},
                    {"S", "substrate concentration"},
                    {"T", "temperature (degrees C)"},
                    {"pH", "pH of the medium"}};
        s.target = {"dB_dt", "population growth rate dB/dt"};
    } else if (benchmark == "stress") {
        s.title = "Stress-strain behaviour of an aluminium alloy";
        s.description =
            "Tensile stress in an aluminium 6061-T651 specimen under uniaxial tension, as a function of the "
            "applied strain and the test temperature.";
        s.inputs = {{"strain", "engineering strain (dimensionless)"}, {"T", "temperature (degrees C)"}};
        s.target = {"stress", "stress (MPa)"};
    } else {
        throw ConfigError("unknown benchmark '" + benchmark + "'");
    }
    s.seed_text = linear_seed_text(s.input_names());
    return s;
}

std::string build_prompt(const ProblemSpec& spec, std::span<const Candidate> demos, const PromptOptions& opts) {
    std::vector<Candidate> kept(demos.begin(), demos.end());
    std::string text = render_prompt(spec, kept, opts);
    while (text.size() > opts.max_chars && kept.size() > 1) {
        const auto oldest = std::min_element(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
            return a.order < b.order;
        });
        kept.erase(oldest);
        text = render_prompt(spec, kept, opts);
    }
    return text;
}

std::string extract_program_text(std::string_view raw) {
    const auto fence = raw.find("```");
    if (fence != std::string_view::npos) {
        // skip the info string (e.g. ```python)
        auto body = raw.find('\n', fence);
        if (body != std::string_view::npos) {
            ++body;
            const auto close = raw.find("```", body);
            return std::string(raw.substr(body, close == std::string_view::npos ? raw.size() - body : close - body));
        }
    }
    std::vector<std::string> lines;
    std::istringstream is{std::string(raw)};
    std::string line;
    while (std::getline(is, line)) {
        lines.push_back(trim(line));
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!starts_with_return(lines[i])) {
            continue;
        }
        std::size_t first = i;
        while (first > 0 && is_assignment(lines[first - 1])) {
            --first;
        }
        std::string out;
        for (std::size_t j = first; j <= i; ++j) {
            out += lines[j] + "\n";
        }
        return out;
    }
    return {};
}

ParseOutcome parse_response(std::string_view raw, const std::vector<std::string>& inputs, const ParseOptions& opts) {
    ParseOutcome out;
    const auto text = extract_program_text(raw);
    if (trim(text).empty()) {
        out.reason = "no program found";
        return out;
    }
    try {
        out.program = parse(text, inputs, opts);
    } catch (const SyntaxError& e) {
        out.reason = std::string("syntax: ") + e.what();
    } catch (const ValidationError& e) {
        out.reason = "validation: " + std::string(to_string(e.kind()));
    }
    return out;
}

void GeneratorConfig::validate() const {
    if (samples < 1) {
        throw ConfigError("generator.samples must be at least 1");
    }
    if (kind == GeneratorKind::Remote) {
        if (remote.base_url.empty() || remote.model.empty()) {
            throw ConfigError("remote generator needs base_url and model");
        }
        if (!(remote.temperature > 0.0)) {
            throw ConfigError("generator temperature must be positive");
        }
        if (remote.max_tokens < 1 || remote.max_retries < 0 || remote.max_in_flight < 1 ||
            !(remote.timeout_s > 0.0) || remote.backoff_s < 0.0) {
            throw ConfigError("invalid remote generator limits");
        }
    } else {
        const double w[] = {mock.w_replace, mock.w_add, mock.w_crossover, mock.w_hoist};
        double sum = 0.0;
        for (double x : w) {
            if (!(x >= 0.0)) {
                throw ConfigError("mock mutation weights must be non-negative");
            }
            sum += x;
        }
        if (!(sum > 0.0)) {
            throw ConfigError("mock mutation weights must not all be zero");
        }
    }
}

std::unique_ptr<Generator> make_generator(const GeneratorConfig& cfg, const std::vector<std::string>& inputs) {
    cfg.validate();
    if (cfg.kind == GeneratorKind::Remote) {
        return std::make_unique<RemoteGenerator>(cfg.remote);
    }
    return std::make_unique<MockGenerator>(cfg.mock, inputs);
}

} // namespace eqsr
