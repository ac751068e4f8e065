#include "isaacs/problem.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "isaacs/quadrature.hpp"
#include "isaacs/rng.hpp"

namespace isaacs {

// ============================================================================
// Problem-file document parser (grammar in docs/problem_format.md)
// ============================================================================

namespace {

struct RawValue {
    enum class Kind { Number, Text, Vectors } kind = Kind::Number;
    double number = 0.0;
    std::string text;
    std::vector<std::vector<double>> vectors; // flat lists become 1-vectors
    std::size_t offset = 0;                   // byte offset of the value in the source
};

class DocScanner {
public:
    explicit DocScanner(std::string_view text) : text_(text) {}

    std::map<std::string, RawValue> run() {
        std::map<std::string, RawValue> doc;
        std::string section;
        while (pos_ < text_.size()) {
            skip_blank();
            if (pos_ >= text_.size()) break;
            if (text_[pos_] == '[') {
                section = parse_section();
                continue;
            }
            auto [key, value] = parse_entry();
            if (section.empty())
                throw ParseError("key '" + key + "' appears before any [section]", value.offset);
            std::string full = section + "." + key;
            if (doc.count(full))
                throw ParseError("duplicate key '" + full + "'", value.offset);
            doc.emplace(std::move(full), std::move(value));
        }
        return doc;
    }

    /// Parses a bare value token (used for --set overrides).
    static RawValue parse_value_text(std::string_view text) {
        DocScanner s(text);
        RawValue v = s.parse_value();
        s.skip_ws();
        if (s.pos_ != text.size())
            throw ParseError("trailing characters after value", s.pos_);
        return v;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    void skip_line() {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
        if (pos_ < text_.size()) ++pos_;
    }

    void skip_blank() {
        for (;;) {
            skip_ws();
            if (pos_ >= text_.size()) return;
            char c = text_[pos_];
            if (c == '\n' || c == '\r') { ++pos_; continue; }
            if (c == '#') { skip_line(); continue; }
            return;
        }
    }

    std::string parse_section() {
        std::size_t open = pos_++;
        std::string name;
        while (pos_ < text_.size() && text_[pos_] != ']' && text_[pos_] != '\n')
            name += text_[pos_++];
        if (pos_ >= text_.size() || text_[pos_] != ']')
            throw ParseError("unterminated section header", open);
        ++pos_;
        end_of_line("section header");
        if (name.empty()) throw ParseError("empty section name", open);
        return name;
    }

    std::pair<std::string, RawValue> parse_entry() {
        std::size_t start = pos_;
        std::string key;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            key += text_[pos_++];
        if (key.empty())
            throw ParseError("expected a key name", start);
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != '=')
            throw ParseError("expected '=' after key '" + key + "'", pos_);
        ++pos_;
        skip_ws();
        RawValue value = parse_value();
        end_of_line("value");
        return {key, value};
    }

    void end_of_line(const char* what) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '#') skip_line();
        else if (pos_ < text_.size() && text_[pos_] == '\r') ++pos_;
        else if (pos_ < text_.size() && text_[pos_] != '\n')
            throw ParseError(std::string("unexpected characters after ") + what, pos_);
    }

    RawValue parse_value() {
        skip_ws();
        RawValue v;
        v.offset = pos_;
        if (pos_ >= text_.size())
            throw ParseError("missing value", pos_);
        char c = text_[pos_];
        if (c == '"') {
            v.kind = RawValue::Kind::Text;
            ++pos_;
            while (pos_ < text_.size() && text_[pos_] != '"' && text_[pos_] != '\n')
                v.text += text_[pos_++];
            if (pos_ >= text_.size() || text_[pos_] != '"')
                throw ParseError("unterminated string", v.offset);
            ++pos_;
            return v;
        }
        if (c == '[') {
            v.kind = RawValue::Kind::Vectors;
            v.vectors = parse_list();
            return v;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) { // bare word (e.g. auto)
            v.kind = RawValue::Kind::Text;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '-' ||
                    text_[pos_] == '_'))
                v.text += text_[pos_++];
            return v;
        }
        v.kind = RawValue::Kind::Number;
        v.number = parse_number();
        return v;
    }

    double parse_number() {
        const char* begin = text_.data() + pos_;
        char* end = nullptr;
        double x = std::strtod(begin, &end);
        if (end == begin)
            throw ParseError("malformed number", pos_);
        pos_ += static_cast<std::size_t>(end - begin);
        return x;
    }

    // [a, b, ...] where each element is a number or a nested [n, n, ...].
    // Flat numeric lists are normalized to lists of 1-vectors.
    std::vector<std::vector<double>> parse_list() {
        std::size_t open = pos_++;
        std::vector<std::vector<double>> out;
        bool nested = false, flat = false;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ']') { ++pos_; return out; }
        for (;;) {
            skip_ws();
            if (pos_ >= text_.size())
                throw ParseError("unterminated list", open);
            if (text_[pos_] == '[') {
                nested = true;
                std::size_t inner_open = pos_++;
                std::vector<double> vec;
                for (;;) {
                    skip_ws();
                    vec.push_back(parse_number());
                    skip_ws();
                    if (pos_ < text_.size() && text_[pos_] == ',') { ++pos_; continue; }
                    if (pos_ < text_.size() && text_[pos_] == ']') { ++pos_; break; }
                    throw ParseError("unterminated inner list", inner_open);
                }
                out.push_back(std::move(vec));
            } else {
                flat = true;
                out.push_back({parse_number()});
            }
            if (nested && flat)
                throw ParseError("cannot mix scalars and vectors in one list", open);
            skip_ws();
            if (pos_ < text_.size() && text_[pos_] == ',') { ++pos_; continue; }
            if (pos_ < text_.size() && text_[pos_] == ']') { ++pos_; break; }
            throw ParseError("unterminated list", open);
        }
        return out;
    }
};

bool known_key(const std::string& key) {
    static const char* fixed[] = {
        "dims.state", "dims.noise", "generator.g", "discount.rho",
        "growth.beta1", "growth.beta2", "growth.beta1_tail_c", "growth.beta1_tail_lambda",
        "controls.U", "controls.V",
        "grid.lo", "grid.hi", "grid.points", "grid.window", "grid.boundary", "grid.dt",
        "grid.cfl_safety",
        "solver.tol", "solver.horizon_step", "solver.horizon_cap", "solver.seed",
        "solver.est_samples", "solver.mc_paths", "solver.mc_dt", "solver.quad_window",
        "solver.bound_slack", "solver.lipschitz_slack", "solver.rate_slack",
        "solver.scheme_slack_factor",
    };
    for (const char* k : fixed)
        if (key == k) return true;
    // dynamics.b<i> and dynamics.sigma<i><k>
    if (key.rfind("dynamics.b", 0) == 0 || key.rfind("dynamics.sigma", 0) == 0) {
        std::size_t digits = key.rfind("dynamics.b", 0) == 0 ? 10 : 14;
        if (key.size() == digits) return false;
        for (std::size_t i = digits; i < key.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(key[i]))) return false;
        return true;
    }
    return false;
}

class DocView {
public:
    explicit DocView(std::map<std::string, RawValue> doc) : doc_(std::move(doc)) {}

    bool has(const std::string& key) const { return doc_.count(key) != 0; }

    bool is_text(const std::string& key) const {
        return has(key) && doc_.at(key).kind == RawValue::Kind::Text;
    }

    double number(const std::string& key) const {
        const RawValue& v = get(key);
        if (v.kind != RawValue::Kind::Number)
            throw ConfigError("key '" + key + "' must be a number");
        return v.number;
    }
    double number_or(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }
    int integer(const std::string& key) const {
        double x = number(key);
        if (x != std::floor(x))
            throw ConfigError("key '" + key + "' must be an integer");
        return static_cast<int>(x);
    }
    std::string text(const std::string& key) const {
        const RawValue& v = get(key);
        if (v.kind != RawValue::Kind::Text)
            throw ConfigError("key '" + key + "' must be a quoted string");
        return v.text;
    }
    std::string text_or(const std::string& key, const std::string& fallback) const {
        return has(key) ? text(key) : fallback;
    }
    const std::vector<std::vector<double>>& vectors(const std::string& key) const {
        const RawValue& v = get(key);
        if (v.kind != RawValue::Kind::Vectors)
            throw ConfigError("key '" + key + "' must be a bracketed list");
        return v.vectors;
    }
    std::vector<double> flat(const std::string& key) const {
        std::vector<double> out;
        for (const auto& vec : vectors(key)) {
            if (vec.size() != 1)
                throw ConfigError("key '" + key + "' must be a flat list of numbers");
            out.push_back(vec[0]);
        }
        return out;
    }

private:
    const RawValue& get(const std::string& key) const {
        auto it = doc_.find(key);
        if (it == doc_.end())
            throw ConfigError("missing required key '" + key + "'");
        return it->second;
    }

    std::map<std::string, RawValue> doc_;
};

Expr parse_coeff(const DocView& doc, const std::string& key) {
    std::string src = doc.text(key);
    try {
        return Expr::parse(src);
    } catch (const ParseError& e) {
        throw ConfigError("key '" + key + "': " + e.what());
    }
}

void check_variable_mask(const Expr& e, const std::string& where, const GameProblem& p,
                         bool allow_x, bool allow_yz, bool allow_uv) {
    if (!allow_x && e.references(VarKind::X))
        throw ConfigError(where + " may not reference state variables");
    if (!allow_yz && (e.references(VarKind::Y) || e.references(VarKind::Z)))
        throw ConfigError(where + " may not reference y or z");
    if (!allow_uv && (e.references(VarKind::U) || e.references(VarKind::V)))
        throw ConfigError(where + " may not reference controls");
    if (e.max_index(VarKind::X) > p.state_dim)
        throw ConfigError(where + " references x" + std::to_string(e.max_index(VarKind::X)) +
                          " but the state dimension is " + std::to_string(p.state_dim));
    if (e.max_index(VarKind::Z) > p.noise_dim)
        throw ConfigError(where + " references z" + std::to_string(e.max_index(VarKind::Z)) +
                          " but the noise dimension is " + std::to_string(p.noise_dim));
    if (!p.control_set_u.empty() && e.max_index(VarKind::U) > p.control_dim_u())
        throw ConfigError(where + " references u" + std::to_string(e.max_index(VarKind::U)) +
                          " but control vectors in U have length " +
                          std::to_string(p.control_dim_u()));
    if (!p.control_set_v.empty() && e.max_index(VarKind::V) > p.control_dim_v())
        throw ConfigError(where + " references v" + std::to_string(e.max_index(VarKind::V)) +
                          " but control vectors in V have length " +
                          std::to_string(p.control_dim_v()));
}

ProblemFile interpret(const DocView& doc) {
    ProblemFile pf;
    GameProblem& p = pf.problem;

    p.state_dim = doc.integer("dims.state");
    p.noise_dim = doc.integer("dims.noise");
    if (p.state_dim < 1 || p.state_dim > 8)
        throw ConfigError("dims.state must be in [1, 8]");
    if (p.noise_dim < 1 || p.noise_dim > 8)
        throw ConfigError("dims.noise must be in [1, 8]");

    auto load_controls = [&doc](const char* key) {
        std::vector<std::vector<double>> set = doc.vectors(key);
        if (set.empty())
            throw ConfigError(std::string("empty control set ") + key);
        for (const auto& vec : set)
            if (vec.size() != set.front().size())
                throw ConfigError(std::string("control vectors in ") + key +
                                  " have inconsistent lengths");
        return set;
    };
    p.control_set_u = load_controls("controls.U");
    p.control_set_v = load_controls("controls.V");

    for (int i = 0; i < p.state_dim; ++i) {
        std::string key = "dynamics.b" + std::to_string(i + 1);
        p.drift.push_back(parse_coeff(doc, key));
        check_variable_mask(p.drift.back(), key, p, true, false, true);
    }
    for (int i = 0; i < p.state_dim; ++i)
        for (int k = 0; k < p.noise_dim; ++k) {
            std::string key =
                "dynamics.sigma" + std::to_string(i + 1) + std::to_string(k + 1);
            Expr e = doc.has(key) ? parse_coeff(doc, key) : Expr::parse("0");
            check_variable_mask(e, key, p, true, false, true);
            p.diffusion.push_back(std::move(e));
        }

    p.generator = parse_coeff(doc, "generator.g");
    check_variable_mask(p.generator, "generator.g", p, true, true, true);

    p.discount = parse_coeff(doc, "discount.rho");
    check_variable_mask(p.discount, "discount.rho", p, false, false, false);

    p.beta1 = doc.has("growth.beta1") ? parse_coeff(doc, "growth.beta1") : Expr::parse("0");
    check_variable_mask(p.beta1, "growth.beta1", p, false, false, false);
    p.beta2 = doc.number_or("growth.beta2", 0.0);
    if (p.beta2 < 0) throw ConfigError("growth.beta2 must be nonnegative");
    p.beta1_tail_coeff = doc.number_or("growth.beta1_tail_c", 0.0);
    p.beta1_tail_rate = doc.number_or("growth.beta1_tail_lambda", 1.0);
    if (p.beta1_tail_coeff < 0 || p.beta1_tail_rate <= 0)
        throw ConfigError("growth.beta1 tail majorant requires c >= 0 and lambda > 0");

    // Spot check beta1 >= 0 on a coarse time sample.
    {
        VarLayout layout = p.layout();
        std::vector<double> slots(static_cast<std::size_t>(layout.total()), 0.0);
        for (int i = 0; i <= 64; ++i) {
            slots[0] = 50.0 * i / 64.0;
            if (p.beta1.eval(layout, slots) < 0)
                throw ConfigError("growth.beta1 is negative at t=" + std::to_string(slots[0]));
        }
    }

    bool references_t = p.generator.references(VarKind::T) ||
                        p.discount.references(VarKind::T) || p.beta1.references(VarKind::T);
    for (const Expr& e : p.drift) references_t = references_t || e.references(VarKind::T);
    for (const Expr& e : p.diffusion) references_t = references_t || e.references(VarKind::T);
    p.autonomous_flag = !references_t;

    GridSpec& g = pf.grid;
    int n = p.state_dim;
    g.lo = doc.has("grid.lo") ? doc.flat("grid.lo") : std::vector<double>(n, -2.0);
    g.hi = doc.has("grid.hi") ? doc.flat("grid.hi") : std::vector<double>(n, 2.0);
    if (doc.has("grid.points")) {
        g.points.clear();
        for (double v : doc.flat("grid.points")) {
            if (v != std::floor(v) || v < 3)
                throw ConfigError("grid.points entries must be integers >= 3");
            g.points.push_back(static_cast<int>(v));
        }
    } else {
        g.points.assign(static_cast<std::size_t>(n), 81);
    }
    if (static_cast<int>(g.lo.size()) != n || static_cast<int>(g.hi.size()) != n ||
        static_cast<int>(g.points.size()) != n)
        throw ConfigError("grid.lo/hi/points must each have dims.state entries");
    for (int i = 0; i < n; ++i)
        if (!(g.lo[i] < g.hi[i]))
            throw ConfigError("grid box is degenerate in dimension " + std::to_string(i + 1));
    g.window_end = doc.number_or("grid.window", 2.0);
    if (g.window_end <= 0) throw ConfigError("grid.window must be positive");
    std::string bc = doc.text_or("grid.boundary", "lipschitz-extrapolation");
    if (bc == "lipschitz-extrapolation")
        g.boundary = BoundaryPolicy::LipschitzExtrapolation;
    else if (bc == "one-sided-differences")
        g.boundary = BoundaryPolicy::OneSidedDifferences;
    else
        throw ConfigError("grid.boundary must be 'lipschitz-extrapolation' or "
                          "'one-sided-differences'");
    if (doc.has("grid.dt")) {
        if (doc.is_text("grid.dt")) {
            if (doc.text("grid.dt") != "auto")
                throw ConfigError("grid.dt must be a number or auto");
        } else {
            g.dt = doc.number("grid.dt");
            if (g.dt < 0) throw ConfigError("grid.dt must be nonnegative");
        }
    }
    g.cfl_safety = doc.number_or("grid.cfl_safety", 0.9);
    if (g.cfl_safety <= 0 || g.cfl_safety > 1)
        throw ConfigError("grid.cfl_safety must lie in (0, 1]");

    SolverOptions& s = pf.solver;
    s.tol = doc.number_or("solver.tol", s.tol);
    s.horizon_step = doc.number_or("solver.horizon_step", s.horizon_step);
    s.horizon_cap = doc.number_or("solver.horizon_cap", s.horizon_cap);
    if (doc.has("solver.seed")) s.seed = static_cast<std::uint64_t>(doc.number("solver.seed"));
    s.est_samples = doc.has("solver.est_samples") ? doc.integer("solver.est_samples")
                                                  : s.est_samples;
    s.mc_paths = doc.has("solver.mc_paths") ? doc.integer("solver.mc_paths") : s.mc_paths;
    s.mc_dt = doc.number_or("solver.mc_dt", s.mc_dt);
    s.quad_window = doc.number_or("solver.quad_window", s.quad_window);
    s.bound_slack = doc.number_or("solver.bound_slack", s.bound_slack);
    s.lipschitz_slack = doc.number_or("solver.lipschitz_slack", s.lipschitz_slack);
    s.rate_slack = doc.number_or("solver.rate_slack", s.rate_slack);
    s.scheme_slack_factor = doc.number_or("solver.scheme_slack_factor", s.scheme_slack_factor);
    if (s.tol <= 0 || s.horizon_step <= 0 || s.horizon_cap <= 0 || s.mc_dt <= 0 ||
        s.quad_window <= 0 || s.est_samples < 2 || s.mc_paths < 1)
        throw ConfigError("[solver] values out of range");

    return pf;
}

} // namespace

ProblemFile load_problem(std::string_view text) { return load_problem(text, {}); }

ProblemFile load_problem(std::string_view text,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
    std::map<std::string, RawValue> doc = DocScanner(text).run();
    for (const auto& [key, value] : overrides) {
        if (!known_key(key))
            throw ConfigError("unknown override key '" + key + "'");
        RawValue v = DocScanner::parse_value_text(value);
        doc[key] = std::move(v);
    }
    for (const auto& [key, value] : doc) {
        if (!known_key(key))
            throw ConfigError("unknown key '" + key + "'");
    }
    return interpret(DocView(std::move(doc)));
}

ProblemFile load_problem_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open problem file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_problem(buf.str());
}

// ============================================================================
// Discount kernel
// ============================================================================

double discount_integral(const GameProblem& problem, double t, double s) {
    if (!(0.0 <= t && t <= s))
        throw ConfigError("discount_integral requires 0 <= t <= s");
    if (t == s) return 0.0;
    VarLayout layout = problem.layout();
    std::vector<double> slots(static_cast<std::size_t>(layout.total()), 0.0);
    auto rho = [&](double r) {
        slots[0] = r;
        return problem.discount.eval(layout, slots);
    };
    return integrate(rho, t, s, 1e-10);
}

double gamma(const GameProblem& problem, double t, double s) {
    if (t == s) return 1.0;
    return std::exp(-discount_integral(problem, t, s));
}

// ============================================================================
// Constant estimation
// ============================================================================

namespace {

struct Sampler {
    const GameProblem& p;
    VarLayout layout;
    std::vector<double> slots;

    explicit Sampler(const GameProblem& problem)
        : p(problem), layout(problem.layout()),
          slots(static_cast<std::size_t>(layout.total()), 0.0) {}

    void set_t(double t) { slots[0] = t; }
    void set_x(const std::vector<double>& x) {
        for (int i = 0; i < layout.n; ++i) slots[static_cast<std::size_t>(1 + i)] = x[i];
    }
    void set_y(double y) { slots[static_cast<std::size_t>(1 + layout.n)] = y; }
    void set_z(const std::vector<double>& z) {
        for (int k = 0; k < layout.d; ++k)
            slots[static_cast<std::size_t>(2 + layout.n + k)] = z[k];
    }
    void set_controls(const std::vector<double>& u, const std::vector<double>& v) {
        for (int j = 0; j < layout.cu; ++j)
            slots[static_cast<std::size_t>(2 + layout.n + layout.d + j)] = u[j];
        for (int j = 0; j < layout.cv; ++j)
            slots[static_cast<std::size_t>(2 + layout.n + layout.d + layout.cu + j)] = v[j];
    }

    double g() { return p.generator.eval(layout, slots); }
    void b(std::vector<double>& out) {
        out.resize(static_cast<std::size_t>(layout.n));
        for (int i = 0; i < layout.n; ++i) out[static_cast<std::size_t>(i)] = p.drift[i].eval(layout, slots);
    }
    void sig(std::vector<double>& out) {
        out.resize(static_cast<std::size_t>(layout.n * layout.d));
        for (int i = 0; i < layout.n * layout.d; ++i)
            out[static_cast<std::size_t>(i)] = p.diffusion[i].eval(layout, slots);
    }
};

double norm2(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace

AssumptionReport estimate_constants(const GameProblem& problem, const StateBox& box, int samples,
                                    std::uint64_t seed, double quad_window) {
    if (samples < 2) throw ConfigError("estimate_constants requires samples >= 2");
    if (box.lo.size() != static_cast<std::size_t>(problem.state_dim) ||
        box.hi.size() != static_cast<std::size_t>(problem.state_dim))
        throw ConfigError("sample box dimension mismatch");
    for (std::size_t i = 0; i < box.lo.size(); ++i)
        if (!(box.lo[i] < box.hi[i])) throw ConfigError("sample box is degenerate");

    AssumptionReport rep;
    rep.sample_count = samples;
    rep.sample_box = box;
    rep.seed = seed;
    rep.beta2 = problem.beta2;

    SmallRng rng(seed);
    Sampler s(problem);
    const int n = problem.state_dim;
    const int d = problem.noise_dim;
    constexpr double kTimeScan = 64.0;
    constexpr double kYZRange = 5.0;

    // rho0: infimum of the discount rate over a dense time sample.
    {
        rep.rho0 = std::numeric_limits<double>::infinity();
        bool any = false;
        std::vector<double> slots(static_cast<std::size_t>(problem.layout().total()), 0.0);
        for (int i = 0; i <= 1024; ++i) {
            double t = kTimeScan * i / 1024.0;
            try {
                slots[0] = t;
                rep.rho0 = std::min(rep.rho0, problem.discount.eval(problem.layout(), slots));
                any = true;
            } catch (const EvalError&) {
            }
        }
        for (int i = 0; i < 256; ++i) {
            double t = rng.uniform(0.0, kTimeScan);
            try {
                slots[0] = t;
                rep.rho0 = std::min(rep.rho0, problem.discount.eval(problem.layout(), slots));
                any = true;
            } catch (const EvalError&) {
            }
        }
        if (!any) rep.rho0 = 0.0;
    }

    auto random_x = [&](std::vector<double>& x) {
        x.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            x[static_cast<std::size_t>(i)] = rng.uniform(box.lo[static_cast<std::size_t>(i)],
                                                         box.hi[static_cast<std::size_t>(i)]);
    };
    auto random_z = [&](std::vector<double>& z) {
        z.resize(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k) z[static_cast<std::size_t>(k)] = rng.uniform(-kYZRange, kYZRange);
    };
    auto random_controls = [&]() {
        std::size_t iu = rng.next_u64() % problem.control_set_u.size();
        std::size_t iv = rng.next_u64() % problem.control_set_v.size();
        return std::pair<const std::vector<double>&, const std::vector<double>&>(
            problem.control_set_u[iu], problem.control_set_v[iv]);
    };

    std::vector<double> xa, xb, za, zb, tmp;

    // Lipschitz constants of g and the monotonicity-in-y flag.
    for (int it = 0; it < samples; ++it) {
        double t = rng.uniform(0.0, 16.0);
        random_x(xa);
        random_x(xb);
        double ya = rng.uniform(-kYZRange, kYZRange);
        double yb = rng.uniform(-kYZRange, kYZRange);
        random_z(za);
        random_z(zb);
        auto [u, v] = random_controls();
        try {
            s.set_t(t);
            s.set_controls(u, v);
            s.set_x(xa);
            s.set_y(ya);
            s.set_z(za);
            double g0 = s.g();
            s.set_x(xb);
            double gx = s.g();
            s.set_x(xa);
            s.set_y(yb);
            double gy = s.g();
            s.set_y(ya);
            s.set_z(zb);
            double gz = s.g();

            std::vector<double> dx(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i)
                dx[static_cast<std::size_t>(i)] =
                    xa[static_cast<std::size_t>(i)] - xb[static_cast<std::size_t>(i)];
            double ndx = norm2(dx);
            if (ndx > 1e-12) rep.L_x = std::max(rep.L_x, std::fabs(g0 - gx) / ndx);
            if (std::fabs(ya - yb) > 1e-12)
                rep.L_y = std::max(rep.L_y, std::fabs(g0 - gy) / std::fabs(ya - yb));
            std::vector<double> dz(static_cast<std::size_t>(d));
            for (int k = 0; k < d; ++k)
                dz[static_cast<std::size_t>(k)] =
                    za[static_cast<std::size_t>(k)] - zb[static_cast<std::size_t>(k)];
            double ndz = norm2(dz);
            if (ndz > 1e-12) rep.L_z = std::max(rep.L_z, std::fabs(g0 - gz) / ndz);

            if ((g0 - gy) * (ya - yb) > 1e-12 * (1.0 + std::fabs(g0) + std::fabs(gy)))
                rep.monotone_in_y_ok = false;
        } catch (const EvalError&) {
            // Skip samples outside g's domain; estimation always completes.
        }
    }

    // Dissipativity constant mu and the coefficient bound.
    double worst_form = -std::numeric_limits<double>::infinity();
    bool any_form = false;
    std::vector<double> ba, bb, sa, sb;
    for (int it = 0; it < samples; ++it) {
        double t = rng.uniform(0.0, 16.0);
        random_x(xa);
        random_x(xb);
        auto [u, v] = random_controls();
        try {
            s.set_t(t);
            s.set_controls(u, v);
            s.set_x(xa);
            s.b(ba);
            s.sig(sa);
            rep.b_sigma_bound = std::max({rep.b_sigma_bound, norm2(ba), norm2(sa)});
            s.set_x(xb);
            s.b(bb);
            s.sig(sb);

            double ndx2 = 0, inner = 0, nds2 = 0;
            for (int i = 0; i < n; ++i) {
                double dxi = xa[static_cast<std::size_t>(i)] - xb[static_cast<std::size_t>(i)];
                ndx2 += dxi * dxi;
                inner += dxi * (ba[static_cast<std::size_t>(i)] - bb[static_cast<std::size_t>(i)]);
            }
            for (std::size_t k = 0; k < sa.size(); ++k) {
                double dsk = sa[k] - sb[k];
                nds2 += dsk * dsk;
            }
            if (ndx2 <= 1e-20) continue;
            double form =
                (2.0 * inner + nds2 + 2.0 * rep.L_z * std::sqrt(nds2) * std::sqrt(ndx2)) / ndx2;
            worst_form = std::max(worst_form, form);
            any_form = true;
        } catch (const EvalError&) {
        }
    }
    rep.mu = any_form ? -worst_form : 0.0;
    rep.dissipativity_ok = rep.mu > -rep.rho0;

    // ||beta1||_L1 by quadrature plus the declared exponential tail majorant.
    {
        VarLayout layout = problem.layout();
        std::vector<double> slots(static_cast<std::size_t>(layout.total()), 0.0);
        auto beta1_abs = [&](double t) {
            slots[0] = t;
            return std::fabs(problem.beta1.eval(layout, slots));
        };
        try {
            rep.beta1_L1 = integrate(beta1_abs, 0.0, quad_window, 1e-10);
        } catch (const EvalError&) {
            rep.beta1_L1 = 0.0;
        }
        rep.beta1_L1 +=
            problem.beta1_tail_coeff / problem.beta1_tail_rate *
            std::exp(-problem.beta1_tail_rate * quad_window);
    }

    return rep;
}

// ============================================================================
// Closed-form bounds
// ============================================================================

Bounds value_bounds(const AssumptionReport& report) {
    if (!(report.rho0 > 0))
        throw ConfigError("value_bounds requires rho0 > 0 (discount assumption failed)");
    Bounds b;
    b.beta1_L1 = report.beta1_L1;
    b.beta2 = report.beta2;
    b.rho0 = report.rho0;
    b.M1_inf = report.beta1_L1 + report.beta2 / report.rho0;
    b.M2_inf = 4.0 * b.M1_inf * (report.beta1_L1 + report.beta2 / report.rho0) +
               2.0 * b.M1_inf * b.M1_inf * (1.0 + 2.0 * report.L_z * report.L_z / report.rho0);
    if (report.dissipativity_ok)
        b.Lip_W = report.L_x / std::sqrt(report.rho0 * (report.rho0 + report.mu));
    return b;
}

} // namespace isaacs
