#include "idcss/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "idcss/matrix_io.hpp"

namespace idcss {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

// Largest over smallest, or +inf once the smallest is at the rank floor.
double cond_from(const Vector& s, double floor_rel) {
    const double smax = s(0);
    const double smin = s(s.size() - 1);
    if (smax == 0.0 || smin <= floor_rel * smax) return kInf;
    return smax / smin;
}

}  // namespace

std::string_view to_string(MetricState s) {
    switch (s) {
        case MetricState::Value: return "value";
        case MetricState::FlaggedOne: return "flagged_one";
        case MetricState::Infinite: return "infinite";
        case MetricState::Undefined: return "undefined";
    }
    return "undefined";
}

MetricState parse_metric_state(std::string_view s) {
    for (MetricState m : {MetricState::Value, MetricState::FlaggedOne, MetricState::Infinite, MetricState::Undefined})
        if (to_string(m) == s) return m;
    throw InputDomainError("unknown metric state '" + std::string(s) + "'");
}

double Metric::effective() const {
    switch (state) {
        case MetricState::Value: return value;
        case MetricState::FlaggedOne: return 1.0;
        case MetricState::Infinite: return kInf;
        case MetricState::Undefined: break;
    }
    return kNaN;
}

MetricsRecord metrics_from_raw(Index k, double sigma_k_chi1, double sigma_k_chi, double residual,
                               double sigma_k_plus_1, double cond_chi1, double cond_chi, double rank_floor) {
    MetricsRecord m;
    m.k = k;
    m.sigma_k_chi1 = sigma_k_chi1;
    m.sigma_k_chi = sigma_k_chi;
    m.residual = residual;
    m.sigma_k_plus_1 = sigma_k_plus_1;
    m.cond_chi1 = cond_chi1;
    m.cond_chi = cond_chi;
    m.rank_floor = rank_floor;

    if (sigma_k_chi > rank_floor)
        m.gamma1 = Metric::of(sigma_k_chi1 / sigma_k_chi);
    else
        m.gamma1 = sigma_k_chi1 <= rank_floor ? Metric::flagged_one() : Metric::infinite();

    if (std::isnan(sigma_k_plus_1))
        m.gamma2 = Metric::undefined();
    else if (sigma_k_plus_1 > rank_floor)
        m.gamma2 = Metric::of(residual / sigma_k_plus_1);
    else
        m.gamma2 = residual <= rank_floor ? Metric::flagged_one() : Metric::infinite();

    if (std::isinf(cond_chi))
        m.tau = Metric::undefined();
    else if (std::isinf(cond_chi1))
        m.tau = Metric::infinite();
    else
        m.tau = Metric::of(cond_chi1 / cond_chi);
    return m;
}

MetricsRecord compute_metrics(const Matrix& chi, const CssResult<double>& result, const Tolerances& tol) {
    const Index n = chi.rows();
    const Index p = chi.cols();
    const Index k = result.k;
    if (result.factors.r.rows() != p || result.factors.r.cols() != p || result.factors.q.rows() != n ||
        result.factors.perm.size() != p)
        throw InputDomainError("compute_metrics: result does not match the matrix shape");
    if (k < 1 || k > p) throw InputDomainError("compute_metrics: k out of range");

    const double rel = tol.rank_for(n);
    const Vector sigma = singular_values(chi);
    const double floor = rel * sigma(0);
    const Vector s11 = singular_values(Matrix(result.factors.r.topLeftCorner(k, k)));

    const double residual = k < p ? spectral_norm(Matrix(result.factors.r.bottomRightCorner(p - k, p - k))) : 0.0;
    const double next = k < p ? sigma(k) : kNaN;
    return metrics_from_raw(k, s11(k - 1), sigma(k - 1), residual, next, cond_from(s11, rel), cond_from(sigma, rel),
                            floor);
}

std::vector<BoundCheck> check_bounds(const Matrix& chi, const CssResult<double>& result, double f,
                                     double slack_rel) {
    std::vector<BoundCheck> out;
    const Index p = chi.cols();
    const Index k = result.k;
    if (k >= p) return out;
    const Vector sigma = singular_values(chi);
    const double slack = slack_rel * sigma(0);
    const Matrix& r = result.factors.r;
    const Vector s11 = singular_values(Matrix(r.topLeftCorner(k, k)));
    const Vector s22 = singular_values(Matrix(r.bottomRightCorner(p - k, p - k)));
    auto upper = [&](std::string name, double lhs, double rhs) { out.push_back({name, lhs, rhs, lhs <= rhs + slack}); };
    auto lower = [&](std::string name, double lhs, double rhs) { out.push_back({name, lhs, rhs, lhs >= rhs - slack}); };

    // Worst case over j of each interlacing family.
    double worst11 = -kInf, worst22 = -kInf;
    Index at11 = 0, at22 = 0;
    for (Index j = 0; j < k; ++j)
        if (s11(j) - sigma(j) > worst11) worst11 = s11(j) - sigma(j), at11 = j;
    for (Index j = 0; j < p - k; ++j)
        if (sigma(k + j) - s22(j) > worst22) worst22 = sigma(k + j) - s22(j), at22 = j;
    upper("interlacing: sigma_j(R11) <= sigma_j", s11(at11), sigma(at11));
    lower("interlacing: sigma_j(R22) >= sigma_{k+j}", s22(at22), sigma(k + at22));
    upper("gamma1 <= 1: sigma_k(chi1) <= sigma_k", s11(k - 1), sigma(k - 1));
    lower("gamma2 >= 1: residual >= sigma_{k+1}", s22(0), sigma(k));

    const double pk = static_cast<double>(p);
    switch (result.algorithm) {
        case Algorithm::B1: {
            const double stated = std::ldexp(1.0, static_cast<int>(p - k - 1)) * sigma(k);
            upper("B1: ||R22|| <= 2^(p-k-1) sigma_{k+1}", s22(0), stated);
            upper("B1 (proven form): ||R22|| <= p 2^(p-k-1) sigma_{k+1}", s22(0), pk * stated);
            break;
        }
        case Algorithm::B4: {
            const double stated = std::ldexp(1.0, static_cast<int>(1 - k)) * sigma(k - 1);
            lower("B4: sigma_k(R11) >= 2^(1-k) sigma_k", s11(k - 1), stated);
            lower("B4 (proven form): sigma_k(R11) >= 2^(1-k) sigma_k / p", s11(k - 1), stated / pk);
            break;
        }
        case Algorithm::B3: {
            const double inv = result.v11_inverse_norm.value_or(kInf);
            lower("B3: sigma_k(R11) >= sigma_k / ||V11^-1||", s11(k - 1), sigma(k - 1) / inv);
            upper("B3: ||R22|| <= ||V11^-1|| sigma_{k+1}", s22(0), inv * sigma(k));
            const double cap = std::ldexp(1.0, static_cast<int>(k - 1));
            out.push_back({"B3: ||V11^-1|| <= 2^(k-1)", inv, cap, inv <= cap * (1.0 + slack_rel)});
            break;
        }
        case Algorithm::Srrqr: {
            const double growth = std::sqrt(1.0 + f * f * static_cast<double>(k) * static_cast<double>(p - k));
            double w1 = kInf, w2 = -kInf;
            Index a1 = 0, a2 = 0;
            for (Index i = 0; i < k; ++i)
                if (s11(i) - sigma(i) / growth < w1) w1 = s11(i) - sigma(i) / growth, a1 = i;
            for (Index j = 0; j < p - k; ++j)
                if (s22(j) - sigma(k + j) * growth > w2) w2 = s22(j) - sigma(k + j) * growth, a2 = j;
            lower("SRRQR: sigma_i(R11) >= sigma_i / sqrt(1 + f^2 k (p-k))", s11(a1), sigma(a1) / growth);
            upper("SRRQR: sigma_j(R22) <= sigma_{k+j} sqrt(1 + f^2 k (p-k))", s22(a2), sigma(k + a2) * growth);
            const Matrix coupling = r.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(r.topRightCorner(k, p - k));
            const double cmax = coupling.cwiseAbs().maxCoeff();
            out.push_back({"SRRQR: max |R11^-1 R12| <= f", cmax, f, cmax <= f * (1.0 + defaults::kSrrqrTieSlack) + slack_rel});
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Family f) {
    switch (f) {
        case Family::Identity: return "identity";
        case Family::Kahan: return "kahan";
        case Family::GuEisenstat: return "gueis";
        case Family::Jolliffe: return "jolliffe";
        case Family::SorensenEmbree: return "sorem";
        case Family::Ships: return "ships";
        case Family::Gaussian: return "gaussian";
    }
    return "identity";
}

Family parse_family(std::string_view s) {
    for (Family f : {Family::Identity, Family::Kahan, Family::GuEisenstat, Family::Jolliffe, Family::SorensenEmbree,
                     Family::Ships, Family::Gaussian})
        if (to_string(f) == s) return f;
    throw InputDomainError("unknown generator family '" + std::string(s) +
                           "' (expected identity, kahan, gueis, jolliffe, sorem, ships or gaussian)");
}

GeneratorSpec GeneratorSpec::resolved() const {
    GeneratorSpec g = *this;
    auto fill = [](Index& x, Index v) {
        if (x == 0) x = v;
    };
    switch (family) {
        case Family::Identity:
            fill(g.n, 4);
            fill(g.p, g.n);
            fill(g.k, std::max<Index>(1, g.p / 2));
            break;
        case Family::Kahan:
            fill(g.n, 100);
            g.p = g.n;
            fill(g.k, g.n - 1);
            break;
        case Family::GuEisenstat:
            fill(g.n, 50);
            g.p = g.n;
            fill(g.k, g.n - 2);
            break;
        case Family::Jolliffe:
            fill(g.n, 40);
            fill(g.p, 20);
            if (g.block_size < 1 || g.p % g.block_size != 0)
                throw InputDomainError("jolliffe: p must be divisible by block_size");
            fill(g.k, g.p / g.block_size);
            break;
        case Family::SorensenEmbree:
        case Family::Ships:
            fill(g.n, 60);
            fill(g.p, 30);
            fill(g.k, 8);
            break;
        case Family::Gaussian:
            fill(g.n, 40);
            fill(g.p, 20);
            fill(g.k, std::max<Index>(1, g.p / 2));
            break;
    }
    if (g.n < 1 || g.p < 2 || g.n < g.p) throw InputDomainError("generator: need n >= p >= 2");
    if (g.k < 1 || g.k >= g.p) throw InputDomainError("generator: k must satisfy 1 <= k < p");
    if (family == Family::GuEisenstat && g.n < 5) throw InputDomainError("gueis: n must be at least 5");
    if (family == Family::Ships && g.p - g.k < g.k) throw InputDomainError("ships: need p - k >= k");
    if (!(g.zeta_lo > 0.0 && g.zeta_lo <= g.zeta_hi && g.zeta_hi < 1.0))
        throw InputDomainError("generator: zeta range must lie in (0, 1) with lo <= hi");
    if (!(g.rho_lo >= -1.0 && g.rho_lo <= g.rho_hi && g.rho_hi <= 1.0))
        throw InputDomainError("generator: rho range must lie in [-1, 1] with lo <= hi");
    if (!(g.leading_lo > 0.0 && g.leading_lo <= g.leading_hi && g.trailing_lo > 0.0 && g.trailing_lo <= g.trailing_hi))
        throw InputDomainError("generator: spectrum ranges must be positive with lo <= hi");
    return g;
}

GeneratedInstance generate_instance(const GeneratorSpec& spec_in, std::uint64_t seed) {
    const GeneratorSpec g = spec_in.resolved();
    GeneratedInstance out;
    out.k = g.k;
    out.parameter = kNaN;
    SpectrumSpec s;
    s.k = g.k;
    s.leading_lo = g.leading_lo;
    s.leading_hi = g.leading_hi;
    s.trailing_lo = g.trailing_lo;
    s.trailing_hi = g.trailing_hi;
    switch (g.family) {
        case Family::Identity:
            out.chi = Matrix::Identity(g.n, g.p);
            break;
        case Family::Kahan:
        case Family::GuEisenstat: {
            Rng rng(seed);
            out.parameter = rng.uniform(g.zeta_lo, g.zeta_hi);
            out.chi = g.family == Family::Kahan ? gen_kahan(g.n, out.parameter) : gen_gu_eisenstat(g.n, out.parameter);
            break;
        }
        case Family::Jolliffe:
            out.chi = gen_jolliffe(g.n, g.p, g.block_size, g.rho_lo, g.rho_hi, s, seed).s;
            break;
        case Family::SorensenEmbree:
            out.chi = gen_sorensen_embree(g.n, g.p, s, seed).s;
            break;
        case Family::Ships:
            s.spacing = Spacing::Logarithmic;
            out.chi = gen_ships(g.n, g.p, s, seed).s;
            break;
        case Family::Gaussian: {
            Rng rng(seed);
            out.chi.resize(g.n, g.p);
            for (Index j = 0; j < g.p; ++j)
                for (Index i = 0; i < g.n; ++i) out.chi(i, j) = rng.gaussian();
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::pair<double, double> read_range(const json& j, const char* key) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw InputDomainError(std::string("spec: '") + key + "' must be a [lo, hi] pair of numbers");
    return {j[0].get<double>(), j[1].get<double>()};
}

Index read_index(const json& j, const char* key) {
    if (!j.is_number_integer() || j.get<long long>() < 0)
        throw InputDomainError(std::string("spec: '") + key + "' must be a nonnegative integer");
    return static_cast<Index>(j.get<long long>());
}

double read_number(const json& j, const char* key) {
    if (!j.is_number()) throw InputDomainError(std::string("spec: '") + key + "' must be a number");
    return j.get<double>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok |= (it.key() == k);
        if (!ok) throw InputDomainError(std::string("spec: unknown key '") + it.key() + "' in " + where);
    }
}

json number_or_null(double x) {
    if (std::isnan(x)) return nullptr;
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json(const json& j) {
    if (!j.is_object()) throw InputDomainError("spec: top level must be an object");
    reject_unknown(j, {"schema_version", "generator", "algorithms", "k_policy", "f", "tie_slack", "max_swaps",
                       "realizations", "base_seed", "threads", "timing"},
                   "spec");
    if (j.contains("schema_version") && j["schema_version"] != kSchemaVersion)
        throw InputDomainError("spec: unsupported schema_version");
    if (!j.contains("generator") || !j["generator"].is_object()) throw InputDomainError("spec: 'generator' object required");

    ExperimentSpec spec;
    const json& g = j["generator"];
    reject_unknown(g, {"family", "n", "p", "k", "block_size", "zeta", "rho", "leading", "trailing"}, "generator");
    if (!g.contains("family") || !g["family"].is_string()) throw InputDomainError("spec: generator.family required");
    spec.generator.family = parse_family(g["family"].get<std::string>());
    if (g.contains("n")) spec.generator.n = read_index(g["n"], "n");
    if (g.contains("p")) spec.generator.p = read_index(g["p"], "p");
    if (g.contains("k")) spec.generator.k = read_index(g["k"], "k");
    if (g.contains("block_size")) spec.generator.block_size = read_index(g["block_size"], "block_size");
    if (g.contains("zeta")) std::tie(spec.generator.zeta_lo, spec.generator.zeta_hi) = read_range(g["zeta"], "zeta");
    if (g.contains("rho")) std::tie(spec.generator.rho_lo, spec.generator.rho_hi) = read_range(g["rho"], "rho");
    if (g.contains("leading"))
        std::tie(spec.generator.leading_lo, spec.generator.leading_hi) = read_range(g["leading"], "leading");
    if (g.contains("trailing"))
        std::tie(spec.generator.trailing_lo, spec.generator.trailing_hi) = read_range(g["trailing"], "trailing");
    spec.generator = spec.generator.resolved();

    if (j.contains("algorithms")) {
        if (!j["algorithms"].is_array() || j["algorithms"].empty())
            throw InputDomainError("spec: 'algorithms' must be a nonempty array");
        spec.algorithms.clear();
        for (const auto& a : j["algorithms"]) {
            if (!a.is_string()) throw InputDomainError("spec: algorithm names must be strings");
            spec.algorithms.push_back(parse_algorithm(a.get<std::string>()));
        }
    }
    if (j.contains("k_policy")) {
        const json& kp = j["k_policy"];
        if (!kp.is_object() || !kp.contains("mode") || !kp["mode"].is_string())
            throw InputDomainError("spec: k_policy needs a 'mode' string");
        reject_unknown(kp, {"mode", "k", "eta"}, "k_policy");
        const std::string mode = kp["mode"];
        if (mode == "designated") {
            spec.policy.reset();
        } else if (mode == "fixed") {
            if (!kp.contains("k")) throw InputDomainError("spec: fixed k_policy needs 'k'");
            spec.policy = RankPolicy::fixed(read_index(kp["k"], "k"));
        } else if (mode == "gap") {
            spec.policy = RankPolicy::gap();
        } else if (mode == "relative" || mode == "absolute") {
            if (!kp.contains("eta")) throw InputDomainError("spec: " + mode + " k_policy needs 'eta'");
            const double eta = read_number(kp["eta"], "eta");
            if (eta < 0) throw InputDomainError("spec: eta must be nonnegative");
            spec.policy = mode == "relative" ? RankPolicy::relative(eta) : RankPolicy::absolute(eta);
        } else {
            throw InputDomainError("spec: unknown k_policy mode '" + mode + "'");
        }
    }
    if (j.contains("f")) {
        const json& f = j["f"];
        if (f.is_object()) {
            reject_unknown(f, {"srrqr"}, "f");
            if (f.contains("srrqr")) spec.srrqr.f = read_number(f["srrqr"], "f.srrqr");
        } else {
            spec.srrqr.f = read_number(f, "f");
        }
        if (!(spec.srrqr.f >= 1.0)) throw InputDomainError("spec: f must be >= 1");
    }
    if (j.contains("tie_slack")) spec.srrqr.tie_slack = read_number(j["tie_slack"], "tie_slack");
    if (j.contains("max_swaps")) spec.srrqr.max_swaps = static_cast<int>(read_index(j["max_swaps"], "max_swaps"));
    if (j.contains("realizations")) spec.realizations = static_cast<int>(read_index(j["realizations"], "realizations"));
    if (spec.realizations < 1) throw InputDomainError("spec: realizations must be >= 1");
    if (j.contains("base_seed")) {
        if (!j["base_seed"].is_number_unsigned() && !(j["base_seed"].is_number_integer() && j["base_seed"].get<long long>() >= 0))
            throw InputDomainError("spec: base_seed must be a nonnegative integer");
        spec.base_seed = j["base_seed"].get<std::uint64_t>();
    }
    if (j.contains("threads")) spec.threads = static_cast<int>(read_index(j["threads"], "threads"));
    if (spec.threads < 1) spec.threads = 1;
    if (j.contains("timing")) {
        if (!j["timing"].is_boolean()) throw InputDomainError("spec: 'timing' must be a boolean");
        spec.timing = j["timing"].get<bool>();
    }
    return spec;
}

json ExperimentSpec::to_json() const {
    const GeneratorSpec& g = generator;
    json gen = {{"family", to_string(g.family)}, {"n", g.n}, {"p", g.p}, {"k", g.k}};
    if (g.family == Family::Jolliffe) {
        gen["block_size"] = g.block_size;
        gen["rho"] = {g.rho_lo, g.rho_hi};
    }
    if (g.family == Family::Kahan || g.family == Family::GuEisenstat) gen["zeta"] = {g.zeta_lo, g.zeta_hi};
    if (g.family == Family::Jolliffe || g.family == Family::SorensenEmbree || g.family == Family::Ships) {
        gen["leading"] = {g.leading_lo, g.leading_hi};
        gen["trailing"] = {g.trailing_lo, g.trailing_hi};
    }
    json algs = json::array();
    for (Algorithm a : algorithms) algs.push_back(to_string(a));
    json kp;
    if (!policy) {
        kp = {{"mode", "designated"}};
    } else {
        switch (policy->mode) {
            case RankPolicy::Mode::Fixed: kp = {{"mode", "fixed"}, {"k", policy->k}}; break;
            case RankPolicy::Mode::Gap: kp = {{"mode", "gap"}}; break;
            case RankPolicy::Mode::Relative: kp = {{"mode", "relative"}, {"eta", policy->eta}}; break;
            case RankPolicy::Mode::Absolute: kp = {{"mode", "absolute"}, {"eta", policy->eta}}; break;
        }
    }
    return {{"schema_version", kSchemaVersion},
            {"generator", gen},
            {"algorithms", algs},
            {"k_policy", kp},
            {"f", {{"srrqr", srrqr.f}}},
            {"tie_slack", srrqr.tie_slack},
            {"max_swaps", srrqr.max_swaps},
            {"realizations", realizations},
            {"base_seed", base_seed},
            {"threads", threads},
            {"timing", timing}};
}

// ---------------------------------------------------------------------------

namespace {

// Type-7 quantile on sorted finite data.
double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0 || lo + 1 >= sorted.size()) return sorted[lo];
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<RealizationRow> run_realization(const ExperimentSpec& spec, int index) {
    const std::uint64_t seed = spec.base_seed + static_cast<std::uint64_t>(index);
    std::vector<RealizationRow> rows;
    GeneratedInstance inst;
    std::string gen_error;
    try {
        inst = generate_instance(spec.generator, seed);
    } catch (const std::exception& e) {
        gen_error = std::string("generator: ") + e.what();
    }
    for (Algorithm a : spec.algorithms) {
        RealizationRow row;
        row.seed = seed;
        row.algorithm = a;
        row.parameter = inst.parameter;
        if (!gen_error.empty()) {
            row.error = gen_error;
            rows.push_back(std::move(row));
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        try {
            const RankPolicy policy = spec.policy.value_or(RankPolicy::fixed(inst.k));
            const CssResult<double> res = run_css(inst.chi, a, policy, spec.srrqr);
            row.metrics = compute_metrics(inst.chi, res);
            row.swap_count = res.swap_count;
            row.converged = res.converged;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        if (spec.timing)
            row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

SummaryStats summarize(const std::vector<Metric>& metrics, int failed) {
    SummaryStats s;
    s.failed = failed;
    std::vector<double> included;
    for (const Metric& m : metrics) {
        switch (m.state) {
            case MetricState::Value: ++s.values; break;
            case MetricState::FlaggedOne: ++s.flagged_one; break;
            case MetricState::Infinite: ++s.infinite; continue;
            case MetricState::Undefined: ++s.undefined; continue;
        }
        included.push_back(m.effective());
    }
    if (included.empty()) {
        s.mean = s.median = s.min = s.max = s.q1 = s.q3 = kNaN;
        return s;
    }
    std::sort(included.begin(), included.end());
    double sum = 0.0;
    for (double x : included) sum += x;
    s.mean = sum / static_cast<double>(included.size());
    s.min = included.front();
    s.max = included.back();
    s.median = quantile(included, 0.5);
    s.q1 = quantile(included, 0.25);
    s.q3 = quantile(included, 0.75);
    return s;
}

const AlgorithmSummary& AggregateReport::summary(Algorithm a) const {
    for (const auto& s : summaries)
        if (s.algorithm == a) return s;
    throw InputDomainError("report has no rows for algorithm " + std::string(to_string(a)));
}

AggregateReport aggregate(const ExperimentSpec& spec, std::vector<RealizationRow> rows) {
    AggregateReport report;
    report.spec = spec;
    for (Algorithm a : spec.algorithms) {
        std::vector<Metric> tau, g1, g2;
        int failed = 0;
        for (const auto& row : rows) {
            if (row.algorithm != a) continue;
            if (!row.error.empty()) {
                ++failed;
                continue;
            }
            tau.push_back(row.metrics.tau);
            g1.push_back(row.metrics.gamma1);
            g2.push_back(row.metrics.gamma2);
        }
        report.summaries.push_back({a, summarize(tau, failed), summarize(g1, failed), summarize(g2, failed)});
    }
    report.rows = std::move(rows);
    return report;
}

AggregateReport run_experiment(const ExperimentSpec& spec) {
    if (spec.realizations < 1) throw InputDomainError("run_experiment: realizations must be >= 1");
    if (spec.algorithms.empty()) throw InputDomainError("run_experiment: no algorithms");
    (void)spec.generator.resolved();

    std::vector<std::vector<RealizationRow>> slots(static_cast<std::size_t>(spec.realizations));
    const int workers = std::min(spec.threads, spec.realizations);
    if (workers <= 1) {
        for (int i = 0; i < spec.realizations; ++i) slots[static_cast<std::size_t>(i)] = run_realization(spec, i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int i = next++; i < spec.realizations; i = next++)
                    slots[static_cast<std::size_t>(i)] = run_realization(spec, i);
            });
        for (auto& t : pool) t.join();
    }
    std::vector<RealizationRow> rows;
    for (auto& s : slots)
        for (auto& r : s) rows.push_back(std::move(r));
    return aggregate(spec, std::move(rows));
}

// ---------------------------------------------------------------------------

namespace {

json stats_json(const SummaryStats& s) {
    return {{"mean", number_or_null(s.mean)},     {"median", number_or_null(s.median)},
            {"min", number_or_null(s.min)},       {"max", number_or_null(s.max)},
            {"q1", number_or_null(s.q1)},         {"q3", number_or_null(s.q3)},
            {"values", s.values},                 {"flagged_one", s.flagged_one},
            {"infinite", s.infinite},             {"undefined", s.undefined},
            {"failed", s.failed}};
}

const char* kCsvHeader =
    "seed,algorithm,parameter,k,tau,tau_state,gamma1,gamma1_state,gamma2,gamma2_state,sigma_k_chi1,sigma_k_chi,"
    "residual,sigma_k_plus_1,cond_chi1,cond_chi,rank_floor,swap_count,converged,wall_time,error";

std::string csv_metric(const Metric& m) { return m.state == MetricState::Value ? format_double(m.value) : ""; }

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_field(const std::string& s) {
    if (s.empty()) return kNaN;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw InputDomainError("report csv: bad number '" + s + "'");
    return v;
}

}  // namespace

json report_json(const AggregateReport& report) {
    json summary = json::object();
    for (const auto& s : report.summaries)
        summary[std::string(to_string(s.algorithm))] = {
            {"tau", stats_json(s.tau)}, {"gamma1", stats_json(s.gamma1)}, {"gamma2", stats_json(s.gamma2)}};
    int failures = 0;
    for (const auto& r : report.rows) failures += r.error.empty() ? 0 : 1;
    return {{"schema_version", kSchemaVersion},
            {"kind", "bench_report"},
            {"spec", report.spec.to_json()},
            {"rows", report.rows.size()},
            {"failed_rows", failures},
            {"summary", summary}};
}

void write_report_csv(std::ostream& out, const AggregateReport& report) {
    out << kCsvHeader << '\n';
    for (const auto& r : report.rows) {
        const MetricsRecord& m = r.metrics;
        const bool ok = r.error.empty();
        out << r.seed << ',' << to_string(r.algorithm) << ',' << (std::isnan(r.parameter) ? "" : format_double(r.parameter))
            << ',';
        if (ok) {
            out << m.k << ',' << csv_metric(m.tau) << ',' << to_string(m.tau.state) << ',' << csv_metric(m.gamma1) << ','
                << to_string(m.gamma1.state) << ',' << csv_metric(m.gamma2) << ',' << to_string(m.gamma2.state) << ','
                << format_double(m.sigma_k_chi1) << ',' << format_double(m.sigma_k_chi) << ','
                << format_double(m.residual) << ',' << format_double(m.sigma_k_plus_1) << ','
                << format_double(m.cond_chi1) << ',' << format_double(m.cond_chi) << ','
                << format_double(m.rank_floor) << ',' << r.swap_count << ',' << (r.converged ? 1 : 0) << ',';
        } else {
            out << ",,,,,,,,,,,,,,,,";
        }
        out << (r.wall_time >= 0 ? format_double(r.wall_time) : "") << ',' << csv_quote(r.error) << '\n';
    }
}

std::vector<RealizationRow> read_report_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw InputDomainError("report csv: unexpected header");
    std::vector<RealizationRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 21) throw InputDomainError("report csv: expected 21 fields");
        RealizationRow r;
        r.seed = std::stoull(f[0]);
        r.algorithm = parse_algorithm(f[1]);
        r.parameter = parse_field(f[2]);
        r.error = f[20];
        r.wall_time = f[19].empty() ? -1.0 : parse_field(f[19]);
        if (r.error.empty()) {
            auto metric = [&](const std::string& v, const std::string& st) {
                const MetricState s = parse_metric_state(st);
                return s == MetricState::Value ? Metric::of(parse_field(v)) : Metric{s, s == MetricState::FlaggedOne ? 1.0 : 0.0};
            };
            MetricsRecord& m = r.metrics;
            m.k = static_cast<Index>(std::stol(f[3]));
            m.tau = metric(f[4], f[5]);
            m.gamma1 = metric(f[6], f[7]);
            m.gamma2 = metric(f[8], f[9]);
            m.sigma_k_chi1 = parse_field(f[10]);
            m.sigma_k_chi = parse_field(f[11]);
            m.residual = parse_field(f[12]);
            m.sigma_k_plus_1 = parse_field(f[13]);
            m.cond_chi1 = parse_field(f[14]);
            m.cond_chi = parse_field(f[15]);
            m.rank_floor = parse_field(f[16]);
            r.swap_count = std::stoi(f[17]);
            r.converged = f[18] == "1";
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------

GramLossReport gram_loss_demo(double eta) {
    if (!(eta >= 0.0)) throw InputDomainError("gram_loss_demo: eta must be nonnegative");
    GramLossReport r;
    r.eta = eta;
    r.chi.resize(3, 2);
    r.chi << 1, 1, 1e-9, 0, 0, 1e-9;
    r.gram = r.chi.transpose() * r.chi;
    r.gram_is_all_ones = (r.gram.array() == 1.0).all();

    // The Gram route, deliberately: this is the computation the demo warns against.
    Eigen::SelfAdjointEigenSolver<Matrix> es(r.gram, Eigen::EigenvaluesOnly);
    r.gram_eigenvalues = es.eigenvalues().reverse();
    const double top = r.gram_eigenvalues(0);
    for (Index i = 0; i < r.gram_eigenvalues.size(); ++i)
        if (r.gram_eigenvalues(i) > eta * top) ++r.gram_rank;

    r.sigma = singular_values(r.chi);
    r.css_rank = run_css(r.chi, Algorithm::Srrqr, RankPolicy::relative(eta)).k;
    return r;
}

json to_json(const GramLossReport& r) {
    auto vec = [](const Vector& v) {
        json a = json::array();
        for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
        return a;
    };
    auto mat = [&](const Matrix& m) {
        json a = json::array();
        for (Index i = 0; i < m.rows(); ++i) a.push_back(vec(m.row(i).transpose()));
        return a;
    };
    return {{"schema_version", kSchemaVersion},
            {"kind", "gram_demo"},
            {"eta", r.eta},
            {"matrix", mat(r.chi)},
            {"gram", mat(r.gram)},
            {"gram_is_all_ones", r.gram_is_all_ones},
            {"gram_eigenvalues", vec(r.gram_eigenvalues)},
            {"singular_values", vec(r.sigma)},
            {"gram_rank", r.gram_rank},
            {"css_rank", r.css_rank}};
}

}  // namespace idcss
