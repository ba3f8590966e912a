#include "idcss/cli.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "idcss/adversarial.hpp"
#include "idcss/bench.hpp"
#include "idcss/css.hpp"
#include "idcss/matrix_io.hpp"
#include "idcss/ode_sens.hpp"

namespace idcss::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// --k-policy on the command line.
struct PolicyFlags {
    std::string mode = "gap";
    std::optional<long> k;
    std::optional<double> eta;

    RankPolicy resolve() const {
        if (mode == "gap") return RankPolicy::gap();
        if (mode == "fixed") {
            if (!k) throw InputDomainError("--k-policy fixed needs --k");
            if (*k < 1) throw InputDomainError("--k must be positive");
            return RankPolicy::fixed(static_cast<Index>(*k));
        }
        if (!eta) throw InputDomainError("--k-policy " + mode + " needs --eta");
        return mode == "relative" ? RankPolicy::relative(*eta) : RankPolicy::absolute(*eta);
    }

    json to_json() const {
        json j = {{"mode", mode}};
        if (k) j["k"] = *k;
        if (eta) j["eta"] = *eta;
        return j;
    }
};

std::string env_name(const std::string& flag) {
    std::string name = "IDCSS_";
    for (char c : flag.substr(flag.find_first_not_of('-')))
        name += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return name;
}

template <typename T>
CLI::Option* flag(CLI::App* app, const std::string& name, T& target, const std::string& help) {
    return app->add_option(name, target, help)->envname(env_name(name));
}

json metric_json(const Metric& m) {
    json j = {{"state", to_string(m.state)}};
    j["value"] = m.state == MetricState::Value ? json(m.value) : m.state == MetricState::FlaggedOne ? json(1.0) : json();
    return j;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(); }

json vector_json(const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(finite_or_null(v(i)));
    return a;
}

Matrix matrix_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty())
        throw InputDomainError(std::string("svd file: '") + what + "' must be a nonempty array of rows");
    Matrix m(static_cast<Index>(j.size()), static_cast<Index>(j[0].size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != j[0].size())
            throw InputDomainError(std::string("svd file: ragged rows in '") + what + "'");
        for (std::size_t c = 0; c < j[i].size(); ++c) {
            if (!j[i][c].is_number()) throw InputDomainError(std::string("svd file: non-numeric entry in '") + what + "'");
            m(static_cast<Index>(i), static_cast<Index>(c)) = j[i][c].get<double>();
        }
    }
    return m;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputDomainError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputDomainError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputDomainError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw InputDomainError("write failed: '" + path.string() + "'");
}

// JSON goes to --out when given, standard output otherwise.
void emit(const json& j, const std::string& out_path, std::ostream& out) {
    const std::string text = j.dump(2) + "\n";
    if (out_path.empty())
        out << text;
    else
        write_text(out_path, text);
}

fs::path sidecar_path(const fs::path& matrix_path) { return fs::path(matrix_path.string() + ".json"); }

MatrixFormat output_format(const std::string& name, const fs::path& path) {
    return name.empty() ? format_for_path(path) : parse_format(name);
}

std::string format_name(MatrixFormat f) { return f == MatrixFormat::Csv ? "csv" : "matrixmarket"; }

json qr_permutation_json(const Permutation& perm) {
    json a = json::array();
    for (Index j = 0; j < perm.size(); ++j) a.push_back(perm[j]);
    return a;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
    std::string input;
    std::string algorithm = "srrqr";
    PolicyFlags policy;
    double f = defaults::kSrrqrF;
    std::string out;
};

void cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
    const Matrix chi = load_matrix(a.input);
    const Algorithm alg = parse_algorithm(a.algorithm);
    SrrqrConfig cfg;
    cfg.f = a.f;
    if (!(cfg.f >= 1.0)) throw InputDomainError("--f must be >= 1");
    const CssResult<double> res = run_css(chi, alg, a.policy.resolve(), cfg);
    const MetricsRecord m = compute_metrics(chi, res);

    json checks = json::array();
    bool all_hold = true;
    for (const auto& c : check_bounds(chi, res, cfg.f)) {
        checks.push_back({{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"holds", c.holds}});
        all_hold = all_hold && c.holds;
    }
    json j = {{"schema_version", kSchemaVersion},
              {"kind", "analysis"},
              {"input", a.input},
              {"n", chi.rows()},
              {"p", chi.cols()},
              {"algorithm", to_string(alg)},
              {"k_policy", a.policy.to_json()},
              {"f", cfg.f},
              {"k", res.k},
              {"rank_degenerate", res.rank_degenerate},
              {"full_rank_bypass", res.full_rank_bypass},
              {"identifiable", res.identifiable},
              {"unidentifiable", res.unidentifiable},
              {"permutation", qr_permutation_json(res.factors.perm)},
              {"swap_count", res.swap_count},
              {"converged", res.converged},
              {"singular_values", vector_json(singular_values(chi))},
              {"metrics",
               {{"tau", metric_json(m.tau)},
                {"gamma1", metric_json(m.gamma1)},
                {"gamma2", metric_json(m.gamma2)},
                {"sigma_k_chi1", m.sigma_k_chi1},
                {"sigma_k_chi", m.sigma_k_chi},
                {"residual", m.residual},
                {"sigma_k_plus_1", finite_or_null(m.sigma_k_plus_1)},
                {"cond_chi1", finite_or_null(m.cond_chi1)},
                {"cond_chi", finite_or_null(m.cond_chi)},
                {"rank_floor", m.rank_floor}}},
              {"bound_checks", checks},
              {"bounds_hold", all_hold}};
    emit(j, a.out, out);
}

struct GenerateArgs {
    std::string family;
    long n = 0, p = 0, k = 0, block_size = 5;
    std::optional<double> zeta;
    std::uint64_t seed = defaults::kBaseSeed;
    std::string out;
    std::string format;
};

void cmd_generate(const GenerateArgs& a) {
    if (a.n < 0 || a.p < 0 || a.k < 0 || a.block_size < 1) throw InputDomainError("dimensions must be nonnegative");
    GeneratorSpec g;
    g.family = parse_family(a.family);
    g.n = a.n;
    g.p = a.p;
    g.k = a.k;
    g.block_size = a.block_size;
    if (a.zeta) g.zeta_lo = g.zeta_hi = *a.zeta;
    g = g.resolved();
    const GeneratedInstance inst = generate_instance(g, a.seed);

    const fs::path path = a.out;
    const MatrixFormat fmt = output_format(a.format, path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_matrix(path, inst.chi, fmt);
    json side = {{"schema_version", kSchemaVersion},
                 {"kind", "generated_matrix"},
                 {"family", to_string(g.family)},
                 {"seed", a.seed},
                 {"n", g.n},
                 {"p", g.p},
                 {"k", inst.k},
                 {"parameter", finite_or_null(inst.parameter)},
                 {"matrix", path.filename().string()},
                 {"format", format_name(fmt)}};
    if (g.family == Family::Jolliffe) side["block_size"] = g.block_size;
    write_text(sidecar_path(path), side.dump(2) + "\n");
}

struct BenchArgs {
    std::string spec;
    std::string out_dir;
    std::optional<long> threads;
};

void cmd_bench(const BenchArgs& a, std::ostream& out) {
    ExperimentSpec spec = ExperimentSpec::from_json(read_json_file(a.spec));
    if (a.threads) spec.threads = static_cast<int>(std::max(1L, *a.threads));
    const AggregateReport report = run_experiment(spec);
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    json j = report_json(report);
    // Thread count never changes results; keep it out of the files so they stay comparable.
    j["spec"].erase("threads");
    write_text(dir / "report.json", j.dump(2) + "\n");
    std::ostringstream csv;
    write_report_csv(csv, report);
    write_text(dir / "rows.csv", csv.str());
    out << "wrote " << (dir / "report.json").string() << " and " << (dir / "rows.csv").string() << " ("
        << report.rows.size() << " rows)\n";
}

struct SvirArgs {
    SvirParams q;
    SvirState ic;
    double final_day = defaults::kFinalDay;
    long observations = defaults::kObservations;
    long substeps = defaults::kSubsteps;
    std::string method = "complex-step";
    double neighborhood = 0.0;
    std::uint64_t seed = defaults::kBaseSeed;
    std::string out;
    std::string format;
};

void cmd_svir(SvirArgs a) {
    if (a.observations < 2) throw InputDomainError("--observations must be at least 2");
    if (a.substeps < 1) throw InputDomainError("--substeps must be positive");
    SensMethod method;
    if (a.method == "complex-step")
        method = SensMethod::complex_step();
    else if (a.method == "central-fd")
        method = SensMethod::central_fd();
    else
        throw InputDomainError("--method must be complex-step or central-fd");
    const SvirParams q = a.neighborhood > 0.0 ? sample_nominal_neighborhood(a.q, a.neighborhood, a.seed) : a.q;
    const TimeGrid grid = TimeGrid::uniform(0.0, a.final_day, static_cast<Index>(a.observations));
    const Matrix chi = svir_sensitivity(q, a.ic, grid, method, static_cast<int>(a.substeps));

    const fs::path path = a.out;
    const MatrixFormat fmt = output_format(a.format, path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_matrix(path, chi, fmt);
    json side = {{"schema_version", kSchemaVersion},
                 {"kind", "svir_sensitivity"},
                 {"params", {{"beta", q.beta}, {"nu", q.nu}, {"alpha", q.alpha}, {"gamma", q.gamma}}},
                 {"columns", {"beta", "nu", "alpha", "gamma"}},
                 {"initial", {{"s", a.ic.s}, {"v", a.ic.v}, {"i", a.ic.i}, {"r", a.ic.r}, {"population", a.ic.population}}},
                 {"final_day", a.final_day},
                 {"observations", a.observations},
                 {"substeps", a.substeps},
                 {"method", a.method},
                 {"neighborhood", a.neighborhood},
                 {"seed", a.seed},
                 {"n", chi.rows()},
                 {"p", chi.cols()},
                 {"matrix", path.filename().string()},
                 {"format", format_name(fmt)}};
    write_text(sidecar_path(path), side.dump(2) + "\n");
}

struct VerifyArgs {
    std::string svd;
    double horizon = 1.0;
    double tol = 1e-10;
    std::uint64_t seed = defaults::kBaseSeed;
    std::string out;
};

SvdFactors<double> load_svd(const fs::path& path) {
    if (path.extension() != ".json") return svd(load_matrix(path));
    const json j = read_json_file(path);
    if (!j.is_object() || !j.contains("u") || !j.contains("sigma") || !j.contains("v"))
        throw InputDomainError("svd file: expected keys 'u', 'sigma' and 'v'");
    SvdFactors<double> f;
    f.u = matrix_from_json(j["u"], "u");
    f.v = matrix_from_json(j["v"], "v");
    if (!j["sigma"].is_array() || j["sigma"].empty()) throw InputDomainError("svd file: 'sigma' must be a nonempty array");
    f.sigma.resize(static_cast<Index>(j["sigma"].size()));
    for (std::size_t i = 0; i < j["sigma"].size(); ++i) {
        if (!j["sigma"][i].is_number()) throw InputDomainError("svd file: non-numeric sigma");
        f.sigma(static_cast<Index>(i)) = j["sigma"][i].get<double>();
    }
    const Index p = f.sigma.size();
    if (f.u.cols() != p || f.v.rows() != p || f.v.cols() != p || f.u.rows() < p)
        throw InputDomainError("svd file: shapes must be u n x p, sigma p, v p x p with n >= p");
    return f;
}

int cmd_verify_dyn(const VerifyArgs& a, std::ostream& out) {
    const PrescribedSystem sys = build_prescribed_system(load_svd(a.svd), a.horizon);
    Rng rng(a.seed);
    Vector q(sys.v.rows());
    for (Index i = 0; i < q.size(); ++i) q(i) = rng.gaussian();
    const PrescribedCheck check = verify_prescribed_sensitivity(sys, q, a.tol);
    json j = {{"schema_version", kSchemaVersion},
              {"kind", "verify_dyn"},
              {"input", a.svd},
              {"horizon", a.horizon},
              {"tol", a.tol},
              {"seed", a.seed},
              {"n", sys.u.rows()},
              {"p", sys.v.rows()},
              {"lambda", vector_json(sys.lambda)},
              {"relative_error", finite_or_null(check.relative_error)},
              {"passed", check.passed}};
    emit(j, a.out, out);
    return check.passed ? kExitOk : kExitNumerical;
}

void cmd_gram_demo(double eta, const std::string& out_path, std::ostream& out) {
    emit(to_json(gram_loss_demo(eta)), out_path, out);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Parameter identifiability by column subset selection"};
    app.name("idcss");
    app.require_subcommand(1);

    AnalyzeArgs analyze;
    CLI::App* an = app.add_subcommand("analyze", "Select identifiable columns of a sensitivity matrix");
    flag(an, "--input", analyze.input, "Matrix file (CSV or MatrixMarket)")->required();
    flag(an, "--algorithm", analyze.algorithm, "b1, b4, b3 or srrqr")->capture_default_str();
    flag(an, "--k-policy", analyze.policy.mode, "gap, fixed, relative or absolute")
        ->check(CLI::IsMember({"gap", "fixed", "relative", "absolute"}))
        ->capture_default_str();
    flag(an, "--k", analyze.policy.k, "k for --k-policy fixed");
    flag(an, "--eta", analyze.policy.eta, "Threshold for relative / absolute policies");
    flag(an, "--f", analyze.f, "SRRQR swap threshold")->capture_default_str();
    flag(an, "--out", analyze.out, "JSON output path (default: standard output)");

    GenerateArgs gen;
    CLI::App* ge = app.add_subcommand("generate", "Write a test matrix and its JSON sidecar");
    flag(ge, "--family", gen.family, "identity, kahan, gueis, jolliffe, sorem, ships or gaussian")->required();
    flag(ge, "--n", gen.n, "Rows (0: family default)");
    flag(ge, "--p", gen.p, "Columns (0: family default)");
    flag(ge, "--k", gen.k, "Designated k (0: family default)");
    flag(ge, "--block-size", gen.block_size, "Jolliffe block size")->capture_default_str();
    flag(ge, "--zeta", gen.zeta, "Kahan / Gu-Eisenstat zeta (default: drawn from the seed)");
    flag(ge, "--seed", gen.seed, "Seed")->capture_default_str();
    flag(ge, "--out", gen.out, "Matrix output path; the sidecar is <out>.json")->required();
    flag(ge, "--format", gen.format, "csv or matrixmarket (default: from the extension)");

    BenchArgs bench;
    CLI::App* be = app.add_subcommand("bench", "Run a multi-realization experiment");
    flag(be, "--spec", bench.spec, "Experiment spec (JSON)")->required();
    flag(be, "--out-dir", bench.out_dir, "Directory for report.json and rows.csv")->required();
    flag(be, "--threads", bench.threads, "Worker threads (overrides the spec)");

    SvirArgs svir;
    CLI::App* sv = app.add_subcommand("svir", "Write the SVIR sensitivity matrix and its JSON sidecar");
    flag(sv, "--beta", svir.q.beta, "Transmission coefficient")->capture_default_str();
    flag(sv, "--nu", svir.q.nu, "Vaccination rate")->capture_default_str();
    flag(sv, "--alpha", svir.q.alpha, "Infection probability after vaccination")->capture_default_str();
    flag(sv, "--gamma", svir.q.gamma, "Recovery rate")->capture_default_str();
    flag(sv, "--s0", svir.ic.s, "Initial susceptible")->capture_default_str();
    flag(sv, "--v0", svir.ic.v, "Initial vaccinated")->capture_default_str();
    flag(sv, "--i0", svir.ic.i, "Initial infected")->capture_default_str();
    flag(sv, "--r0", svir.ic.r, "Initial recovered")->capture_default_str();
    flag(sv, "--population", svir.ic.population, "Population N in the rates")->capture_default_str();
    flag(sv, "--final-day", svir.final_day, "Last observation time")->capture_default_str();
    flag(sv, "--observations", svir.observations, "Number of equally spaced observations")->capture_default_str();
    flag(sv, "--substeps", svir.substeps, "RK4 steps between observations")->capture_default_str();
    flag(sv, "--method", svir.method, "complex-step or central-fd")->capture_default_str();
    flag(sv, "--neighborhood", svir.neighborhood, "Draw parameters within this fraction of the given ones");
    flag(sv, "--seed", svir.seed, "Seed for --neighborhood")->capture_default_str();
    flag(sv, "--out", svir.out, "Matrix output path; the sidecar is <out>.json")->required();
    flag(sv, "--format", svir.format, "csv or matrixmarket (default: from the extension)");

    VerifyArgs verify;
    CLI::App* vd = app.add_subcommand("verify-dyn", "Check the linear system built to have a prescribed sensitivity");
    flag(vd, "--svd", verify.svd, "SVD as JSON {u, sigma, v}, or a matrix file to factor")->required();
    flag(vd, "--horizon", verify.horizon, "Observation time T")->capture_default_str();
    flag(vd, "--tol", verify.tol, "Pass threshold on the relative error")->capture_default_str();
    flag(vd, "--seed", verify.seed, "Seed for the nominal parameter vector")->capture_default_str();
    flag(vd, "--out", verify.out, "JSON output path (default: standard output)");

    double eta = 1e-12;
    std::string gram_out;
    CLI::App* gd = app.add_subcommand("gram-demo", "Rank lost by forming the Gram matrix");
    flag(gd, "--eta", eta, "Relative rank threshold")->capture_default_str();
    flag(gd, "--out", gram_out, "JSON output path (default: standard output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*an) cmd_analyze(analyze, out);
        if (*ge) cmd_generate(gen);
        if (*be) cmd_bench(bench, out);
        if (*sv) cmd_svir(svir);
        if (*vd) return cmd_verify_dyn(verify, out);
        if (*gd) cmd_gram_demo(eta, gram_out, out);
    } catch (const InputDomainError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalFailure& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"idcss"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace idcss::cli
