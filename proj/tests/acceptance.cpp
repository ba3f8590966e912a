// Acceptance run: one PASS/FAIL line per criterion.
//
// Exit status is nonzero when a criterion fails that is not in kKnownRed, or
// when a known-red criterion starts passing (so the list gets updated).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <unistd.h>

#include "idcss/adversarial.hpp"
#include "idcss/bench.hpp"
#include "idcss/cli.hpp"
#include "idcss/css.hpp"
#include "idcss/ode_sens.hpp"
#include "oracles.hpp"
#include "theorem_checks.hpp"

using namespace idcss;
namespace fs = std::filesystem;

namespace {

// Criteria that fail for reasons recorded in the README; see the detail lines.
const std::set<int> kKnownRed = {1, 5, 6};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

std::string g(double x) { return fmt("%.3g", x); }

CssResult<double> run_alg(Algorithm a, const Matrix& chi, Index k, double f) {
    SrrqrConfig cfg;
    cfg.f = f;
    return run_css(chi, a, RankPolicy::fixed(k), cfg);
}

// 1 -------------------------------------------------------------------------
Outcome theorem_suite() {
    std::map<std::string, int> stated, proven;
    int instances = 0;
    auto consider = [&](const Matrix& chi, Index k, double f) {
        for (Algorithm a : kAllAlgorithms) {
            const auto res = run_alg(a, chi, k, f);
            theorem::Options opt;
            opt.f = f;
            for (const auto& v : theorem::check(chi, res, opt)) ++stated[v.what];
            opt.proven_form = true;
            for (const auto& v : theorem::check(chi, res, opt)) ++proven[v.what];
            ++instances;
        }
    };
    std::mt19937_64 gen(20240601);
    for (int m = 0; m < 200; ++m) {
        const Index p = 5 + static_cast<Index>(gen() % 21);
        const Index n = p + static_cast<Index>(gen() % static_cast<std::uint64_t>(41 - p));
        const std::uint64_t seed = gen();
        const Matrix chi = (m % 2) ? oracle::gaussian(n, p, seed) : oracle::with_spectrum(n, p, -8, 3, seed);
        std::set<Index> ks{3, p / 2, p - 2};
        for (Index k : ks) consider(chi, k, 1.0);
    }
    for (double zeta : {0.9, 0.95, 0.99, 0.999}) consider(gen_kahan(100, zeta), 99, 1.0);
    for (double zeta : {0.9, 0.95, 0.99, 0.999}) consider(gen_gu_eisenstat(50, zeta), 48, std::sqrt(2.0));
    for (Family fam : {Family::Jolliffe, Family::SorensenEmbree, Family::Ships})
        for (std::uint64_t seed = 1; seed <= 4; ++seed) {
            GeneratorSpec spec;
            spec.family = fam;
            const auto inst = generate_instance(spec, seed);
            consider(inst.chi, inst.k, 1.0);
        }

    auto total = [](const std::map<std::string, int>& m) {
        int t = 0;
        for (const auto& [_, c] : m) t += c;
        return t;
    };
    std::string detail = std::to_string(instances) + " runs, " + std::to_string(total(stated)) + " violations";
    for (const auto& [what, c] : stated) detail += "; " + what + " x" + std::to_string(c);
    detail += "; with the factor p the B1/B4 proofs carry: " + std::to_string(total(proven)) +
              ". The B3 cap 2^(k-1) is only proven when B4 pivots V1^T, not for the greedy column-norm selection";
    return {stated.empty(), detail};
}

// 2 -------------------------------------------------------------------------
Outcome rho_identity() {
    std::mt19937_64 gen(77);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const Index p = 2 + static_cast<Index>(gen() % 11);
        const Index k = 1 + static_cast<Index>(gen() % static_cast<std::uint64_t>(p - 1));
        Matrix r = oracle::gaussian(p, p, gen()).triangularView<Eigen::Upper>();
        for (Index i = 0; i < p; ++i) r(i, i) = std::abs(r(i, i)) + 0.1;
        const Matrix rho = srrqr_rho_matrix(r, k);
        const double base = oracle::leading_abs_det(r, k);
        for (Index i = 0; i < k; ++i)
            for (Index j = 0; j < p - k; ++j) {
                Matrix swapped = r;
                swapped.col(i).swap(swapped.col(k + j));
                const double ratio = oracle::leading_abs_det(swapped, k) / base;
                worst = std::max(worst, std::abs(rho(i, j) - ratio) / ratio);
            }
    }
    return {worst <= 1e-10, "max relative error " + g(worst)};
}

// 3 -------------------------------------------------------------------------
Outcome gram_demo() {
    const auto r = gram_loss_demo(1e-12);
    return {r.gram_rank == 1 && r.css_rank == 2,
            "gram_rank " + std::to_string(r.gram_rank) + ", css_rank " + std::to_string(r.css_rank)};
}

// 4-8 -----------------------------------------------------------------------
AggregateReport experiment(Family fam, double f = 1.0) {
    ExperimentSpec spec;
    spec.generator.family = fam;
    spec.realizations = 100;
    spec.srrqr.f = f;
    return run_experiment(spec);
}

double mean(const AggregateReport& r, Algorithm a, int metric) {
    const auto& s = r.summary(a);
    return (metric == 0 ? s.tau : metric == 1 ? s.gamma1 : s.gamma2).mean;
}

constexpr int kTau = 0, kG1 = 1, kG2 = 2;
using A = Algorithm;

Outcome kahan() {
    const auto r = experiment(Family::Kahan);
    bool ok = true;
    std::string d;
    for (A a : {A::B1, A::B3, A::Srrqr}) {
        const double m = mean(r, a, kG1);
        ok = ok && m >= 0.95 && m <= 1.0;
        d += "g1(" + std::string(to_string(a)) + ")=" + g(m) + " ";
    }
    ok = ok && mean(r, A::B4, kG1) <= 1e-2 && mean(r, A::B4, kG2) >= 1e8;
    d += "g1(b4)=" + g(mean(r, A::B4, kG1)) + " g2(b4)=" + g(mean(r, A::B4, kG2));
    for (A a : {A::B1, A::B3, A::Srrqr}) {
        ok = ok && mean(r, a, kG2) <= 1e5;
        d += " g2(" + std::string(to_string(a)) + ")=" + g(mean(r, a, kG2));
    }
    return {ok, d};
}

Outcome gu_eisenstat() {
    const auto r = experiment(Family::GuEisenstat, std::sqrt(2.0));
    bool ok = mean(r, A::B4, kG2) >= 1e4;
    std::string d = "g2(b4)=" + g(mean(r, A::B4, kG2));
    for (A a : {A::B1, A::B3, A::Srrqr}) {
        ok = ok && mean(r, a, kG2) <= 10.0;
        d += " g2(" + std::string(to_string(a)) + ")=" + g(mean(r, a, kG2));
    }
    d += "; sigma_k = sigma_k+1 = mu for this matrix, so no choice of k columns can give gamma2 > 1";
    return {ok, d};
}

Outcome sorensen_embree() {
    const auto r = experiment(Family::SorensenEmbree);
    const double lo = std::max(mean(r, A::B4, kG1), mean(r, A::B3, kG1));
    const double b1 = mean(r, A::B1, kG1), sr = mean(r, A::Srrqr, kG1);
    const bool ok = b1 >= 1.2 * lo && sr >= 1.2 * lo && mean(r, A::B3, kG2) <= mean(r, A::B1, kG2);
    return {ok, "g1 b1 " + g(b1) + ", srrqr " + g(sr) + ", b4 " + g(mean(r, A::B4, kG1)) + ", b3 " +
                    g(mean(r, A::B3, kG1)) + " (ratio " + g(std::min(b1, sr) / lo) + ", need 1.2); g2 b3 " +
                    g(mean(r, A::B3, kG2)) + " <= b1 " + g(mean(r, A::B1, kG2))};
}

Outcome ships() {
    const auto r = experiment(Family::Ships);
    bool ok = true;
    std::string d = "srrqr tau " + g(mean(r, A::Srrqr, kTau)) + " g1 " + g(mean(r, A::Srrqr, kG1)) + "; others";
    for (A a : {A::B1, A::B4, A::B3}) {
        ok = ok && mean(r, A::Srrqr, kTau) <= mean(r, a, kTau) && mean(r, A::Srrqr, kG1) >= mean(r, a, kG1);
        d += " " + std::string(to_string(a)) + " (" + g(mean(r, a, kTau)) + ", " + g(mean(r, a, kG1)) + ")";
    }
    return {ok, d};
}

Outcome jolliffe() {
    const auto r = experiment(Family::Jolliffe);
    auto spread = [&](int metric) {
        double lo = INFINITY, hi = -INFINITY;
        for (A a : kAllAlgorithms) lo = std::min(lo, mean(r, a, metric)), hi = std::max(hi, mean(r, a, metric));
        return hi / lo - 1.0;
    };
    const double s1 = spread(kG1), s2 = spread(kG2);
    return {s1 <= 0.05 && s2 <= 0.05, "relative spread of means: g1 " + g(s1) + ", g2 " + g(s2)};
}

// 9 -------------------------------------------------------------------------
Outcome svir() {
    const TimeGrid grid = TimeGrid::defaults_grid();
    const Matrix cs = svir_sensitivity(SvirParams{}, SvirState{}, grid, SensMethod::complex_step());
    const Matrix fd = svir_sensitivity(SvirParams{}, SvirState{}, grid, SensMethod::central_fd());
    const double agree = (cs - fd).norm() / cs.norm();
    bool ok = cs.rows() == 31 && cs.cols() == 4 && agree <= 1e-6;
    std::string d = "cs vs fd " + g(agree);
    for (A a : kAllAlgorithms) {
        const auto res = run_css(cs, a, RankPolicy::gap());
        const auto m = compute_metrics(cs, res);
        ok = ok && res.k == 3 && m.gamma1.state == MetricState::Value && m.gamma2.state == MetricState::Value &&
             m.gamma1.value >= 0.8 && m.gamma1.value <= 1.0 + 1e-12 && m.gamma2.value >= 1.0 - 1e-12 &&
             m.gamma2.value <= 1.3;
        d += "; " + std::string(to_string(a)) + " k=" + std::to_string(res.k) + " g1=" + fmt("%.4f", m.gamma1.value) +
             " g2=" + fmt("%.4f", m.gamma2.value);
    }
    return {ok, d};
}

// 10 ------------------------------------------------------------------------
Outcome prescribed() {
    std::mt19937_64 gen(10);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const Index p = 1 + static_cast<Index>(gen() % 8);
        const Index n = p + static_cast<Index>(gen() % static_cast<std::uint64_t>(13 - p));
        const std::uint64_t seed = gen();
        const Matrix a = oracle::with_spectrum(n, p, -3, 2, seed);
        const auto sys = build_prescribed_system(svd(a), 1.0);
        worst = std::max(worst, verify_prescribed_sensitivity(sys, oracle::gaussian(p, 1, seed + 1), 1e-10).relative_error);
    }
    bool rejected = false;
    SvdFactors<double> z;
    z.u = Matrix::Identity(3, 2);
    z.v = Matrix::Identity(2, 2);
    z.sigma = Vector(2);
    z.sigma << 1.0, 0.0;
    try {
        (void)build_prescribed_system(z, 1.0);
    } catch (const InputDomainError&) {
        rejected = true;
    }
    return {worst <= 1e-10 && rejected,
            "max relative error " + g(worst) + ", zero sigma " + (rejected ? "rejected" : "accepted")};
}

// 11 ------------------------------------------------------------------------
Outcome rk4_order() {
    auto err = [](int steps) {
        TimeGrid grid;
        grid.times = {0.0, 1.0};
        Vector x0(1);
        x0 << 1.0;
        const Matrix t = integrate<double>([](double, const Vector& x) -> Vector { return -x; }, x0, grid, steps);
        return std::abs(t(1, 0) - std::exp(-1.0));
    };
    double lo = INFINITY, hi = -INFINITY;
    for (int s : {10, 20, 40}) {
        const double order = std::log2(err(s) / err(2 * s));
        lo = std::min(lo, order);
        hi = std::max(hi, order);
    }
    return {lo >= 3.8 && hi <= 4.2, "observed order in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "]"};
}

// 12 ------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome cli_determinism() {
    const fs::path root = fs::temp_directory_path() / ("idcss_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    struct Case {
        std::vector<std::string> args;
        std::vector<std::string> files;
    };
    std::vector<Case> cases;
    for (const char* fam : {"identity", "kahan", "gueis", "jolliffe", "sorem", "ships", "gaussian"})
        cases.push_back({{"generate", "--family", fam, "--seed", "7", "--out", "{d}/m.csv"}, {"m.csv", "m.csv.json"}});
    cases.push_back({{"generate", "--family", "ships", "--seed", "7", "--out", "{d}/m.mtx"}, {"m.mtx", "m.mtx.json"}});
    cases.push_back({{"svir", "--out", "{d}/s.csv"}, {"s.csv", "s.csv.json"}});
    cases.push_back({{"svir", "--neighborhood", "0.5", "--seed", "3", "--method", "central-fd", "--out", "{d}/s.csv"},
                     {"s.csv", "s.csv.json"}});
    cases.push_back({{"analyze", "--input", "{root}/input.csv", "--out", "{d}/a.json"}, {"a.json"}});
    cases.push_back({{"verify-dyn", "--svd", "{root}/input.csv", "--out", "{d}/v.json"}, {"v.json"}});
    cases.push_back({{"gram-demo", "--out", "{d}/g.json"}, {"g.json"}});
    cases.push_back({{"bench", "--spec", "{root}/spec.json", "--out-dir", "{d}/b"}, {"b/rows.csv", "b/report.json"}});
    cases.push_back({{"bench", "--spec", "{root}/spec.json", "--threads", "4", "--out-dir", "{d}/b"},
                     {"b/rows.csv", "b/report.json"}});

    fs::create_directories(root);
    std::ofstream(root / "spec.json") << R"({"generator": {"family": "kahan", "n": 30}, "realizations": 6})";
    {
        std::ostringstream out, err;
        cli::run({"generate", "--family", "sorem", "--seed", "2", "--out", (root / "input.csv").string()}, out, err);
    }

    int ok = 0;
    std::string bad;
    for (std::size_t c = 0; c < cases.size(); ++c) {
        std::string seen[2];
        bool ran = true;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path d = root / ("case" + std::to_string(c)) / (rep ? "b" : "a");
            fs::create_directories(d);
            std::vector<std::string> args;
            for (std::string a : cases[c].args) {
                for (auto [key, val] : {std::pair<std::string, std::string>{"{d}", d.string()}, {"{root}", root.string()}})
                    if (auto pos = a.find(key); pos != std::string::npos) a.replace(pos, key.size(), val);
                args.push_back(a);
            }
            std::ostringstream out, err;
            ran = ran && cli::run(args, out, err) == 0;
            for (const auto& f : cases[c].files) seen[rep] += slurp(d / f) + '\0';
        }
        if (ran && !seen[0].empty() && seen[0] == seen[1])
            ++ok;
        else
            bad += " " + cases[c].args[0] + "#" + std::to_string(c);
    }
    fs::remove_all(root);
    return {ok == static_cast<int>(cases.size()),
            std::to_string(ok) + "/" + std::to_string(cases.size()) + " commands byte-identical on rerun" + bad};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"theorem bounds as stated, 200 random + adversarial", theorem_suite},
        {"rho determinant identity, 500 instances", rho_identity},
        {"Gram-loss demo ranks", gram_demo},
        {"Kahan n=100, 100 realizations", kahan},
        {"Gu-Eisenstat n=50, 100 realizations", gu_eisenstat},
        {"Sorensen-Embree 60x30 k=8 ordering", sorensen_embree},
        {"SHIPS 60x30 k=8: srrqr best tau and gamma1", ships},
        {"Jolliffe: algorithms agree within 5%", jolliffe},
        {"SVIR pipeline", svir},
        {"prescribed-sensitivity system, 50 SVDs", prescribed},
        {"RK4 order", rk4_order},
        {"CLI determinism", cli_determinism},
    };
    int unexpected = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool known = kKnownRed.count(id) > 0;
        std::printf("%s %2d  %s [%.1fs]: %s%s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), secs,
                    o.detail.c_str(), !o.pass && known ? " (known)" : "");
        std::fflush(stdout);
        if (o.pass == known) ++unexpected;
    }
    if (unexpected) std::printf("%d criterion outcome(s) differ from the known list\n", unexpected);
    return unexpected ? 1 : 0;
}
