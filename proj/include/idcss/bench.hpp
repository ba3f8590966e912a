#pragma once

// Subset-selection quality metrics and the multi-realization experiment runner.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "idcss/adversarial.hpp"
#include "idcss/css.hpp"

namespace idcss {

inline constexpr int kSchemaVersion = 1;

// Value, flagged-1, or undefined; an undefined metric records whether it came from a
// vanishing denominator alone (Infinite) or from an infinite cond(chi) (Undefined).
enum class MetricState {
    Value,
    FlaggedOne,  // 0/0 from an exactly deficient split; reported as 1
    Infinite,
    Undefined,
};

std::string_view to_string(MetricState s);
MetricState parse_metric_state(std::string_view s);

struct Metric {
    MetricState state = MetricState::Undefined;
    double value = 0.0;  // meaningful for Value only

    static Metric of(double v) { return {MetricState::Value, v}; }
    static Metric flagged_one() { return {MetricState::FlaggedOne, 1.0}; }
    static Metric infinite() { return {MetricState::Infinite, 0.0}; }
    static Metric undefined() { return {MetricState::Undefined, 0.0}; }

    // 1 for FlaggedOne, +inf for Infinite, NaN for Undefined.
    double effective() const;
    bool operator==(const Metric&) const = default;
};

struct MetricsRecord {
    Index k = 0;
    Metric tau;
    Metric gamma1;
    Metric gamma2;
    double sigma_k_chi1 = 0.0;
    double sigma_k_chi = 0.0;
    double residual = 0.0;
    double sigma_k_plus_1 = 0.0;  // NaN when k = p
    double cond_chi1 = 0.0;       // +inf when numerically singular
    double cond_chi = 0.0;
    double rank_floor = 0.0;      // tol_rank * sigma_1
};

/// gamma1 = sigma_k(chi1) / sigma_k(chi), gamma2 = ||(I - chi1 chi1^+) chi2|| / sigma_{k+1}(chi),
/// tau = cond(chi1) / cond(chi). sigma_k(chi1) and the residual come from R11 and R22,
/// which have the same singular values as chi1 and the projected chi2.
MetricsRecord compute_metrics(const Matrix& chi, const CssResult<double>& result, const Tolerances& tol = {});

/// The tri-state rules applied to raw quantities; compute_metrics goes through here,
/// so records rebuilt from persisted raw values match exactly.
MetricsRecord metrics_from_raw(Index k, double sigma_k_chi1, double sigma_k_chi, double residual,
                               double sigma_k_plus_1, double cond_chi1, double cond_chi, double rank_floor);

struct BoundCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = true;
};

/// Interlacing, gamma1 <= 1, gamma2 >= 1 and the bound of the algorithm that produced
/// `result`, each with slack slack_rel * sigma_1. B1 and B4 are checked both as stated
/// (2^(p-k-1), 2^(1-k)) and in the proven form that carries an extra factor p.
std::vector<BoundCheck> check_bounds(const Matrix& chi, const CssResult<double>& result, double f,
                                     double slack_rel = 1e-8);

// ---------------------------------------------------------------------------

enum class Family { Identity, Kahan, GuEisenstat, Jolliffe, SorensenEmbree, Ships, Gaussian };

std::string_view to_string(Family f);
Family parse_family(std::string_view s);

struct GeneratorSpec {
    Family family = Family::Identity;
    Index n = 0;  // 0: family default
    Index p = 0;
    Index k = 0;  // designated k; 0: family default
    Index block_size = 5;
    double zeta_lo = defaults::kZetaLo;
    double zeta_hi = defaults::kZetaHi;
    double rho_lo = defaults::kRhoLo;
    double rho_hi = defaults::kRhoHi;
    double leading_lo = defaults::kLeadingLo;
    double leading_hi = defaults::kLeadingHi;
    double trailing_lo = defaults::kTrailingLo;
    double trailing_hi = defaults::kTrailingHi;

    /// Fills zero dimensions with family defaults and validates the rest.
    GeneratorSpec resolved() const;
};

struct GeneratedInstance {
    Matrix chi;
    Index k = 0;
    double parameter = 0.0;  // zeta for Kahan / Gu-Eisenstat, NaN otherwise
};

/// One realization; zeta (where used) is drawn uniformly from the seed's stream
/// before anything else.
GeneratedInstance generate_instance(const GeneratorSpec& spec, std::uint64_t seed);

struct ExperimentSpec {
    GeneratorSpec generator;
    std::vector<Algorithm> algorithms{std::begin(kAllAlgorithms), std::end(kAllAlgorithms)};
    // Designated k unless set.
    std::optional<RankPolicy> policy;
    SrrqrConfig srrqr;
    int realizations = defaults::kRealizations;
    std::uint64_t base_seed = defaults::kBaseSeed;
    int threads = 1;
    bool timing = false;

    static ExperimentSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct RealizationRow {
    std::uint64_t seed = 0;
    Algorithm algorithm = Algorithm::B1;
    double parameter = 0.0;
    MetricsRecord metrics;
    int swap_count = 0;
    bool converged = true;
    std::string error;  // nonempty when this realization failed
    double wall_time = -1.0;  // seconds; negative when timing is off
};

struct SummaryStats {
    int values = 0;
    int flagged_one = 0;
    int infinite = 0;
    int undefined = 0;
    int failed = 0;
    // Over Value and FlaggedOne (as 1). Infinite and Undefined are counted but
    // excluded: neither has a number to average. NaN when nothing is included.
    double mean = 0.0;
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
};

/// Order-independent: values are sorted before any reduction.
SummaryStats summarize(const std::vector<Metric>& metrics, int failed = 0);

struct AlgorithmSummary {
    Algorithm algorithm = Algorithm::B1;
    SummaryStats tau;
    SummaryStats gamma1;
    SummaryStats gamma2;
};

struct AggregateReport {
    ExperimentSpec spec;
    std::vector<AlgorithmSummary> summaries;
    std::vector<RealizationRow> rows;  // realization-major, algorithms in spec order

    const AlgorithmSummary& summary(Algorithm a) const;
};

AggregateReport run_experiment(const ExperimentSpec& spec);
AggregateReport aggregate(const ExperimentSpec& spec, std::vector<RealizationRow> rows);

nlohmann::json report_json(const AggregateReport& report);
void write_report_csv(std::ostream& out, const AggregateReport& report);
std::vector<RealizationRow> read_report_csv(std::istream& in);

// ---------------------------------------------------------------------------

struct GramLossReport {
    Matrix chi;
    Matrix gram;
    Vector gram_eigenvalues;  // descending
    Vector sigma;
    Index gram_rank = 0;
    Index css_rank = 0;
    bool gram_is_all_ones = false;
    double eta = 0.0;
};

/// The 3 x 2 matrix [[1, 1], [1e-9, 0], [0, 1e-9]]: the rank seen through
/// fl(chi^T chi) versus the rank seen by SVD-based subset selection. Both
/// ranks count values above eta times the largest (eigenvalues for the Gram route).
GramLossReport gram_loss_demo(double eta = 1e-12);

nlohmann::json to_json(const GramLossReport& r);

}  // namespace idcss
