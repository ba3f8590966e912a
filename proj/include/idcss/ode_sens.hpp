#pragma once

// Sensitivity matrices from ODE models: the SVIR compartment model, and a
// linear system whose sensitivity matrix at time T is a prescribed U S V^T.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "idcss/defaults.hpp"
#include "idcss/dense.hpp"
#include "idcss/errors.hpp"

namespace idcss {

/// q = [beta, nu, alpha, gamma].
struct SvirParams {
    double beta = 0.80;   // transmission coefficient, 1/day
    double nu = 0.004;    // vaccination rate, 1/day
    double alpha = 0.10;  // infection probability after vaccination
    double gamma = 0.14;  // recovery rate, 1/day

    static SvirParams nominal() { return {}; }
    std::array<double, 4> as_array() const { return {beta, nu, alpha, gamma}; }
    static SvirParams from_array(const std::array<double, 4>& q) { return {q[0], q[1], q[2], q[3]}; }
    void validate() const;
};

/// Compartments S, V, I, R and the (constant) population N used in the rates.
struct SvirState {
    double s = defaults::kPopulation - defaults::kInitialInfected;
    double v = 0.0;
    double i = defaults::kInitialInfected;
    double r = 0.0;
    double population = defaults::kPopulation;

    static SvirState defaults_state() { return {}; }
    void validate() const;
};

struct TimeGrid {
    std::vector<double> times;

    static TimeGrid uniform(double t0, double t1, Index count);
    static TimeGrid defaults_grid() { return uniform(0.0, defaults::kFinalDay, defaults::kObservations); }
    Index size() const { return static_cast<Index>(times.size()); }
    void validate() const;
};

struct SensMethod {
    enum class Kind { CentralFd, ComplexStep };
    Kind kind = Kind::ComplexStep;
    double step = defaults::kComplexStep;  // relative for central FD, absolute for complex step

    static SensMethod central_fd(double step = defaults::kFdRelativeStep) { return {Kind::CentralFd, step}; }
    static SensMethod complex_step(double step = defaults::kComplexStep) { return {Kind::ComplexStep, step}; }
};

/// Right-hand side of the SVIR equations, generic over real and complex scalars.
/// x = (S, V, I, R), q = (beta, nu, alpha, gamma).
template <typename T>
Vec<T> svir_rhs(const Vec<T>& x, const std::array<T, 4>& q, double population) {
    const T& s = x(0);
    const T& v = x(1);
    const T& i = x(2);
    const T& beta = q[0];
    const T& nu = q[1];
    const T& alpha = q[2];
    const T& gamma = q[3];
    const T infect_s = beta * i * s / population;
    const T infect_v = alpha * beta * i * v / population;
    Vec<T> dx(4);
    dx(0) = -infect_s;
    dx(1) = nu * s - infect_v;
    dx(2) = infect_s + infect_v - gamma * i;
    dx(3) = gamma * i;
    return dx;
}

namespace detail {

inline bool finite_value(double x) { return std::isfinite(x); }
inline bool finite_value(const std::complex<double>& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace detail

/// Classical fourth-order Runge-Kutta with `substeps` uniform steps per grid
/// interval. Row i of the result is the state at grid.times[i].
template <typename T, typename Rhs>
Mat<T> integrate(Rhs&& rhs, const Vec<T>& x0, const TimeGrid& grid, int substeps) {
    grid.validate();
    if (substeps < 1) throw InputDomainError("integrate: substeps must be >= 1");
    const Index dim = x0.size();
    Mat<T> traj(grid.size(), dim);
    Vec<T> x = x0;
    traj.row(0) = x.transpose();
    for (Index step = 1; step < grid.size(); ++step) {
        const double t0 = grid.times[static_cast<std::size_t>(step - 1)];
        const double h = (grid.times[static_cast<std::size_t>(step)] - t0) / substeps;
        for (int sub = 0; sub < substeps; ++sub) {
            const double t = t0 + sub * h;
            const Vec<T> k1 = rhs(t, x);
            const Vec<T> k2 = rhs(t + h / 2, Vec<T>(x + (h / 2) * k1));
            const Vec<T> k3 = rhs(t + h / 2, Vec<T>(x + (h / 2) * k2));
            const Vec<T> k4 = rhs(t + h, Vec<T>(x + h * k3));
            x += (h / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            for (Index c = 0; c < dim; ++c)
                if (!detail::finite_value(x(c))) throw IntegrationFailure("integrate: non-finite state", t + h);
        }
        traj.row(step) = x.transpose();
    }
    return traj;
}

/// SVIR trajectory (rows: grid times, columns: S, V, I, R).
Matrix svir_trajectory(const SvirParams& q, const SvirState& ic, const TimeGrid& grid,
                       int substeps = defaults::kSubsteps);

/// n x 4 matrix of dI(t_i)/dq_j.
Matrix svir_sensitivity(const SvirParams& q, const SvirState& ic, const TimeGrid& grid, const SensMethod& method,
                        int substeps = defaults::kSubsteps);

/// Each parameter uniform in [(1 - fraction) q_j, (1 + fraction) q_j].
SvirParams sample_nominal_neighborhood(const SvirParams& nominal, double fraction, std::uint64_t seed);

/// dx/dt = diag(lambda) x, x(0) = V^T q, y = U x.
struct PrescribedSystem {
    Vector lambda;
    Matrix u;
    Matrix v;
    double horizon = 1.0;
};

/// lambda_j = ln(sigma_j) / T, so that the sensitivity at t = T is U diag(sigma) V^T.
PrescribedSystem build_prescribed_system(const SvdFactors<double>& factors, double horizon);

/// Closed-form y(t) = U exp(t Lambda) V^T q.
Vector observe_prescribed(const PrescribedSystem& sys, const Vector& q, double t);

/// y(t) by RK4 integration of the state equation; cross-check for the closed form.
Vector integrate_prescribed(const PrescribedSystem& sys, const Vector& q, double t, int substeps);

struct PrescribedCheck {
    Matrix s_fd;
    double relative_error = 0.0;  // ||S_fd - U S V^T||_2 / sigma_1
    bool passed = false;
};

/// Central differences of observe_prescribed over q at t = T, compared with U diag(e^{T lambda}) V^T.
PrescribedCheck verify_prescribed_sensitivity(const PrescribedSystem& sys, const Vector& q, double tol);

}  // namespace idcss
