#include "idcss/ode_sens.hpp"

#include <string>

#include "idcss/adversarial.hpp"

namespace idcss {

void SvirParams::validate() const {
    for (double x : as_array())
        if (!std::isfinite(x) || x < 0.0) throw InputDomainError("SVIR parameters must be finite and nonnegative");
}

void SvirState::validate() const {
    for (double x : {s, v, i, r})
        if (!std::isfinite(x)) throw InputDomainError("SVIR state must be finite");
    if (!(population > 0.0) || !std::isfinite(population)) throw InputDomainError("SVIR population must be positive");
}

TimeGrid TimeGrid::uniform(double t0, double t1, Index count) {
    if (count < 1) throw InputDomainError("time grid needs at least one point");
    TimeGrid grid;
    grid.times.resize(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i)
        grid.times[static_cast<std::size_t>(i)] =
            count == 1 ? t0 : t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(count - 1);
    grid.validate();
    return grid;
}

void TimeGrid::validate() const {
    if (times.empty()) throw InputDomainError("time grid is empty");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i])) throw InputDomainError("time grid has non-finite entries");
        if (i > 0 && !(times[i] > times[i - 1])) throw InputDomainError("time grid must be strictly increasing");
    }
}

namespace {

template <typename T>
Vec<T> initial_state(const SvirState& ic) {
    Vec<T> x(4);
    x << T(ic.s), T(ic.v), T(ic.i), T(ic.r);
    return x;
}

template <typename T>
Vec<T> infected_curve(const std::array<T, 4>& q, const SvirState& ic, const TimeGrid& grid, int substeps) {
    auto rhs = [&](double, const Vec<T>& x) { return svir_rhs<T>(x, q, ic.population); };
    return integrate<T>(rhs, initial_state<T>(ic), grid, substeps).col(2);
}

}  // namespace

Matrix svir_trajectory(const SvirParams& q, const SvirState& ic, const TimeGrid& grid, int substeps) {
    q.validate();
    ic.validate();
    const auto params = q.as_array();
    auto rhs = [&](double, const Vector& x) { return svir_rhs<double>(x, params, ic.population); };
    return integrate<double>(rhs, initial_state<double>(ic), grid, substeps);
}

Matrix svir_sensitivity(const SvirParams& q, const SvirState& ic, const TimeGrid& grid, const SensMethod& method,
                        int substeps) {
    q.validate();
    ic.validate();
    grid.validate();
    if (grid.size() < 4) throw InputDomainError("svir_sensitivity: need at least 4 observations");
    if (!(method.step > 0.0)) throw InputDomainError("svir_sensitivity: step must be positive");

    const auto base = q.as_array();
    Matrix sens(grid.size(), 4);
    for (std::size_t j = 0; j < 4; ++j) {
        if (method.kind == SensMethod::Kind::ComplexStep) {
            using C = std::complex<double>;
            std::array<C, 4> qc{C(base[0]), C(base[1]), C(base[2]), C(base[3])};
            qc[j] += C(0.0, method.step);
            const Vec<C> curve = infected_curve<C>(qc, ic, grid, substeps);
            sens.col(static_cast<Index>(j)) = curve.imag() / method.step;
        } else {
            const double h = method.step * std::max(std::abs(base[j]), 1e-8);
            auto plus = base;
            auto minus = base;
            plus[j] += h;
            minus[j] -= h;
            const Vector up = infected_curve<double>(plus, ic, grid, substeps);
            const Vector down = infected_curve<double>(minus, ic, grid, substeps);
            sens.col(static_cast<Index>(j)) = (up - down) / (2.0 * h);
        }
    }
    return sens;
}

SvirParams sample_nominal_neighborhood(const SvirParams& nominal, double fraction, std::uint64_t seed) {
    nominal.validate();
    if (!(fraction >= 0.0 && fraction < 1.0)) throw InputDomainError("fraction must lie in [0, 1)");
    Rng rng(seed);
    auto q = nominal.as_array();
    for (double& x : q) x = rng.uniform((1.0 - fraction) * x, (1.0 + fraction) * x);
    return SvirParams::from_array(q);
}

PrescribedSystem build_prescribed_system(const SvdFactors<double>& factors, double horizon) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputDomainError("prescribed system: T must be positive");
    const Index p = factors.sigma.size();
    if (factors.u.cols() != p || factors.v.rows() != p || factors.v.cols() != p)
        throw InputDomainError("prescribed system: inconsistent SVD factor shapes");
    PrescribedSystem sys;
    sys.lambda.resize(p);
    for (Index j = 0; j < p; ++j) {
        const double s = factors.sigma(j);
        if (!(s > 0.0) || !std::isfinite(s))
            throw InputDomainError("prescribed system: singular value " + std::to_string(j) +
                                   " is not positive; ln(sigma) is undefined");
        sys.lambda(j) = std::log(s) / horizon;
    }
    sys.u = factors.u;
    sys.v = factors.v;
    sys.horizon = horizon;
    return sys;
}

Vector observe_prescribed(const PrescribedSystem& sys, const Vector& q, double t) {
    if (q.size() != sys.v.rows()) throw InputDomainError("observe_prescribed: q has the wrong length");
    const Vector growth = (t * sys.lambda).array().exp();
    return sys.u * (growth.asDiagonal() * (sys.v.transpose() * q));
}

Vector integrate_prescribed(const PrescribedSystem& sys, const Vector& q, double t, int substeps) {
    if (q.size() != sys.v.rows()) throw InputDomainError("integrate_prescribed: q has the wrong length");
    const Vector x0 = sys.v.transpose() * q;
    if (t == 0.0) return sys.u * x0;
    TimeGrid grid;
    grid.times = {0.0, t};
    auto rhs = [&](double, const Vector& x) -> Vector { return sys.lambda.cwiseProduct(x); };
    const Matrix traj = integrate<double>(rhs, x0, grid, substeps);
    return sys.u * traj.row(1).transpose();
}

PrescribedCheck verify_prescribed_sensitivity(const PrescribedSystem& sys, const Vector& q, double tol) {
    const Index p = sys.v.rows();
    if (q.size() != p) throw InputDomainError("verify_prescribed_sensitivity: q has the wrong length");
    PrescribedCheck check;
    check.s_fd.resize(sys.u.rows(), p);
    for (Index j = 0; j < p; ++j) {
        const double h = std::max(1.0, std::abs(q(j)));
        Vector up = q, down = q;
        up(j) += h;
        down(j) -= h;
        check.s_fd.col(j) =
            (observe_prescribed(sys, up, sys.horizon) - observe_prescribed(sys, down, sys.horizon)) / (2.0 * h);
    }
    const Vector sigma = (sys.horizon * sys.lambda).array().exp();
    const Matrix target = sys.u * sigma.asDiagonal() * sys.v.transpose();
    check.relative_error = spectral_norm(Matrix(check.s_fd - target)) / sigma.maxCoeff();
    check.passed = check.relative_error <= tol;
    return check;
}

}  // namespace idcss
