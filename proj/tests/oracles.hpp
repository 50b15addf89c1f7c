#pragma once

// Test-side oracles, independent of the library's solution paths: plain ODE
// integration and quadrature used to freeze expected values.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracles {

/// Classic RK4 for y' = f(t, y), fixed step count, vector state.
inline std::vector<double> rk4(
    const std::function<std::vector<double>(double, const std::vector<double>&)>& f,
    std::vector<double> y, double t0, double t1, int steps) {
    const double h = (t1 - t0) / steps;
    auto axpy = [](const std::vector<double>& a, double s, const std::vector<double>& b) {
        std::vector<double> out(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * b[i];
        return out;
    };
    double t = t0;
    for (int n = 0; n < steps; ++n) {
        const auto k1 = f(t, y);
        const auto k2 = f(t + h / 2, axpy(y, h / 2, k1));
        const auto k3 = f(t + h / 2, axpy(y, h / 2, k2));
        const auto k4 = f(t + h, axpy(y, h, k3));
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        t += h;
    }
    return y;
}

/// Quadratic-value coefficients (a, c) of the 1-d linear-quadratic fixture,
/// from integrating a' = a^2, c' = -a backward from a(T) = 1, c(T) = 0.
/// The value is v(t, x) = a(t) x^2 + c(t).
inline std::pair<double, double> lq_riccati(double t, double T, int steps = 4000) {
    if (t > T) throw std::invalid_argument("lq_riccati: t > T");
    const auto rhs = [](double, const std::vector<double>& y) {
        return std::vector<double>{y[0] * y[0], -y[0]};
    };
    const auto y = rk4(rhs, {1.0, 0.0}, T, t, steps);
    return {y[0], y[1]};
}

/// Composite Simpson rule on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int intervals) {
    if (intervals % 2 != 0) ++intervals;
    const double h = (b - a) / intervals;
    double acc = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

/// Second moment of the Euler chain X_{k+1} = X_k (1 - dt/(2 - t_k)) + dW_k
/// started at 0: the discrete-time variance recursion matching the simulated
/// lq1d optimal-feedback dynamics step for step.
inline double lq_feedback_second_moment(double T, double dt) {
    const int n = static_cast<int>(std::lround(T / dt));
    double m2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const double t = k * dt;
        const double a = 1.0 - dt / (1.0 + T - t);
        m2 = a * a * m2 + dt;
    }
    return m2;
}

/// E[(u - u*(t, X_t))^2] integrated over [0, T] for the lq1d fixture under a
/// constant control u, with X_t = u t + W_t and u*(t,x) = -x/(1+T-t):
/// the closed-form Hamiltonian-gap integral for constant controls.
inline double lq_constant_control_gap(double u, double T, int intervals = 2000) {
    return simpson(
        [u, T](double t) {
            const double rho = 1.0 + T - t;
            const double mean = u + u * t / rho;          // E[u - u*] = u + E[X_t]/rho
            const double var = t / (rho * rho);           // Var(X_t)/rho^2
            return mean * mean + var;
        },
        0.0, T, intervals);
}

}  // namespace oracles
