#pragma once
// Adaptive Gauss-Kronrod integration with an absolute error target and
// mesh grading around near-real poles, plus composite Gauss-Legendre.

#include "ssfkit/numkernel.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <functional>
#include <queue>
#include <vector>

namespace ssfkit {

class AccuracyError : public Error {
public:
    AccuracyError(const std::string& what, double achieved)
        : Error(what + " (achieved error " + std::to_string(achieved) + ")"), achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// A feature the integrand has near a point: a Lorentzian-like spike of
/// the given half-width centred at `center`.
struct Spike {
    double center;
    double width;
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    std::size_t evaluations = 0;
    bool roundoff_limited = false;  // stopped at the integrand's noise floor
};

struct QuadOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-13;
    std::size_t max_evaluations = 400000;
    // When bisection stops reducing the error estimate the integrand is
    // resolved down to its own rounding noise; the result is then accepted
    // if the estimate is below noise_tol * max(1, |value|).
    double noise_tol = 1e-8;
};

namespace detail {

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

inline Panel gk_panel(const std::function<double(double)>& f, double a, double b) {
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0, &err);
    // The estimate Boost reports at depth 0 refers to the rule on [-1,1];
    // rescale it to the panel.
    return {a, b, v, err * 0.5 * (b - a)};
}

}  // namespace detail

/// Initial mesh for [a,b]: endpoints, breakpoints, and geometric grading
/// (factor 4) around each spike out to the interval scale.
inline std::vector<double> graded_mesh(double a, double b, const std::vector<double>& breakpoints,
                                       const std::vector<Spike>& spikes) {
    std::vector<double> pts{a, b};
    for (double p : breakpoints)
        if (p > a && p < b) pts.push_back(p);
    const double span = b - a;
    for (const Spike& s : spikes) {
        if (!(s.width > 0.0) || s.center < a - span || s.center > b + span) continue;
        if (s.center > a && s.center < b) pts.push_back(s.center);
        for (double d = s.width; d < span; d *= 4.0) {
            if (s.center - d > a && s.center - d < b) pts.push_back(s.center - d);
            if (s.center + d > a && s.center + d < b) pts.push_back(s.center + d);
        }
    }
    std::sort(pts.begin(), pts.end());
    std::vector<double> out;
    for (double p : pts)
        if (out.empty() || p - out.back() > 1e-15 * (1.0 + std::abs(p))) out.push_back(p);
    if (out.back() != b) out.back() = b;
    return out;
}

/// Globally adaptive G7K15: repeatedly bisect the panel with the largest
/// error estimate until the summed estimate meets the target.
inline QuadResult integrate_adaptive(const std::function<double(double)>& f, const std::vector<double>& mesh,
                                     const QuadOptions& opt = {}) {
    std::priority_queue<detail::Panel> heap;
    QuadResult res;
    for (std::size_t i = 0; i + 1 < mesh.size(); ++i) {
        detail::Panel p = detail::gk_panel(f, mesh[i], mesh[i + 1]);
        res.value += p.value;
        res.error += p.error;
        res.evaluations += 15;
        heap.push(p);
    }
    int stalls = 0;
    auto give_up = [&](const char* why) {
        if (res.error <= opt.noise_tol * std::max(1.0, std::abs(res.value))) {
            res.roundoff_limited = true;
            return;
        }
        throw AccuracyError(why, res.error);
    };
    while (res.error > std::max(opt.abs_tol, opt.rel_tol * std::abs(res.value))) {
        if (res.evaluations >= opt.max_evaluations || heap.empty()) {
            give_up("adaptive quadrature did not converge");
            break;
        }
        detail::Panel worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            give_up("adaptive quadrature hit resolution limit");
            break;
        }
        heap.pop();
        detail::Panel left = detail::gk_panel(f, worst.a, mid);
        detail::Panel right = detail::gk_panel(f, mid, worst.b);
        res.evaluations += 30;
        res.value += left.value + right.value - worst.value;
        res.error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // Bisection that neither changes the value nor improves the error
        // estimate only resolves rounding noise.
        const bool same_value = std::abs(left.value + right.value - worst.value) <= 1e-5 * std::abs(left.value + right.value);
        if (same_value && left.error + right.error >= 0.99 * worst.error) ++stalls;
        if (stalls >= 40) {
            give_up("adaptive quadrature stalled at rounding noise");
            break;
        }
    }
    // Re-sum to shed accumulated cancellation from incremental updates.
    double v = 0.0, e = 0.0;
    while (!heap.empty()) {
        v += heap.top().value;
        e += heap.top().error;
        heap.pop();
    }
    res.value = v;
    res.error = e;
    return res;
}

inline QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                     const std::vector<double>& breakpoints = {},
                                     const std::vector<Spike>& spikes = {}, const QuadOptions& opt = {}) {
    if (b <= a) return {};
    return integrate_adaptive(f, graded_mesh(a, b, breakpoints, spikes), opt);
}

/// Composite 20-point Gauss-Legendre over `panels` equal panels of [a,b]
/// for a complex-valued integrand.
inline Complex integrate_gauss_legendre(const std::function<Complex(double)>& f, double a, double b,
                                        int panels) {
    using rule = boost::math::quadrature::gauss<double, 20>;
    const auto& x = rule::abscissa();
    const auto& w = rule::weights();
    Complex total(0.0, 0.0);
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double c = a + (p + 0.5) * h;
        const double half = 0.5 * h;
        for (std::size_t i = 0; i < x.size(); ++i) {
            total += w[i] * half * (f(c - half * x[i]) + f(c + half * x[i]));
        }
    }
    return total;
}

}  // namespace ssfkit
