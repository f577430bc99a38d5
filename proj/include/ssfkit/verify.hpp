#pragma once
// Seeded verification suites.  Every check compares an ssfkit computation
// against an independent reference (closed form, eigenvalue counting,
// truncated lattice, Gauss-Kronrod quadrature) and records the measured
// numbers.  Reports are JSON with a fixed key order and no timing data, so
// equal seeds give byte-identical output.

#include "ssfkit/oracles.hpp"
#include "ssfkit/random.hpp"
#include "ssfkit/resonance.hpp"
#include "ssfkit/scattering.hpp"
#include "ssfkit/specflow.hpp"
#include "ssfkit/ssf.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <optional>
#include <thread>

namespace ssfkit::verify {

using Json = nlohmann::ordered_json;

struct CheckResult {
    int criterion = 0;
    std::string name;
    bool pass = false;
    std::string summary;
    Json data = Json::object();
};

/// Report name of each acceptance criterion.
inline std::string criterion_name(int id) {
    static const char* names[] = {"",
                                  "integer_valuedness",
                                  "singular_ssf_equals_total_resonance_index",
                                  "singular_ssf_equals_minus_singular_mu",
                                  "birman_krein_ac",
                                  "birman_krein_offaxis",
                                  "birman_krein_classical",
                                  "scattering_structure",
                                  "ordered_exponential",
                                  "finite_matrix_suite",
                                  "resonance_index_cross_methods",
                                  "kernel_and_model_oracles",
                                  "determinism"};
    return id >= 1 && id <= 12 ? names[id] : "unknown";
}

struct Report {
    std::string suite;
    std::uint64_t seed = 0;
    std::vector<CheckResult> checks;

    bool pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
    }

    Json to_json() const {
        Json j;
        j["schema"] = 1;
        j["suite"] = suite;
        j["seed"] = seed;
        Json arr = Json::array();
        for (const CheckResult& c : checks)
            arr.push_back(Json{{"criterion", c.criterion}, {"name", c.name}, {"pass", c.pass},
                               {"summary", c.summary}, {"data", c.data}});
        j["checks"] = std::move(arr);
        // One entry per criterion: it passes when all of its checks pass.
        Json crit = Json::array();
        for (int id = 1; id <= 12; ++id) {
            Json names = Json::array();
            bool ok = true;
            for (const CheckResult& c : checks)
                if (c.criterion == id) {
                    names.push_back(c.name);
                    ok = ok && c.pass;
                }
            if (!names.empty())
                crit.push_back(Json{{"criterion", id}, {"name", criterion_name(id)}, {"pass", ok}, {"checks", names}});
        }
        j["criteria"] = std::move(crit);
        j["pass"] = pass();
        return j;
    }

    std::string dump() const { return to_json().dump(2) + "\n"; }
};

/// f(0), ..., f(n-1) on a small thread pool.  Results and the first
/// exception (by index) come back in index order.
template <class F>
auto parallel_map(std::size_t n, F&& f, unsigned threads = 0) {
    using R = decltype(f(std::size_t{}));
    std::vector<std::optional<R>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                slots[i].emplace(f(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

namespace detail {

inline std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

inline std::string ratio(std::size_t good, std::size_t total) {
    return std::to_string(good) + "/" + std::to_string(total);
}

inline CheckResult max_check(int criterion, std::string name, double worst, double tol, Json data = Json::object()) {
    CheckResult c;
    c.criterion = criterion;
    c.name = std::move(name);
    c.pass = std::isfinite(worst) && worst <= tol;
    c.summary = "max " + fmt("%.3e", worst) + " (tol " + fmt("%.0e", tol) + ")";
    data["max"] = std::isfinite(worst) ? Json(worst) : Json("non-finite");
    data["tol"] = tol;
    c.data = std::move(data);
    return c;
}

inline CheckResult fraction_check(int criterion, std::string name, std::size_t good, std::size_t total,
                                  double needed, Json data = Json::object()) {
    CheckResult c;
    c.criterion = criterion;
    c.name = std::move(name);
    const double frac = total == 0 ? 0.0 : static_cast<double>(good) / static_cast<double>(total);
    c.pass = total > 0 && frac >= needed;
    c.summary = ratio(good, total) + " samples (need " + fmt("%.0f", 100.0 * needed) + "%)";
    data["good"] = good;
    data["total"] = total;
    data["fraction"] = frac;
    c.data = std::move(data);
    return c;
}

inline CheckResult failed(int criterion, std::string name, const std::string& why) {
    CheckResult c;
    c.criterion = criterion;
    c.name = std::move(name);
    c.summary = "error: " + why;
    c.data["error"] = why;
    return c;
}

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

template <class F>
double gk(F f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-14);
}

inline HermMatrix scalar(double v) { return HermMatrix(CMatrix::Constant(1, 1, v)); }

}  // namespace detail

// ---------------------------------------------------------------- models

/// Window {0}, unit weight, J_r = r v.
inline RiggedModel rank_one_lattice(double v) {
    return build_lattice({0}, {1.0}, HermMatrix::zero(1), CouplingPath::straight(detail::scalar(v)));
}

/// H_0 = 0 on C^1, J_r = r.
inline RiggedModel scalar_finite_model() {
    return build_finite(detail::scalar(0.0), CMatrix::Identity(1, 1), CouplingPath::straight(detail::scalar(1.0)));
}

/// Lattice models with windows of size 1, 2, 3: distinct sites in [-3,3],
/// weights in (0.5,1.5), a small background coupling and a straight path.
inline std::vector<RiggedModel> seeded_lattice_models(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<RiggedModel> out;
    for (Index k = 1; k <= 3; ++k) {
        std::vector<long> window;
        while (static_cast<Index>(window.size()) < k) {
            const long s = rng.integer(-3, 3);
            if (std::find(window.begin(), window.end(), s) == window.end()) window.push_back(s);
        }
        std::sort(window.begin(), window.end());
        std::vector<double> weights;
        for (Index i = 0; i < k; ++i) weights.push_back(rng.uniform(0.5, 1.5));
        const HermMatrix bg = rng.hermitian(k, 0.2);
        const HermMatrix dir = rng.hermitian(k, 1.5);
        out.push_back(build_lattice(window, weights, bg, CouplingPath::straight(dir)));
    }
    return out;
}

/// Window {0,1} with J_r = r c sigma_x: the bond (0,1) gets hopping 1 + r c.
/// For |1 + c| < 1 the operator H_1 has no eigenvalues.
inline RiggedModel bond_hopping_model(double c) {
    CMatrix s = CMatrix::Zero(2, 2);
    s(0, 1) = s(1, 0) = c;
    return build_lattice({0, 1}, {1.0, 1.0}, HermMatrix::zero(2), CouplingPath::straight(HermMatrix(s)));
}

/// Window {c-1, c, c+1}.  On r in [0, 1/2] the bonds (c-1,c) and (c,c+1) are
/// switched off and the potential at c ramps to a; on [1/2, 1] it moves from
/// a to b.  The isolated site carries an eigenvalue that sweeps through the
/// band, so the singular SSF is sign(b - a) on the interval between a and b
/// and 0 elsewhere.
struct IslandModel {
    RiggedModel model;
    double a = 0.0;
    double b = 0.0;

    long expected_xi_s(double lambda) const {
        if (lambda > std::min(a, b) && lambda < std::max(a, b)) return b > a ? 1 : -1;
        return 0;
    }
};

inline IslandModel island_model(long centre, double a, double b, double p, double q) {
    CMatrix cut = CMatrix::Zero(3, 3);
    cut(0, 1) = cut(1, 0) = cut(1, 2) = cut(2, 1) = -1.0;
    CMatrix va = cut, vb = cut;
    va(1, 1) = a;
    vb(1, 1) = b;
    const CouplingPath path =
        CouplingPath::polyline({HermMatrix::zero(3), HermMatrix(va), HermMatrix(vb)}, {0.0, 0.5, 1.0});
    return {build_lattice({centre - 1, centre, centre + 1}, {1.0, 1.0, 1.0}, HermMatrix::diagonal({p, 0.0, q}), path),
            a, b};
}

inline std::vector<IslandModel> seeded_island_models(std::uint64_t seed, int count = 2) {
    Rng rng(seed ^ 0x632be59bd9b4e019ULL);
    std::vector<IslandModel> out;
    for (int i = 0; i < count; ++i) {
        const long c = rng.integer(-3, 3);
        double a = 0.0, b = 0.0;
        do {
            a = rng.uniform(-1.8, 1.8);
            b = rng.uniform(-1.8, 1.8);
        } while (std::abs(b - a) < 0.8);
        out.push_back(island_model(c, a, b, rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)));
    }
    return out;
}

struct FiniteCase {
    RiggedModel model;
    RiggedModel bent;  // same endpoints, polyline through a random midpoint
};

inline std::vector<FiniteCase> seeded_finite_models(std::uint64_t seed, int count = 3, Index n = 6) {
    Rng rng(seed);
    std::vector<FiniteCase> out;
    for (int i = 0; i < count; ++i) {
        const HermMatrix H0 = rng.hermitian(n);
        const CMatrix F = rng.matrix(n, n) + 2.0 * CMatrix::Identity(n, n);
        const HermMatrix J1 = rng.hermitian(n, 0.4);
        const HermMatrix mid = rng.hermitian(n, 0.8);
        const RiggedModel straight = build_finite(H0, F, CouplingPath::straight(J1));
        out.push_back({straight, straight.with_path(CouplingPath::polyline({HermMatrix::zero(n), mid, J1},
                                                                           {0.0, 0.4, 1.0}))});
    }
    return out;
}

// ---------------------------------------------------------------- shared pieces

/// Radius for the contour around r_lambda: at most 0.05 and well inside
/// the gap to the neighbouring resonance points.
inline double contour_radius(const std::vector<double>& neighbours, double r_lambda) {
    double radius = 0.05;
    for (double r : neighbours)
        if (r != r_lambda) radius = std::min(radius, 0.4 * std::abs(r - r_lambda));
    return radius;
}

struct ContourCase {
    double lambda = 0.0;
    double r_lambda = 0.0;
    int counting = 0;
    double contour = 0.0;
    double radius = 0.0;
};

inline std::vector<ContourCase> contour_cases(const RiggedModel& model, double lambda, const NumericsConfig& cfg) {
    const std::vector<double> near = resonance_set(model, lambda, -1.0, 2.0, Side::plus, cfg.res_real_tol).resonance_r_values;
    std::vector<ContourCase> out;
    for (const ResonanceGroup& g : group_resonances(model, lambda, 0.0, 1.0, cfg)) {
        ContourCase c{lambda, g.r_lambda, g.index(), 0.0, contour_radius(near, g.r_lambda)};
        for (int attempt = 0;; ++attempt) {
            try {
                c.contour = resonance_index_contour(model, lambda, g.r_lambda, c.radius, 1e-4, cfg.quad_tol);
                break;
            } catch (const ContourCollision&) {
                if (attempt >= 5) throw;
                c.radius *= 0.7;
            }
        }
        out.push_back(c);
    }
    return out;
}

inline CheckResult contour_check(const std::vector<ContourCase>& cases, const std::string& name) {
    double worst = 0.0;
    Json rows = Json::array();
    for (const ContourCase& c : cases) {
        worst = std::max(worst, std::abs(c.contour - c.counting));
        rows.push_back(Json{{"lambda", c.lambda}, {"r_lambda", c.r_lambda}, {"counting", c.counting},
                            {"contour", c.contour}, {"radius", c.radius}});
    }
    CheckResult r = detail::max_check(10, name, worst, 1e-6, Json{{"groups", rows}});
    if (cases.empty()) {
        r.pass = false;
        r.summary = "no resonance groups found";
    }
    return r;
}

// ---------------------------------------------------------------- rank-one suite

inline Report rank1_suite(std::uint64_t seed = 0) {
    Report rep{"rank1", seed, {}};
    auto guarded = [&](int criterion, const std::string& name, auto&& body) {
        try {
            rep.checks.push_back(body());
        } catch (const std::exception& e) {
            rep.checks.push_back(detail::failed(criterion, name, e.what()));
        }
    };
    guarded(2, "rank_one_total_index", [] {
        const RiggedModel m = rank_one_lattice(3.0);
        const int idx = total_resonance_index(m, 2.5);
        const SSFSample s = singular_ssf(m, 2.5);
        CheckResult c;
        c.criterion = 2;
        c.name = "rank_one_total_index";
        c.pass = idx == 1 && s.xi_s_rounded == 1;
        c.summary = "index " + std::to_string(idx) + ", round(xi_s) " + std::to_string(s.xi_s_rounded) + " (expect 1)";
        c.data = Json{{"v", 3.0}, {"lambda", 2.5}, {"index", idx}, {"xi_s", s.xi_s}, {"xi_s_rounded", s.xi_s_rounded}};
        return c;
    });
    guarded(3, "mu_singular_closed_forms", [] {
        const int a = mu_singular(rank_one_lattice(3.0), 2.5).value;
        const int b = mu_singular(scalar_finite_model(), 0.5).value;
        const int c0 = mu_singular(rank_one_lattice(2.0), 0.0).value;
        CheckResult c;
        c.criterion = 3;
        c.name = "mu_singular_closed_forms";
        c.pass = a == -1 && b == -1 && c0 == 0;
        c.summary = "rank-one bound state " + std::to_string(a) + ", scalar " + std::to_string(b) + ", in band " +
                    std::to_string(c0) + " (expect -1, -1, 0)";
        c.data = Json{{"rank_one_v3_lambda2.5", a}, {"scalar_lambda0.5", b}, {"rank_one_v2_lambda0", c0}};
        return c;
    });
    guarded(4, "rank_one_det_and_xi_ac", [] {
        NumericsConfig cfg;
        cfg.quad_tol = 1e-10;
        const RiggedModel m = rank_one_lattice(2.0);
        const Complex det = scattering_matrix(m, {0.0, 0.0, Side::plus}, 1.0).det;
        const double xa = ac_ssf(m, 0.0, cfg);
        const double err = std::max(std::abs(det + kI), std::abs(xa - 0.25));
        return detail::max_check(4, "rank_one_det_and_xi_ac", err, 1e-10,
                                 Json{{"det", detail::complex_json(det)}, {"xi_ac", xa}});
    });
    guarded(5, "scalar_offaxis_closed_form", [] {
        const RiggedModel m = scalar_finite_model();
        const SpectralPoint z{0.5, 0.5, Side::plus};
        const Complex det = scattering_matrix(m, z, 1.0).det;
        const double xi = smoothed_ssf(m, z);
        const double err = std::max({std::abs(det + 1.0), std::abs(xi - 0.5), bk_offaxis_residual(m, z)});
        return detail::max_check(5, "scalar_offaxis_closed_form", err, 1e-12,
                                 Json{{"det", detail::complex_json(det)}, {"xi", xi}});
    });
    guarded(10, "rank_one_contour", [] {
        const RiggedModel m = rank_one_lattice(3.0);
        return contour_check(contour_cases(m, 2.5, {}), "rank_one_contour");
    });
    return rep;
}

// ---------------------------------------------------------------- finite suite

inline Report finite_suite(std::uint64_t seed) {
    Report rep{"finite", seed, {}};
    const std::vector<FiniteCase> cases = seeded_finite_models(seed);
    Rng rng(seed ^ 0x5bd1e995ULL);

    double trace_worst = 0.0, density_worst = 0.0, path_worst = 0.0, inv_worst = 0.0;
    Json trace_rows = Json::array();
    const TestFunction trace_phis[] = {TestFunction(-2.0, 1.5, 1.0), TestFunction(-0.7, 3.0, 0.5)};
    for (const FiniteCase& fc : cases) {
        const RiggedModel& m = fc.model;
        for (const TestFunction& phi : trace_phis) {
            const auto [lhs, rhs] = trace_formula_check(m, phi);
            trace_worst = std::max(trace_worst, std::abs(lhs - rhs));
            trace_rows.push_back(Json{{"lhs", lhs}, {"rhs", rhs}});
        }
        // Counting density: xi = N_{H0} - N_{H1} is piecewise constant
        // between the eigenvalues of H0 and H1.
        const RVector e0 = eig_hermitian(m.H(0.0)).eigenvalues;
        const RVector e1 = eig_hermitian(m.H(1.0)).eigenvalues;
        for (const TestFunction& phi : {TestFunction(-1.2, 0.9), TestFunction(-3.0, 3.0, 0.6)}) {
            const auto [a, b] = phi.support();
            std::vector<double> cuts{a, b};
            for (Index i = 0; i < e0.size(); ++i) {
                if (e0(i) > a && e0(i) < b) cuts.push_back(e0(i));
                if (e1(i) > a && e1(i) < b) cuts.push_back(e1(i));
            }
            std::sort(cuts.begin(), cuts.end());
            double expect = 0.0;
            for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
                if (cuts[j + 1] - cuts[j] < 1e-12) continue;
                const double mid = 0.5 * (cuts[j] + cuts[j + 1]);
                long n = 0;
                for (Index i = 0; i < e0.size(); ++i) n += (e0(i) <= mid) - (e1(i) <= mid);
                expect += static_cast<double>(n) * detail::gk([&](double x) { return phi(x); }, cuts[j], cuts[j + 1]);
            }
            density_worst = std::max(density_worst, std::abs(ssf_measure(m, phi) - expect));
            path_worst = std::max(path_worst, std::abs(ssf_measure(m, phi) - ssf_measure(fc.bent, phi)));
        }
        // Invariance principle for g(x) = x + 0.3 sin x: the spectral shift of
        // (g(H1), g(H0)) paired with f equals that of (H1, H0) paired with f(g) g'.
        auto g = [](double x) { return x + 0.3 * std::sin(x); };
        auto dg = [](double x) { return 1.0 + 0.3 * std::cos(x); };
        for (const TestFunction& f : {TestFunction(-1.0, 1.3), TestFunction(-2.5, 0.2, 2.0)}) {
            double lhs = 0.0;
            for (Index i = 0; i < e0.size(); ++i) {
                const double lo = g(e0(i)), hi = g(e1(i));
                if (lo != hi) lhs += detail::gk([&](double x) { return f(x); }, lo, hi);
            }
            const CompactFunction pulled{-50.0, 50.0, [&](double x) { return f(g(x)) * dg(x); }};
            inv_worst = std::max(inv_worst, std::abs(lhs - ssf_measure(m, pulled)));
        }
    }
    rep.checks.push_back(detail::max_check(9, "trace_formula", trace_worst, 1e-8, Json{{"cases", trace_rows}}));
    rep.checks.push_back(detail::max_check(9, "measure_vs_counting_density", density_worst, 1e-8));
    rep.checks.push_back(detail::max_check(9, "path_independence", path_worst, 1e-8));
    rep.checks.push_back(detail::max_check(9, "invariance_principle", inv_worst, 1e-8));

    // Resonance index: contour vs counting per group, total vs eigenvalue counting.
    std::vector<ContourCase> contours;
    std::size_t total_ok = 0, total_n = 0, mu_ok = 0;
    Json idx_rows = Json::array();
    try {
        for (const FiniteCase& fc : cases) {
            const RiggedModel& m = fc.model;
            const RVector e0 = eig_hermitian(m.H(0.0)).eigenvalues;
            const RVector e1 = eig_hermitian(m.H(1.0)).eigenvalues;
            const double lo = std::min(e0.minCoeff(), e1.minCoeff()) - 0.5;
            const double hi = std::max(e0.maxCoeff(), e1.maxCoeff()) + 0.5;
            int drawn = 0;
            for (int attempts = 0; drawn < 4 && attempts < 40; ++attempts) {
                const double lam = rng.uniform(lo, hi);
                long counting = 0;
                try {
                    counting = ssf_counting_oracle(m, lam);
                } catch (const IllPosed&) {
                    continue;
                }
                ++drawn;
                const int idx = total_resonance_index(m, lam);
                const int ms = mu_singular(m, lam).value;
                ++total_n;
                if (idx == counting) ++total_ok;
                if (ms == -counting) ++mu_ok;
                idx_rows.push_back(Json{{"lambda", lam}, {"counting", counting}, {"index", idx}, {"mu_s", ms}});
                for (const ContourCase& c : contour_cases(m, lam, {})) contours.push_back(c);
            }
        }
        rep.checks.push_back(contour_check(contours, "contour_vs_counting"));
        CheckResult t = detail::fraction_check(10, "total_index_vs_eigenvalue_count", total_ok, total_n, 1.0,
                                               Json{{"samples", idx_rows}});
        rep.checks.push_back(std::move(t));
        rep.checks.push_back(detail::fraction_check(3, "mu_singular_vs_eigenvalue_count", mu_ok, total_n, 1.0));
    } catch (const std::exception& e) {
        rep.checks.push_back(detail::failed(10, "finite_resonance_index", e.what()));
    }
    return rep;
}

// ---------------------------------------------------------------- lattice suite

struct LatticeSample {
    std::size_t model = 0;
    SSFSample ssf;
    std::string error;  // pointwise/singular SSF failed
    std::optional<int> index;
    std::string index_error;
    std::optional<int> mu;
    std::string mu_error;
    Complex det{1.0, 0.0};
    double bk_xi = 0.0;
    double bk_ac = 0.0;

    bool usable() const { return error.empty() && !ssf.near_resonance; }
};

inline LatticeSample lattice_sample(const RiggedModel& m, std::size_t model, double lambda, const NumericsConfig& cfg) {
    LatticeSample s;
    s.model = model;
    s.ssf.lambda = lambda;
    try {
        s.ssf = singular_ssf(m, lambda, cfg);
    } catch (const std::exception& e) {
        s.error = e.what();
        return s;
    }
    if (s.ssf.near_resonance) return s;
    try {
        s.index = total_resonance_index(m, lambda, cfg);
    } catch (const std::exception& e) {
        s.index_error = e.what();
    }
    try {
        s.mu = mu_singular(m, lambda, cfg).value;
    } catch (const std::exception& e) {
        s.mu_error = e.what();
    }
    s.det = scattering_matrix(m, {lambda, 0.0, Side::plus}, 1.0, cfg.rank_tol).det;
    s.bk_xi = std::abs(s.det - std::exp(-2.0 * kPi * kI * s.ssf.xi));
    s.bk_ac = std::abs(s.det - std::exp(-2.0 * kPi * kI * s.ssf.xi_ac));
    return s;
}

struct LatticeOptions {
    int samples = 100;        // unflagged in-band samples across the three models
    int draws_per_model = 45; // candidates drawn per model
    int structure_per_model = 3;
    int ode_per_model = 2;
    int islands = 2;
    int island_draws = 25;
    int island_samples = 20;  // unflagged samples kept per island model
    unsigned threads = 0;
};

namespace detail {

/// The first quota[m] usable samples of model m, in draw order.
inline std::vector<LatticeSample> take_usable(const std::vector<LatticeSample>& all, const std::vector<int>& quota,
                                              Json& population) {
    std::vector<LatticeSample> used;
    std::size_t flagged = 0, errors = 0;
    for (std::size_t mi = 0; mi < quota.size(); ++mi) {
        int taken = 0;
        for (const LatticeSample& s : all) {
            if (s.model != mi || taken >= quota[mi]) continue;
            if (!s.error.empty()) ++errors;
            else if (s.ssf.near_resonance) ++flagged;
            if (!s.usable()) continue;
            used.push_back(s);
            ++taken;
        }
    }
    population = Json{{"unflagged", used.size()}, {"flagged", flagged}, {"errors", errors}};
    return used;
}

/// C1, C2, C3, C4 and C6 over one population of in-band samples.
inline void population_checks(Report& rep, const std::vector<LatticeSample>& used, const std::string& suffix,
                              std::size_t required, const Json& population) {
    const std::size_t n = used.size();
    {
        std::size_t good = 0, nonzero = 0;
        double worst = 0.0;
        for (const LatticeSample& s : used) {
            if (s.ssf.residual <= 5e-3) ++good;
            if (s.ssf.xi_s_rounded != 0) ++nonzero;
            worst = std::max(worst, s.ssf.residual);
        }
        Json d = population;
        d["nonzero_xi_s"] = nonzero;
        d["worst_residual"] = worst;
        CheckResult c = fraction_check(1, "integer_valuedness" + suffix, good, n, 0.95, d);
        if (n < required) {
            c.pass = false;
            c.summary += ", only " + std::to_string(n) + " usable";
        }
        rep.checks.push_back(std::move(c));
    }
    {
        std::size_t good = 0;
        Json mism = Json::array();
        for (const LatticeSample& s : used) {
            if (s.index && *s.index == s.ssf.xi_s_rounded) ++good;
            else if (mism.size() < 10)
                mism.push_back(Json{{"model", s.model}, {"lambda", s.ssf.lambda}, {"xi_s", s.ssf.xi_s},
                                    {"index", s.index ? Json(*s.index) : Json(s.index_error)}});
        }
        rep.checks.push_back(
            fraction_check(2, "singular_ssf_equals_total_index" + suffix, good, n, 0.95, Json{{"mismatches", mism}}));
    }
    {
        std::size_t good = 0;
        Json mism = Json::array();
        for (const LatticeSample& s : used) {
            if (s.mu && *s.mu == -s.ssf.xi_s_rounded) ++good;
            else if (mism.size() < 10)
                mism.push_back(Json{{"model", s.model}, {"lambda", s.ssf.lambda}, {"xi_s", s.ssf.xi_s},
                                    {"mu_s", s.mu ? Json(*s.mu) : Json(s.mu_error)}});
        }
        rep.checks.push_back(fraction_check(3, "mu_singular_equals_minus_xi_s" + suffix, good, n, 1.0,
                                            Json{{"theta_samples", 8}, {"mismatches", mism}}));
    }
    {
        double worst_ac = 0.0;
        std::size_t good = 0;
        for (const LatticeSample& s : used) {
            worst_ac = std::max(worst_ac, s.bk_ac);
            if (s.bk_xi <= 5e-3) ++good;
        }
        CheckResult c = max_check(4, "birman_krein_ac" + suffix, worst_ac, 1e-8, Json{{"samples", n}});
        if (n == 0) c.pass = false;
        rep.checks.push_back(std::move(c));
        rep.checks.push_back(fraction_check(6, "birman_krein_extrapolated" + suffix, good, n, 0.95));
    }
}

}  // namespace detail

inline Report lattice_suite(std::uint64_t seed, const LatticeOptions& opt = {}) {
    Report rep{"lattice", seed, {}};
    const std::vector<RiggedModel> models = seeded_lattice_models(seed);
    const std::vector<IslandModel> islands = seeded_island_models(seed, opt.islands);
    const NumericsConfig cfg;
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const double edge = 2.0 - 1e-3;

    // Draws: straight-path models first, then the island models.
    std::vector<std::pair<std::size_t, double>> draws;
    for (std::size_t mi = 0; mi < models.size(); ++mi)
        for (int i = 0; i < opt.draws_per_model; ++i) draws.emplace_back(mi, rng.uniform(-edge, edge));
    for (std::size_t ii = 0; ii < islands.size(); ++ii)
        for (int i = 0; i < opt.island_draws; ++i) draws.emplace_back(models.size() + ii, rng.uniform(-edge, edge));
    const std::vector<LatticeSample> all = parallel_map(
        draws.size(),
        [&](std::size_t i) {
            const std::size_t mi = draws[i].first;
            const RiggedModel& m = mi < models.size() ? models[mi] : islands[mi - models.size()].model;
            return lattice_sample(m, mi, draws[i].second, cfg);
        },
        opt.threads);

    std::vector<int> quota;
    for (std::size_t mi = 0; mi < models.size(); ++mi)
        quota.push_back(opt.samples / 3 + (static_cast<int>(mi) < opt.samples % 3 ? 1 : 0));
    Json population;
    const std::vector<LatticeSample> used = detail::take_usable(all, quota, population);
    detail::population_checks(rep, used, "", static_cast<std::size_t>(opt.samples), population);

    // Island models: a nonzero singular part with a closed form.
    {
        std::vector<int> iquota(models.size(), 0);
        for (std::size_t ii = 0; ii < islands.size(); ++ii) iquota.push_back(opt.island_samples);
        Json ipop;
        const std::vector<LatticeSample> iused = detail::take_usable(all, iquota, ipop);
        detail::population_checks(rep, iused, "_island", islands.size() * static_cast<std::size_t>(opt.island_samples),
                                  ipop);
        std::size_t good = 0, nonzero = 0;
        Json mism = Json::array();
        for (const LatticeSample& s : iused) {
            const long expect = islands[s.model - models.size()].expected_xi_s(s.ssf.lambda);
            if (expect != 0) ++nonzero;
            if (s.ssf.xi_s_rounded == expect) ++good;
            else if (mism.size() < 10)
                mism.push_back(Json{{"model", s.model}, {"lambda", s.ssf.lambda}, {"xi_s", s.ssf.xi_s}, {"expected", expect}});
        }
        Json d{{"nonzero_expected", nonzero}, {"mismatches", mism}};
        Json params = Json::array();
        for (const IslandModel& im : islands) params.push_back(Json{{"a", im.a}, {"b", im.b}});
        d["islands"] = params;
        rep.checks.push_back(detail::fraction_check(2, "island_closed_form", good, iused.size(), 1.0, d));
    }

    // Per-model subsets for the more expensive checks.
    std::vector<std::vector<double>> subset(models.size());
    for (const LatticeSample& s : used)
        if (static_cast<int>(subset[s.model].size()) < opt.structure_per_model) subset[s.model].push_back(s.ssf.lambda);

    // C5
    try {
        double worst = 0.0;
        for (std::size_t mi = 0; mi < models.size(); ++mi)
            for (double lam : subset[mi])
                for (double y : {1.0, 0.1, 0.01})
                    worst = std::max(worst, bk_offaxis_residual(models[mi], {lam, y, Side::plus}));
        rep.checks.push_back(detail::max_check(5, "birman_krein_offaxis", worst, 1e-9));
    } catch (const std::exception& e) {
        rep.checks.push_back(detail::failed(5, "birman_krein_offaxis", e.what()));
    }

    // C7
    try {
        double unit = 0.0, cross = 0.0, mult = 0.0, embed_full = 0.0, embed_deficient = 0.0;
        int deficient = 0;
        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            const RiggedModel& m = models[mi];
            for (double lam : subset[mi]) {
                unit = std::max(unit, scattering_matrix(m, {lam, 0.0, Side::plus}, 1.0).unitarity_defect());
                cross = std::max(cross, cross_check_S(m, lam, 1.0));
                for (Side side : {Side::plus, Side::minus}) {
                    const CMatrix w10 = wave_matrix(m, lam, 1.0, 0.4, side).matrix;
                    const CMatrix w04 = wave_matrix(m, lam, 0.4, 0.0, side).matrix;
                    const CMatrix w00 = wave_matrix(m, lam, 1.0, 0.0, side).matrix;
                    if (w00.size() > 0) mult = std::max(mult, op_norm(w10 * w04 - w00));
                }
                const double e = op_norm(scattering_full(m, {lam, 1e-6, Side::plus}, 1.0) -
                                         scattering_full(m, {lam, 0.0, Side::plus}, 1.0));
                if (fibre_basis(m, 0.0, lam).basis.cols() == m.k()) {
                    embed_full = std::max(embed_full, e);
                } else {
                    embed_deficient = std::max(embed_deficient, e);
                    ++deficient;
                }
            }
        }
        rep.checks.push_back(detail::max_check(7, "unitarity", unit, 1e-8));
        rep.checks.push_back(detail::max_check(7, "wave_matrix_cross_check", cross, 1e-7));
        rep.checks.push_back(detail::max_check(7, "wave_matrix_multiplicativity", mult, 1e-7));
        rep.checks.push_back(detail::max_check(7, "offaxis_embedding", std::max(embed_full, embed_deficient), 1e-4,
                                               Json{{"y", 1e-6},
                                                    {"full_rank_fibre_max", embed_full},
                                                    {"rank_deficient_fibre_max", embed_deficient},
                                                    {"rank_deficient_samples", deficient}}));
    } catch (const std::exception& e) {
        rep.checks.push_back(detail::failed(7, "scattering_structure", e.what()));
    }

    // C8
    try {
        double worst_exp = 0.0, worst_rhs = 0.0;
        int used_ode = 0;
        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            const RiggedModel& m = models[mi];
            int taken = 0;
            for (const LatticeSample& s : used) {
                if (s.model != mi || taken >= opt.ode_per_model) continue;
                const double lam = s.ssf.lambda;
                if (!resonance_set(m, lam, 0.0, 1.0, Side::plus, cfg.res_real_tol).resonance_r_values.empty()) continue;
                ++taken;
                const OrderedExpResult oe = ordered_exp_S(m, lam, uniform_grid(0.0, 1.0, 1e-3), cfg);
                const CMatrix S = scattering_matrix(m, {lam, 0.0, Side::plus}, 1.0).S;
                if (S.size() > 0) worst_exp = std::max(worst_exp, op_norm(oe.S.S - S));
                const double r = 0.5, h = 1e-4;
                const CMatrix fd = (scattering_matrix(m, {lam, 0.0, Side::plus}, r + h).S -
                                    scattering_matrix(m, {lam, 0.0, Side::plus}, r - h).S) /
                                   (2.0 * h);
                if (fd.size() > 0) worst_rhs = std::max(worst_rhs, max_abs(fd - scattering_ode_rhs(m, lam, r)));
            }
            used_ode += taken;
        }
        rep.checks.push_back(
            detail::max_check(8, "ordered_exponential", worst_exp, 1e-6, Json{{"lambdas", used_ode}, {"step", 1e-3}}));
        rep.checks.push_back(detail::max_check(8, "ode_rhs_vs_central_difference", worst_rhs, 1e-4, Json{{"h", 1e-4}}));
    } catch (const std::exception& e) {
        rep.checks.push_back(detail::failed(8, "ordered_exponential", e.what()));
    }

    // C10: outside the band every resonance is a bound-state crossing.
    try {
        std::vector<ContourCase> contours;
        std::size_t ok = 0, total = 0;
        Json rows = Json::array();
        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            for (double lam : {-3.1, -2.4, 2.4, 3.1}) {
                const int idx = total_resonance_index(models[mi], lam, cfg);
                const int sweep = lattice_eigenvalue_crossings(models[mi], lam, 0.0, 1.0);
                ++total;
                if (idx == sweep) ++ok;
                rows.push_back(Json{{"model", mi}, {"lambda", lam}, {"index", idx}, {"crossings", sweep}});
                for (const ContourCase& c : contour_cases(models[mi], lam, cfg)) contours.push_back(c);
            }
        }
        rep.checks.push_back(contour_check(contours, "contour_vs_counting"));
        rep.checks.push_back(detail::fraction_check(10, "index_vs_eigenvalue_sweep", ok, total, 1.0, Json{{"cases", rows}}));
    } catch (const std::exception& e) {
        rep.checks.push_back(detail::failed(10, "resonance_index_cross_methods", e.what()));
    }

    // C11
    {
        double worst = 0.0;
        for (const SpectralPoint& z : {SpectralPoint{0.3, 0.0, Side::plus}, SpectralPoint{-1.2, 1e-3, Side::plus},
                                       SpectralPoint{0.7, 0.1, Side::plus}, SpectralPoint{2.5, 0.0, Side::plus},
                                       SpectralPoint{-1.9, 0.0, Side::minus}})
            worst = std::max(worst, truncated_lattice_residual(z, 400));
        rep.checks.push_back(detail::max_check(11, "green_function_truncation", worst, 1e-10, Json{{"sites", 400}}));
    }
    try {
        double worst = 0.0;
        Rng pick(seed ^ 0xc2b2ae3d27d4eb4fULL);
        Json rows = Json::array();
        for (double c : {-0.5, -1.3, -0.9}) {
            const RiggedModel m = bond_hopping_model(c);
            for (int i = 0; i < 2; ++i) {
                CVector phi(2);
                phi << pick.complex_uniform(), pick.complex_uniform();
                const auto [lhs, rhs] = fibre_normalization(m, 1.0, phi, 1e-10);
                worst = std::max(worst, std::abs(lhs - rhs));
                rows.push_back(Json{{"c", c}, {"lhs", lhs}, {"rhs", rhs}});
            }
        }
        rep.checks.push_back(detail::max_check(11, "fibre_normalization", worst, 1e-6, Json{{"cases", rows}}));
    } catch (const std::exception& e) {
        rep.checks.push_back(detail::failed(11, "fibre_normalization", e.what()));
    }
    return rep;
}

inline Report run_suite_once(const std::string& suite, std::uint64_t seed, unsigned threads = 0) {
    if (suite == "rank1") return rank1_suite(seed);
    if (suite == "finite") return finite_suite(seed);
    if (suite == "lattice") {
        LatticeOptions opt;
        opt.threads = threads;
        return lattice_suite(seed, opt);
    }
    throw ParameterError("unknown verify suite '" + suite + "' (expected finite, lattice or rank1)");
}

/// The suite plus a determinism check: a second run with a different
/// thread count must produce the same report bytes.
inline Report run_suite(const std::string& suite, std::uint64_t seed) {
    Report rep = run_suite_once(suite, seed, 0);
    const std::string first = rep.dump();
    const std::string second = run_suite_once(suite, seed, 3).dump();
    CheckResult c;
    c.criterion = 12;
    c.name = "report_bytes_repeat";
    c.pass = first == second;
    c.summary = c.pass ? "two runs byte-identical (" + std::to_string(first.size()) + " bytes)"
                       : "reports differ between two runs";
    c.data = Json{{"bytes", first.size()}, {"threads", Json::array({"hardware", 3})}};
    rep.checks.push_back(std::move(c));
    return rep;
}

}  // namespace ssfkit::verify
