#pragma once
// Run configuration: a JSON document (schema 1) describing the model, the
// coupling path, numerical tolerances, the lambda grid and the seed.

#include "ssfkit/models.hpp"
#include "ssfkit/random.hpp"
#include "ssfkit/resolvent.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace ssfkit::cli {

using Json = nlohmann::json;

class ConfigError : public Error {
public:
    using Error::Error;
};

struct LambdaGrid {
    double lo = -1.9;
    double hi = 1.9;
    int count = 39;
    double edge_margin = 1e-3;  // lattice grids skip points this close to +-2

    std::vector<double> values(bool lattice) const {
        std::vector<double> out;
        for (int i = 0; i < count; ++i) {
            const double lam = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
            if (lattice && std::abs(std::abs(lam) - 2.0) < edge_margin) continue;
            out.push_back(lam);
        }
        return out;
    }
};

struct RunConfig {
    int schema = 1;
    std::uint64_t seed = 0;
    Json model;
    Json path;
    NumericsConfig numerics;
    LambdaGrid lambda;
    int theta_count = 8;
    std::string output_dir = ".";
};

namespace detail {

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

inline void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("numerics.") + name + " must be positive");
}

inline std::vector<std::vector<double>> rows_of(const Json& j, const char* what) {
    if (!j.is_array()) throw ConfigError(std::string(what) + ": expected an array of rows");
    try {
        return j.get<std::vector<std::vector<double>>>();
    } catch (const Json::exception&) {
        throw ConfigError(std::string(what) + ": rows must be arrays of numbers");
    }
}

}  // namespace detail

/// A matrix is one of
///   [[a, b], [c, d]]                      real entries
///   {"re": [[...]], "im": [[...]]}        complex entries
///   {"random_hermitian": {"n": 3, "scale": 1.0}}   drawn from the run's generator
inline CMatrix parse_matrix(const Json& j, Rng& rng, const char* what) {
    if (j.is_object() && j.contains("random_hermitian")) {
        const Json& spec = j.at("random_hermitian");
        const int n = detail::get_or<int>(spec, "n", 0);
        if (n <= 0) throw ConfigError(std::string(what) + ": random_hermitian needs n > 0");
        return rng.hermitian(n, detail::get_or<double>(spec, "scale", 1.0)).matrix();
    }
    std::vector<std::vector<double>> re, im;
    if (j.is_object()) {
        if (!j.contains("re")) throw ConfigError(std::string(what) + ": complex matrix needs 're'");
        re = detail::rows_of(j.at("re"), what);
        if (j.contains("im")) im = detail::rows_of(j.at("im"), what);
    } else {
        re = detail::rows_of(j, what);
    }
    const Index rows = static_cast<Index>(re.size());
    const Index cols = rows == 0 ? 0 : static_cast<Index>(re[0].size());
    if (rows == 0 || cols == 0) throw ConfigError(std::string(what) + ": empty matrix");
    if (!im.empty() && im.size() != re.size()) throw ConfigError(std::string(what) + ": re/im shapes differ");
    CMatrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto& r = re[static_cast<std::size_t>(i)];
        if (static_cast<Index>(r.size()) != cols) throw ConfigError(std::string(what) + ": ragged rows");
        for (Index c = 0; c < cols; ++c) {
            double v_im = 0.0;
            if (!im.empty()) {
                const auto& ri = im[static_cast<std::size_t>(i)];
                if (static_cast<Index>(ri.size()) != cols) throw ConfigError(std::string(what) + ": re/im shapes differ");
                v_im = ri[static_cast<std::size_t>(c)];
            }
            m(i, c) = Complex(r[static_cast<std::size_t>(c)], v_im);
        }
    }
    return m;
}

inline HermMatrix parse_hermitian(const Json& j, Rng& rng, const char* what, double tol = 1e-12) {
    const CMatrix m = parse_matrix(j, rng, what);
    if (m.rows() != m.cols()) throw ConfigError(std::string(what) + ": must be square");
    HermMatrix h(m);
    if (h.hermiticity_residual() > tol * std::max(1.0, max_abs(m))) throw ConfigError(std::string(what) + ": not Hermitian");
    return h;
}

inline NumericsConfig parse_numerics(const Json& j) {
    NumericsConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw ConfigError("numerics must be an object");
    c.rank_tol = detail::get_or(j, "rank_tol", c.rank_tol);
    c.quad_tol = detail::get_or(j, "quad_tol", c.quad_tol);
    c.res_real_tol = detail::get_or(j, "res_real_tol", c.res_real_tol);
    c.group_tol = detail::get_or(j, "group_tol", c.group_tol);
    c.delta = detail::get_or(j, "delta", c.delta);
    c.wave_tol = detail::get_or(j, "wave_tol", c.wave_tol);
    c.ode_tol = detail::get_or(j, "ode_tol", c.ode_tol);
    c.mu_guard = detail::get_or(j, "mu_guard", c.mu_guard);
    c.y_min = detail::get_or(j, "y_min", c.y_min);
    if (j.contains("ygrid")) {
        const Json& g = j.at("ygrid");
        c.ygrid_y0 = detail::get_or(g, "y0", c.ygrid_y0);
        c.ygrid_ratio = detail::get_or(g, "ratio", c.ygrid_ratio);
        c.ygrid_count = detail::get_or(g, "count", c.ygrid_count);
        c.richardson_order = detail::get_or(g, "order", c.richardson_order);
    }
    const std::pair<double, const char*> positive[] = {
        {c.rank_tol, "rank_tol"}, {c.quad_tol, "quad_tol"}, {c.res_real_tol, "res_real_tol"},
        {c.group_tol, "group_tol"}, {c.delta, "delta"},      {c.wave_tol, "wave_tol"},
        {c.ode_tol, "ode_tol"},   {c.mu_guard, "mu_guard"}, {c.y_min, "y_min"},
        {c.ygrid_y0, "ygrid.y0"}};
    for (const auto& [v, name] : positive) detail::require_positive(v, name);
    if (!(c.ygrid_ratio > 0.0 && c.ygrid_ratio < 1.0)) throw ConfigError("numerics.ygrid.ratio must lie in (0,1)");
    if (c.richardson_order < 0 || c.ygrid_count < c.richardson_order + 2)
        throw ConfigError("numerics.ygrid.count must be at least order + 2");
    return c;
}

inline RunConfig parse_config(const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    c.schema = detail::get_or(j, "schema", 0);
    if (c.schema != 1) throw ConfigError("unsupported config schema (expected \"schema\": 1)");
    c.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
    if (!j.contains("model") || !j.at("model").is_object()) throw ConfigError("config needs a 'model' object");
    if (!j.contains("path") || !j.at("path").is_object()) throw ConfigError("config needs a 'path' object");
    c.model = j.at("model");
    c.path = j.at("path");
    c.numerics = parse_numerics(j.contains("numerics") ? j.at("numerics") : Json());
    if (j.contains("lambda")) {
        const Json& g = j.at("lambda");
        c.lambda.lo = detail::get_or(g, "lo", c.lambda.lo);
        c.lambda.hi = detail::get_or(g, "hi", c.lambda.hi);
        c.lambda.count = detail::get_or(g, "count", c.lambda.count);
        c.lambda.edge_margin = detail::get_or(g, "edge_margin", c.lambda.edge_margin);
        if (c.lambda.count < 1 || !(c.lambda.hi >= c.lambda.lo) || !(c.lambda.edge_margin >= 0.0))
            throw ConfigError("lambda grid needs count >= 1, hi >= lo and a non-negative edge_margin");
    }
    c.theta_count = detail::get_or(j, "theta_count", c.theta_count);
    if (c.theta_count < 8) throw ConfigError("theta_count must be at least 8");
    if (j.contains("output")) c.output_dir = detail::get_or<std::string>(j.at("output"), "dir", c.output_dir);
    return c;
}

inline RunConfig load_config(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file '" + file + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config(Json::parse(buf.str()));
    } catch (const Json::parse_error& e) {
        throw ConfigError("config '" + file + "' is not valid JSON: " + e.what());
    }
}

inline CouplingPath build_path(const Json& p, Rng& rng) {
    const std::string kind = detail::get_or<std::string>(p, "kind", "straight");
    try {
        if (kind == "straight") {
            if (!p.contains("direction")) throw ConfigError("straight path needs 'direction'");
            return CouplingPath::straight(parse_hermitian(p.at("direction"), rng, "path.direction"));
        }
        if (kind == "polynomial") {
            std::vector<HermMatrix> coeffs;
            for (const Json& c : p.at("coefficients")) coeffs.push_back(parse_hermitian(c, rng, "path.coefficients"));
            return CouplingPath::polynomial(coeffs);
        }
        if (kind == "polyline") {
            std::vector<HermMatrix> vertices;
            for (const Json& v : p.at("vertices")) vertices.push_back(parse_hermitian(v, rng, "path.vertices"));
            return CouplingPath::polyline(vertices, p.at("knots").get<std::vector<double>>());
        }
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("path: ") + e.what());
    }
    throw ConfigError("unknown path kind '" + kind + "'");
}

/// Materialize the model.  Random matrices are drawn in document order
/// (model, then path) from a generator seeded with the run seed.
inline RiggedModel build_model(const RunConfig& c) {
    Rng rng(c.seed);
    const Json& m = c.model;
    const std::string kind = detail::get_or<std::string>(m, "kind", "");
    try {
        if (kind == "lattice") {
            const auto window = m.at("window").get<std::vector<long>>();
            const auto weights = detail::get_or(m, "weights", std::vector<double>(window.size(), 1.0));
            const HermMatrix bg = m.contains("J_bg") ? parse_hermitian(m.at("J_bg"), rng, "model.J_bg")
                                                     : HermMatrix::zero(static_cast<Index>(window.size()));
            return build_lattice(window, weights, bg, build_path(c.path, rng));
        }
        if (kind == "finite") {
            const HermMatrix H0 = parse_hermitian(m.at("H0"), rng, "model.H0");
            const CMatrix F = m.contains("F") ? parse_matrix(m.at("F"), rng, "model.F") : CMatrix::Identity(H0.size(), H0.size());
            return build_finite(H0, F, build_path(c.path, rng));
        }
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("model: ") + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    throw ConfigError("model.kind must be 'lattice' or 'finite'");
}

}  // namespace ssfkit::cli
