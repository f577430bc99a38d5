// ssfkit command-line driver.
//
//   ssfkit --config run.json ssf [--svg plot.svg]
//   ssfkit --config run.json resonance --lambda 2.5
//   ssfkit --config run.json scattering --lambda 0.3 [--y 0.01] [--r 1]
//   ssfkit --config run.json mu [--lambda 0.3]
//   ssfkit verify --suite rank1 [--seed 7]
//
// Exit status: 0 success, 1 numerical failure (or a failing verify check),
// 2 usage or configuration error.  SSFKIT_OUTPUT_DIR overrides the output
// directory named in the config.

#include "ssfkit/ssfkit.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

using namespace ssfkit;
using namespace ssfkit::cli;
namespace fs = std::filesystem;
using OJson = nlohmann::ordered_json;

constexpr int kOk = 0;
constexpr int kNumerical = 1;
constexpr int kUsage = 2;

fs::path output_dir(const std::string& configured) {
    if (const char* env = std::getenv("SSFKIT_OUTPUT_DIR"); env && *env) return env;
    return configured;
}

fs::path prepare(const fs::path& dir, const std::string& file) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir / file;
}

void announce(const fs::path& p, std::size_t rows) {
    std::cout << "wrote " << p.string() << " (" << rows << " rows)\n";
}

struct Loaded {
    RunConfig config;
    RiggedModel model;
    fs::path out;
};

Loaded load(const std::string& file) {
    if (file.empty()) throw ConfigError("this command needs --config");
    Loaded l{load_config(file), {}, {}};
    l.model = build_model(l.config);
    l.out = output_dir(l.config.output_dir);
    return l;
}

// ---------------------------------------------------------------- ssf

int cmd_ssf(const Loaded& l, const std::string& svg) {
    const std::vector<double> grid = l.config.lambda.values(l.model.is_lattice());
    struct Row {
        std::optional<SSFSample> sample;
        std::string error;
    };
    const auto rows = verify::parallel_map(grid.size(), [&](std::size_t i) {
        Row r;
        try {
            r.sample = singular_ssf(l.model, grid[i], l.config.numerics);
        } catch (const Error& e) {
            r.error = e.what();
        }
        return r;
    });
    std::vector<SSFSample> samples;
    int failures = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].sample) {
            samples.push_back(*rows[i].sample);
        } else {
            ++failures;
            std::cerr << "ssf: lambda = " << format_number(grid[i]) << ": " << rows[i].error << "\n";
        }
    }
    const CsvTable t = ssf_table(samples);
    const fs::path p = prepare(l.out, "ssf.csv");
    emit_csv(t, p.string());
    announce(p, t.rows.size());
    if (!svg.empty()) emit_svg(t, "lambda", {"xi", "xi_ac", "xi_s"}, svg);
    if (failures > 0) {
        std::cerr << "ssf: " << failures << " lambda value(s) failed\n";
        return kNumerical;
    }
    return kOk;
}

// ---------------------------------------------------------------- resonance

int cmd_resonance(const Loaded& l, double lambda, const std::string& svg) {
    const NumericsConfig& cfg = l.config.numerics;
    const std::vector<ResonanceGroup> groups = group_resonances(l.model, lambda, 0.0, 1.0, cfg);
    const std::vector<double> near = resonance_set(l.model, lambda, -1.0, 2.0, Side::plus, cfg.res_real_tol).resonance_r_values;

    CsvTable g;
    g.header = {"lambda", "r_lambda", "index", "N_plus", "N_minus", "members", "merged", "monotone", "y_used", "contour"};
    for (const ResonanceGroup& grp : groups) {
        double radius = verify::contour_radius(near, grp.r_lambda);
        double contour = 0.0;
        for (int attempt = 0;; ++attempt) {
            try {
                contour = resonance_index_contour(l.model, lambda, grp.r_lambda, radius, 1e-4, cfg.quad_tol);
                break;
            } catch (const ContourCollision&) {
                if (attempt >= 5) throw;
                radius *= 0.7;
            }
        }
        g.rows.push_back({format_number(lambda), format_number(grp.r_lambda), format_number(grp.index()),
                          format_number(grp.N_plus), format_number(grp.N_minus),
                          format_number(static_cast<long>(grp.members.size())), format_flag(grp.merged),
                          format_flag(grp.monotone), format_number(grp.y_used), format_number(contour)});
    }
    const fs::path gp = prepare(l.out, "resonance_groups.csv");
    emit_csv(g, gp.string());
    announce(gp, g.rows.size());

    // Trajectories, one re/im column pair per pole and path segment.
    const std::vector<double> ys = geometric_ys(1.0, cfg.y_min);
    std::vector<PoleTrajectory> segs;
    for (std::size_t s = 0; s < l.model.path().segment_count(); ++s)
        segs.push_back(track_poles(l.model, lambda, ys, Side::plus, s));
    CsvTable t;
    t.header = {"y"};
    std::vector<std::string> re_cols;
    for (std::size_t s = 0; s < segs.size(); ++s)
        for (std::size_t j = 0; j < segs[s].size(); ++j) {
            const std::string tag = "s" + std::to_string(s) + "_p" + std::to_string(j);
            t.header.push_back(tag + "_re");
            t.header.push_back(tag + "_im");
            re_cols.push_back(tag + "_re");
        }
    for (std::size_t i = 0; i < ys.size(); ++i) {
        std::vector<std::string> row{format_number(ys[i])};
        for (const PoleTrajectory& tr : segs)
            for (std::size_t j = 0; j < tr.size(); ++j) {
                row.push_back(format_number(tr.r[j][i].real()));
                row.push_back(format_number(tr.r[j][i].imag()));
            }
        t.rows.push_back(std::move(row));
    }
    const fs::path tp = prepare(l.out, "resonance_trajectories.csv");
    emit_csv(t, tp.string());
    announce(tp, t.rows.size());
    if (!svg.empty()) emit_svg(t, "y", re_cols, svg);
    return kOk;
}

// ---------------------------------------------------------------- scattering

OJson matrix_json(const CMatrix& m) {
    OJson re = OJson::array(), im = OJson::array();
    for (Index i = 0; i < m.rows(); ++i) {
        OJson rr = OJson::array(), ri = OJson::array();
        for (Index j = 0; j < m.cols(); ++j) {
            rr.push_back(m(i, j).real());
            ri.push_back(m(i, j).imag());
        }
        re.push_back(std::move(rr));
        im.push_back(std::move(ri));
    }
    return OJson{{"re", re}, {"im", im}};
}

int cmd_scattering(const Loaded& l, double lambda, double y, double r) {
    const NumericsConfig& cfg = l.config.numerics;
    const SpectralPoint at{lambda, y, Side::plus};
    const ScatteringMatrix S = scattering_matrix(l.model, at, r, cfg.rank_tol);
    OJson j;
    j["lambda"] = lambda;
    j["y"] = y;
    j["r"] = r;
    j["on_shell"] = S.on_shell;
    j["dim"] = S.S.rows();
    j["S"] = matrix_json(S.S);
    j["det"] = OJson::array({S.det.real(), S.det.imag()});
    OJson res;
    res["unitarity"] = S.unitarity_defect();
    if (S.on_shell) {
        res["wave_matrix_cross_check"] = cross_check_S(l.model, lambda, r, cfg.rank_tol);
        if (r == 1.0) {
            const BirmanKreinResiduals bk = birman_krein_residuals(l.model, lambda, cfg);
            res["birman_krein_xi"] = bk.res_xi;
            res["birman_krein_xi_ac"] = bk.res_xia;
            j["xi"] = bk.xi;
            j["xi_ac"] = bk.xi_ac;
        }
    } else if (r == 1.0) {
        res["birman_krein_offaxis"] = bk_offaxis_residual(l.model, at, cfg.quad_tol);
        j["xi"] = smoothed_ssf(l.model, at, cfg.quad_tol);
    }
    j["residuals"] = res;
    const fs::path p = prepare(l.out, "scattering.json");
    write_file(p.string(), j.dump(2) + "\n");
    std::cout << "wrote " << p.string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------- mu

int cmd_mu(const Loaded& l, std::optional<double> lambda, const std::string& svg) {
    const NumericsConfig& cfg = l.config.numerics;
    const std::vector<double> grid = lambda ? std::vector<double>{*lambda} : l.config.lambda.values(l.model.is_lattice());
    struct Row {
        std::optional<MuSingular> mu;
        double xi_s = 0.0;
        std::string error;
    };
    const auto rows = verify::parallel_map(grid.size(), [&](std::size_t i) {
        Row r;
        try {
            r.mu = mu_singular(l.model, grid[i], cfg, l.config.theta_count);
            r.xi_s = singular_ssf(l.model, grid[i], cfg).xi_s;
        } catch (const Error& e) {
            r.error = e.what();
        }
        return r;
    });
    CsvTable t;
    t.header = {"lambda", "theta", "mu", "mu_a", "mu_s", "minus_xi_s"};
    int failures = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].mu) {
            ++failures;
            std::cerr << "mu: lambda = " << format_number(grid[i]) << ": " << rows[i].error << "\n";
            continue;
        }
        const MuSingular& m = *rows[i].mu;
        t.rows.push_back({format_number(grid[i]), format_number(m.thetas[0]), format_number(m.mu_pushnitski[0]),
                          format_number(m.mu_ac[0]), format_number(m.value), format_number(-rows[i].xi_s)});
    }
    const fs::path p = prepare(l.out, "mu.csv");
    emit_csv(t, p.string());
    announce(p, t.rows.size());
    if (!svg.empty()) emit_svg(t, "lambda", {"mu_s", "minus_xi_s"}, svg);
    if (failures > 0) {
        std::cerr << "mu: " << failures << " lambda value(s) failed\n";
        return kNumerical;
    }
    return kOk;
}

// ---------------------------------------------------------------- verify

int cmd_verify(const std::string& suite, std::uint64_t seed, const std::string& config_file) {
    std::string dir = ".";
    if (!config_file.empty()) dir = load_config(config_file).output_dir;
    const verify::Report rep = verify::run_suite(suite, seed);
    for (const verify::CheckResult& c : rep.checks)
        std::cout << (c.pass ? "PASS " : "FAIL ") << "C" << c.criterion << " " << c.name << ": " << c.summary << "\n";
    const fs::path p = prepare(output_dir(dir), "verify_" + suite + ".json");
    write_file(p.string(), rep.dump());
    std::cout << "wrote " << p.string() << "\n";
    if (!rep.pass()) {
        std::cerr << "failing checks:";
        for (const verify::CheckResult& c : rep.checks)
            if (!c.pass) std::cerr << " C" << c.criterion << "/" << c.name;
        std::cerr << "\n";
        return kNumerical;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral shift function toolkit"};
    std::string config_file, svg;
    app.add_option("--config", config_file, "run configuration (JSON, schema 1)");
    app.require_subcommand(1);

    auto* ssf = app.add_subcommand("ssf", "pointwise, a.c. and singular SSF over the lambda grid");
    ssf->add_option("--svg", svg, "also plot the CSV to this SVG file");

    double lambda = 0.0, y = 0.0, r = 1.0;
    auto* res = app.add_subcommand("resonance", "resonance groups and pole trajectories at one lambda");
    res->add_option("--lambda", lambda)->required();
    res->add_option("--svg", svg);

    auto* sc = app.add_subcommand("scattering", "scattering matrix and its residuals");
    sc->add_option("--lambda", lambda)->required();
    sc->add_option("--y", y, "distance from the real axis (0: on shell)")->check(CLI::NonNegativeNumber);
    sc->add_option("--r", r, "coupling parameter");

    std::optional<double> mu_lambda;
    auto* mu = app.add_subcommand("mu", "singular mu-invariant (single lambda or the config grid)");
    mu->add_option("--lambda", mu_lambda);
    mu->add_option("--svg", svg);

    std::string suite;
    std::uint64_t seed = 1;
    auto* ver = app.add_subcommand("verify", "seeded verification suite");
    ver->add_option("--suite", suite)->required()->check(CLI::IsMember({"finite", "lattice", "rank1"}));
    ver->add_option("--seed", seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*ver) return cmd_verify(suite, seed, config_file);
        const Loaded l = load(config_file);
        if (*ssf) return cmd_ssf(l, svg);
        if (*res) return cmd_resonance(l, lambda, svg);
        if (*sc) return cmd_scattering(l, lambda, y, r);
        if (*mu) return cmd_mu(l, mu_lambda, svg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kUsage;
    } catch (const ParameterError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    }
    return kUsage;
}
