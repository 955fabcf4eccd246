#include "bsdelab/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "bsdelab/bmo.hpp"
#include "bsdelab/bsde.hpp"
#include "bsdelab/csv.hpp"
#include "bsdelab/error.hpp"
#include "bsdelab/forward.hpp"
#include "bsdelab/malliavin.hpp"
#include "bsdelab/verify.hpp"

#ifndef BSDELAB_VERSION
#define BSDELAB_VERSION "0.0.0"
#endif

namespace bsdelab {
namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

class OutputDir {
public:
    explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }
    void write(const std::string& name, const std::string& contents) {
        write_file_atomic(dir_ / name, contents);
        files_.push_back(name);
    }
    const std::vector<std::string>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

struct Context {
    const ExperimentSpec& spec;
    Fixture fixture;
    ExperimentConfig config;
};

std::string key_values(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::ostringstream out;
    for (const auto& [k, v] : rows) out << k << " = " << v << '\n';
    return out.str();
}

std::string yes_no(bool v) { return v ? "true" : "false"; }

TaskResult run_solve(const Context& ctx, OutputDir& out) {
    const PathSet paths = simulate_base(ctx.config);
    const BsdeSolution sol = solve_config(ctx.config, paths);
    out.write("solution.csv", solution_csv(sol));
    const double y0 = sol.y0();
    const double se = sol.y0_standard_error;
    TaskResult r{"solve", std::isfinite(y0), ""};
    std::vector<std::pair<std::string, std::string>> rows{
        {"fixture", ctx.fixture.name},
        {"y0", format_double(y0)},
        {"y0_se", format_double(se)},
        {"ridge_nodes", std::to_string(sol.ridge_nodes)},
        {"max_residual", format_double(*std::max_element(sol.residuals.begin(), sol.residuals.end()))}};
    if (ctx.fixture.reference.kind != ReferenceKind::None) {
        const double ref = ctx.fixture.reference.y0;
        const double gap = std::abs(y0 - ref);
        r.pass = r.pass && gap <= ctx.spec.tolerances.se_multiple * se;
        rows.emplace_back("y0_reference", format_double(ref));
        rows.emplace_back("y0_gap", format_double(gap));
        r.detail = "|Y0 - ref| = " + format_double(gap) + ", SE = " + format_double(se);
    } else {
        r.detail = "Y0 = " + format_double(y0) + " (no reference)";
    }
    rows.emplace_back("pass", yes_no(r.pass));
    out.write("solve.txt", key_values(rows));
    return r;
}

TaskResult run_sensitivity(const Context& ctx, OutputDir& out) {
    ConvergenceOptions opts;
    opts.p = 1.0;
    opts.tolerance = ctx.spec.tolerances.exact_floor;
    opts.scheme = ctx.spec.fd_scheme;
    const SensitivityReport rep = convergence_study(ctx.config, ctx.spec.h_list, 0, opts);
    out.write("sensitivity.csv", sensitivity_csv(rep));
    out.write("sensitivity.txt", sensitivity_summary(rep));
    const ConvergenceTable table = emit_convergence_table({rep});
    out.write("convergence.csv", table.csv);
    out.write("convergence_plot.dat", table.plot);

    const auto& tol = ctx.spec.tolerances;
    const bool slope_ok = rep.pass || (rep.slope >= tol.slope_min && rep.slope <= tol.slope_max);
    bool grad_ok = true;
    if (ctx.fixture.reference.kind != ReferenceKind::None) {
        grad_ok = std::abs(rep.grad_y0 - ctx.fixture.reference.grad_y0) <=
                  tol.se_multiple * rep.grad_y0_standard_error;
    }
    TaskResult r{"sensitivity", rep.monotone && slope_ok && grad_ok, ""};
    r.detail = "slope = " + format_double(rep.slope) + ", monotone = " + yes_no(rep.monotone) +
               ", grad Y0 = " + format_double(rep.grad_y0);
    if (!ctx.spec.epsilons.empty()) {
        const auto rows = stability_diagnostic(ctx.config, ctx.spec.epsilons);
        std::ostringstream csv;
        csv << "epsilon,sup_dY,l2_dZ,ratio_sup,ratio_l2\n";
        for (const auto& row : rows) {
            csv << format_double(row.epsilon) << ',' << format_double(row.sup_dy) << ','
                << format_double(row.l2_dz) << ',' << format_double(row.ratio_sup) << ','
                << format_double(row.ratio_l2) << '\n';
        }
        out.write("stability.csv", csv.str());
    }
    return r;
}

TaskResult run_malliavin(const Context& ctx, OutputDir& out) {
    const PathSet paths = simulate_base(ctx.config);
    const BsdeSolution base = solve_config(ctx.config, paths);
    const RegressionBasis basis(ctx.config.model.dim_x, ctx.config.basis_degree);
    const MalliavinDerivative via_bsde =
        malliavin_from_bsde(base, ctx.config.model, ctx.config.generator, ctx.config.terminal, paths,
                            basis, ctx.spec.theta_list, 0, ctx.config.picard_iters);
    const VariationalSolution var = solve_variational_bsde(
        base, paths, ctx.config.generator, ctx.config.terminal, basis, ctx.config.picard_iters);
    const MalliavinDerivative via_repr =
        representation_from_variational(var, paths, ctx.config.model, ctx.spec.theta_list);
    const TraceReport trace = trace_check(base, via_bsde, ctx.fixture.z_bound);
    const double route = route_distance(via_repr, via_bsde);
    out.write("malliavin.csv", malliavin_csv(via_bsde));
    out.write("malliavin_representation.csv", malliavin_csv(via_repr));
    out.write("trace.txt", trace_summary(trace) + "route_rel_l2 = " + format_double(route) + '\n');
    const auto& tol = ctx.spec.tolerances;
    TaskResult r{"malliavin", trace.aggregate <= tol.trace && route <= tol.route && trace.bound_holds,
                 ""};
    r.detail = "trace aggregate = " + format_double(trace.aggregate) +
               ", route rel L2 = " + format_double(route);
    return r;
}

TaskResult run_bmo(const Context& ctx, OutputDir& out) {
    const PathSet paths = simulate_base(ctx.config);
    const BsdeSolution base = solve_config(ctx.config, paths);
    const RegressionBasis basis(ctx.config.model.dim_x, ctx.config.basis_degree);
    const BmoEstimate bmo = estimate_bmo2(base.z, paths, basis);
    const double alpha = ctx.config.generator.quad_coeff;
    const HolderExponents ex = find_r(alpha, bmo.norm, ctx.spec.r_cap);

    Array3 h({paths.paths(), paths.grid.node_count(), paths.dim_w()});
    std::vector<double> grad(paths.dim_w());
    for (std::size_t p = 0; p < paths.paths(); ++p) {
        for (std::size_t k = 0; k < paths.grid.node_count(); ++k) {
            base.truncation.gradient(base.z.slice(p, k), grad);
            for (std::size_t j = 0; j < grad.size(); ++j) h(p, k, j) = alpha * grad[j];
        }
    }
    const GirsanovWeights weights = girsanov_weights(h, paths);

    const VariationalSolution var = solve_variational_bsde(
        base, paths, ctx.config.generator, ctx.config.terminal, basis, ctx.config.picard_iters);
    const Array2 grads = terminal_gradients(ctx.config.terminal, paths);
    std::vector<double> zeta(paths.paths());
    for (std::size_t p = 0; p < zeta.size(); ++p) zeta[p] = grads(p, 0);
    const MomentBound bound =
        moment_bound_diagnostic(var.axes[0], zeta, Array2(), paths.grid, ex, ctx.spec.moment_p,
                                ctx.config.generator.lipschitz_const);

    std::ostringstream energies;
    energies << "node,mean_tail_energy\n";
    for (std::size_t k = 0; k < paths.grid.node_count(); ++k) {
        double total = 0.0;
        for (std::size_t p = 0; p < paths.paths(); ++p) total += bmo.tail_energy(p, k);
        energies << k << ',' << format_double(total / static_cast<double>(paths.paths())) << '\n';
    }
    out.write("bmo_energy.csv", energies.str());
    out.write("bmo.txt", bmo_report(bmo, ex, weights, bound));
    const bool unit = std::abs(weights.mean - 1.0) <=
                      ctx.spec.tolerances.se_multiple * weights.mean_standard_error;
    TaskResult r{"bmo", unit && bound.pass && ex.slack > 0.0, ""};
    r.detail = "D = " + format_double(bmo.norm) + ", r = " + format_double(ex.r()) +
               ", weight mean = " + format_double(weights.mean) +
               ", moment ratio = " + format_double(bound.ratio);
    return r;
}

std::vector<TaskResult> run_full_verify(const ExperimentSpec& spec, const FixtureRegistry& registry,
                                        OutputDir& out) {
    VerifyOptions options;
    options.seed = spec.seed;
    if (!spec.fixture.empty()) options.fixture = spec.fixture;
    const auto results = verify_all(registry, options);
    std::vector<TaskResult> tasks;
    for (const auto& r : results) {
        std::ostringstream name;
        name << "criterion_" << std::setw(2) << std::setfill('0') << r.id;
        out.write(name.str() + ".csv", r.csv());
        tasks.push_back({name.str(), r.pass, r.detail});
    }
    out.write("verify.txt", verify_summary(results));
    return tasks;
}

}  // namespace

bool RunManifest::passed() const noexcept {
    return std::all_of(tasks.begin(), tasks.end(), [](const TaskResult& t) { return t.pass; });
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["spec_hash"] = spec_hash;
    j["code_version"] = code_version;
    j["seed"] = seed;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    j["pass"] = passed();
    j["tasks"] = nlohmann::ordered_json::array();
    for (const auto& t : tasks) {
        j["tasks"].push_back({{"name", t.name}, {"pass", t.pass}, {"detail", t.detail}});
    }
    j["files"] = files;
    return j.dump(2) + "\n";
}

std::string code_version() { return BSDELAB_VERSION; }

RunManifest run(const ExperimentSpec& spec, const FixtureRegistry& registry,
                const std::filesystem::path& output_root) {
    validate_spec(spec, registry);
    RunManifest manifest;
    manifest.spec_hash = spec_hash(spec);
    manifest.code_version = code_version();
    manifest.seed = spec.seed;
    manifest.started_at = utc_now();
    manifest.run_dir = output_root / manifest.spec_hash;
    OutputDir out(manifest.run_dir);
    out.write("spec.json", canonical_json(spec) + "\n");

    try {
        if (spec.task == Task::FullVerify) {
            manifest.tasks = run_full_verify(spec, registry, out);
        } else {
            Fixture fixture = registry.make(spec.fixture, spec.overrides);
            ExperimentConfig config = make_config(fixture, spec.steps, spec.paths, spec.seed,
                                                  spec.basis_degree, spec.picard_iters);
            config.fd_steps = spec.h_list;
            config.output_dir = manifest.run_dir;
            const Context ctx{spec, std::move(fixture), std::move(config)};
            switch (spec.task) {
                case Task::Solve: manifest.tasks.push_back(run_solve(ctx, out)); break;
                case Task::Sensitivity: manifest.tasks.push_back(run_sensitivity(ctx, out)); break;
                case Task::Malliavin: manifest.tasks.push_back(run_malliavin(ctx, out)); break;
                case Task::Bmo: manifest.tasks.push_back(run_bmo(ctx, out)); break;
                case Task::FullVerify: break;
            }
        }
    } catch (const Error& e) {
        throw Error(e.code(), "fixture '" + spec.fixture + "', task " + to_string(spec.task) +
                                  ": " + e.what());
    }

    manifest.finished_at = utc_now();
    manifest.files = out.files();
    manifest.files.push_back("manifest.json");
    write_file_atomic(manifest.run_dir / "manifest.json", manifest.to_json());
    return manifest;
}

ConvergenceTable emit_convergence_table(const std::vector<SensitivityReport>& reports) {
    std::vector<SensitivityRow> rows;
    double p = 1.0;
    for (const auto& rep : reports) {
        rows.insert(rows.end(), rep.rows.begin(), rep.rows.end());
        p = rep.p;
    }
    if (rows.empty()) fail(ErrorCode::EmptyInput, "convergence table needs at least one row");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const std::pair<const char*, double> cells[] = {
            {"h", row.h}, {"E_sup", row.e_sup}, {"E_L2", row.e_l2_z}};
        for (const auto& [name, value] : cells) {
            if (!std::isfinite(value)) {
                fail(ErrorCode::EmptyInput, "non-finite " + std::string(name) + " in row " +
                                                std::to_string(i) + ": " + format_double(value));
            }
        }
    }

    std::ostringstream csv, plot;
    csv << "h,E_sup,E_L2,slope_cum\n";
    plot << "# log10|h| log10(E_sup)\n";
    std::vector<double> xs, ys;
    for (const auto& row : rows) {
        csv << format_double(row.h) << ',' << format_double(row.e_sup) << ','
            << format_double(row.e_l2_z) << ',';
        if (row.e_sup > 0.0) {
            xs.push_back(std::log10(std::abs(row.h)));
            ys.push_back(std::log10(std::pow(row.e_sup, 1.0 / (2.0 * p))));
            plot << format_double(xs.back()) << ' ' << format_double(std::log10(row.e_sup)) << '\n';
        }
        if (xs.size() >= 2) {
            const double n = static_cast<double>(xs.size());
            const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
            const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
            double sxx = 0.0, sxy = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                sxx += (xs[i] - mx) * (xs[i] - mx);
                sxy += (xs[i] - mx) * (ys[i] - my);
            }
            if (sxx > 0.0) csv << format_double(sxy / sxx);
        }
        csv << '\n';
    }
    return {csv.str(), plot.str()};
}

}  // namespace bsdelab
