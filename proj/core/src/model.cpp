#include "bsdelab/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "bsdelab/error.hpp"

namespace bsdelab {

TimeGrid build_grid(double horizon, std::size_t steps) {
    require(horizon > 0.0 && std::isfinite(horizon), ErrorCode::BadGrid,
            "horizon must be positive and finite");
    require(steps >= 2, ErrorCode::BadGrid, "need at least 2 steps");
    TimeGrid grid;
    grid.horizon_ = horizon;
    grid.steps_ = steps;
    grid.dt_ = horizon / static_cast<double>(steps);
    grid.nodes_.resize(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        grid.nodes_[k] = static_cast<double>(k) * horizon / static_cast<double>(steps);
    }
    return grid;
}

QuadraticGenerator QuadraticGenerator::pure_quadratic(double alpha, std::size_t dim_x) {
    return discounting(0.0, alpha, dim_x);
}

QuadraticGenerator QuadraticGenerator::discounting(double rate, double alpha, std::size_t) {
    QuadraticGenerator gen;
    gen.lipschitz_part = [rate](double, std::span<const double>, double y,
                                std::span<const double>) { return -rate * y; };
    gen.dx = [](double, std::span<const double>, double, std::span<const double>,
                std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
    gen.dy = [rate](double, std::span<const double>, double, std::span<const double>) {
        return -rate;
    };
    gen.dz = [](double, std::span<const double>, double, std::span<const double>,
                std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
    gen.quad_coeff = alpha;
    gen.lipschitz_const = std::abs(rate);
    return gen;
}

void ExperimentConfig::validate() const {
    require(path_count >= 100, ErrorCode::InvalidArgument, "path_count must be >= 100");
    require(picard_iters >= 1, ErrorCode::InvalidArgument, "picard_iters must be >= 1");
    require(initial_point.size() == model.dim_x, ErrorCode::InvalidArgument,
            "initial_point dimension does not match the forward model");
    require(grid.steps() >= 2, ErrorCode::BadGrid, "grid not built");
    for (double h : fd_steps) {
        require(h != 0.0 && std::isfinite(h), ErrorCode::InvalidArgument,
                "finite-difference steps must be finite and non-zero");
    }
}

bool ValidationReport::passed() const noexcept { return violation_count() == 0; }

std::size_t ValidationReport::violation_count() const noexcept {
    std::size_t total = 0;
    for (const auto& c : checks) total += c.violations;
    return total;
}

const ValidationCheck* ValidationReport::find(std::string_view name) const noexcept {
    for (const auto& c : checks) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

namespace {

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

void require_finite(std::span<const double> values, const char* what, std::size_t probe) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << what << " is non-finite at probe " << probe;
            fail(ErrorCode::NonFiniteCoefficient, msg.str());
        }
    }
}

void require_finite(double value, const char* what, std::size_t probe) {
    require_finite(std::span<const double>(&value, 1), what, probe);
}

class CheckAccumulator {
public:
    CheckAccumulator(std::string name, std::optional<double> limit)
        : check_{std::move(name), 0.0, limit, 0} {}

    void observe(double ratio) {
        check_.observed = std::max(check_.observed, ratio);
        // Relative slack absorbs rounding in the difference quotients.
        if (check_.limit && ratio > *check_.limit * (1.0 + 1e-9) + 1e-12) ++check_.violations;
    }

    ValidationCheck take() { return std::move(check_); }

private:
    ValidationCheck check_;
};

}  // namespace

ValidationReport validate_model(const SdeModel& model, const QuadraticGenerator& generator,
                                const TerminalCondition& terminal, std::size_t probes,
                                std::uint64_t probe_seed) {
    require(probes >= 10, ErrorCode::InvalidArgument, "validate_model needs at least 10 probes");
    const std::size_t n = model.dim_x;
    const std::size_t d = model.dim_w;
    const double c = model.lipschitz_bound;
    const double m = generator.lipschitz_const;

    CheckAccumulator drift_lip("drift_lipschitz", c);
    CheckAccumulator drift_growth("drift_linear_growth", c);
    CheckAccumulator diff_lip("diffusion_lipschitz", c);
    CheckAccumulator diff_growth("diffusion_linear_growth", c);
    CheckAccumulator gen_dy("generator_dy_bound", m);
    CheckAccumulator gen_dz("generator_dz_bound", m);
    CheckAccumulator gen_lip("generator_lipschitz_yz", m);
    CheckAccumulator quad_bound("quadratic_part_bound", 1.0);
    CheckAccumulator term_bound("terminal_bound", terminal.bound);
    CheckAccumulator term_grad("terminal_gradient", std::nullopt);

    std::mt19937_64 rng(probe_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    std::vector<double> x(n), xp(n), b(n), bp(n), sig(n * d), sigp(n * d);
    std::vector<double> jb(n * n), js(n * d * n), z(d), zp(d), gz(d), gx(n), w(d);

    for (std::size_t probe = 0; probe < probes; ++probe) {
        // Probe 0 sits at the origin so sup-type checks see the centre.
        const double t = probe == 0 ? 0.0 : uniform(rng);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = probe == 0 ? 0.0 : 2.0 * normal(rng);
            xp[i] = x[i] + normal(rng);
        }
        for (std::size_t j = 0; j < d; ++j) {
            z[j] = probe == 0 ? 0.0 : 2.0 * normal(rng);
            zp[j] = z[j] + normal(rng);
            w[j] = normal(rng);
        }
        const double y = probe == 0 ? 0.0 : 2.0 * normal(rng);
        const double yp = y + normal(rng);

        model.drift(t, x, b);
        model.drift(t, xp, bp);
        model.diffusion(t, x, sig);
        model.diffusion(t, xp, sigp);
        model.drift_jacobian(t, x, jb);
        model.diffusion_jacobian(t, x, js);
        require_finite(b, "drift", probe);
        require_finite(bp, "drift", probe);
        require_finite(sig, "diffusion", probe);
        require_finite(sigp, "diffusion", probe);
        require_finite(jb, "drift jacobian", probe);
        require_finite(js, "diffusion jacobian", probe);

        const double dx = distance(x, xp);
        if (dx > 0.0) {
            drift_lip.observe(distance(b, bp) / dx);
            diff_lip.observe(distance(sig, sigp) / dx);
        }
        drift_growth.observe(norm(b) / (1.0 + norm(x)));
        diff_growth.observe(norm(sig) / (1.0 + norm(x)));

        const double l = generator.lipschitz_part(t, x, y, z);
        const double lp = generator.lipschitz_part(t, x, yp, zp);
        const double ly = generator.dy(t, x, y, z);
        generator.dz(t, x, y, z, gz);
        generator.dx(t, x, y, z, gx);
        require_finite(l, "generator", probe);
        require_finite(lp, "generator", probe);
        require_finite(ly, "generator dy", probe);
        require_finite(gz, "generator dz", probe);
        require_finite(gx, "generator dx", probe);
        gen_dy.observe(std::abs(ly));
        gen_dz.observe(norm(gz));
        const double dyz = std::abs(y - yp) + distance(z, zp);
        if (dyz > 0.0) gen_lip.observe(std::abs(l - lp) / dyz);

        const double zz = norm(z) * norm(z);
        const double f = generator(t, x, y, z);
        require_finite(f, "driver", probe);
        if (zz > 0.0 && generator.quad_coeff != 0.0) {
            quad_bound.observe(std::abs(f - l) / (std::abs(generator.quad_coeff) * zz));
        }

        double g = 0.0;
        if (terminal.kind == TerminalKind::FunctionOfState) {
            g = terminal.value(x);
            terminal.gradient(x, gx);
        } else {
            g = terminal.sample(x, w);
            terminal.sample_gradient(x, w, gx);
        }
        require_finite(g, "terminal condition", probe);
        require_finite(gx, "terminal gradient", probe);
        term_bound.observe(std::abs(g));
        term_grad.observe(norm(gx));
    }

    ValidationReport report;
    report.probes = probes;
    for (auto* acc : {&drift_lip, &drift_growth, &diff_lip, &diff_growth, &gen_dy, &gen_dz,
                      &gen_lip, &quad_bound, &term_bound, &term_grad}) {
        report.checks.push_back(acc->take());
    }
    return report;
}

}  // namespace bsdelab
