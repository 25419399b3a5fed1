#include "mfl/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mfl {

ControlSignal ControlSignal::zeros(int steps, int agents, int control_dim) {
    ControlSignal u;
    u.steps = steps;
    u.agents = agents;
    u.control_dim = control_dim;
    u.values.assign(static_cast<std::size_t>(steps) * agents * control_dim, 0.0);
    return u;
}

DiscreteMeasure Trajectory::measure_at(int k) const {
    const auto f = frame(k);
    return DiscreteMeasure::uniform(dim, std::vector<double>(f.begin(), f.end()));
}

BlowUpError::BlowUpError(int step_index)
    : std::runtime_error("integrate: non-finite state at step " + std::to_string(step_index)),
      step(step_index) {}

void eval_field(const InteractionModel& model, std::span<const double> x,
                const DiscreteMeasure& cohort, std::span<double> out) {
    if (static_cast<int>(x.size()) != model.dim || cohort.dim != model.dim)
        throw std::invalid_argument("eval_field: dimension mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    if (!model.kernel) return;
    std::vector<double> k(model.dim);
    for (int j = 0; j < cohort.size(); ++j) {
        model.kernel(x, cohort.point(j), k);
        const double w = cohort.weights[j];
        for (int a = 0; a < model.dim; ++a) out[a] += w * k[a];
    }
}

std::vector<double> eval_field(const InteractionModel& model, std::span<const double> x,
                               const DiscreteMeasure& cohort) {
    std::vector<double> out(model.dim);
    eval_field(model, x, cohort, out);
    return out;
}

void cohort_field(const InteractionModel& model, std::span<const double> states, int agents,
                  std::span<double> out) {
    const int d = model.dim;
    std::fill(out.begin(), out.end(), 0.0);
    if (!model.kernel) return;
    const double w = 1.0 / agents;
    std::vector<double> k(d);
    for (int i = 0; i < agents; ++i) {
        const std::span<const double> xi{states.data() + static_cast<std::size_t>(i) * d,
                                         static_cast<std::size_t>(d)};
        double* oi = out.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < agents; ++j) {
            const std::span<const double> xj{states.data() + static_cast<std::size_t>(j) * d,
                                             static_cast<std::size_t>(d)};
            model.kernel(xi, xj, k);
            for (int a = 0; a < d; ++a) oi[a] += w * k[a];
        }
    }
}

namespace {

// Central differences on the kernel, step 1e-6*(1+|arg|) per argument.
void fd_kernel_jacobian(const InteractionModel& model, std::span<const double> x,
                        std::span<const double> y, double* jx, double* jy) {
    const int d = model.dim;
    std::vector<double> xp(x.begin(), x.end()), yp(y.begin(), y.end());
    std::vector<double> kp(d), km(d);
    const double hx = 1e-6 * (1.0 + norm(x));
    for (int b = 0; b < d; ++b) {
        const double saved = xp[b];
        xp[b] = saved + hx;
        model.kernel(xp, y, kp);
        xp[b] = saved - hx;
        model.kernel(xp, y, km);
        xp[b] = saved;
        for (int a = 0; a < d; ++a) jx[a * d + b] = (kp[a] - km[a]) / (2.0 * hx);
    }
    const double hy = 1e-6 * (1.0 + norm(y));
    for (int b = 0; b < d; ++b) {
        const double saved = yp[b];
        yp[b] = saved + hy;
        model.kernel(x, yp, kp);
        yp[b] = saved - hy;
        model.kernel(x, yp, km);
        yp[b] = saved;
        for (int a = 0; a < d; ++a) jy[a * d + b] = (kp[a] - km[a]) / (2.0 * hy);
    }
}

}  // namespace

void cohort_field_vjp(const InteractionModel& model, std::span<const double> states, int agents,
                      std::span<const double> g, std::span<double> out) {
    const int d = model.dim;
    std::fill(out.begin(), out.end(), 0.0);
    if (!model.kernel) return;
    const double w = 1.0 / agents;
    std::vector<double> jx(static_cast<std::size_t>(d) * d), jy(static_cast<std::size_t>(d) * d);
    for (int i = 0; i < agents; ++i) {
        const std::span<const double> xi{states.data() + static_cast<std::size_t>(i) * d,
                                         static_cast<std::size_t>(d)};
        const double* gi = g.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < agents; ++j) {
            const std::span<const double> xj{states.data() + static_cast<std::size_t>(j) * d,
                                             static_cast<std::size_t>(d)};
            if (model.kernel_jacobian)
                model.kernel_jacobian(xi, xj, jx.data(), jy.data());
            else
                fd_kernel_jacobian(model, xi, xj, jx.data(), jy.data());
            double* oi = out.data() + static_cast<std::size_t>(i) * d;
            double* oj = out.data() + static_cast<std::size_t>(j) * d;
            for (int a = 0; a < d; ++a) {
                const double ga = w * gi[a];
                for (int b = 0; b < d; ++b) {
                    oi[b] += jx[a * d + b] * ga;
                    oj[b] += jy[a * d + b] * ga;
                }
            }
        }
    }
}

InteractionModel make_zero_model(int dim) {
    InteractionModel m;
    m.name = "zero";
    m.dim = dim;
    m.control_subspace = Subspace::full(dim);
    return m;
}

InteractionModel make_kernel_model(
    std::string name, int dim,
    std::function<void(std::span<const double>, std::span<const double>, std::span<double>)> kernel,
    std::function<void(std::span<const double>, std::span<const double>, double*, double*)> jacobian,
    double growth_A, double growth_B) {
    InteractionModel m;
    m.name = std::move(name);
    m.dim = dim;
    m.kernel = std::move(kernel);
    m.kernel_jacobian = std::move(jacobian);
    m.growth_A = growth_A;
    m.growth_B = growth_B;
    m.control_subspace = Subspace::full(dim);
    return m;
}

InteractionModel make_linear_attraction(int dim) {
    auto kernel = [dim](std::span<const double> x, std::span<const double> y,
                        std::span<double> out) {
        for (int a = 0; a < dim; ++a) out[a] = y[a] - x[a];
    };
    auto jac = [dim](std::span<const double>, std::span<const double>, double* jx, double* jy) {
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b) {
                jx[a * dim + b] = (a == b) ? -1.0 : 0.0;
                jy[a * dim + b] = (a == b) ? 1.0 : 0.0;
            }
    };
    return make_kernel_model("linear_attraction", dim, kernel, jac, 0.0, 1.0);
}

InteractionModel make_cucker_smale(double gamma, int m) {
    if (gamma < 0.0) throw std::invalid_argument("make_cucker_smale: need gamma >= 0");
    if (m < 1) throw std::invalid_argument("make_cucker_smale: need m >= 1");
    const int d = 2 * m;
    InteractionModel model;
    model.name = "cucker_smale";
    model.dim = d;
    model.structure = InteractionModel::Structure::second_order;
    model.growth_A = 0.0;
    model.growth_B = 2.0;  // |K| <= |p| + a(0)(|p|+|p'|) <= 2|x| + |y|
    model.control_subspace = Subspace::velocity_half(m);
    model.kernel = [gamma, m](std::span<const double> x, std::span<const double> y,
                              std::span<double> out) {
        double r2 = 0.0;
        for (int c = 0; c < m; ++c) {
            const double dq = x[c] - y[c];
            r2 += dq * dq;
        }
        const double a = std::pow(1.0 + r2, -gamma);
        for (int c = 0; c < m; ++c) {
            out[c] = x[m + c];
            out[m + c] = -a * (x[m + c] - y[m + c]);
        }
    };
    model.kernel_jacobian = [gamma, m, d](std::span<const double> x, std::span<const double> y,
                                          double* jx, double* jy) {
        double r2 = 0.0;
        for (int c = 0; c < m; ++c) {
            const double dq = x[c] - y[c];
            r2 += dq * dq;
        }
        const double a = std::pow(1.0 + r2, -gamma);
        const double da = -gamma * std::pow(1.0 + r2, -gamma - 1.0);  // d a / d(r^2)
        std::fill(jx, jx + d * d, 0.0);
        std::fill(jy, jy + d * d, 0.0);
        for (int c = 0; c < m; ++c) jx[c * d + (m + c)] = 1.0;  // dK1/dp = I
        for (int r = 0; r < m; ++r) {
            const double dp_r = x[m + r] - y[m + r];
            for (int b = 0; b < m; ++b) {
                const double dq_b = x[b] - y[b];
                jx[(m + r) * d + b] = -2.0 * da * dq_b * dp_r;
                jy[(m + r) * d + b] = 2.0 * da * dq_b * dp_r;
            }
            jx[(m + r) * d + (m + r)] = -a;
            jy[(m + r) * d + (m + r)] = a;
        }
    };
    return model;
}

InteractionModel make_friction_alignment(
    double alpha, int m, std::function<void(std::span<const double>, std::span<double>)> w_grad,
    std::function<void(std::span<const double>, double*)> w_hess) {
    if (alpha < 0.0) throw std::invalid_argument("make_friction_alignment: need alpha >= 0");
    if (m < 1) throw std::invalid_argument("make_friction_alignment: need m >= 1");
    const int d = 2 * m;
    const bool quadratic = !w_grad;
    if (quadratic) {
        w_grad = [m](std::span<const double> z, std::span<double> out) {
            for (int c = 0; c < m; ++c) out[c] = z[c];
        };
        w_hess = [m](std::span<const double>, double* h) {
            std::fill(h, h + m * m, 0.0);
            for (int c = 0; c < m; ++c) h[c * m + c] = 1.0;
        };
    }
    InteractionModel model;
    model.name = "friction_alignment";
    model.dim = d;
    model.structure = InteractionModel::Structure::second_order;
    model.growth_A = 0.0;
    model.growth_B = 2.0 + alpha;
    model.control_subspace = Subspace::velocity_half(m);
    model.kernel = [alpha, m, w_grad](std::span<const double> x, std::span<const double> y,
                                      std::span<double> out) {
        std::vector<double> z(m), g(m);
        for (int c = 0; c < m; ++c) z[c] = x[m + c] - y[m + c];
        w_grad(z, g);
        for (int c = 0; c < m; ++c) {
            out[c] = x[m + c];
            out[m + c] = -alpha * x[m + c] - g[c];
        }
    };
    if (w_hess) {
        model.kernel_jacobian = [alpha, m, d, w_hess](std::span<const double> x,
                                                      std::span<const double> y, double* jx,
                                                      double* jy) {
            std::vector<double> z(m), h(static_cast<std::size_t>(m) * m);
            for (int c = 0; c < m; ++c) z[c] = x[m + c] - y[m + c];
            w_hess(z, h.data());
            std::fill(jx, jx + d * d, 0.0);
            std::fill(jy, jy + d * d, 0.0);
            for (int c = 0; c < m; ++c) jx[c * d + (m + c)] = 1.0;
            for (int r = 0; r < m; ++r)
                for (int b = 0; b < m; ++b) {
                    jx[(m + r) * d + (m + b)] = -h[r * m + b] - (r == b ? alpha : 0.0);
                    jy[(m + r) * d + (m + b)] = h[r * m + b];
                }
        };
    }
    const auto growth = check_growth(model, 5.0, 200, 0xfeedULL);
    if (!growth.pass)
        model.growth_warning = "sampled growth check exceeded declared A,B by " +
                               std::to_string(growth.worst_excess);
    return model;
}

void RK4Stages::resize(std::size_t n) {
    k1.resize(n);
    k2.resize(n);
    k3.resize(n);
    k4.resize(n);
    x2.resize(n);
    x3.resize(n);
    x4.resize(n);
}

void rk4_forward(const InteractionModel& model, std::span<const double> state,
                 std::span<const double> v, int agents, double h, RK4Stages& st,
                 std::span<double> next) {
    const std::size_t n = state.size();
    st.resize(n);
    auto add_v = [&](std::vector<double>& k) {
        for (std::size_t a = 0; a < n; ++a) k[a] += v[a];
    };
    cohort_field(model, state, agents, st.k1);
    add_v(st.k1);
    for (std::size_t a = 0; a < n; ++a) st.x2[a] = state[a] + 0.5 * h * st.k1[a];
    cohort_field(model, st.x2, agents, st.k2);
    add_v(st.k2);
    for (std::size_t a = 0; a < n; ++a) st.x3[a] = state[a] + 0.5 * h * st.k2[a];
    cohort_field(model, st.x3, agents, st.k3);
    add_v(st.k3);
    for (std::size_t a = 0; a < n; ++a) st.x4[a] = state[a] + h * st.k3[a];
    cohort_field(model, st.x4, agents, st.k4);
    add_v(st.k4);
    for (std::size_t a = 0; a < n; ++a)
        next[a] = state[a] + h / 6.0 * (st.k1[a] + 2.0 * st.k2[a] + 2.0 * st.k3[a] + st.k4[a]);
}

void embed_controls(const Subspace& u_space, const ControlSignal& u, int k, int agents,
                    std::span<double> v) {
    const int d = u_space.ambient_dim;
    for (int i = 0; i < agents; ++i)
        u_space.embed(u.at(k, i),
                      std::span<double>{v.data() + static_cast<std::size_t>(i) * d,
                                        static_cast<std::size_t>(d)});
}

Trajectory integrate(const InteractionModel& model, std::span<const double> x0, int agents,
                     const ControlSignal& u, const TimeGrid& grid) {
    const int d = model.dim;
    if (static_cast<int>(x0.size()) != agents * d)
        throw std::invalid_argument("integrate: x0 shape mismatch");
    if (u.steps != grid.steps || u.agents != agents ||
        u.control_dim != model.control_subspace.dim())
        throw std::invalid_argument("integrate: control shape mismatch");

    Trajectory traj;
    traj.grid = grid;
    traj.agents = agents;
    traj.dim = d;
    traj.states.assign(static_cast<std::size_t>(grid.steps + 1) * agents * d, 0.0);
    std::copy(x0.begin(), x0.end(), traj.states.begin());

    const double h = grid.dt();
    RK4Stages st;
    std::vector<double> v(static_cast<std::size_t>(agents) * d);
    for (int k = 0; k < grid.steps; ++k) {
        embed_controls(model.control_subspace, u, k, agents, v);
        rk4_forward(model, traj.frame(k), v, agents, h, st, traj.frame(k + 1));
        if (!all_finite(traj.frame(k + 1))) throw BlowUpError(k);
    }
    return traj;
}

namespace {

double mean_abs_norm(std::span<const double> frame, int agents, int d) {
    double s = 0.0;
    for (int i = 0; i < agents; ++i)
        s += norm(std::span<const double>{frame.data() + static_cast<std::size_t>(i) * d,
                                          static_cast<std::size_t>(d)});
    return s / agents;
}

double control_l1(const ControlSignal& u, double dt) {
    double total = 0.0;
    for (int k = 0; k < u.steps; ++k) {
        double frame = 0.0;
        for (int i = 0; i < u.agents; ++i) frame += norm(u.at(k, i));
        total += dt * frame / u.agents;
    }
    return total;
}

}  // namespace

MomentBoundReport check_moment_bound(const Trajectory& traj, const ControlSignal& u, double A,
                                     double B) {
    const double T = traj.grid.horizon;
    MomentBoundReport rep;
    for (int k = 0; k <= traj.grid.steps; ++k)
        rep.sup_norm = std::max(rep.sup_norm, mean_abs_norm(traj.frame(k), traj.agents, traj.dim));
    const double m0 = mean_abs_norm(traj.frame(0), traj.agents, traj.dim);
    rep.bound = (m0 + A * T + control_l1(u, traj.grid.dt())) * std::exp(2.0 * B * T);
    rep.slack = rep.bound - rep.sup_norm;
    rep.pass = rep.slack >= -1e-9;
    return rep;
}

ThetaMomentReport check_theta_moment(const Trajectory& traj, const ControlSignal& u,
                                     const AdmissibleFunction& theta, double A, double B) {
    const double T = traj.grid.horizon;
    const int agents = traj.agents, d = traj.dim;
    ThetaMomentReport rep;
    for (int k = 0; k <= traj.grid.steps; ++k) {
        double s = 0.0;
        for (int i = 0; i < agents; ++i) s += theta.eval(norm(traj.state(k, i)));
        s /= agents;
        rep.sup_moment = std::max(rep.sup_moment, s);
        if (k == 0) rep.initial_moment = s;
    }
    const double m0 = mean_abs_norm(traj.frame(0), agents, d);
    const double m1_bar = (m0 + A * T + control_l1(u, traj.grid.dt())) * std::exp(2.0 * B * T);
    rep.field_bound = std::max(A + B * m1_bar, B);
    const double K = theta.doubling_constant;
    rep.gronwall_rate = 2.0 * rep.field_bound * K + K + 1.0;
    // C = e^{C'T}(1+C'T); compared in log space since C can overflow.
    rep.log_bound = rep.gronwall_rate * T + std::log1p(rep.gronwall_rate * T) +
                    std::log1p(rep.initial_moment);
    const double log_sup = rep.sup_moment > 0.0 ? std::log(rep.sup_moment)
                                                : -std::numeric_limits<double>::infinity();
    rep.pass = log_sup <= rep.log_bound + 1e-12;
    rep.ratio = std::exp(std::min(log_sup - rep.log_bound, 0.0));
    if (!rep.pass) rep.ratio = std::exp(log_sup - rep.log_bound);
    return rep;
}

GrowthReport check_growth(const InteractionModel& model, double box_radius, int n_samples,
                          std::uint64_t seed) {
    GrowthReport rep;
    if (!model.kernel) return rep;
    const int d = model.dim;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-box_radius, box_radius);
    std::vector<double> x(d), y(d), k(d);
    for (int s = 0; s < n_samples; ++s) {
        for (int a = 0; a < d; ++a) {
            x[a] = unif(rng);
            y[a] = unif(rng);
        }
        model.kernel(x, y, k);
        const double excess = norm(k) - (model.growth_A + model.growth_B * (norm(x) + norm(y)));
        rep.worst_excess = std::max(rep.worst_excess, excess);
    }
    rep.pass = rep.worst_excess <= 1e-9 * (1.0 + model.growth_A + model.growth_B * box_radius);
    return rep;
}

CompatibilityReport check_compatibility(const InteractionModel& model, double box_radius,
                                        int n_samples, std::uint64_t seed) {
    CompatibilityReport rep;
    if (!model.kernel) return rep;
    const int d = model.dim;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-box_radius, box_radius);
    auto random_cloud = [&](int npts) {
        std::vector<double> pts(static_cast<std::size_t>(npts) * d);
        for (auto& p : pts) p = unif(rng);
        return DiscreteMeasure::uniform(d, std::move(pts));
    };
    std::vector<double> x(d), diff(d);
    for (int s = 0; s < n_samples; ++s) {
        for (int a = 0; a < d; ++a) x[a] = unif(rng);
        const auto f1 = eval_field(model, x, random_cloud(3 + s % 4));
        const auto f2 = eval_field(model, x, random_cloud(5 + s % 3));
        for (int a = 0; a < d; ++a) diff[a] = f1[a] - f2[a];
        rep.worst_offspace =
            std::max(rep.worst_offspace, model.control_subspace.offspace_norm(diff));
    }
    rep.pass = rep.worst_offspace <= 1e-12 * (1.0 + box_radius);
    return rep;
}

}  // namespace mfl
