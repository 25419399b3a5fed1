#include "mfl/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mfl {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string config_hash(const json& config) {
    const std::string dump = config.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

void write_comment(std::ofstream& out, const std::string& comment) {
    if (!comment.empty()) out << "# " << comment << "\n";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

}  // namespace

void write_measure_csv(const std::filesystem::path& path, const DiscreteMeasure& mu,
                       const std::string& comment) {
    auto out = open_out(path);
    write_comment(out, comment);
    for (int a = 0; a < mu.dim; ++a) out << "x" << a << ",";
    out << "weight\n";
    for (int i = 0; i < mu.size(); ++i) {
        for (int a = 0; a < mu.dim; ++a) out << format_double(mu.point(i)[a]) << ",";
        out << format_double(mu.weights[i]) << "\n";
    }
}

DiscreteMeasure read_measure_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open measure file: " + path.string());
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        header = split_csv_line(line);
        break;
    }
    if (header.empty()) throw std::runtime_error("empty measure file: " + path.string());
    bool has_weight = !header.empty() && header.back() == "weight";
    int dim = static_cast<int>(header.size()) - (has_weight ? 1 : 0);
    DiscreteMeasure mu;
    mu.dim = dim;
    bool header_numeric = true;
    for (char c : header[0])
        if (std::isalpha(static_cast<unsigned char>(c))) header_numeric = false;
    auto take_row = [&](const std::vector<std::string>& f) {
        for (int a = 0; a < dim; ++a) mu.points.push_back(std::stod(f[a]));
        mu.weights.push_back(has_weight ? std::stod(f[static_cast<std::size_t>(dim)]) : -1.0);
    };
    if (header_numeric) take_row(header);  // headerless file: all columns are points
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto f = split_csv_line(line);
        if (static_cast<int>(f.size()) != dim + (has_weight ? 1 : 0))
            throw std::runtime_error("ragged measure CSV: " + path.string());
        take_row(f);
    }
    if (!has_weight) {
        const int n = mu.size();
        mu.weights.assign(n, 1.0 / n);
    } else {
        double sum = 0.0;
        for (double w : mu.weights) sum += w;
        if (std::abs(sum - 1.0) > 1e-6)
            throw std::runtime_error("measure weights do not sum to 1: " + path.string());
        for (double& w : mu.weights) w /= sum;
    }
    mu.validate();
    return mu;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                          const std::string& comment) {
    auto out = open_out(path);
    write_comment(out, comment);
    out << "t,agent";
    for (int a = 0; a < traj.dim; ++a) out << ",x" << a;
    out << "\n";
    for (int k = 0; k <= traj.grid.steps; ++k)
        for (int i = 0; i < traj.agents; ++i) {
            out << format_double(traj.grid.node(k)) << "," << i;
            for (int a = 0; a < traj.dim; ++a) out << "," << format_double(traj.state(k, i)[a]);
            out << "\n";
        }
}

void write_controls_csv(const std::filesystem::path& path, const ControlSignal& u,
                        const TimeGrid& grid, const std::string& comment) {
    auto out = open_out(path);
    write_comment(out, comment);
    out << "t,agent";
    for (int c = 0; c < u.control_dim; ++c) out << ",u" << c;
    out << "\n";
    for (int k = 0; k < u.steps; ++k)
        for (int i = 0; i < u.agents; ++i) {
            out << format_double(grid.node(k)) << "," << i;
            for (int c = 0; c < u.control_dim; ++c) out << "," << format_double(u.at(k, i)[c]);
            out << "\n";
        }
}

void write_control_measure_csv(const std::filesystem::path& path, const ControlMeasure& nu,
                               const std::string& comment) {
    auto out = open_out(path);
    write_comment(out, comment);
    out << "t";
    for (int a = 0; a < nu.dim; ++a) out << ",x" << a;
    for (int a = 0; a < nu.dim; ++a) out << ",u" << a;
    out << ",mass\n";
    for (int i = 0; i < nu.atoms(); ++i) {
        out << format_double(nu.times[i]);
        for (int a = 0; a < nu.dim; ++a)
            out << "," << format_double(nu.positions[static_cast<std::size_t>(i) * nu.dim + a]);
        for (int a = 0; a < nu.dim; ++a)
            out << "," << format_double(nu.controls[static_cast<std::size_t>(i) * nu.dim + a]);
        out << "," << format_double(nu.masses[i]) << "\n";
    }
}

void write_plan_csv(const std::filesystem::path& path, const TransportPlan& plan,
                    const std::string& comment) {
    auto out = open_out(path);
    write_comment(out, comment);
    out << "source,target,mass\n";
    for (const auto& e : plan.entries)
        out << e.from << "," << e.to << "," << format_double(e.mass) << "\n";
}

void write_sweep_csv(const std::filesystem::path& path, const GammaSweepResult& result,
                     const std::string& comment) {
    auto out = open_out(path);
    write_comment(out, comment);
    out << "N,value,iterations,converged,w1_init_to_ref,sup_w1_prev,phi_moment_init,"
           "max_continuity_residual,moment_slack_min,wallclock_s,failed\n";
    for (const auto& e : result.entries) {
        out << e.N << "," << format_double(e.value) << "," << e.iterations << ","
            << (e.converged ? 1 : 0) << "," << format_double(e.w1_init_to_ref) << ","
            << format_double(e.sup_w1_prev) << "," << format_double(e.phi_moment_init) << ","
            << format_double(e.max_continuity_residual) << ","
            << format_double(e.moment_slack_min) << "," << format_double(e.wallclock_s) << ","
            << (e.failed ? 1 : 0) << "\n";
    }
}

void write_json(const std::filesystem::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

}  // namespace mfl
