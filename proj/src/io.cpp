#include "isaacs/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace isaacs {

namespace {

std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void write_field_csv(const ValueField& field, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    int n = field.grid.dim();
    out << "t";
    for (int i = 0; i < n; ++i) out << ",x" << (i + 1);
    out << ",W\n";
    std::size_t npts = field.num_points();
    for (int layer = 0; layer < field.layers; ++layer) {
        double t = field.t_of_layer(layer);
        for (std::size_t pt = 0; pt < npts; ++pt) {
            std::vector<double> x = field.point(pt);
            out << csv_number(t);
            for (double xi : x) out << ',' << csv_number(xi);
            out << ',' << csv_number(field.at(layer, pt)) << '\n';
        }
    }
}

nlohmann::json field_meta_json(const ValueField& field) {
    nlohmann::json j;
    j["kind"] = field_kind_name(field.kind);
    j["minimax"] = field.meta.minimax;
    j["dt"] = field.meta.dt;
    j["h"] = field.meta.h;
    j["window_end"] = field.meta.window_end;
    j["horizon"] = field.meta.horizon;
    j["infinite"] = field.meta.infinite;
    j["layers"] = field.layers;
    j["points"] = field.grid.points;
    j["lo"] = field.grid.lo;
    j["hi"] = field.grid.hi;
    j["cfl_limit"] = field.meta.cfl_limit;
    if (field.meta.infinite) j["tail_bound"] = field.meta.tail_bound;
    if (field.kind == FieldKind::Transformed) {
        j["transform_discrepancy"] = field.meta.transform_discrepancy;
        j["transform_t0_bitexact"] = field.meta.transform_t0_bitexact;
    }
    return j;
}

nlohmann::json trace_json(const TruncationTrace& trace) {
    nlohmann::json j;
    j["horizons"] = trace.horizons;
    j["deltas"] = trace.deltas;
    j["fitted_rate"] = trace.fitted_rate;
    j["fit_residual"] = trace.fit_residual;
    j["fit_points"] = trace.fit_points;
    j["tail_bound"] = trace.tail_bound;
    j["converged"] = trace.converged;
    j["rho0"] = trace.rho0;
    j["horizon_step"] = trace.horizon_step;
    return j;
}

nlohmann::json assumption_json(const AssumptionReport& report) {
    nlohmann::json j;
    j["rho0"] = report.rho0;
    j["L_x"] = report.L_x;
    j["L_y"] = report.L_y;
    j["L_z"] = report.L_z;
    j["mu"] = report.mu;
    j["beta1_L1"] = report.beta1_L1;
    j["beta2"] = report.beta2;
    j["b_sigma_bound"] = report.b_sigma_bound;
    j["monotone_in_y_ok"] = report.monotone_in_y_ok;
    j["dissipativity_ok"] = report.dissipativity_ok;
    j["sample_count"] = report.sample_count;
    j["sample_box_lo"] = report.sample_box.lo;
    j["sample_box_hi"] = report.sample_box.hi;
    j["seed"] = report.seed;
    return j;
}

nlohmann::json bounds_json(const Bounds& bounds) {
    nlohmann::json j;
    j["M1_inf"] = bounds.M1_inf;
    j["M2_inf"] = bounds.M2_inf;
    if (bounds.Lip_W)
        j["Lip_W"] = *bounds.Lip_W;
    else
        j["Lip_W"] = nullptr;
    return j;
}

nlohmann::json bsde_json(const BsdeEstimate& estimate) {
    nlohmann::json j;
    j["y0"] = estimate.y0;
    j["se"] = estimate.se;
    j["z0"] = estimate.z0;
    j["t0"] = estimate.t0;
    j["horizon"] = estimate.horizon;
    j["terminal"] = estimate.terminal_desc;
    j["terminal_abs_max"] = estimate.terminal_abs_max;
    j["paths"] = estimate.paths;
    j["layer_max_abs_y"] = estimate.layer_max_abs_y;
    j["layer_mean_z_norm"] = estimate.layer_mean_z_norm;
    j["cont_coeffs"] = estimate.cont_coeffs;
    return j;
}

nlohmann::json checks_json(const std::vector<CheckReport>& reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json j;
        j["name"] = r.name;
        j["inequality"] = r.inequality;
        j["measured"] = r.measured;
        j["bound"] = r.bound;
        j["slack"] = r.slack;
        j["pass"] = r.pass;
        j["informational"] = r.informational;
        j["skipped"] = r.skipped;
        j["detail"] = r.detail;
        j["artifacts"] = r.artifacts;
        arr.push_back(std::move(j));
    }
    return arr;
}

void write_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

// ============================================================================
// PathBundle binary layout
// ============================================================================

namespace {

template <class T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void get(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

constexpr char kMagic[6] = {'I', 'H', 'P', 'B', '1', '\0'};

} // namespace

void write_path_bundle(const PathBundle& bundle, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.state_dim));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.noise_dim));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.num_paths));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.steps));
    put<std::uint64_t>(out, bundle.seed);
    put<double>(out, bundle.t0);
    put<double>(out, bundle.dt);
    put<std::uint8_t>(out, bundle.has_exit_box ? 1 : 0);
    if (bundle.has_exit_box) {
        for (double v : bundle.exit_box.lo) put<double>(out, v);
        for (double v : bundle.exit_box.hi) put<double>(out, v);
    }
    for (double v : bundle.x0) put<double>(out, v);
    int n = bundle.state_dim, d = bundle.noise_dim;
    for (int p = 0; p < bundle.num_paths; ++p) {
        out.write(reinterpret_cast<const char*>(bundle.state(p, 0)),
                  static_cast<std::streamsize>(sizeof(double)) * (bundle.steps + 1) * n);
        out.write(reinterpret_cast<const char*>(bundle.increment(p, 0)),
                  static_cast<std::streamsize>(sizeof(double)) * bundle.steps * d);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.stop_index[static_cast<std::size_t>(p)]));
        put<std::uint8_t>(out, bundle.stop_kind[static_cast<std::size_t>(p)]);
    }
    if (!out) throw ConfigError("short write to '" + path + "'");
}

PathBundle read_path_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    char magic[6];
    in.read(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ConfigError("'" + path + "' is not a path-bundle file");
    std::uint32_t version = 0, n = 0, d = 0, paths = 0, steps = 0;
    get(in, version);
    if (version != 1) throw ConfigError("unsupported path-bundle version");
    get(in, n);
    get(in, d);
    get(in, paths);
    get(in, steps);

    PathBundle b;
    b.state_dim = static_cast<int>(n);
    b.noise_dim = static_cast<int>(d);
    b.num_paths = static_cast<int>(paths);
    b.steps = static_cast<int>(steps);
    get(in, b.seed);
    get(in, b.t0);
    get(in, b.dt);
    std::uint8_t has_box = 0;
    get(in, has_box);
    b.has_exit_box = has_box != 0;
    if (b.has_exit_box) {
        b.exit_box.lo.resize(n);
        b.exit_box.hi.resize(n);
        for (auto& v : b.exit_box.lo) get(in, v);
        for (auto& v : b.exit_box.hi) get(in, v);
    }
    b.x0.resize(n);
    for (auto& v : b.x0) get(in, v);

    b.states.resize(static_cast<std::size_t>(paths) * (steps + 1) * n);
    b.increments.resize(static_cast<std::size_t>(paths) * steps * d);
    b.stop_index.resize(paths);
    b.stop_kind.resize(paths);
    for (std::uint32_t p = 0; p < paths; ++p) {
        in.read(reinterpret_cast<char*>(b.states.data() +
                                        static_cast<std::size_t>(p) * (steps + 1) * n),
                static_cast<std::streamsize>(sizeof(double)) * (steps + 1) * n);
        in.read(reinterpret_cast<char*>(b.increments.data() +
                                        static_cast<std::size_t>(p) * steps * d),
                static_cast<std::streamsize>(sizeof(double)) * steps * d);
        std::uint32_t stop = 0;
        std::uint8_t kind = 0;
        get(in, stop);
        get(in, kind);
        b.stop_index[p] = static_cast<int>(stop);
        b.stop_kind[p] = kind;
    }
    if (!in) throw ConfigError("truncated path-bundle file '" + path + "'");
    return b;
}

} // namespace isaacs
