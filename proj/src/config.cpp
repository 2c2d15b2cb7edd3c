#include "beamctl/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "beamctl/errors.hpp"

namespace beamctl {

using json = nlohmann::ordered_json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.contains(key)) throw ConfigError(join(path, key), "unknown key");
    }
}

const json& block(const json& obj, const std::string& key, const std::string& path) {
    static const json empty = json::object();
    if (!obj.contains(key)) return empty;
    const json& b = obj.at(key);
    if (!b.is_object()) throw ConfigError(join(path, key), "expected an object");
    return b;
}

double number(const json& obj, const std::string& key, const std::string& path, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(join(path, key), "must be finite");
    return x;
}

std::optional<double> optional_number(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return number(obj, key, path, 0.0);
}

long integer(const json& obj, const std::string& key, const std::string& path, long fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) throw ConfigError(join(path, key), "expected an integer");
    return v.get<long>();
}

std::string text(const json& obj, const std::string& key, const std::string& path, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) throw ConfigError(join(path, key), "expected a string");
    return v.get<std::string>();
}

std::vector<double> numbers(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return {};
    const json& v = obj.at(key);
    if (!v.is_array()) throw ConfigError(join(path, key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ConfigError(index(join(path, key), i), "expected a number");
        out.push_back(v[i].get<double>());
        if (!std::isfinite(out.back())) throw ConfigError(index(join(path, key), i), "must be finite");
    }
    return out;
}

ModalCoeffs modal(const json& obj, const std::string& key, const std::string& path, std::size_t modes) {
    if (!obj.contains(key)) return ModalCoeffs(modes);
    std::vector<double> v = numbers(obj, key, path);
    if (v.size() != modes) {
        throw ConfigError(join(path, key), "expected " + std::to_string(modes) + " modal coefficients, got " +
                                               std::to_string(v.size()));
    }
    return ModalCoeffs(std::move(v));
}

template <class E>
E choose(const std::string& value, const std::string& path, const std::map<std::string, E>& options) {
    if (auto it = options.find(value); it != options.end()) return it->second;
    std::string names;
    for (const auto& [k, v] : options) names += (names.empty() ? "" : "|") + k;
    throw ConfigError(path, "unknown catalog entry '" + value + "' (expected " + names + ")");
}

template <class E>
std::string name_of(E value, const std::map<std::string, E>& options) {
    for (const auto& [k, v] : options) {
        if (v == value) return k;
    }
    return "";
}

const std::map<std::string, ForcingSpec::Kind> kForcing = {{"zero", ForcingSpec::Kind::zero},
                                                           {"standing_wave", ForcingSpec::Kind::standing_wave},
                                                           {"uniform", ForcingSpec::Kind::uniform}};
const std::map<std::string, NonlinearitySpec::Kind> kNonlinearity = {
    {"zero", NonlinearitySpec::Kind::zero},
    {"delayed_saturating", NonlinearitySpec::Kind::delayed_saturating},
    {"bounded_control", NonlinearitySpec::Kind::bounded_control}};
const std::map<std::string, Envelope> kEnvelope = {
    {"zero", Envelope::zero}, {"identity", Envelope::identity}, {"square", Envelope::square}};
const std::map<std::string, ImpulseSpec::Kind> kImpulse = {{"kick", ImpulseSpec::Kind::kick},
                                                           {"saturating", ImpulseSpec::Kind::saturating}};
const std::map<std::string, GramianRule> kGramianRule = {{"simpson", GramianRule::simpson},
                                                         {"grid_trapezoid", GramianRule::grid_trapezoid}};

json to_json(const ModalCoeffs& c) { return json(c.values()); }

Segment read_history_file(const std::filesystem::path& file, double delay) {
    std::ifstream in(file);
    if (!in) throw ConfigError("history.file", "cannot open " + file.string());
    SampledPath path;
    try {
        path = read_path_csv(in);
    } catch (const std::exception& e) {
        throw ConfigError("history.file", e.what());
    }
    if (std::abs(path.start() + delay) > 1e-6 * path.step() || std::abs(path.end()) > 1e-6 * path.step()) {
        throw ConfigError("history.file", "samples must cover exactly [-r, 0]");
    }
    std::vector<StateZ> values;
    for (std::size_t i = 0; i < path.nodes(); ++i) values.push_back(path.value(i));
    Segment seg(delay, delay / static_cast<double>(path.nodes() - 1), std::move(values));
    for (const auto& [i, v] : path.marks()) seg.set_left(i, v);
    return seg;
}

}  // namespace

RunConfig parse_config_text(const std::string& source, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(source);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("", "top level must be an object");
    check_keys(root, "", {"model", "grids", "impulses", "delays", "nonlocal", "forcing", "nonlinearity", "history",
                          "targets", "experiment", "output"});
    if (!root.contains("model")) throw ConfigError("model", "missing key");

    RunConfig cfg;
    ProblemSpec& spec = cfg.spec;
    json res;

    // model
    const json& m = block(root, "model", "");
    check_keys(m, "model", {"c", "d", "k", "N", "T", "r"});
    spec.model.damping = number(m, "c", "model", 1.0);
    spec.model.stiffness = number(m, "d", "model", 1.0);
    spec.model.cable = number(m, "k", "model", 1.0);
    spec.model.modes = static_cast<int>(integer(m, "N", "model", 8));
    spec.model.horizon = number(m, "T", "model", 1.0);
    spec.model.delay = number(m, "r", "model", 0.3);
    if (spec.model.modes < 1) throw ConfigError("model.N", "must be >= 1");
    const auto N = static_cast<std::size_t>(spec.model.modes);
    const double T = spec.model.horizon;
    const double r = spec.model.delay;

    // grids
    const json& g = block(root, "grids", "");
    check_keys(g, "grids", {"h", "h_r", "G", "gramian_quad_step", "M_step", "Gamma_step"});
    spec.step = number(g, "h", "grids", T / 2000.0);
    cfg.history_step = number(g, "h_r", "grids", r / 200.0);
    const long G = integer(g, "G", "grids", static_cast<long>(8 * N + 1));
    if (G < 1) throw ConfigError("grids.G", "must be positive");
    spec.grid_points = static_cast<std::size_t>(G);
    cfg.gramian_quad_step = number(g, "gramian_quad_step", "grids", 0.0);
    cfg.estimation.semigroup_step = number(g, "M_step", "grids", T / 2000.0);
    cfg.estimation.gamma_step = number(g, "Gamma_step", "grids", T / 2000.0);
    if (!(cfg.history_step > 0.0)) throw ConfigError("grids.h_r", "must be positive");
    if (!(cfg.estimation.semigroup_step > 0.0)) throw ConfigError("grids.M_step", "must be positive");
    if (!(cfg.estimation.gamma_step > 0.0)) throw ConfigError("grids.Gamma_step", "must be positive");

    // impulses
    if (root.contains("impulses")) {
        const json& list = root.at("impulses");
        if (!list.is_array()) throw ConfigError("impulses", "expected an array");
        for (std::size_t k = 0; k < list.size(); ++k) {
            const std::string path = index("impulses", k);
            const json& item = list[k];
            if (!item.is_object()) throw ConfigError(path, "expected an object");
            check_keys(item, path, {"time", "catalog", "params", "d_k"});
            if (!item.contains("time")) throw ConfigError(join(path, "time"), "missing key");
            ImpulseSpec imp;
            imp.time = number(item, "time", path, 0.0);
            imp.kind = choose(text(item, "catalog", path, "kick"), join(path, "catalog"), kImpulse);
            const json& params = block(item, "params", path);
            const std::string ppath = join(path, "params");
            check_keys(params, ppath, {"gain", "offset"});
            imp.gain = number(params, "gain", ppath, 0.0);
            imp.offset = modal(params, "offset", ppath, N);
            imp.lipschitz = optional_number(item, "d_k", path);
            spec.impulses.push_back(std::move(imp));
        }
    }

    // delays and nonlocal map
    const json& d = block(root, "delays", "");
    check_keys(d, "delays", {"tau"});
    spec.nonlocal.lags = numbers(d, "tau", "delays");
    const json& nl = block(root, "nonlocal", "");
    check_keys(nl, "nonlocal", {"gamma", "L_q"});
    spec.nonlocal.weights = numbers(nl, "gamma", "nonlocal");
    if (!nl.contains("gamma")) spec.nonlocal.weights.assign(spec.nonlocal.lags.size(), 0.0);
    spec.nonlocal.lipschitz = optional_number(nl, "L_q", "nonlocal");

    // forcing
    const json& f = block(root, "forcing", "");
    check_keys(f, "forcing", {"catalog", "params"});
    spec.forcing.kind = choose(text(f, "catalog", "forcing", "zero"), "forcing.catalog", kForcing);
    {
        const json& params = block(f, "params", "forcing");
        check_keys(params, "forcing.params", {"amplitude", "omega", "phase", "mode"});
        spec.forcing.amplitude = number(params, "amplitude", "forcing.params", 0.0);
        spec.forcing.omega = number(params, "omega", "forcing.params", 0.0);
        spec.forcing.phase = number(params, "phase", "forcing.params", 0.0);
        spec.forcing.mode = static_cast<int>(integer(params, "mode", "forcing.params", 1));
        if (spec.forcing.mode < 1) throw ConfigError("forcing.params.mode", "must be >= 1");
    }

    // nonlinearity
    const json& nf = block(root, "nonlinearity", "");
    check_keys(nf, "nonlinearity", {"catalog", "params", "l_f", "alpha1", "beta1", "H"});
    spec.nonlinearity.kind =
        choose(text(nf, "catalog", "nonlinearity", "zero"), "nonlinearity.catalog", kNonlinearity);
    {
        const json& params = block(nf, "params", "nonlinearity");
        check_keys(params, "nonlinearity.params", {"gain"});
        spec.nonlinearity.gain = number(params, "gain", "nonlinearity.params", 0.0);
    }
    spec.nonlinearity.lipschitz = optional_number(nf, "l_f", "nonlinearity");
    spec.nonlinearity.alpha = optional_number(nf, "alpha1", "nonlinearity");
    spec.nonlinearity.beta = optional_number(nf, "beta1", "nonlinearity");
    if (nf.contains("H")) spec.nonlinearity.envelope = choose(text(nf, "H", "nonlinearity", ""), "nonlinearity.H", kEnvelope);

    // experiment (Picard settings are needed before finalize)
    const json& ex = block(root, "experiment", "");
    check_keys(ex, "experiment", {"sigmas", "tol", "max_iter", "picard_tol", "picard_max_iter", "control",
                                  "snapshot_times", "gramian_rule"});
    spec.picard_tol = number(ex, "picard_tol", "experiment", 1e-10);
    spec.picard_max_iter = static_cast<int>(integer(ex, "picard_max_iter", "experiment", 50));

    // history
    const json& hist = block(root, "history", "");
    const std::string history_kind = text(hist, "catalog", "history", "zero");
    json hist_res;
    hist_res["catalog"] = history_kind;
    if (history_kind == "zero") {
        check_keys(hist, "history", {"catalog"});
    } else if (history_kind == "modal-constant") {
        check_keys(hist, "history", {"catalog", "w", "y"});
        StateZ z0(modal(hist, "w", "history", N), modal(hist, "y", "history", N));
        try {
            spec.history = Segment::constant(r, cfg.history_step, z0);
        } catch (const std::invalid_argument&) {
            throw ConfigError("grids.h_r", "r is not an integer multiple of h_r");
        }
        hist_res["w"] = to_json(z0.w);
        hist_res["y"] = to_json(z0.y);
    } else if (history_kind == "sampled") {
        check_keys(hist, "history", {"catalog", "file"});
        if (!hist.contains("file")) throw ConfigError("history.file", "missing key");
        std::filesystem::path file = text(hist, "file", "history", "");
        if (file.is_relative()) file = base_dir / file;
        file = std::filesystem::absolute(file).lexically_normal();
        spec.history = read_history_file(file, r);
        hist_res["file"] = file.string();
    } else {
        throw ConfigError("history.catalog",
                          "unknown catalog entry '" + history_kind + "' (expected modal-constant|sampled|zero)");
    }

    spec.finalize();
    const double h = spec.time_step();

    // targets
    const json& tg = block(root, "targets", "");
    check_keys(tg, "targets", {"w", "y", "z0"});
    cfg.target = StateZ(modal(tg, "w", "targets", N), modal(tg, "y", "targets", N));
    const bool has_z0 = tg.contains("z0");
    StateZ z0 = spec.history.nodes() > 0 ? spec.history.current() : StateZ(N);
    if (has_z0) {
        const json& zb = block(tg, "z0", "targets");
        check_keys(zb, "targets.z0", {"w", "y"});
        z0 = StateZ(modal(zb, "w", "targets.z0", N), modal(zb, "y", "targets.z0", N));
    }
    cfg.initial_state = z0;

    // experiment
    cfg.tol = number(ex, "tol", "experiment", 1e-10);
    cfg.max_iter = static_cast<int>(integer(ex, "max_iter", "experiment", 50));
    if (!(cfg.tol > 0.0)) throw ConfigError("experiment.tol", "must be positive");
    if (cfg.max_iter < 1) throw ConfigError("experiment.max_iter", "must be >= 1");
    cfg.gramian_rule = choose(text(ex, "gramian_rule", "experiment", "simpson"), "experiment.gramian_rule", kGramianRule);

    const double tm = spec.impulses.empty() ? 0.0 : spec.impulses.back().time;
    const double sigma_max = std::min(T - tm, r);
    if (ex.contains("sigmas")) {
        cfg.sigmas = numbers(ex, "sigmas", "experiment");
        for (std::size_t i = 0; i < cfg.sigmas.size(); ++i) {
            const std::string path = index("experiment.sigmas", i);
            const double s = cfg.sigmas[i];
            if (!(s > 0.0 && s < sigma_max)) {
                throw ConfigError(path, "sigma must satisfy 0 < sigma < min(T - t_m, r) = " + format_number(sigma_max));
            }
            const double steps = std::round(s / h);
            if (std::abs(steps * h - s) > 1e-6 * h) throw ConfigError(path, "sigma must be a multiple of h");
            cfg.sigmas[i] = steps * h;
            if (i > 0 && !(cfg.sigmas[i] < cfg.sigmas[i - 1])) throw ConfigError(path, "sigmas must be decreasing");
        }
    } else {
        cfg.sigmas = default_sigmas(spec);
    }

    const json& ctl = block(ex, "control", "experiment");
    const std::string control_kind = text(ctl, "catalog", "experiment.control", "zero");
    json ctl_res;
    ctl_res["catalog"] = control_kind;
    if (control_kind == "zero") {
        check_keys(ctl, "experiment.control", {"catalog"});
        cfg.nominal_control = ControlSignal::zero(0.0, T, h, N);
    } else if (control_kind == "modal-constant") {
        check_keys(ctl, "experiment.control", {"catalog", "u"});
        const ModalCoeffs u = modal(ctl, "u", "experiment.control", N);
        cfg.nominal_control = ControlSignal(0.0, h, std::vector<ModalCoeffs>(uniform_intervals(T, h) + 1, u));
        ctl_res["u"] = to_json(u);
    } else {
        throw ConfigError("experiment.control.catalog",
                          "unknown catalog entry '" + control_kind + "' (expected modal-constant|zero)");
    }

    if (ex.contains("snapshot_times")) {
        cfg.snapshot_times = numbers(ex, "snapshot_times", "experiment");
    } else {
        cfg.snapshot_times = {0.0, 0.25 * T, 0.5 * T, 0.75 * T, T};
    }
    for (std::size_t i = 0; i < cfg.snapshot_times.size(); ++i) {
        const double t = cfg.snapshot_times[i];
        if (!(t >= 0.0 && t <= T)) throw ConfigError(index("experiment.snapshot_times", i), "must lie in [0, T]");
    }

    // output
    const json& out = block(root, "output", "");
    check_keys(out, "output", {"directory", "prefix"});
    cfg.out_dir = text(out, "directory", "output", "out");
    if (cfg.out_dir.is_relative()) cfg.out_dir = base_dir / cfg.out_dir;
    cfg.prefix = text(out, "prefix", "output", "");

    // resolved configuration
    res["model"] = {{"c", spec.model.damping}, {"d", spec.model.stiffness}, {"k", spec.model.cable},
                    {"N", spec.model.modes},   {"T", T},                    {"r", r}};
    res["grids"] = {{"h", h},
                    {"h_r", cfg.history_step},
                    {"G", spec.grid_points},
                    {"gramian_quad_step", cfg.gramian_quad_step},
                    {"M_step", cfg.estimation.semigroup_step},
                    {"Gamma_step", cfg.estimation.gamma_step}};
    json imps = json::array();
    for (std::size_t k = 0; k < spec.impulses.size(); ++k) {
        const ImpulseSpec& imp = spec.impulses[k];
        imps.push_back({{"time", imp.time},
                        {"catalog", name_of(imp.kind, kImpulse)},
                        {"params", {{"gain", imp.gain}, {"offset", to_json(imp.offset)}}},
                        {"d_k", spec.impulse_lipschitz(k)}});
    }
    res["impulses"] = imps;
    res["delays"] = {{"tau", spec.nonlocal.lags}};
    res["nonlocal"] = {{"gamma", spec.nonlocal.weights}, {"L_q", spec.nonlocal_lipschitz()}};
    res["forcing"] = {{"catalog", name_of(spec.forcing.kind, kForcing)},
                      {"params",
                       {{"amplitude", spec.forcing.amplitude},
                        {"omega", spec.forcing.omega},
                        {"phase", spec.forcing.phase},
                        {"mode", spec.forcing.mode}}}};
    res["nonlinearity"] = {{"catalog", name_of(spec.nonlinearity.kind, kNonlinearity)},
                           {"params", {{"gain", spec.nonlinearity.gain}}},
                           {"l_f", spec.perturbation_lipschitz()},
                           {"alpha1", spec.growth_alpha()},
                           {"beta1", spec.growth_beta()},
                           {"H", name_of(spec.growth_envelope(), kEnvelope)}};
    res["history"] = hist_res;
    json targets = {{"w", to_json(cfg.target.w)}, {"y", to_json(cfg.target.y)}};
    if (has_z0) targets["z0"] = {{"w", to_json(z0.w)}, {"y", to_json(z0.y)}};
    res["targets"] = targets;
    res["experiment"] = {{"sigmas", cfg.sigmas},
                         {"tol", cfg.tol},
                         {"max_iter", cfg.max_iter},
                         {"picard_tol", spec.picard_tol},
                         {"picard_max_iter", spec.picard_max_iter},
                         {"control", ctl_res},
                         {"snapshot_times", cfg.snapshot_times},
                         {"gramian_rule", name_of(cfg.gramian_rule, kGramianRule)}};
    res["output"] = {{"directory", std::filesystem::absolute(cfg.out_dir).lexically_normal().string()},
                     {"prefix", cfg.prefix}};
    cfg.resolved = res.dump(2) + "\n";
    return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), std::filesystem::absolute(path).parent_path());
}

void set_output_directory(RunConfig& cfg, const std::filesystem::path& dir) {
    cfg.out_dir = std::filesystem::absolute(dir).lexically_normal();
    json res = json::parse(cfg.resolved);
    res["output"]["directory"] = cfg.out_dir.string();
    cfg.resolved = res.dump(2) + "\n";
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"simulate", "gramian", "steer", "approx", "exact", "check"};
    return names;
}

std::string error_line(const std::string& kind, const std::string& path, const std::string& message) {
    return "beamctl-error kind=" + kind + " path=" + (path.empty() ? "-" : path) + " message=" + json(message).dump();
}

// ---------------------------------------------------------------------------

namespace {

class Outputs {
public:
    explicit Outputs(const RunConfig& cfg) : dir_(cfg.out_dir), prefix_(cfg.prefix) {
        std::filesystem::create_directories(dir_);
    }
    std::ofstream open(const std::string& name) const {
        std::ofstream out(dir_ / (prefix_ + name));
        if (!out) throw std::runtime_error("cannot write " + (dir_ / (prefix_ + name)).string());
        return out;
    }

private:
    std::filesystem::path dir_;
    std::string prefix_;
};

void write_control_csv(std::ostream& out, const ControlSignal& u) {
    out << "t";
    for (std::size_t k = 1; k <= u.modes(); ++k) out << ",u_" << k;
    out << '\n';
    auto row = [&](double t, const ModalCoeffs& v) {
        out << format_number(t);
        for (std::size_t k = 0; k < v.size(); ++k) out << ',' << format_number(v[k]);
        out << '\n';
    };
    for (std::size_t i = 0; i < u.nodes(); ++i) {
        row(u.time(i), u.left(i));
        if (u.has_jump(i)) row(u.time(i), u.right(i));
    }
}

void run_simulate(const RunConfig& cfg, const Outputs& files, std::ostream& log, bool verbose) {
    const ProblemSpec& spec = cfg.spec;
    const MildSolution sol = integrate_mild(spec, cfg.nominal_control);
    const Trajectory& z = sol.trajectory;
    if (verbose) log << "simulate: " << sol.picard_iterations << " Picard iterations\n";
    {
        auto out = files.open("trajectory.csv");
        write_trajectory_csv(out, z);
    }
    const ForceModel forces(spec);
    const SpatialGrid& grid = forces.basis().grid();
    {
        auto out = files.open("snapshots.csv");
        out << "t,x,w,y\n";
        for (double t : cfg.snapshot_times) {
            const StateZ s = z.at(t);
            const std::vector<double> w = forces.basis().reconstruct(s.w);
            const std::vector<double> y = forces.basis().reconstruct(s.y);
            for (std::size_t i = 0; i < grid.points(); ++i) {
                out << format_number(t) << ',' << format_number(grid.node(i)) << ',' << format_number(w[i]) << ','
                    << format_number(y[i]) << '\n';
            }
        }
    }
    double jump_defect = 0.0;
    for (std::size_t k = 0; k < spec.impulses.size(); ++k) {
        const std::size_t i = z.index_of(spec.impulses[k].time);
        const StateZ expected = z.left(i) + forces.impulse(k, z.left(i));
        jump_defect = std::max(jump_defect, norm_z(z.value(i) - expected));
    }
    auto out = files.open("simulate_report.txt");
    out << "picard_iterations = " << sol.picard_iterations << '\n'
        << "history_residual = " << format_number(sol.history_residual) << '\n'
        << "jump_defect = " << format_number(jump_defect) << '\n'
        << "terminal_norm = " << format_number(norm_z(z.terminal())) << '\n'
        << "sup_norm = " << format_number(z.sup_norm()) << '\n';
}

void run_gramian(const RunConfig& cfg, const Outputs& files, std::ostream& log, bool verbose) {
    const ProblemSpec& spec = cfg.spec;
    const GramianSet gs(spec.model, 0.0, spec.model.horizon, spec.time_step(), cfg.gramian_rule,
                        cfg.gramian_quad_step);
    if (verbose) log << "gramian: " << gs.modes() << " modes\n";
    auto out = files.open("gramian.csv");
    out << "n,W11,W12,W21,W22,cond\n";
    for (std::size_t k = 0; k < gs.modes(); ++k) {
        const Mode2x2& w = gs.gramian(k);
        out << k + 1 << ',' << format_number(w.a11) << ',' << format_number(w.a12) << ',' << format_number(w.a21)
            << ',' << format_number(w.a22) << ',' << format_number(gs.condition(k)) << '\n';
    }
}

void run_steer(const RunConfig& cfg, const Outputs& files, std::ostream& log, bool verbose) {
    const ProblemSpec& spec = cfg.spec;
    const StateZ& z0 = cfg.initial_state;
    const ControlSignal u = steering_control(z0, cfg.target, 0.0, spec.model.horizon, spec.model, spec.time_step());
    const StateZ reached = linear_terminal_state(z0, u, spec.model);
    const double err = norm_z(reached - cfg.target);
    const double scale = norm_z(cfg.target);
    if (verbose) log << "steer: terminal error " << format_number(err) << '\n';
    {
        auto out = files.open("control.csv");
        write_control_csv(out, u);
    }
    auto out = files.open("steer_report.txt");
    out << "terminal_error = " << format_number(err) << '\n'
        << "relative_error = " << format_number(scale > 0.0 ? err / scale : err) << '\n'
        << "target_norm = " << format_number(scale) << '\n'
        << "control_l2 = " << format_number(u.l2_norm()) << '\n';
}

void run_approx(const RunConfig& cfg, const Outputs& files, std::ostream& log, bool verbose) {
    const ApproxResult res = approx_experiment(cfg.spec, cfg.nominal_control, cfg.target, cfg.sigmas);
    {
        auto out = files.open("approx.csv");
        out << "sigma,terminal_error,bound_estimate\n";
        for (const auto& row : res.rows) {
            out << format_number(row.sigma) << ',' << format_number(row.terminal_error) << ','
                << format_number(row.bound_estimate) << '\n';
        }
    }
    {
        auto out = files.open("approx_diagnostics.csv");
        out << "sigma,M_beta_sigma,delay_identity_defect,locality_defect,tail_force_sup\n";
        for (const auto& row : res.rows) {
            out << format_number(row.sigma) << ',' << format_number(res.M * res.beta * row.sigma) << ','
                << format_number(row.delay_identity_defect) << ',' << format_number(row.locality_defect) << ','
                << format_number(row.tail_force_sup) << '\n';
        }
    }
    double force = 0.0;
    for (const auto& row : res.rows) force = std::max(force, row.tail_force_sup);
    auto out = files.open("approx_report.txt");
    out << "nominal_terminal_error = " << format_number(res.nominal_terminal_error) << '\n'
        << "M = " << format_number(res.M) << '\n'
        << "alpha1 = " << format_number(res.alpha) << '\n'
        << "beta1 = " << format_number(res.beta) << '\n'
        << "tail_force_sup = " << format_number(force) << '\n';
    if (res.alpha == 0.0 && force > res.beta) {
        out << "warning = measured tail force exceeds beta1; the bound column does not cover the restoring term\n";
        log << "warning: measured tail force " << format_number(force) << " exceeds beta1 " << format_number(res.beta)
            << '\n';
    }
    if (verbose) {
        for (const auto& row : res.rows) {
            log << "approx: sigma " << format_number(row.sigma) << " error " << format_number(row.terminal_error)
                << '\n';
        }
    }
}

void run_exact(const RunConfig& cfg, const Outputs& files, std::ostream& log, bool verbose) {
    const ContractionReport report = contraction_constants(cfg.spec, cfg.estimation);
    if (!report.satisfied) {
        log << "warning: contraction condition fails (lhs = " << format_number(report.lhs)
            << "); iterating without a convergence guarantee\n";
    }
    const ExactResult res = exact_fixed_point(cfg.spec, cfg.target, cfg.tol, cfg.max_iter);
    {
        auto out = files.open("iterations.csv");
        out << "iter,sup_diff,ratio\n";
        for (const auto& it : res.log) {
            out << it.iter << ',' << format_number(it.sup_diff) << ',' << format_number(it.ratio) << '\n';
            if (verbose) log << "exact: iteration " << it.iter << " change " << format_number(it.sup_diff) << '\n';
        }
    }
    {
        auto out = files.open("control.csv");
        write_control_csv(out, res.control);
    }
    {
        auto out = files.open("trajectory.csv");
        write_trajectory_csv(out, res.trajectory);
    }
    auto out = files.open("exact_report.txt");
    out << "iterations = " << res.log.size() << '\n'
        << "terminal_error = " << format_number(res.terminal_error) << '\n'
        << "mild_terminal_error = " << format_number(res.mild_terminal_error) << '\n'
        << "fixed_point_residual = " << format_number(res.fixed_point_residual) << '\n';
    write_report(out, report);
}

void run_check(const RunConfig& cfg, const Outputs& files, std::ostream& log, bool verbose) {
    const ContractionReport report = contraction_constants(cfg.spec, cfg.estimation);
    if (verbose) log << "check: lhs " << format_number(report.lhs) << '\n';
    auto out = files.open("contraction.txt");
    write_report(out, report);
}

}  // namespace

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log, std::ostream& err,
                bool verbose) {
    using Runner = void (*)(const RunConfig&, const Outputs&, std::ostream&, bool);
    static const std::map<std::string, Runner> runners = {{"simulate", run_simulate}, {"gramian", run_gramian},
                                                          {"steer", run_steer},       {"approx", run_approx},
                                                          {"exact", run_exact},       {"check", run_check}};
    const auto it = runners.find(command);
    if (it == runners.end()) {
        err << error_line("usage", "", "unknown command '" + command + "'") << '\n';
        return 2;
    }
    try {
        const Outputs files(cfg);
        {
            auto out = files.open("resolved-config.json");
            out << cfg.resolved;
        }
        it->second(cfg, files, log, verbose);
        return 0;
    } catch (const ConfigError& e) {
        err << error_line("config", e.path(), e.what()) << '\n';
        return 2;
    } catch (const NumericalError& e) {
        err << error_line("numerical", "", e.what()) << '\n';
        return 3;
    } catch (const std::logic_error& e) {
        err << error_line("precondition", "", e.what()) << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << error_line("runtime", "", e.what()) << '\n';
        return 3;
    }
}

}  // namespace beamctl
