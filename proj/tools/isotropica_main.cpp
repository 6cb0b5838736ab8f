// Experiment runner: one subcommand per invocation, a JSON config in, a CSV
// artifact plus a JSON run manifest out. Exit codes: 0 success, 2 config or
// schema violation (message names the offending field), 3 numerical guard
// refusal (message names the guard).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "isotropica/catalog.hpp"
#include "isotropica/csvio.hpp"
#include "isotropica/errors.hpp"
#include "isotropica/grid.hpp"
#include "isotropica/parallel.hpp"
#include "isotropica/phase.hpp"
#include "isotropica/propagation.hpp"
#include "isotropica/spectra.hpp"
#include "isotropica/states.hpp"
#include "isotropica/wavefront.hpp"

using nlohmann::json;
using namespace isotropica;

namespace {

constexpr double pi = std::numbers::pi;

struct RunContext {
    std::string command;
    json config;
    std::string out;
    std::uint64_t seed = 7;
    bool quiet = false;
};

struct HandlerOut {
    json results = json::object();
    std::string artifact;
    std::size_t rows = 0;
};

// ---- config access; every failure names the offending field ----

std::string subpath(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

[[noreturn]] void fail_field(const std::string& path, const std::string& what) {
    throw std::invalid_argument((path.empty() ? std::string("config") : path) +
                                ": " + what);
}

const json& child(const json& j, const std::string& path, const char* key) {
    if (!j.is_object()) fail_field(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) fail_field(subpath(path, key), "missing required field");
    return *it;
}

bool has(const json& j, const char* key) {
    return j.is_object() && j.contains(key);
}

double as_num(const json& v, const std::string& path) {
    if (!v.is_number()) fail_field(path, "expected a number");
    return v.get<double>();
}

double num_field(const json& j, const std::string& path, const char* key) {
    return as_num(child(j, path, key), subpath(path, key));
}

double num_or(const json& j, const std::string& path, const char* key, double d) {
    return has(j, key) ? as_num(j[key], subpath(path, key)) : d;
}

std::int64_t as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail_field(path, "expected an integer");
    return v.get<std::int64_t>();
}

int int_field(const json& j, const std::string& path, const char* key) {
    return static_cast<int>(as_int(child(j, path, key), subpath(path, key)));
}

int int_or(const json& j, const std::string& path, const char* key, int d) {
    return has(j, key) ? static_cast<int>(as_int(j[key], subpath(path, key))) : d;
}

bool bool_or(const json& j, const std::string& path, const char* key, bool d) {
    if (!has(j, key)) return d;
    const json& v = j[key];
    if (!v.is_boolean()) fail_field(subpath(path, key), "expected a boolean");
    return v.get<bool>();
}

std::string str_field(const json& j, const std::string& path, const char* key) {
    const json& v = child(j, path, key);
    if (!v.is_string()) fail_field(subpath(path, key), "expected a string");
    return v.get<std::string>();
}

std::vector<double> numvec(const json& v, const std::string& path) {
    if (!v.is_array()) fail_field(path, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(as_num(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<double> numvec_field(const json& j, const std::string& path,
                                 const char* key) {
    return numvec(child(j, path, key), subpath(path, key));
}

// ---- domain object parsers ----

Potential parse_potential(const json& j, const std::string& path) {
    const std::string kind = str_field(j, path, "kind");
    if (kind == "free")
        return free_potential(int_or(j, path, "n", 1), num_or(j, path, "shift", 0.0));
    if (kind == "cosine")
        return cosine_potential(num_field(j, path, "a"), num_or(j, path, "shift", 0.0));
    if (kind == "two-mode")
        return two_mode_potential(num_field(j, path, "a1"), num_field(j, path, "a2"),
                                  num_or(j, path, "shift", 0.0));
    if (kind == "separable-2d")
        return separable_2d_potential(num_field(j, path, "a"),
                                      num_or(j, path, "shift", 0.0));
    if (kind == "product-2d")
        return product_2d_potential(num_field(j, path, "a"),
                                    num_or(j, path, "shift", 0.0));
    if (kind == "harmonic")
        return harmonic_well(num_or(j, path, "omega", 1.0),
                             num_or(j, path, "shift", 0.0));
    fail_field(subpath(path, "kind"), "unknown potential kind '" + kind + "'");
}

TestFunction parse_testfn(const json& j, const std::string& path) {
    TestFunction f;
    const std::string kind = str_field(j, path, "kind");
    if (kind == "gaussian")
        f.kind = TestFunction::Kind::gaussian;
    else if (kind == "bump")
        f.kind = TestFunction::Kind::bump;
    else if (kind == "hermite-damped")
        f.kind = TestFunction::Kind::hermite_damped;
    else
        fail_field(subpath(path, "kind"), "unknown test function kind '" + kind + "'");
    f.center = num_or(j, path, "center", 0.0);
    f.width = num_or(j, path, "width", 1.0);
    f.degree = int_or(j, path, "degree", 0);
    return f;
}

StatePhase parse_state_phase(const json& j, const std::string& path) {
    StatePhase p;
    const std::string kind = str_field(j, path, "kind");
    if (kind == "zero") {
        p.kind = StatePhase::Kind::zero;
    } else if (kind == "linear") {
        p.kind = StatePhase::Kind::linear;
        p.xi = numvec_field(j, path, "xi");
        p.c = num_or(j, path, "c", 0.0);
    } else if (kind == "quadratic") {
        p.kind = StatePhase::Kind::quadratic;
        const json& q = child(j, path, "quad");
        const std::string qp = subpath(path, "quad");
        if (!q.is_array()) fail_field(qp, "expected a matrix");
        for (std::size_t r = 0; r < q.size(); ++r)
            p.quad.push_back(numvec(q[r], qp + "[" + std::to_string(r) + "]"));
        if (has(j, "xi")) p.xi = numvec_field(j, path, "xi");
        p.c = num_or(j, path, "c", 0.0);
    } else {
        fail_field(subpath(path, "kind"), "unknown phase kind '" + kind + "'");
    }
    return p;
}

Profile parse_profile(const json& j, const std::string& path) {
    Profile pr;
    if (has(j, "envelope")) {
        const json& e = j["envelope"];
        const std::string ep = subpath(path, "envelope");
        const std::string kind = str_field(e, ep, "kind");
        if (kind == "one")
            pr.envelope.kind = Envelope::Kind::one;
        else if (kind == "gaussian")
            pr.envelope.kind = Envelope::Kind::gaussian;
        else if (kind == "plateau")
            pr.envelope.kind = Envelope::Kind::plateau;
        else
            fail_field(subpath(ep, "kind"), "unknown envelope kind '" + kind + "'");
        pr.envelope.center = num_or(e, ep, "center", 0.0);
        pr.envelope.width = num_or(e, ep, "width", 1.0);
        pr.envelope.lo = num_or(e, ep, "lo", -1.0);
        pr.envelope.hi = num_or(e, ep, "hi", 1.0);
        pr.envelope.ramp = num_or(e, ep, "ramp", 0.5);
    }
    if (has(j, "shape")) {
        const json& s = j["shape"];
        const std::string sp = subpath(path, "shape");
        const std::string kind = str_field(s, sp, "kind");
        if (kind == "gaussian")
            pr.shape.kind = ScalarShape::Kind::gaussian;
        else if (kind == "bump")
            pr.shape.kind = ScalarShape::Kind::bump;
        else if (kind == "poly-gaussian")
            pr.shape.kind = ScalarShape::Kind::poly_gaussian;
        else
            fail_field(subpath(sp, "kind"), "unknown shape kind '" + kind + "'");
        pr.shape.width = num_or(s, sp, "width", 1.0);
        if (has(s, "coeffs")) pr.shape.coeffs = numvec_field(s, sp, "coeffs");
    }
    return pr;
}

ModelIsotropicState parse_state(const json& j, const std::string& path) {
    ModelIsotropicState st;
    st.k = int_field(j, path, "k");
    st.l = int_field(j, path, "l");
    st.order_r = num_or(j, path, "order_r", 0.0);
    if (has(j, "phase")) st.phase = parse_state_phase(j["phase"], subpath(path, "phase"));
    const json& terms = child(j, path, "terms");
    const std::string tp = subpath(path, "terms");
    if (!terms.is_array() || terms.empty()) fail_field(tp, "expected a non-empty array");
    for (std::size_t i = 0; i < terms.size(); ++i)
        st.terms.push_back(parse_profile(terms[i], tp + "[" + std::to_string(i) + "]"));
    return st;
}

PhaseFunction parse_phase_fn(const json& j, const std::string& path) {
    const std::string kind = str_field(j, path, "kind");
    if (kind == "model")
        return model_phase(int_field(j, path, "k"), int_field(j, path, "l"));
    if (kind == "fold") return fold_phase();
    if (kind == "identity") return identity_relation_phase(int_or(j, path, "n", 1));
    if (kind == "fourier-pairing")
        return fourier_pairing_phase(int_or(j, path, "n", 1));
    if (kind == "composed")
        return compose_phase(parse_phase_fn(child(j, path, "f"), subpath(path, "f")),
                             parse_phase_fn(child(j, path, "g"), subpath(path, "g")),
                             int_field(j, path, "ny"));
    fail_field(subpath(path, "kind"), "unknown phase function kind '" + kind + "'");
}

// Centered grid: {"period": P, "m": M} torus, {"box": B, "m": M} boxed.
GridSpec parse_grid(int n, const json& j, const std::string& path) {
    const int m = int_field(j, path, "m");
    std::vector<AxisSpec> axes(static_cast<std::size_t>(n));
    if (has(j, "period")) {
        const double p = num_field(j, path, "period");
        if (p <= 0.0) fail_field(subpath(path, "period"), "must be positive");
        for (auto& a : axes) a = {-p / 2.0, p / 2.0, m, true};
    } else if (has(j, "box")) {
        const double b = num_field(j, path, "box");
        if (b <= 0.0) fail_field(subpath(path, "box"), "must be positive");
        for (auto& a : axes) a = {-b, b, m, false};
    } else {
        fail_field(path, "needs either 'period' or 'box'");
    }
    return GridSpec(std::move(axes));
}

std::vector<double> parse_hbars(const json& j, const std::string& path, int n) {
    if (j.is_array()) return numvec(j, path);
    if (j.is_object() && j.contains("standard"))
        return HbarSchedule::standard(int_or(j, path, "standard", n)).values;
    if (j.is_object() && j.contains("values")) return numvec_field(j, path, "values");
    fail_field(path, "expected an array or {\"standard\": n} / {\"values\": [...]}");
}

// ---- spectrum sources shared by spectrum / trace-check / weyl-count ----

// Doubles M until the resolution guard is satisfied; other guards propagate.
void resolve_m(SchrodingerProblem& p, const json& src, const std::string& path) {
    if (has(src, "m")) {
        p.M = int_field(src, path, "m");
        p.validate();
        return;
    }
    for (int m = 256; m <= (1 << 17); m *= 2) {
        p.M = m;
        try {
            p.validate();
            return;
        } catch (const guard_error& e) {
            if (e.guard() != "spectral-resolution" || m == (1 << 17)) throw;
        }
    }
}

struct SpectrumSource {
    bool surrogate = false;
    Potential V;
    int n = 1;
    double period = 2.0 * pi;
    json m_policy; // the source object; m resolved per hbar
};

SpectrumSource parse_source(const json& j, const std::string& path) {
    SpectrumSource s;
    const std::string kind = str_field(j, path, "kind");
    if (kind == "harmonic-surrogate") {
        s.surrogate = true;
        return s;
    }
    if (kind != "potential")
        fail_field(subpath(path, "kind"), "unknown source kind '" + kind + "'");
    s.V = parse_potential(child(j, path, "potential"), subpath(path, "potential"));
    s.n = s.V.n;
    s.period = num_or(j, path, "period", 2.0 * pi);
    s.m_policy = j;
    return s;
}

SpectrumResult source_spectrum(const SpectrumSource& s, const std::string& path,
                               double hbar, double window) {
    if (s.surrogate) return harmonic_surrogate(hbar, window);
    SchrodingerProblem p;
    p.n = s.n;
    p.V = s.V;
    p.hbar = hbar;
    p.period = s.period;
    p.window = window;
    resolve_m(p, s.m_policy, path);
    return diagonalize(p);
}

LevelSetMeasure parse_theta(const json& cfg, const SpectrumSource& src,
                            std::uint64_t seed) {
    if (!has(cfg, "theta")) {
        if (src.surrogate) {
            LevelSetMeasure t;
            t.value = 2.0 * pi; // unit circle of radius sqrt(2): 2 pi exactly
            return t;
        }
        return liouville_measure(src.V, src.n);
    }
    const json& j = cfg["theta"];
    const std::string path = "theta";
    const std::string kind = str_field(j, path, "kind");
    if (kind == "exact") {
        LevelSetMeasure t;
        t.value = num_field(j, path, "value");
        return t;
    }
    if (src.surrogate)
        fail_field(subpath(path, "kind"),
                   "the surrogate source needs an 'exact' theta");
    if (kind == "volume-derivative")
        return liouville_measure(src.V, src.n);
    if (kind == "monte-carlo") {
        LiouvilleOptions opts;
        opts.seed = seed;
        if (has(j, "samples"))
            opts.mc_samples = static_cast<std::size_t>(
                as_int(j["samples"], subpath(path, "samples")));
        opts.box_halfwidth = num_or(j, path, "box", 6.0);
        return liouville_measure(src.V, src.n, 0.0, MeasureMethod::monte_carlo, opts);
    }
    fail_field(subpath(path, "kind"), "unknown theta kind '" + kind + "'");
}

std::string artifact_path(const RunContext& rc) {
    return rc.out + "/" + rc.command + ".csv";
}

json warnings_json(const std::vector<std::string>& w) {
    json a = json::array();
    for (const auto& s : w) a.push_back(s);
    return a;
}

// ---- subcommand handlers ----

HandlerOut cmd_build_state(const RunContext& rc) {
    ModelIsotropicState st = parse_state(child(rc.config, "", "state"), "state");
    const double hbar = num_field(rc.config, "", "hbar");
    GridSpec g = parse_grid(st.n(), child(rc.config, "", "grid"), "grid");
    SampledField f = sample_model_state(st, g, hbar);

    std::vector<std::string> cols{"index"};
    for (int a = 0; a < g.dim(); ++a) cols.push_back("x_" + std::to_string(a));
    cols.push_back("re");
    cols.push_back("im");
    HandlerOut h;
    h.artifact = artifact_path(rc);
    CsvWriter csv(h.artifact, cols);
    std::vector<double> x(static_cast<std::size_t>(g.dim()));
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        g.coords(i, x.data());
        std::vector<CsvValue> row{static_cast<std::int64_t>(i)};
        for (double c : x) row.emplace_back(c);
        row.emplace_back(f.values[i].real());
        row.emplace_back(f.values[i].imag());
        csv.row(row);
    }
    h.rows = csv.rows();
    h.results["l2_norm"] = field_l2_norm(f);
    h.results["warnings"] = warnings_json(f.warnings);
    return h;
}

HandlerOut cmd_decompose(const RunContext& rc) {
    ModelIsotropicState st = parse_state(child(rc.config, "", "state"), "state");
    const double hbar = num_field(rc.config, "", "hbar");
    CoherentFamily fam = decompose_model_state(st, hbar);

    std::vector<std::string> cols{"node"};
    for (int a = 0; a < fam.d; ++a) cols.push_back("tau_" + std::to_string(a));
    cols.push_back("weight");
    HandlerOut h;
    h.artifact = artifact_path(rc);
    CsvWriter csv(h.artifact, cols);
    for (std::size_t i = 0; i < fam.size(); ++i) {
        std::vector<CsvValue> row{static_cast<std::int64_t>(i)};
        for (double t : fam.nodes[i]) row.emplace_back(t);
        row.emplace_back(fam.node_weights[i]);
        csv.row(row);
    }
    h.rows = csv.rows();
    h.results["nodes"] = fam.size();
    h.results["node_spacing"] = fam.node_spacing;
    if (has(rc.config, "grid")) {
        GridSpec g = parse_grid(st.n(), rc.config["grid"], "grid");
        SampledField direct = sample_model_state(st, g, hbar);
        SampledField rebuilt = superpose(fam, g, hbar);
        double sup = 0.0, ref = 0.0;
        for (std::size_t i = 0; i < direct.values.size(); ++i) {
            sup = std::max(sup, std::abs(rebuilt.values[i] - direct.values[i]));
            ref = std::max(ref, std::abs(direct.values[i]));
        }
        h.results["roundtrip_sup_rel"] = ref > 0.0 ? sup / ref : 0.0;
    }
    return h;
}

HandlerOut cmd_wavefront(const RunContext& rc) {
    ModelIsotropicState st = parse_state(child(rc.config, "", "state"), "state");
    const double hbar = num_field(rc.config, "", "hbar");
    GridSpec g = parse_grid(st.n(), child(rc.config, "", "grid"), "grid");
    SampledField f = sample_model_state(st, g, hbar);

    const json& ps = child(rc.config, "", "phase_space");
    auto axes_of = [&](const char* key) {
        const json& spec = child(ps, "phase_space", key);
        const std::string path = subpath("phase_space", key);
        if (!spec.is_array() || spec.size() != static_cast<std::size_t>(st.n()))
            fail_field(path, "expected one [lo, hi, m] triple per dimension");
        std::vector<AxisSpec> axes;
        for (std::size_t a = 0; a < spec.size(); ++a) {
            std::vector<double> t = numvec(spec[a], path + "[" + std::to_string(a) + "]");
            if (t.size() != 3)
                fail_field(path + "[" + std::to_string(a) + "]",
                           "expected [lo, hi, m]");
            axes.push_back({t[0], t[1], static_cast<int>(t[2]), false});
        }
        return GridSpec(std::move(axes));
    };
    PhaseSpaceGrid psg{axes_of("x"), axes_of("xi")};
    const double threshold = num_or(rc.config, "", "threshold", 0.5);
    HusimiField hus = fbi_transform(f, psg);
    const double hmax = hus.max_value();

    std::vector<std::string> cols;
    for (int a = 0; a < st.n(); ++a) cols.push_back("x_" + std::to_string(a));
    for (int a = 0; a < st.n(); ++a) cols.push_back("xi_" + std::to_string(a));
    cols.push_back("husimi");
    HandlerOut h;
    h.artifact = artifact_path(rc);
    CsvWriter csv(h.artifact, cols);
    std::vector<double> x(static_cast<std::size_t>(st.n()));
    std::vector<double> xi(static_cast<std::size_t>(st.n()));
    for (std::size_t ip = 0; ip < psg.position.size(); ++ip) {
        psg.position.coords(ip, x.data());
        for (std::size_t im = 0; im < psg.momentum.size(); ++im) {
            const double v = hus.at(ip, im);
            if (v < threshold * hmax) continue;
            psg.momentum.coords(im, xi.data());
            std::vector<CsvValue> row;
            for (double c : x) row.emplace_back(c);
            for (double c : xi) row.emplace_back(c);
            row.emplace_back(v);
            csv.row(row);
        }
    }
    h.rows = csv.rows();
    h.results["max_value"] = hmax;
    h.results["warnings"] = warnings_json(hus.warnings);
    return h;
}

HandlerOut cmd_widths(const RunContext& rc) {
    ModelIsotropicState st = parse_state(child(rc.config, "", "state"), "state");
    std::vector<double> hbars = parse_hbars(child(rc.config, "", "hbar"), "hbar", 1);
    const json& gj = child(rc.config, "", "grid");

    std::vector<SampledField> fields;
    fields.reserve(hbars.size());
    for (double hb : hbars)
        fields.push_back(sample_model_state(st, parse_grid(st.n(), gj, "grid"), hb));

    std::vector<int> axes;
    if (has(rc.config, "axes")) {
        for (double a : numvec_field(rc.config, "", "axes"))
            axes.push_back(static_cast<int>(a));
    } else {
        for (int a = 0; a < st.n(); ++a) axes.push_back(a);
    }

    HandlerOut h;
    h.artifact = artifact_path(rc);
    CsvWriter csv(h.artifact,
                  {"axis", "exponent", "intercept", "r_squared", "excluded"});
    json fits = json::array();
    for (int a : axes) {
        WidthScalingReport rep = width_scaling(fields, a);
        csv.row({static_cast<std::int64_t>(a), rep.exponent, rep.intercept,
                 rep.r_squared, static_cast<std::int64_t>(rep.excluded.size())});
        fits.push_back({{"axis", a},
                        {"exponent", rep.exponent},
                        {"r_squared", rep.r_squared},
                        {"excluded", rep.excluded.size()}});
    }
    h.rows = csv.rows();
    h.results["fits"] = fits;
    h.results["hbars"] = hbars;
    return h;
}

HandlerOut cmd_validate_phase(const RunContext& rc) {
    PhaseFunction ph = parse_phase_fn(child(rc.config, "", "phase"), "phase");
    const double tol = num_or(rc.config, "", "tol", 1e-7);

    std::vector<std::vector<double>> seeds;
    const json& sj = child(rc.config, "", "seeds");
    const std::size_t point_dim = static_cast<std::size_t>(ph.n + ph.N());
    if (sj.is_array()) {
        for (std::size_t i = 0; i < sj.size(); ++i) {
            std::vector<double> s = numvec(sj[i], "seeds[" + std::to_string(i) + "]");
            if (s.size() != point_dim)
                fail_field("seeds[" + std::to_string(i) + "]",
                           "expected " + std::to_string(point_dim) + " coordinates");
            seeds.push_back(std::move(s));
        }
    } else {
        const int count = int_field(sj, "seeds", "count");
        const double box = num_or(sj, "seeds", "box", 1.0);
        std::mt19937_64 rng(rc.seed);
        std::uniform_real_distribution<double> u(-box, box);
        for (int i = 0; i < count; ++i) {
            std::vector<double> s(point_dim);
            for (auto& c : s) c = u(rng);
            seeds.push_back(std::move(s));
        }
    }

    PhaseValidationReport rep = validate_phase(ph, seeds, tol);
    HandlerOut h;
    h.artifact = artifact_path(rc);
    CsvWriter csv(h.artifact,
                  {"sample", "rank_full", "model_transverse", "immersion", "pass"});
    for (std::size_t i = 0; i < rep.samples.size(); ++i) {
        const PhaseSampleCheck& s = rep.samples[i];
        csv.row({static_cast<std::int64_t>(i), static_cast<std::int64_t>(s.rank_full),
                 static_cast<std::int64_t>(s.model_transverse),
                 static_cast<std::int64_t>(s.immersion),
                 static_cast<std::int64_t>(s.pass())});
    }
    h.rows = csv.rows();
    h.results["all_pass"] = rep.all_pass();
    h.results["phase"] = ph.name;
    return h;
}

HandlerOut cmd_oscillatory_eval(const RunContext& rc) {
    PhaseFunction ph = parse_phase_fn(child(rc.config, "", "phase"), "phase");
    const json& aj = child(rc.config, "", "amplitude");
    Amplitude amp = gaussian_fiber_amplitude(ph.K, ph.l,
                                             num_or(aj, "amplitude", "t_width", 1.0),
                                             num_or(aj, "amplitude", "u_width", 1.0));
    const double r = num_or(rc.config, "", "order_r", 0.0);
    const double hbar = num_field(rc.config, "", "hbar");
    const int refine = int_or(rc.config, "", "refine", 1);

    const json& pts = child(rc.config, "", "points");
    if (!pts.is_array() || pts.empty())
        fail_field("points", "expected a non-empty array of base points");

    std::vector<std::string> cols{"point"};
    for (int a = 0; a < ph.n; ++a) cols.push_back("x_" + std::to_string(a));
    cols.push_back("re");
    cols.push_back("im");
    cols.push_back("abs");
    HandlerOut h;
    h.artifact = artifact_path(rc);
    CsvWriter csv(h.artifact, cols);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::vector<double> x = numvec(pts[i], "points[" + std::to_string(i) + "]");
        if (x.size() != static_cast<std::size_t>(ph.n))
            fail_field("points[" + std::to_string(i) + "]",
                       "expected " + std::to_string(ph.n) + " coordinates");
        cdouble v = oscillatory_integral(ph, amp, r, x, hbar, refine);
        std::vector<CsvValue> row{static_cast<std::int64_t>(i)};
        for (double c : x) row.emplace_back(c);
        row.emplace_back(v.real());
        row.emplace_back(v.imag());
        row.emplace_back(std::abs(v));
        csv.row(row);
    }
    h.rows = csv.rows();
    h.results["hbar"] = hbar;
    h.results["phase"] = ph.name;
    return h;
}

HandlerOut cmd_spectrum(const RunContext& rc) {
    SchrodingerProblem p;
    p.V = parse_potential(child(rc.config, "", "potential"), "potential");
    p.n = p.V.n;
    p.hbar = num_field(rc.config, "", "hbar");
    p.period = num_or(rc.config, "", "period", 2.0 * pi);
    p.window = num_or(rc.config, "", "window", 1.0);
    p.keep_eigenvectors = bool_or(rc.config, "", "eigenvectors", false);
    resolve_m(p, rc.config, "");
    SpectrumResult s = diagonalize(p);

    HandlerOut h;
    h.artifact = artifact_path(rc);
    CsvWriter csv(h.artifact, {"index", "eigenvalue"});
    for (std::size_t j = 0; j < s.eigenvalues.size(); ++j)
        csv.row({static_cast<std::int64_t>(j), s.eigenvalues[j]});
    h.rows = csv.rows();
    h.results["count"] = s.eigenvalues.size();
    h.results["window"] = s.window;
    h.results["m"] = p.M;
    h.results["nyquist"] = p.nyquist();
    return h;
}

HandlerOut cmd_trace_check(const RunContext& rc) {
    SpectrumSource src = parse_source(child(rc.config, "", "source"), "source");
    TestFunction phi = parse_testfn(child(rc.config, "", "phi"), "phi");
    std::vector<double> hbars =
        parse_hbars(child(rc.config, "", "hbar"), "hbar", src.n);
    const double window = num_or(rc.config, "", "window", 1.0);
    LevelSetMeasure theta = parse_theta(rc.config, src, rc.seed);

    std::vector<SpectrumResult> results;
    results.reserve(hbars.size());
    for (double hb : hbars)
        results.push_back(source_spectrum(src, "source", hb, window));
    ScaledTraceStudy study = scaled_trace_study(results, phi, theta);

    HandlerOut h;
    h.artifact = artifact_path(rc);
    CsvWriter csv(h.artifact, {"hbar", "lhs", "rhs", "ratio", "deviation"});
    for (const ScaledTraceRecord& r : study.records)
        csv.row({r.hbar, r.lhs, r.rhs, r.ratio, r.deviation});
    h.rows = csv.rows();
    h.results["decay_mode"] = study.decay_mode;
    h.results["exponent"] = study.exponent;
    h.results["r_squared"] = study.r_squared;
    h.results["theta"] = theta.value;
    h.results["theta_error"] = theta.error;
    return h;
}

HandlerOut cmd_weyl_count(const RunContext& rc) {
    SpectrumSource src = parse_source(child(rc.config, "", "source"), "source");
    const double c = num_field(rc.config, "", "c");
    const double alpha = num_field(rc.config, "", "alpha");
    std::vector<double> hbars =
        parse_hbars(child(rc.config, "", "hbar"), "hbar", src.n);
    const double window = num_or(rc.config, "", "window", 1.0);
    LevelSetMeasure theta = parse_theta(rc.config, src, rc.seed);

    HandlerOut h;
    h.artifact = artifact_path(rc);
    CsvWriter csv(h.artifact, {"hbar", "window", "count", "prediction", "ratio"});
    double final_ratio = 0.0;
    for (double hb : hbars) {
        SpectrumResult s = source_spectrum(src, "source", hb, window);
        WeylCountRecord r = weyl_count_check(s, c, alpha, theta);
        csv.row({hb, r.window, static_cast<std::int64_t>(r.count), r.prediction,
                 r.ratio});
        final_ratio = r.ratio;
    }
    h.rows = csv.rows();
    h.results["theta"] = theta.value;
    h.results["theta_error"] = theta.error;
    h.results["final_ratio"] = final_ratio;
    return h;
}

HandlerOut cmd_gamma_decay(const RunContext& rc) {
    TestFunction rho = parse_testfn(child(rc.config, "", "rho"), "rho");
    CutoffComplement chi;
    if (has(rc.config, "chi")) {
        const json& cj = rc.config["chi"];
        chi.inner = num_or(cj, "chi", "inner", 1.0);
        chi.outer = num_or(cj, "chi", "outer", 2.0);
    }
    std::vector<double> lambdas = numvec_field(rc.config, "", "lambdas");
    std::vector<double> hbars = numvec_field(rc.config, "", "hbars");
    GammaDecayReport rep = gamma_decay_report(rho, chi, lambdas, hbars);

    HandlerOut h;
    h.artifact = artifact_path(rc);
    CsvWriter csv(h.artifact, {"lambda", "hbar", "gamma_abs"});
    for (const GammaLatticePoint& p : rep.lattice)
        csv.row({p.lambda, p.hbar, p.gamma_abs});
    h.rows = csv.rows();
    h.results["monotone_in_lambda"] = rep.monotone_in_lambda;
    json bc = json::array();
    for (const auto& rowk : rep.bound_constant) {
        json r = json::array();
        for (double v : rowk) r.push_back(v);
        bc.push_back(r);
    }
    h.results["bound_constant"] = bc;
    return h;
}

HandlerOut cmd_propagate(const RunContext& rc) {
    SchrodingerProblem p;
    p.V = parse_potential(child(rc.config, "", "potential"), "potential");
    p.n = p.V.n;
    p.hbar = num_field(rc.config, "", "hbar");
    p.period = num_or(rc.config, "", "period", 2.0 * pi);
    p.M = int_field(rc.config, "", "m");

    const json& pk = child(rc.config, "", "packet");
    std::vector<double> x0 = numvec_field(pk, "packet", "x0");
    std::vector<double> xi0 = numvec_field(pk, "packet", "xi0");
    if (x0.size() != static_cast<std::size_t>(p.n) || xi0.size() != x0.size())
        fail_field("packet", "x0 and xi0 need one coordinate per dimension");
    const double width = num_or(pk, "packet", "width", 1.0);

    PropagatorConfig cfg;
    cfg.dt = num_or(rc.config, "", "dt", 1e-3);
    cfg.validate(p.hbar);
    const double t_max = num_field(rc.config, "", "t_max");
    const int samples = int_or(rc.config, "", "samples", 8);
    if (t_max < 0.0) fail_field("t_max", "must be nonnegative");
    if (samples < 1) fail_field("samples", "must be at least 1");

    std::vector<AxisSpec> axes(static_cast<std::size_t>(p.n));
    for (auto& a : axes) a = {-p.period / 2.0, p.period / 2.0, p.M, true};
    GridSpec g(std::move(axes));
    SampledField f = sample_coherent_state(gaussian_coherent(x0, xi0, width), g, p.hbar);
    const ClassicalState s0 = classical_state(p.V, x0, xi0);

    std::vector<std::string> cols{"t"};
    for (int a = 0; a < p.n; ++a) cols.push_back("x_" + std::to_string(a));
    for (int a = 0; a < p.n; ++a) cols.push_back("xi_" + std::to_string(a));
    for (int a = 0; a < p.n; ++a) cols.push_back("classical_x_" + std::to_string(a));
    for (int a = 0; a < p.n; ++a) cols.push_back("classical_xi_" + std::to_string(a));
    cols.push_back("deviation");
    HandlerOut h;
    h.artifact = artifact_path(rc);
    CsvWriter csv(h.artifact, cols);

    const double norm0 = field_l2_norm(f);
    double max_dev = 0.0;
    double drift = 0.0;
    for (int j = 0; j <= samples; ++j) {
        const double t = t_max * j / samples;
        if (j > 0) f = evolve(f, p, t_max / samples, cfg);
        ClassicalState tracked = track_center(f);
        ClassicalState flow = classical_flow(p.V, p.n, s0, t);
        drift = flow.energy_drift;
        // Positions live on the torus; compare through the shorter arc.
        double d2 = 0.0;
        for (int a = 0; a < p.n; ++a) {
            const double dx = std::remainder(tracked.x[static_cast<std::size_t>(a)] -
                                                 flow.x[static_cast<std::size_t>(a)],
                                             p.period);
            const double dxi = tracked.xi[static_cast<std::size_t>(a)] -
                               flow.xi[static_cast<std::size_t>(a)];
            d2 += dx * dx + dxi * dxi;
        }
        const double dev = std::sqrt(d2);
        max_dev = std::max(max_dev, dev);
        std::vector<CsvValue> row{t};
        for (double v : tracked.x) row.emplace_back(v);
        for (double v : tracked.xi) row.emplace_back(v);
        for (double v : flow.x) row.emplace_back(v);
        for (double v : flow.xi) row.emplace_back(v);
        row.emplace_back(dev);
        csv.row(row);
    }
    h.rows = csv.rows();
    h.results["max_deviation"] = max_dev;
    h.results["norm_drift"] = std::abs(field_l2_norm(f) - norm0);
    h.results["flow_energy_drift"] = drift;
    return h;
}

HandlerOut cmd_bs_check(const RunContext& rc) {
    std::vector<double> radii = numvec_field(rc.config, "", "radii");
    std::vector<double> hbars = numvec_field(rc.config, "", "hbars");
    if (radii.empty()) fail_field("radii", "expected at least one radius");
    if (hbars.empty()) fail_field("hbars", "expected at least one value");

    HandlerOut h;
    h.artifact = artifact_path(rc);
    CsvWriter csv(h.artifact, {"radius", "hbar", "residue"});
    for (double R : radii) {
        IsotropicSubmanifoldModel loop;
        loop.d = 1;
        loop.n = 1;
        loop.tau_box = {{0.0, 2.0 * pi}};
        loop.loop = true;
        loop.embed = [R](const double* tau, double* x, double* xi) {
            x[0] = R * std::cos(tau[0]);
            xi[0] = R * std::sin(tau[0]);
        };
        for (double hb : hbars)
            csv.row({R, hb, bohr_sommerfeld_residue(loop, hb)});
    }
    h.rows = csv.rows();
    return h;
}

// ---- driver ----

const std::vector<std::pair<std::string, std::string>>& command_table() {
    static const std::vector<std::pair<std::string, std::string>> t = {
        {"build-state", "sample a model state on a grid"},
        {"decompose", "coherent-family decomposition of a model state"},
        {"wavefront", "Husimi concentration set of a model state"},
        {"widths", "width scaling exponents across an hbar schedule"},
        {"validate-phase", "rank conditions of a phase function"},
        {"oscillatory-eval", "oscillatory integral at base points"},
        {"spectrum", "eigenvalues inside the retention window"},
        {"trace-check", "scaled trace identity across an hbar schedule"},
        {"weyl-count", "eigenvalue counting law check"},
        {"gamma-decay", "cutoff remainder decay on a lambda/hbar lattice"},
        {"propagate", "wavepacket propagation with center tracking"},
        {"bs-check", "loop action residues"},
    };
    return t;
}

HandlerOut dispatch(const RunContext& rc) {
    if (rc.command == "build-state") return cmd_build_state(rc);
    if (rc.command == "decompose") return cmd_decompose(rc);
    if (rc.command == "wavefront") return cmd_wavefront(rc);
    if (rc.command == "widths") return cmd_widths(rc);
    if (rc.command == "validate-phase") return cmd_validate_phase(rc);
    if (rc.command == "oscillatory-eval") return cmd_oscillatory_eval(rc);
    if (rc.command == "spectrum") return cmd_spectrum(rc);
    if (rc.command == "trace-check") return cmd_trace_check(rc);
    if (rc.command == "weyl-count") return cmd_weyl_count(rc);
    if (rc.command == "gamma-decay") return cmd_gamma_decay(rc);
    if (rc.command == "propagate") return cmd_propagate(rc);
    if (rc.command == "bs-check") return cmd_bs_check(rc);
    fail_field("command", "unknown subcommand '" + rc.command + "'");
}

int run(const std::string& command, const std::string& config_path,
        const std::string& out, bool seed_given, std::uint64_t seed_flag,
        int threads, bool quiet) {
    if (threads > 0) set_thread_count(threads);

    std::ifstream in(config_path, std::ios::binary);
    if (!in) fail_field("config", "cannot open " + config_path);
    json cfg = json::parse(in);
    if (!cfg.is_object()) fail_field("config", "expected a JSON object");

    RunContext rc;
    rc.command = command;
    rc.config = cfg;
    rc.out = out;
    rc.quiet = quiet;
    if (seed_given)
        rc.seed = seed_flag;
    else if (has(cfg, "seed"))
        rc.seed = static_cast<std::uint64_t>(as_int(cfg["seed"], "seed"));

    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) fail_field("out", "cannot create " + out + ": " + ec.message());

    const auto t0 = std::chrono::steady_clock::now();
    HandlerOut h = dispatch(rc);
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  t0)
            .count();

    json manifest{{"command", rc.command},
                  {"config", rc.config},
                  {"seed", rc.seed},
                  {"threads", thread_count()},
                  {"versions", {{"isotropica", version_string}, {"compiler", __VERSION__}}},
                  {"wall_ms", wall_ms},
                  {"artifact", h.artifact},
                  {"rows", h.rows},
                  {"results", h.results}};
    const std::string mpath = rc.out + "/" + rc.command + ".manifest.json";
    std::ofstream mo(mpath, std::ios::binary);
    if (!mo) fail_field("out", "cannot open " + mpath);
    mo << manifest.dump(2) << "\n";

    if (!rc.quiet)
        std::printf("wrote %s (%zu rows) and %s in %.1f ms\n", h.artifact.c_str(),
                    h.rows, mpath.c_str(), wall_ms);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"isotropica experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out = ".";
    std::uint64_t seed_flag = 0;
    int threads = 0;
    bool quiet = false;
    std::vector<CLI::App*> subs;
    for (const auto& [name, desc] : command_table()) {
        CLI::App* sc = app.add_subcommand(name, desc);
        sc->add_option("--config", config_path, "experiment config (JSON)")
            ->required();
        sc->add_option("--out", out, "output directory (default: .)");
        sc->add_option("--seed", seed_flag, "RNG seed (overrides the config)");
        sc->add_option("--threads", threads, "worker threads");
        sc->add_flag("--quiet", quiet, "suppress the summary line");
        subs.push_back(sc);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        return run(sub->get_name(), config_path, out, sub->count("--seed") > 0,
                   seed_flag, threads, quiet);
    } catch (const guard_error& e) {
        std::fprintf(stderr, "refused by guard: %s\n", e.what());
        return 3;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
}
