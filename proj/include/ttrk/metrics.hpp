#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ttrk/json_io.hpp"

namespace ttrk {

/// A measured quantity with a symmetric uncertainty half-width. Published
/// numbers rounded to N decimals carry unc = half an ulp of the printed cell,
/// so consistency checks compare intervals, not exact reals.
struct Measured {
    double value = 0.0;
    double unc = 0.0;
};

struct PlatformSpec {
    std::string name;
    std::optional<Measured> clock_hz;
    std::optional<Measured> capture_latency_ms;
    Measured inference_latency_ms;
    std::optional<Measured> retrieval_latency_ms; // absent means none (0)
    std::optional<Measured> energy_inference_mj;
    std::optional<Measured> energy_total_mj;
    std::optional<Measured> avg_power_mw;
    // Published table cells kept for cross-checks against derived values.
    std::optional<Measured> reported_mac_per_cycle;
    std::optional<Measured> reported_power_eff_uw_per_mhz;
    std::optional<Measured> reported_total_latency_ms;

    void validate() const {
        require(!name.empty(), "platform needs a name");
        auto check = [&](const std::optional<Measured>& m, const char* what,
                         bool strictly_positive) {
            if (!m) return;
            require(std::isfinite(m->value) && std::isfinite(m->unc),
                    std::string(what) + " must be finite for platform '" + name + "'");
            require(m->unc >= 0.0, std::string(what) + " uncertainty must be >= 0");
            if (strictly_positive)
                require(m->value - m->unc > 0.0,
                        std::string(what) + " must stay positive for platform '" + name + "'");
            else
                require(m->value >= 0.0, std::string(what) + " must be >= 0");
        };
        check(inference_latency_ms, "inference latency", true);
        check(clock_hz, "clock", true);
        check(capture_latency_ms, "capture latency", false);
        check(retrieval_latency_ms, "retrieval latency", false);
        check(energy_inference_mj, "inference energy", true);
        check(energy_total_mj, "total energy", true);
        check(avg_power_mw, "average power", true);
        check(reported_mac_per_cycle, "reported MAC/cycle", true);
        check(reported_power_eff_uw_per_mhz, "reported power efficiency", true);
        check(reported_total_latency_ms, "reported total latency", true);
    }
};

// Point-value metric definitions.
inline double mac_per_cycle(std::int64_t macs, double inference_latency_ms, double clock_hz) {
    require(macs > 0 && inference_latency_ms > 0.0 && clock_hz > 0.0,
            "mac_per_cycle needs positive inputs");
    return static_cast<double>(macs) / (inference_latency_ms / 1e3 * clock_hz);
}

inline double avg_power_w(double energy_mj, double latency_ms) {
    require(latency_ms > 0.0, "avg_power needs a positive latency");
    return energy_mj / latency_ms; // mJ / ms = W
}

inline double power_efficiency_uw_per_mhz(double power_w, double clock_hz) {
    require(clock_hz > 0.0, "power efficiency needs a positive clock");
    return power_w * 1e12 / clock_hz; // uW per MHz
}

inline double energy_mj(double power_w, double latency_ms) { return power_w * latency_ms; }

inline double total_latency_ms(double capture_ms, double inference_ms, double retrieval_ms) {
    return capture_ms + inference_ms + retrieval_ms;
}

inline constexpr double kResidualFlagThreshold = 0.05;

/// One derived-vs-reference comparison. The residual is the gap between the
/// two intervals beyond any overlap, relative to the reference midpoint;
/// overlapping intervals give 0.
struct Residual {
    std::string name;
    double derived = 0.0;   // interval midpoint
    double reference = 0.0; // interval midpoint
    double residual = 0.0;
    bool flagged = false;
};

namespace detail {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double mid() const { return 0.5 * (lo + hi); }

    static Interval of(const Measured& m) { return {m.value - m.unc, m.value + m.unc}; }
    static Interval point(double v) { return {v, v}; }
};

// Arithmetic for non-negative quantities (monotone in both endpoints).
inline Interval iadd(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }
inline Interval imul(Interval a, Interval b) { return {a.lo * b.lo, a.hi * b.hi}; }
inline Interval idiv(Interval a, Interval b) {
    require(b.lo > 0.0, "interval division by a range touching zero");
    return {a.lo / b.hi, a.hi / b.lo};
}
inline Interval iscale(Interval a, double k) { return {a.lo * k, a.hi * k}; }

inline Residual make_residual(std::string name, Interval derived, Interval reference) {
    Residual r;
    r.name = std::move(name);
    r.derived = derived.mid();
    r.reference = reference.mid();
    const double gap = std::max(0.0, std::max(derived.lo, reference.lo) -
                                         std::min(derived.hi, reference.hi));
    r.residual = std::abs(r.reference) > 0.0 ? gap / std::abs(r.reference)
                                             : (gap > 0.0 ? HUGE_VAL : 0.0);
    r.flagged = r.residual > kResidualFlagThreshold;
    return r;
}

} // namespace detail

struct PlatformMetrics {
    std::string name;
    // Values for display: the published cell when present, else the derived
    // midpoint, else absent.
    std::optional<double> total_energy_mj;
    std::optional<double> total_latency_ms;
    std::optional<double> mac_per_cycle;
    double inference_latency_ms = 0.0;
    std::optional<double> power_eff_uw_per_mhz;
    std::optional<double> energy_per_inference_mj;
    // Derived midpoints kept separately for programmatic checks.
    std::optional<double> derived_total_latency_ms;
    std::optional<double> derived_mac_per_cycle;
    std::optional<double> derived_power_eff_uw_per_mhz;
    std::optional<double> derived_clock_from_mac_per_cycle_hz;
    std::optional<double> derived_clock_from_power_eff_hz;
    std::optional<double> derived_avg_power_w;
    std::vector<Residual> residuals;

    bool any_flagged() const {
        for (const Residual& r : residuals)
            if (r.flagged) return true;
        return false;
    }
};

struct MetricsReport {
    std::int64_t macs = 0;
    std::vector<PlatformMetrics> platforms;
};

/// Derive every metric each platform's data supports and cross-check against
/// the published cells. Never collapses the two clock derivations into one:
/// a platform without an explicit clock gets its MAC/cycle-implied clock and
/// its power-implied clock compared against each other.
inline MetricsReport compute_metrics(const std::vector<PlatformSpec>& specs, std::int64_t macs) {
    require(macs > 0, "metrics need a positive MAC count");
    using detail::Interval;
    MetricsReport report;
    report.macs = macs;
    for (const PlatformSpec& spec : specs) {
        spec.validate();
        PlatformMetrics pm;
        pm.name = spec.name;
        pm.inference_latency_ms = spec.inference_latency_ms.value;

        const Interval macs_i = Interval::point(static_cast<double>(macs));
        const Interval lat_ms = Interval::of(spec.inference_latency_ms);
        const Interval lat_s = detail::iscale(lat_ms, 1e-3);

        std::optional<Interval> power_w; // explicit, else energy / latency
        if (spec.avg_power_mw)
            power_w = detail::iscale(Interval::of(*spec.avg_power_mw), 1e-3);
        else if (spec.energy_inference_mj)
            power_w = detail::idiv(Interval::of(*spec.energy_inference_mj), lat_ms);
        if (power_w) pm.derived_avg_power_w = power_w->mid();

        std::optional<Interval> d_macpc, d_peff, d_clock_macpc, d_clock_power, d_total;
        if (spec.clock_hz)
            d_macpc = detail::idiv(macs_i, detail::imul(lat_s, Interval::of(*spec.clock_hz)));
        if (power_w && spec.clock_hz)
            d_peff = detail::idiv(detail::iscale(*power_w, 1e12), Interval::of(*spec.clock_hz));
        if (spec.reported_mac_per_cycle)
            d_clock_macpc = detail::idiv(
                macs_i, detail::imul(lat_s, Interval::of(*spec.reported_mac_per_cycle)));
        if (power_w && spec.reported_power_eff_uw_per_mhz)
            d_clock_power = detail::idiv(detail::iscale(*power_w, 1e12),
                                         Interval::of(*spec.reported_power_eff_uw_per_mhz));
        if (spec.capture_latency_ms) {
            Interval t = detail::iadd(Interval::of(*spec.capture_latency_ms), lat_ms);
            if (spec.retrieval_latency_ms)
                t = detail::iadd(t, Interval::of(*spec.retrieval_latency_ms));
            d_total = t;
        }

        if (d_macpc) pm.derived_mac_per_cycle = d_macpc->mid();
        if (d_peff) pm.derived_power_eff_uw_per_mhz = d_peff->mid();
        if (d_clock_macpc) pm.derived_clock_from_mac_per_cycle_hz = d_clock_macpc->mid();
        if (d_clock_power) pm.derived_clock_from_power_eff_hz = d_clock_power->mid();
        if (d_total) pm.derived_total_latency_ms = d_total->mid();

        if (d_macpc && spec.reported_mac_per_cycle)
            pm.residuals.push_back(detail::make_residual(
                "mac_per_cycle", *d_macpc, Interval::of(*spec.reported_mac_per_cycle)));
        if (d_peff && spec.reported_power_eff_uw_per_mhz)
            pm.residuals.push_back(
                detail::make_residual("power_efficiency", *d_peff,
                                      Interval::of(*spec.reported_power_eff_uw_per_mhz)));
        if (d_clock_macpc && spec.clock_hz)
            pm.residuals.push_back(detail::make_residual(
                "clock_from_mac_per_cycle", *d_clock_macpc, Interval::of(*spec.clock_hz)));
        if (d_clock_power && spec.clock_hz)
            pm.residuals.push_back(detail::make_residual(
                "clock_from_power_efficiency", *d_clock_power, Interval::of(*spec.clock_hz)));
        if (!spec.clock_hz && d_clock_macpc && d_clock_power)
            pm.residuals.push_back(
                detail::make_residual("clock_cross", *d_clock_macpc, *d_clock_power));
        if (d_total && spec.reported_total_latency_ms)
            pm.residuals.push_back(detail::make_residual(
                "total_latency_closure", *d_total, Interval::of(*spec.reported_total_latency_ms)));
        if (spec.avg_power_mw && spec.energy_inference_mj)
            pm.residuals.push_back(detail::make_residual(
                "energy_inference_closure", detail::imul(*power_w, lat_ms),
                Interval::of(*spec.energy_inference_mj)));

        pm.total_energy_mj =
            spec.energy_total_mj ? std::optional<double>(spec.energy_total_mj->value)
                                 : std::nullopt;
        if (spec.reported_total_latency_ms)
            pm.total_latency_ms = spec.reported_total_latency_ms->value;
        else if (d_total)
            pm.total_latency_ms = d_total->mid();
        if (spec.reported_mac_per_cycle)
            pm.mac_per_cycle = spec.reported_mac_per_cycle->value;
        else if (d_macpc)
            pm.mac_per_cycle = d_macpc->mid();
        if (spec.reported_power_eff_uw_per_mhz)
            pm.power_eff_uw_per_mhz = spec.reported_power_eff_uw_per_mhz->value;
        else if (d_peff)
            pm.power_eff_uw_per_mhz = d_peff->mid();
        if (spec.energy_inference_mj)
            pm.energy_per_inference_mj = spec.energy_inference_mj->value;
        else if (power_w)
            pm.energy_per_inference_mj = detail::imul(*power_w, lat_ms).mid();

        report.platforms.push_back(std::move(pm));
    }
    return report;
}

namespace detail {

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline std::string cell(const std::optional<double>& v, const char* spec) {
    return v ? fmt(spec, *v) : "-";
}

inline std::string pad_left(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

} // namespace detail

inline std::string render_report_text(const MetricsReport& report) {
    const std::size_t label_w = 28, col_w = 13;
    std::string out = "Model MACs per inference: " + std::to_string(report.macs) + "\n\n";

    auto row = [&](const std::string& label,
                   const std::function<std::string(const PlatformMetrics&)>& get) {
        std::string line = label;
        line.resize(label_w, ' ');
        for (const PlatformMetrics& pm : report.platforms)
            line += detail::pad_left(get(pm), col_w);
        out += line + "\n";
    };

    row("", [](const PlatformMetrics& pm) { return pm.name; });
    out += "End-to-End Evaluation\n";
    row("  Total Energy (mJ)", [](const PlatformMetrics& pm) {
        return detail::cell(pm.total_energy_mj, "%.2f");
    });
    row("  Total Latency (ms)", [](const PlatformMetrics& pm) {
        return detail::cell(pm.total_latency_ms, "%.1f");
    });
    out += "Inference Evaluation\n";
    row("  MAC/Cycle", [](const PlatformMetrics& pm) {
        return detail::cell(pm.mac_per_cycle, "%.2f");
    });
    row("  Inference Latency (ms)", [](const PlatformMetrics& pm) {
        return detail::fmt("%.2f", pm.inference_latency_ms);
    });
    row("  Power Efficiency (uW/MHz)", [](const PlatformMetrics& pm) {
        return detail::cell(pm.power_eff_uw_per_mhz, "%.2f");
    });
    row("  Energy per Inference (mJ)", [](const PlatformMetrics& pm) {
        return detail::cell(pm.energy_per_inference_mj, "%.2f");
    });

    out += "\nConsistency checks (flag threshold " +
           detail::fmt("%.1f", kResidualFlagThreshold * 100.0) + "%)\n";
    for (const PlatformMetrics& pm : report.platforms) {
        if (pm.residuals.empty()) {
            out += "  " + pm.name + ": no checks possible\n";
            continue;
        }
        for (const Residual& r : pm.residuals) {
            out += "  " + pm.name + ": " + r.name + " derived " +
                   detail::fmt("%.6g", r.derived) + " vs reference " +
                   detail::fmt("%.6g", r.reference) + ", residual " +
                   detail::fmt("%.2f", r.residual * 100.0) + "% " +
                   (r.flagged ? "FLAGGED" : "ok") + "\n";
        }
    }
    return out;
}

inline std::string render_report_csv(const MetricsReport& report) {
    std::string out =
        "platform,total_energy_mj,total_latency_ms,mac_per_cycle,inference_latency_ms,"
        "power_eff_uw_per_mhz,energy_per_inference_mj\n";
    auto num = [](const std::optional<double>& v) {
        return v ? detail::fmt("%.17g", *v) : std::string();
    };
    for (const PlatformMetrics& pm : report.platforms) {
        out += pm.name + "," + num(pm.total_energy_mj) + "," + num(pm.total_latency_ms) + "," +
               num(pm.mac_per_cycle) + "," + detail::fmt("%.17g", pm.inference_latency_ms) + "," +
               num(pm.power_eff_uw_per_mhz) + "," + num(pm.energy_per_inference_mj) + "\n";
    }
    return out;
}

namespace detail {

inline Measured parse_measured(const nlohmann::json& j, const std::string& what) {
    Measured m;
    if (j.is_number()) {
        m.value = j.get<double>();
    } else if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
        m.value = j[0].get<double>();
        m.unc = j[1].get<double>();
    } else {
        throw format_error(what + " must be a number or [value, uncertainty]");
    }
    return m;
}

} // namespace detail

inline std::vector<PlatformSpec> load_platform_specs(const std::filesystem::path& path) {
    const nlohmann::json j = load_json_file(path);
    try {
        if (!j.is_object() || !j.contains("platforms") || !j.at("platforms").is_array())
            throw format_error("platform file must be an object with a 'platforms' array");
        if (j.value("version", 1) != 1) throw format_error("unsupported platform file version");
        std::vector<PlatformSpec> specs;
        std::set<std::string> names;
        for (const auto& jp : j.at("platforms")) {
            PlatformSpec s;
            s.name = jp.at("name").get<std::string>();
            if (!names.insert(s.name).second)
                throw format_error("duplicate platform '" + s.name + "'");
            auto opt = [&](const char* key) -> std::optional<Measured> {
                if (!jp.contains(key)) return std::nullopt;
                return detail::parse_measured(jp.at(key), s.name + "." + key);
            };
            if (!jp.contains("inference_latency_ms"))
                throw format_error("platform '" + s.name + "' lacks inference_latency_ms");
            s.inference_latency_ms =
                detail::parse_measured(jp.at("inference_latency_ms"), s.name);
            s.clock_hz = opt("clock_hz");
            s.capture_latency_ms = opt("capture_latency_ms");
            s.retrieval_latency_ms = opt("retrieval_latency_ms");
            s.energy_inference_mj = opt("energy_inference_mj");
            s.energy_total_mj = opt("energy_total_mj");
            s.avg_power_mw = opt("avg_power_mw");
            s.reported_mac_per_cycle = opt("reported_mac_per_cycle");
            s.reported_power_eff_uw_per_mhz = opt("reported_power_eff_uw_per_mhz");
            s.reported_total_latency_ms = opt("reported_total_latency_ms");
            try {
                s.validate();
            } catch (const invalid_input& e) {
                throw format_error(e.what());
            }
            specs.push_back(std::move(s));
        }
        if (specs.empty()) throw format_error("platform file lists no platforms");
        return specs;
    } catch (const nlohmann::json::exception& e) {
        throw format_error("malformed platform file: " + std::string(e.what()));
    }
}

} // namespace ttrk
