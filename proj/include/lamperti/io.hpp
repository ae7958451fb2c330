#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lamperti/errors.hpp"
#include "lamperti/levy_model.hpp"
#include "lamperti/rate_function.hpp"
#include "lamperti/scale_functions.hpp"
#include "lamperti/simulate.hpp"

namespace lamperti::io {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Strict schema access: every key must be consumed, unknown keys are rejected
// with the JSON field path (CLI exit code 2).
// ---------------------------------------------------------------------------

class ObjectView {
public:
    ObjectView(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw schema_error(path_, "expected an object");
    }

    const std::string& path() const { return path_; }
    bool has(const char* k) const { return j_.contains(k); }

    double req_num(const char* k) { return fetch(k, true, 0.0); }
    double opt_num(const char* k, double dflt) {
        return has(k) ? fetch(k, false, dflt) : (mark(k), dflt);
    }
    std::uint64_t req_u64(const char* k) {
        const json& v = at(k);
        if (!v.is_number_unsigned() && !v.is_number_integer())
            throw schema_error(key_path(k), "expected a non-negative integer");
        const auto i = v.get<std::int64_t>();
        if (i < 0) throw schema_error(key_path(k), "expected a non-negative integer");
        return static_cast<std::uint64_t>(i);
    }
    std::uint64_t opt_u64(const char* k, std::uint64_t dflt) {
        if (!has(k)) {
            mark(k);
            return dflt;
        }
        return req_u64(k);
    }
    bool opt_bool(const char* k, bool dflt) {
        if (!has(k)) {
            mark(k);
            return dflt;
        }
        const json& v = at(k);
        if (!v.is_boolean()) throw schema_error(key_path(k), "expected a boolean");
        return v.get<bool>();
    }
    std::string req_str(const char* k) {
        const json& v = at(k);
        if (!v.is_string()) throw schema_error(key_path(k), "expected a string");
        return v.get<std::string>();
    }
    std::string opt_str(const char* k, std::string dflt) {
        if (!has(k)) {
            mark(k);
            return dflt;
        }
        return req_str(k);
    }
    std::vector<double> req_num_array(const char* k) {
        const json& v = at(k);
        if (!v.is_array() || v.empty())
            throw schema_error(key_path(k), "expected a non-empty array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw schema_error(key_path(k), "expected numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }
    std::optional<std::vector<double>> opt_num_array(const char* k) {
        if (!has(k)) {
            mark(k);
            return std::nullopt;
        }
        return req_num_array(k);
    }
    ObjectView req_obj(const char* k) {
        const json& v = at(k);
        return ObjectView(v, key_path(k));
    }
    std::optional<ObjectView> opt_obj(const char* k) {
        if (!has(k)) {
            mark(k);
            return std::nullopt;
        }
        return req_obj(k);
    }
    const json& raw(const char* k) { return at(k); }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw schema_error(path_ + "." + it.key(), "unknown field");
    }

private:
    std::string key_path(const char* k) const { return path_ + "." + k; }
    void mark(const char* k) { seen_.insert(k); }
    const json& at(const char* k) {
        if (!has(k)) throw schema_error(key_path(k), "missing required field");
        mark(k);
        return j_.at(k);
    }
    double fetch(const char* k, bool required, double dflt) {
        if (!has(k)) {
            if (required) throw schema_error(key_path(k), "missing required field");
            return dflt;
        }
        const json& v = at(k);
        if (!v.is_number()) throw schema_error(key_path(k), "expected a number");
        return v.get<double>();
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

// ---------------------------------------------------------------------------
// Parsers for the documented specs
// ---------------------------------------------------------------------------

inline JumpMeasure parse_jumps(ObjectView v) {
    const std::string type = v.req_str("type");
    if (type == "none") {
        v.finish();
        return JumpMeasure(NoJumps{});
    }
    if (type == "compound-poisson") {
        const double rate = v.req_num("rate");
        ObjectView d = v.req_obj("density");
        const std::string dt = d.req_str("type");
        JumpDensity density = ExponentialDensity{1.0};
        if (dt == "exponential") {
            density = ExponentialDensity{d.req_num("rate")};
        } else if (dt == "uniform") {
            density = UniformDensity{d.req_num("a"), d.req_num("b")};
        } else {
            throw schema_error(d.path() + ".type", "unknown density type '" + dt + "'");
        }
        d.finish();
        v.finish();
        return JumpMeasure(CompoundPoissonJumps{rate, density});
    }
    if (type == "power-tail") {
        PowerTailJumps pt{v.req_num("coefficient"), v.req_num("exponent"),
                          v.req_num("truncation")};
        v.finish();
        return JumpMeasure(pt);
    }
    throw schema_error(v.path() + ".type", "unknown jump type '" + type + "'");
}

inline LevyModel parse_model(ObjectView v) {
    const double sigma2 = v.req_num("sigma2");
    const double mu = v.req_num("mu");
    JumpMeasure jumps;
    if (auto jv = v.opt_obj("jumps")) jumps = parse_jumps(*jv);
    v.finish();
    return LevyModel(sigma2, mu, std::move(jumps));
}

inline RateFunction parse_rate(ObjectView v) {
    const std::string type = v.req_str("type");
    if (type == "power") {
        PowerRate p{v.req_num("c"), v.req_num("theta"), v.opt_num("scale", 1.0)};
        v.finish();
        return RateFunction(p);
    }
    if (type == "exponential") {
        ExponentialRate e{v.req_num("lambda"), v.opt_num("scale", 1.0)};
        v.finish();
        return RateFunction(e);
    }
    if (type == "tabulated") {
        TabulatedRate t;
        t.x = v.req_num_array("x");
        t.r = v.req_num_array("r");
        if (v.has("theta0")) t.theta0 = v.req_num("theta0");
        if (v.has("theta_inf")) t.theta_inf = v.req_num("theta_inf");
        v.finish();
        return RateFunction(std::move(t));
    }
    throw schema_error(v.path() + ".type", "unknown rate type '" + type + "'");
}

inline GridSpec parse_grid(ObjectView v) {
    GridSpec g;
    const std::string kind = v.opt_str("kind", "geometric");
    if (kind == "uniform")
        g.kind = GridSpec::Kind::uniform;
    else if (kind == "geometric")
        g.kind = GridSpec::Kind::geometric;
    else
        throw schema_error(v.path() + ".kind", "expected 'uniform' or 'geometric'");
    g.lo = v.opt_num("lo", 1e-3);
    g.hi = v.opt_num("hi", 50.0);
    g.n = static_cast<int>(v.opt_u64("n", 400));
    v.finish();
    return g;
}

inline SimConfig parse_sim(ObjectView v, std::uint64_t seed) {
    SimConfig c;
    c.dt = v.req_num("dt");
    c.epsilon = v.opt_num("epsilon", 0.0);
    c.x_stop = v.opt_num("x_stop", 0.0);
    c.c_floor = v.opt_num("c_floor", 1e-3);
    c.t_max = v.opt_num("t_max", 1e4);
    c.replicates = v.opt_u64("replicates", 2);
    c.bridge_correction = v.opt_bool("bridge_correction", true);
    c.stop_tail_rel = v.opt_num("stop_tail_rel", 1e-4);
    c.seed = seed;
    v.finish();
    return c;
}

// ---------------------------------------------------------------------------
// Deterministic artifact output: %.12g numbers, temp-file + rename, FNV-1a
// content hashes in a manifest.
// ---------------------------------------------------------------------------

inline std::string fmt12(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const { return dir_; }

    void write(const std::string& name, const std::string& bytes) {
        const auto final_path = dir_ / name;
        const auto tmp_path = dir_ / (name + ".tmp");
        {
            std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
            if (!out) throw numeric_error("cannot open " + tmp_path.string());
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        }
        std::filesystem::rename(tmp_path, final_path);
        json entry;
        entry["path"] = name;
        entry["bytes"] = bytes.size();
        entry["fnv1a64"] = hex64(fnv1a64(bytes));
        outputs_.push_back(entry);
    }

    // Manifest is written even on failure; no timestamps, so a rerun with the
    // same config and seed is byte-identical.
    void finalize(const std::string& kind, const std::string& status, int exit_code,
                  const std::string& error, std::optional<std::uint64_t> seed) {
        json m;
        m["kind"] = kind;
        m["status"] = status;
        if (exit_code != 0) m["exit_code"] = exit_code;
        if (!error.empty()) m["error"] = error;
        if (seed) m["seed"] = *seed;
        m["outputs"] = json::array();
        for (const auto& e : outputs_) m["outputs"].push_back(e);
        const auto final_path = dir_ / "manifest.json";
        const auto tmp_path = dir_ / "manifest.json.tmp";
        {
            std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
            out << m.dump(2) << "\n";
        }
        std::filesystem::rename(tmp_path, final_path);
    }

private:
    std::filesystem::path dir_;
    std::vector<json> outputs_;
};

class CsvBuilder {
public:
    explicit CsvBuilder(std::vector<std::string> header) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) body_ += ',';
            body_ += header[i];
        }
        body_ += '\n';
    }
    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) body_ += ',';
            body_ += fmt12(values[i]);
        }
        body_ += '\n';
    }
    void raw_row(const std::vector<std::string>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) body_ += ',';
            body_ += values[i];
        }
        body_ += '\n';
    }
    const std::string& str() const { return body_; }

private:
    std::string body_;
};

}  // namespace lamperti::io
