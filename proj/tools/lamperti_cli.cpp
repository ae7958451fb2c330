// lamperti CLI: parse an experiment config, dispatch the computation, emit
// deterministic CSV/JSON artifacts plus a manifest with content hashes.
//
// Exit codes: 0 ok, 2 schema violation, 3 failed precondition (named),
// 4 numeric/model failure.

#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "lamperti/explosion.hpp"
#include "lamperti/io.hpp"
#include "lamperti/omega_scale.hpp"

namespace {

using lamperti::io::CsvBuilder;
using lamperti::io::fmt12;
using lamperti::io::ObjectView;
using nlohmann::json;

int thread_count(std::optional<int> cli_threads, std::uint64_t cfg_threads) {
    if (cli_threads && *cli_threads > 0) return *cli_threads;
    if (cfg_threads > 0) return static_cast<int>(cfg_threads);
    if (const char* env = std::getenv("LAMPERTI_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

lamperti::ScaleMethod parse_method(const std::string& m, const std::string& path) {
    if (m == "auto") return lamperti::ScaleMethod::automatic;
    if (m == "closed-form") return lamperti::ScaleMethod::closed_form;
    if (m == "inversion") return lamperti::ScaleMethod::inversion;
    throw lamperti::schema_error(path, "expected 'auto', 'closed-form' or 'inversion'");
}

void run_scale(ObjectView& cfg, lamperti::io::ArtifactWriter& out) {
    const lamperti::LevyModel model = lamperti::io::parse_model(cfg.req_obj("model"));
    const double q = cfg.opt_num("q", 0.0);
    lamperti::GridSpec grid;
    if (auto gv = cfg.opt_obj("grid")) grid = lamperti::io::parse_grid(*gv);
    lamperti::ScaleOptions opt;
    opt.method = parse_method(cfg.opt_str("method", "auto"), "config.method");
    opt.euler_m = static_cast<int>(cfg.opt_u64("euler_m", 32));
    const auto s_check = cfg.opt_num_array("s_check");
    cfg.finish();

    const lamperti::ScaleTable table = lamperti::compute_scale(model, q, grid, opt);
    CsvBuilder csv({"x", "W", "W_p", "error_estimate"});
    for (std::size_t i = 0; i < table.x.size(); ++i)
        csv.row({table.x[i], table.w[i], table.w_tilted[i], table.err[i]});
    out.write("scale.csv", csv.str());

    json summary;
    summary["q"] = q;
    summary["p"] = model.p();
    summary["phi_q"] = model.phi(q);
    summary["gamma"] = std::isfinite(model.gamma()) ? json(model.gamma()) : json("inf");
    summary["w0"] = table.fn->w0();
    summary["tilted_limit"] = table.fn->tilted_limit();
    summary["method"] = table.fn->closed_form() ? "closed-form" : "inversion";
    summary["max_node_error"] = table.fn->max_node_error();
    if (s_check) {
        json arr = json::array();
        for (double s : *s_check) {
            const auto rt = lamperti::scale_laplace_roundtrip(*table.fn, s);
            arr.push_back({{"s", s}, {"rel_err", rt.rel_err}});
        }
        summary["roundtrip"] = arr;
    }
    out.write("summary.json", summary.dump(2) + "\n");
}

void run_omega(ObjectView& cfg, lamperti::io::ArtifactWriter& out) {
    const lamperti::LevyModel model = lamperti::io::parse_model(cfg.req_obj("model"));
    const lamperti::RateFunction rate = lamperti::io::parse_rate(cfg.req_obj("rate"));
    lamperti::OmegaGrid og;
    if (auto gv = cfg.opt_obj("omega_grid")) {
        og.y_lo = gv->opt_num("y_lo", 0.0);
        og.x_max = gv->opt_num("x_max", 10.0);
        og.n = static_cast<int>(gv->opt_u64("n", 401));
        gv->finish();
    }
    const bool with_h = cfg.opt_bool("with_h", true);
    const double h_tol = cfg.opt_num("h_tail_tol", 1e-6);
    const auto stride = cfg.opt_u64("stride", 1);
    cfg.finish();

    lamperti::GridSpec gs;
    gs.kind = lamperti::GridSpec::Kind::uniform;
    gs.lo = og.x_max / 64.0;
    gs.hi = og.x_max;
    gs.n = 65;
    lamperti::ScaleOptions so;
    so.cache_hi = og.x_max + 1.0;
    const lamperti::ScaleTable w0 = lamperti::compute_scale(model, 0.0, gs, so);
    lamperti::OmegaScaleTable table = lamperti::solve_w_omega(w0, rate, og);

    json summary;
    summary["x_max"] = og.x_max;
    summary["n"] = og.n;
    if (with_h) {
        try {
            lamperti::HOptions ho;
            ho.tail_tol = h_tol;
            lamperti::attach_h_omega(table, rate, ho);
            summary["h_tail_bound"] = table.h_tail_bound();
        } catch (const lamperti::precondition_error& e) {
            summary["h_omega_unavailable"] = std::string(e.condition()) + ": " + e.what();
        }
    }
    const auto& grid = table.grid();
    CsvBuilder csv({"x", "y", "W_omega"});
    for (std::size_t i = 0; i < grid.size(); i += stride)
        for (std::size_t j = 0; j <= i; j += stride)
            csv.row({grid[i], grid[j], table.at(i, j)});
    out.write("w_omega.csv", csv.str());
    if (table.has_h()) {
        CsvBuilder hcsv({"y", "H_omega"});
        for (std::size_t j = 0; j < grid.size(); j += stride)
            hcsv.row({grid[j], table.h_nodes()[j]});
        out.write("h_omega.csv", hcsv.str());
    }
    out.write("summary.json", summary.dump(2) + "\n");
}

void run_moments(ObjectView& cfg, lamperti::io::ArtifactWriter& out) {
    const lamperti::LevyModel model = lamperti::io::parse_model(cfg.req_obj("model"));
    const lamperti::RateFunction rate = lamperti::io::parse_rate(cfg.req_obj("rate"));
    const int n_max = static_cast<int>(cfg.req_u64("n_max"));
    lamperti::MomentOptions opt;
    opt.x_max = cfg.opt_num("x_max", 60.0);
    opt.n_nodes = static_cast<int>(cfg.opt_u64("n_nodes", 1501));
    cfg.finish();

    const auto tables = lamperti::moment_recursion(model, rate, n_max, opt);
    std::vector<std::string> header{"x"};
    for (int n = 0; n <= n_max; ++n) header.push_back("m" + std::to_string(n));
    CsvBuilder csv(header);
    for (std::size_t i = 0; i < tables[0].x.size(); ++i) {
        std::vector<double> row{tables[0].x[i]};
        for (const auto& t : tables) row.push_back(t.m[i]);
        csv.row(row);
    }
    out.write("moments.csv", csv.str());
    json summary;
    summary["n_max"] = n_max;
    json bounds = json::array();
    for (const auto& t : tables) bounds.push_back(t.tail_bound);
    summary["tail_bounds"] = bounds;
    out.write("summary.json", summary.dump(2) + "\n");
}

void run_classify(ObjectView& cfg, lamperti::io::ArtifactWriter& out) {
    const lamperti::LevyModel model = lamperti::io::parse_model(cfg.req_obj("model"));
    const lamperti::RateFunction rate = lamperti::io::parse_rate(cfg.req_obj("rate"));
    cfg.finish();
    const auto cls = lamperti::classify_boundaries(model, rate);
    const auto cond = lamperti::check_h0_h1_h2(model, rate);
    json j;
    j["extinction"] = lamperti::to_string(cls.extinction);
    j["explosion"] = lamperti::to_string(cls.explosion);
    j["basis"] = cls.basis;
    j["h0"] = lamperti::to_string(cond.h0);
    j["h1"] = lamperti::to_string(cond.h1);
    if (cond.lambda) {
        j["lambda"] = *cond.lambda;
        j["lambda_exact"] = cond.lambda_exact;
        j["lambda_spread"] = cond.lambda_spread;
    } else {
        j["lambda"] = "inconclusive";
    }
    out.write("classify.json", j.dump(2) + "\n");
}

json report_to_json(const lamperti::MonteCarloReport& r) {
    json j;
    j["estimator"] = r.estimator;
    j["n_paths"] = r.n_paths;
    j["n_used"] = r.n_used;
    j["empty"] = r.empty;
    if (!r.empty) {
        j["mean"] = r.mean;
        j["variance"] = r.variance;
        j["ci95_half"] = r.ci95_half;
    }
    j["conditioning"] = r.conditioning;
    j["conditioning_prob"] = r.conditioning_prob;
    j["conditioning_bias_bound"] = r.conditioning_bias_bound;
    j["seed"] = r.seed;
    j["seed_provenance"] = r.seed_provenance;
    return j;
}

void run_simulate(ObjectView& cfg, lamperti::io::ArtifactWriter& out, std::uint64_t seed,
                  int threads) {
    const lamperti::LevyModel model = lamperti::io::parse_model(cfg.req_obj("model"));
    const lamperti::RateFunction rate = lamperti::io::parse_rate(cfg.req_obj("rate"));
    const lamperti::SimConfig sim = lamperti::io::parse_sim(cfg.req_obj("sim"), seed);
    const double start = cfg.req_num("start");
    std::vector<lamperti::EstimatorSpec> specs;
    {
        const json& arr = cfg.raw("estimators");
        if (!arr.is_array() || arr.empty())
            throw lamperti::schema_error("config.estimators", "expected a non-empty array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            ObjectView ev(arr[i], "config.estimators[" + std::to_string(i) + "]");
            lamperti::EstimatorSpec s;
            s.name = ev.req_str("name");
            const std::string kind = ev.req_str("kind");
            if (kind == "hit_floor_prob")
                s.kind = lamperti::EstimatorKind::hit_floor_prob;
            else if (kind == "weighted_exit")
                s.kind = lamperti::EstimatorKind::weighted_exit;
            else if (kind == "explosion_prob")
                s.kind = lamperti::EstimatorKind::explosion_prob;
            else if (kind == "eta_restricted_mean")
                s.kind = lamperti::EstimatorKind::eta_restricted_mean;
            else
                throw lamperti::schema_error(ev.path() + ".kind",
                                             "unknown estimator kind '" + kind + "'");
            s.condition_on_explosion = ev.opt_bool("condition_on_explosion", false);
            ev.finish();
            specs.push_back(std::move(s));
        }
    }
    const auto log_paths = cfg.opt_u64("log_paths", 0);
    std::vector<double> record_levels;
    if (auto lv = cfg.opt_num_array("record_levels")) record_levels = *lv;
    cfg.finish();

    std::optional<lamperti::PhiFunction> phi;
    try {
        phi.emplace(rate, model.gamma());
    } catch (const std::exception&) {
        phi.reset();  // estimators that need phi will say so
    }
    lamperti::PathCounts counts;
    const auto reports =
        lamperti::monte_carlo(model, rate, sim, start, specs, phi, threads, &counts);
    json j;
    j["estimators"] = json::array();
    for (const auto& r : reports) j["estimators"].push_back(report_to_json(r));
    j["path_counts"] = {{"floor", counts.floor},
                        {"reached_stop", counts.stop},
                        {"censored", counts.censored}};
    out.write("report.json", j.dump(2) + "\n");

    if (log_paths > 0) {
        lamperti::PathEngine eng(model, rate, sim, phi);
        CsvBuilder csv({"path", "t", "xi", "eta"});
        CsvBuilder events({"path", "level", "time", "xi", "overshoot", "eta"});
        for (std::uint64_t pid = 0; pid < log_paths; ++pid) {
            const auto res = eng.run(start, lamperti::rng::Stream(sim.seed, pid),
                                     record_levels, [&](double t, double xi, double eta) {
                                         csv.row({static_cast<double>(pid), t, xi, eta});
                                     });
            for (const auto& h : res.hits)
                if (h.hit)
                    events.row({static_cast<double>(pid), h.level, h.t, h.xi,
                                h.xi - h.level, h.eta});
        }
        out.write("paths.csv", csv.str());
        if (!record_levels.empty()) out.write("events.csv", events.str());
    }
}

void run_thm1(ObjectView& cfg, lamperti::io::ArtifactWriter& out, std::uint64_t seed,
              int threads) {
    const lamperti::LevyModel model = lamperti::io::parse_model(cfg.req_obj("model"));
    const lamperti::RateFunction rate = lamperti::io::parse_rate(cfg.req_obj("rate"));
    const lamperti::SimConfig sim = lamperti::io::parse_sim(cfg.req_obj("sim"), seed);
    const double start = cfg.req_num("start");
    const auto levels = cfg.req_num_array("levels");
    lamperti::VerifyOptions vopt;
    vopt.n_accept = cfg.req_u64("n_accept");
    vopt.threads = threads;
    cfg.finish();

    const auto res = lamperti::verify_thm1(model, rate, levels, sim, start, vopt);
    CsvBuilder csv({"level", "n", "mean_ratio", "ci95_mean", "sd_ratio", "p_outside_025",
                    "ks_reference", "mean_phi_ratio", "ks_phi_reference",
                    "ks_prod_reference"});
    for (const auto& r : res.rows) {
        const double ci = r.n > 0 ? 1.959963984540054 * r.sd_ratio /
                                        std::sqrt(static_cast<double>(r.n))
                                  : 0.0;
        csv.row({r.level, static_cast<double>(r.n), r.mean_ratio, ci, r.sd_ratio,
                 r.p_outside_025, r.ks_reference, r.mean_phi_ratio, r.ks_phi_reference,
                 r.ks_prod_reference});
    }
    out.write("thm1.csv", csv.str());
    json j;
    j["regime"] = std::string(1, res.regime);
    j["empty"] = res.empty;
    j["total_paths"] = res.total_paths;
    j["accepted"] = res.accepted;
    j["acceptance_rate"] = res.acceptance_rate;
    j["conditioning_bias_bound"] = res.conditioning_bias_bound;
    bool decreasing = true;
    for (std::size_t i = 1; i < res.rows.size(); ++i)
        decreasing = decreasing && res.rows[i].p_outside_025 < res.rows[i - 1].p_outside_025;
    j["p_outside_decreasing"] = decreasing && !res.rows.empty();
    out.write("summary.json", j.dump(2) + "\n");
}

void run_thm2(ObjectView& cfg, lamperti::io::ArtifactWriter& out, std::uint64_t seed,
              int threads) {
    const lamperti::LevyModel model = lamperti::io::parse_model(cfg.req_obj("model"));
    const lamperti::RateFunction rate = lamperti::io::parse_rate(cfg.req_obj("rate"));
    const lamperti::SimConfig sim = lamperti::io::parse_sim(cfg.req_obj("sim"), seed);
    const double start = cfg.req_num("start");
    const auto t_grid = cfg.req_num_array("t_grid");
    lamperti::VerifyOptions vopt;
    vopt.n_accept = cfg.req_u64("n_accept");
    vopt.threads = threads;
    cfg.finish();

    const auto res = lamperti::verify_thm2(model, rate, t_grid, sim, start, vopt);
    CsvBuilder csv({"t", "n", "excluded", "median_ratio", "q25", "q75", "median_inf_ratio"});
    for (const auto& r : res.rows)
        csv.row({r.t, static_cast<double>(r.n), static_cast<double>(r.excluded),
                 r.median_ratio, r.q25, r.q75, r.median_inf_ratio});
    out.write("thm2.csv", csv.str());
    json j;
    j["regime"] = std::string(1, res.regime);
    j["empty"] = res.empty;
    j["total_paths"] = res.total_paths;
    j["accepted"] = res.accepted;
    out.write("summary.json", j.dump(2) + "\n");
}

void run_prop46(ObjectView& cfg, lamperti::io::ArtifactWriter& out) {
    const lamperti::LevyModel model = lamperti::io::parse_model(cfg.req_obj("model"));
    const lamperti::RateFunction rate = lamperti::io::parse_rate(cfg.req_obj("rate"));
    const double alpha = cfg.req_num("alpha");
    std::vector<double> xs;
    if (auto a = cfg.opt_num_array("x_values")) xs = *a;
    cfg.finish();
    const double gamma = model.gamma();
    if (!std::isfinite(gamma) || !(gamma > 0))
        throw lamperti::precondition_error("gamma", "prop46 needs gamma in (0, inf)");
    const auto rows = lamperti::prop46_checks(rate, gamma, alpha, xs);
    CsvBuilder csv({"case", "x", "ratio"});
    for (const auto& r : rows) csv.raw_row({r.which, fmt12(r.x), fmt12(r.ratio)});
    out.write("prop46.csv", csv.str());
}

int run_command(const std::string& config_path, const std::string& out_override,
                std::optional<std::uint64_t> seed_override, std::optional<int> threads_cli) {
    json root;
    {
        std::ifstream in(config_path);
        if (!in) {
            std::cerr << "error: cannot read config " << config_path << "\n";
            return 2;
        }
        try {
            in >> root;
        } catch (const std::exception& e) {
            std::cerr << "error: config is not valid JSON: " << e.what() << "\n";
            return 2;
        }
    }

    std::string kind;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    int code = 0;
    std::string error;
    std::optional<lamperti::io::ArtifactWriter> writer;
    try {
        ObjectView cfg(root, "config");
        kind = cfg.req_str("kind");
        out_dir = cfg.opt_str("out", "out");
        if (!out_override.empty()) out_dir = out_override;
        const auto threads_cfg = cfg.opt_u64("threads", 0);
        const int threads = thread_count(threads_cli, threads_cfg);
        if (cfg.has("seed")) seed = cfg.req_u64("seed");
        if (seed_override) seed = seed_override;
        const bool stochastic =
            kind == "simulate" || kind == "verify-thm1" || kind == "verify-thm2";
        if (stochastic && !seed)
            throw lamperti::schema_error("config.seed",
                                         "seed is mandatory for stochastic kinds");
        writer.emplace(out_dir);
        if (kind == "scale")
            run_scale(cfg, *writer);
        else if (kind == "omega")
            run_omega(cfg, *writer);
        else if (kind == "moments")
            run_moments(cfg, *writer);
        else if (kind == "classify")
            run_classify(cfg, *writer);
        else if (kind == "simulate")
            run_simulate(cfg, *writer, *seed, threads);
        else if (kind == "verify-thm1")
            run_thm1(cfg, *writer, *seed, threads);
        else if (kind == "verify-thm2")
            run_thm2(cfg, *writer, *seed, threads);
        else if (kind == "prop46")
            run_prop46(cfg, *writer);
        else
            throw lamperti::schema_error("config.kind", "unknown kind '" + kind + "'");
    } catch (const lamperti::schema_error& e) {
        code = 2;
        error = std::string("schema: ") + e.what();
    } catch (const lamperti::precondition_error& e) {
        code = 3;
        error = "precondition [" + e.condition() + "]: " + e.what();
    } catch (const std::exception& e) {
        code = 4;
        error = std::string("numeric: ") + e.what();
    }
    if (!writer) {
        try {
            writer.emplace(out_dir);
        } catch (const std::exception&) {
            std::cerr << "error: " << error << "\n";
            return code == 0 ? 4 : code;
        }
    }
    writer->finalize(kind.empty() ? "unknown" : kind, code == 0 ? "ok" : "error", code, error,
                     seed);
    if (code != 0) std::cerr << "error: " << error << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fluctuation theory and explosion experiments for Lamperti time-changed "
                 "spectrally positive Levy processes"};
    app.require_subcommand(1);
    auto* run = app.add_subcommand("run", "run one experiment config");
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--out", out_dir, "output directory (overrides config)");
    run->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
        seed_set = true;
    });
    run->add_option("--threads", threads, "worker threads (default: LAMPERTI_THREADS or cores)");
    CLI11_PARSE(app, argc, argv);
    return run_command(config_path, out_dir,
                       seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt,
                       threads > 0 ? std::optional<int>(threads) : std::nullopt);
}
