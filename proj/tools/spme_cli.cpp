// Command-line entry point: solve, mc, contraction, convergence, validate, barenblatt.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spme/analysis.hpp"
#include "spme/barenblatt.hpp"
#include "spme/brownian.hpp"
#include "spme/config.hpp"
#include "spme/extinction.hpp"
#include "spme/pme_solver.hpp"
#include "spme/report.hpp"
#include "spme/validation.hpp"

namespace fs = std::filesystem;
using namespace spme;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit : int { ok = 0, config_error = 2, numerical_error = 3, acceptance_error = 4 };

std::string utc_now(const char* format) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[64];
    std::strftime(buf, sizeof buf, format, &tm);
    return buf;
}

std::string file_digest(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    const auto s = os.str();
    return io::hex(io::Fnv1a{}.str(s).digest());
}

/// Run directory with a manifest written before any data file.
class Run {
public:
    Run(std::string subcommand, Json config, std::uint64_t seed, const std::string& out)
        : subcommand_(std::move(subcommand)), config_(std::move(config)), seed_(seed) {
        const std::string digest = io::hex(io::Fnv1a{}.str(subcommand_ + config_.dump()).digest()).substr(0, 8);
        dir_ = out.empty() ? fs::path("runs") / (utc_now("%Y%m%dT%H%M%SZ") + "-" + digest) : fs::path(out);
        fs::create_directories(dir_);
        started_ = utc_now("%Y-%m-%dT%H:%M:%SZ");
        write_manifest("running");
    }

    fs::path path(const std::string& name) {
        files_.push_back(name);
        return dir_ / name;
    }

    void write_text(const std::string& name, const std::string& text) {
        std::ofstream os(path(name), std::ios::binary);
        os << text;
    }

    void write_json(const std::string& name, const Json& j) { write_text(name, j.dump(2) + "\n"); }

    void finish(const std::string& status) { write_manifest(status); }

    const fs::path& dir() const { return dir_; }

private:
    void write_manifest(const std::string& status) {
        Json files = Json::object();
        for (const auto& f : files_)
            if (fs::exists(dir_ / f)) files[f] = file_digest(dir_ / f);
        Json m = {{"subcommand", subcommand_},
                  {"status", status},
                  {"tool_version", kVersion},
                  {"master_seed", seed_},
                  {"started", started_},
                  {"finished", status == "running" ? Json(nullptr) : Json(utc_now("%Y-%m-%dT%H:%M:%SZ"))},
                  {"config", config_},
                  {"files", files}};
        std::ofstream os(dir_ / "manifest.json", std::ios::binary);
        os << m.dump(2) << "\n";
    }

    std::string subcommand_;
    Json config_;
    std::uint64_t seed_;
    fs::path dir_;
    std::string started_;
    std::vector<std::string> files_;
};

struct Options {
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
    int workers = 0;
    std::string suite;
};

/// Loads the config file (or a manifest of an earlier run), applies overrides
/// and resolves defaults.
Json load_document(const Options& o) {
    Json user = Json::object();
    if (!o.config.empty()) {
        user = load_json_file(o.config);
        if (user.is_object() && user.contains("config") && user.contains("subcommand")) user = user["config"];
    }
    for (const auto& s : o.overrides) apply_override(user, s);
    if (o.workers > 0) user["workers"] = o.workers;
    return resolve_document(user);
}

/// Resolved document without the worker count, which never affects results.
Json recorded(Json doc) {
    doc.erase("workers");
    return doc;
}

int cmd_solve(const Options& o) {
    const Json doc = load_document(o);
    const RunConfig c = parse_config(doc);
    Run run("solve", recorded(doc), c.seed, o.out);
    const auto seed = derive_seed(c.seed, 0);
    const double horizon = std::max(c.solver.t_end, 2.0 * c.path_step());
    const auto path = std::make_shared<const BrownianPath>(sample_path(horizon, c.path_step(), seed));
    const auto mpath = mollify(path, c.solver.epsilon, Mollifier(c.quadrature_nodes));
    const auto u0 = initial_density(c.initial, c.solver.grid);
    const auto trace = solve(c.solver, mpath, u0, c.snapshot_dt);
    {
        std::ofstream os(run.path("snapshots.csv"), std::ios::binary);
        write_snapshots_csv(os, trace);
    }
    {
        std::ofstream os(run.path("frames.bin"), std::ios::binary);
        write_frames_binary(os, trace.snapshots);
    }
    {
        std::ofstream os(run.path("path.csv"), std::ios::binary);
        write_path_csv(os, *path, mpath);
    }
    {
        std::ofstream os(run.path("diagnostics.csv"), std::ios::binary);
        write_diagnostics_csv(os, trace);
    }
    const auto ext = detect_extinction(trace);
    run.write_json("diagnostics.json", {{"seed", seed},
                                        {"path_digest", io::hex(path->digest())},
                                        {"steps", trace.steps.size()},
                                        {"snapshots", trace.snapshots.size()},
                                        {"extinction_time", num(ext)},
                                        {"summary", to_json(diagnostics_report(trace))}});
    run.finish("complete");
    std::cout << run.dir().string() << "\n";
    return ok;
}

int cmd_mc(const Options& o, std::size_t paths_flag) {
    Options opt = o;
    if (paths_flag > 0) opt.overrides.push_back("mc.paths=" + std::to_string(paths_flag));
    const Json doc = load_document(opt);
    const RunConfig c = parse_config(doc);
    Run run("mc", recorded(doc), c.seed, o.out);
    const auto res = mc_extinction(c.mc());
    {
        std::ofstream os(run.path("summary.csv"), std::ios::binary);
        write_summary_csv(os, res.summary);
    }
    {
        std::ofstream os(run.path("records.csv"), std::ios::binary);
        write_records_csv(os, res.records);
    }
    Json recs = Json::array();
    for (const auto& r : res.records) recs.push_back(to_json(r));
    run.write_json("summary.json", {{"summary", to_json(res.summary)}, {"records", recs}});
    run.finish("complete");
    std::cout << run.dir().string() << "\n";
    return ok;
}

int cmd_contraction(const Options& o) {
    const Json doc = load_document(o);
    const RunConfig c = parse_config(doc);
    Run run("contraction", recorded(doc), c.seed, o.out);
    const auto rep = contraction_experiment(c.ladder_config(), c.contraction);
    {
        std::ofstream os(run.path("contraction.csv"), std::ios::binary);
        write_contraction_csv(os, rep);
    }
    run.write_json("contraction.json", to_json(rep));
    run.finish("complete");
    std::cout << run.dir().string() << "\n";
    return ok;
}

int cmd_convergence(const Options& o) {
    const Json doc = load_document(o);
    const RunConfig c = parse_config(doc);
    Run run("convergence", recorded(doc), c.seed, o.out);
    const auto tab = wz_convergence(c.ladder_config(), c.tau);
    {
        std::ofstream os(run.path("cauchy.csv"), std::ios::binary);
        write_cauchy_csv(os, tab);
    }
    run.write_json("cauchy.json", to_json(tab));
    run.finish("complete");
    std::cout << run.dir().string() << "\n";
    return ok;
}

int cmd_validate(const Options& o) {
    const Json doc = load_document(o);
    const RunConfig c = parse_config(doc);
    Run run("validate", recorded(doc), c.seed, o.out);
    SuiteReport rep;
    if (o.suite == "barenblatt") rep = barenblatt_suite(c.check_barenblatt);
    else if (o.suite == "domination") rep = domination_suite(c.check_domination);
    else if (o.suite == "weakform") rep = weakform_suite(c.check_weakform);
    else if (o.suite == "convergence") rep = convergence_suite(c.check_convergence);
    else rep = contraction_suite(c.check_contraction);
    run.write_json("report.json", to_json(rep));
    run.write_json("timings.json", {{"seconds", rep.seconds}, {"checks", to_json(rep.timings)}});
    run.finish(rep.passed() ? "complete" : "failed");
    auto all = rep.assertions;
    all.insert(all.end(), rep.timings.begin(), rep.timings.end());
    for (const auto& a : all)
        std::cout << (a.passed ? "PASS " : "FAIL ") << a.name << " = " << io::fmt(a.measured) << " " << a.relation << " "
                  << io::fmt(a.threshold) << "\n";
    std::cout << run.dir().string() << "\n";
    return rep.passed() ? ok : acceptance_error;
}

int cmd_barenblatt(const Options& o) {
    const Json doc = load_document(o);
    const RunConfig c = parse_config(doc);
    Run run("barenblatt", recorded(doc), c.seed, o.out);
    const auto& t = c.barenblatt;
    const BarenblattProfile prof{c.solver.m, t.C, t.t0, t.center};
    prof.validate();
    {
        std::ofstream os(run.path("profile.csv"), std::ios::binary);
        os << "t,x,u,p\n";
        for (double time : t.times)
            for (std::size_t i = 0; i < t.points; ++i) {
                const double x = t.x_lo + (t.x_hi - t.x_lo) * static_cast<double>(i) / static_cast<double>(t.points - 1);
                os << io::fmt(time) << ',' << io::fmt(x) << ',' << io::fmt(eval_density(prof, x, time)) << ','
                   << io::fmt(eval_pressure(prof, x, time)) << '\n';
            }
    }
    const auto rate = support_rate_constant(prof);
    Json radii = Json::array();
    for (double time : t.times) radii.push_back({{"t", time}, {"radius", prof.radius(time)}});
    run.write_json("profile.json", {{"profile", to_json(prof)},
                                    {"radii", radii},
                                    {"M_bar", rate.M_bar},
                                    {"certificate_ok", rate.certificate_ok},
                                    {"worst_slack", rate.worst_slack}});
    run.finish("complete");
    std::cout << run.dir().string() << "\n";
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic porous medium equation lab"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Options o;
    std::size_t mc_paths = 0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config, "JSON config file or manifest.json of an earlier run");
        sub->add_option("-s,--set", o.overrides, "Override a dotted key, e.g. solver.grid.n=256");
        sub->add_option("-o,--out", o.out, "Output directory (default runs/<timestamp>-<digest>)");
        sub->add_option("-w,--workers", o.workers, "Worker threads (default SPME_WORKERS or hardware)")
            ->check(CLI::PositiveNumber);
    };
    auto* solve_cmd = app.add_subcommand("solve", "One pathwise solve");
    common(solve_cmd);
    auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo extinction study");
    common(mc_cmd);
    mc_cmd->add_option("-n,--paths", mc_paths, "Number of paths (overrides mc.paths)");
    auto* con_cmd = app.add_subcommand("contraction", "Contraction of shifted truncated densities");
    common(con_cmd);
    auto* conv_cmd = app.add_subcommand("convergence", "Wong-Zakai Cauchy table");
    common(conv_cmd);
    auto* val_cmd = app.add_subcommand("validate", "Run a validation suite");
    common(val_cmd);
    val_cmd->add_option("--suite", o.suite, "barenblatt, contraction, weakform, domination or convergence")->required();
    auto* bar_cmd = app.add_subcommand("barenblatt", "Tabulate a Barenblatt profile");
    common(bar_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config_error;
    }

    try {
        if (*solve_cmd) return cmd_solve(o);
        if (*mc_cmd) {
            if (mc_cmd->count("--paths") && mc_paths < 2) throw ConfigError("--paths: need at least 2");
            return cmd_mc(o, mc_paths);
        }
        if (*con_cmd) return cmd_contraction(o);
        if (*conv_cmd) return cmd_convergence(o);
        if (*val_cmd) {
            static const std::vector<std::string> suites{"barenblatt", "contraction", "weakform", "domination", "convergence"};
            if (std::find(suites.begin(), suites.end(), o.suite) == suites.end())
                throw ConfigError("--suite: unknown suite '" + o.suite + "'");
            return cmd_validate(o);
        }
        if (*bar_cmd) return cmd_barenblatt(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.is_configuration() ? config_error : numerical_error;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return numerical_error;
    }
    return ok;
}
