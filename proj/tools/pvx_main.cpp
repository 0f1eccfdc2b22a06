// Batch front end: run / sweep / verify subcommands over scenario files.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pvx/scenario.hpp"

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream out(path);
    if (!out) throw pvx::ConfigError("output", "cannot write '" + path.string() + "'");
    out << contents;
}

void emit_error(const std::string& kind, const std::string& message, const std::string& field) {
    pvx::json err;
    err["error"] = {{"kind", kind}, {"message", message}};
    if (!field.empty()) err["error"]["field"] = field;
    std::cerr << err.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"point vortex dynamics on surfaces: simulate and verify"};
    app.require_subcommand(1);

    std::string scenario_file, out_dir = ".", mode = "green";
    int workers = 1;
    bool perturbed = false;
    double tol_override = -1.0;

    CLI::App* run = app.add_subcommand("run", "integrate a scenario; write trajectory CSV and "
                                              "diagnostics JSON");
    run->add_option("scenario", scenario_file, "scenario JSON file")->required();
    run->add_option("--out-dir", out_dir, "output directory");

    CLI::App* sweep = app.add_subcommand("sweep", "run the scenario's parameter grid; write a "
                                                  "summary CSV");
    sweep->add_option("scenario", scenario_file, "scenario JSON file")->required();
    sweep->add_option("--out-dir", out_dir, "output directory");
    sweep->add_option("--workers", workers, "worker thread count")->check(CLI::PositiveNumber);

    CLI::App* verify = app.add_subcommand("verify", "numerical verification reports");
    verify->add_option("scenario", scenario_file, "scenario JSON file")->required();
    verify->add_option("--mode", mode, "green | chi | lemma | weak")->required();
    verify->add_flag("--perturbed", perturbed,
                     "weak mode: verify a velocity-perturbed flow (expected to fail)");
    verify->add_option("--out-dir", out_dir, "output directory");
    verify->add_option("--tolerance", tol_override, "override the tolerance of the chosen mode");

    CLI11_PARSE(app, argc, argv);

    try {
        pvx::Scenario sc = pvx::load_scenario(scenario_file);
        fs::create_directories(out_dir);
        fs::path base = fs::path(out_dir) / sc.prefix;

        if (run->parsed()) {
            pvx::RunArtifacts art = pvx::run_scenario(sc);
            fs::path csv = base.string() + "_trajectory.csv";
            fs::path diag = base.string() + "_diagnostics.json";
            write_file(csv, art.csv);
            write_file(diag, art.diagnostics.dump(2) + "\n");
            std::cout << csv.string() << "\n" << diag.string() << "\n";
            return 0;
        }

        if (sweep->parsed()) {
            pvx::SweepArtifacts art = pvx::sweep_scenario(sc, workers);
            fs::path csv = base.string() + "_summary.csv";
            write_file(csv, art.csv);
            std::cout << csv.string() << "\n";
            return 0;
        }

        // verify
        if (tol_override > 0.0) {
            if (mode == "green") sc.verify.tol_green = tol_override;
            if (mode == "chi") sc.verify.tol_chi = tol_override;
            if (mode == "lemma") sc.verify.tol_lemma = tol_override;
            if (mode == "weak") sc.verify.tol_weak = tol_override;
        }
        pvx::VerifyReport rep = pvx::verify_scenario(sc, mode, perturbed);
        fs::path report = base.string() + "_verify_" + rep.mode + ".json";
        write_file(report, rep.to_json().dump(2) + "\n");
        std::cout << report.string() << "\n";
        for (const auto& c : rep.checks)
            std::printf("%-32s %s  residual=%.3e  tol=%.1e\n", c.name.c_str(),
                        c.pass ? "pass" : "FAIL", c.residual, c.tolerance);
        return rep.pass ? 0 : 2;
    } catch (const pvx::ConfigError& e) {
        emit_error("config", e.what(), e.field);
        return 1;
    } catch (const pvx::IntegrationError& e) {
        emit_error("integration", e.what(), "");
        return 1;
    } catch (const std::exception& e) {
        emit_error("internal", e.what(), "");
        return 1;
    }
}
