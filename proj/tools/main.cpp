// cranioforge command-line driver.
//   gen-data | fit-tdd | reconstruct | evaluate | ablate | export-schema | serve

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "cranioforge/commands.hpp"
#include "cranioforge/error.hpp"

namespace fs = std::filesystem;
using namespace cranioforge;

namespace {

// Accepts exactly what TissueMode::parse accepts; anything else is a usage error.
const CLI::Validator kModeValidator(
    [](std::string& text) -> std::string {
        try {
            TissueMode::parse(text);
        } catch (const std::exception& e) {
            return e.what();
        }
        return {};
    },
    "avg|thin|normal|fat|best|c=<value>", "tissue mode");

std::map<std::string, std::string> parse_attributes(const std::vector<std::string>& items) {
    std::map<std::string, std::string> out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--attribute", "expected key=value, got " + item);
        out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cranioforge: skull-to-face reconstruction with tissue-depth control"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version_stamp());

    fs::path data_root = default_data_root();
    std::uint64_t seed = 1;
    std::optional<fs::path> config;
    auto add_common = [&](CLI::App* sub, bool with_config) {
        sub->add_option("--data", data_root, "data root (default $CRANIOFORGE_DATA or ./data)");
        sub->add_option("--seed", seed, "run seed");
        if (with_config) sub->add_option("--config", config, "adaptation config JSON")->check(CLI::ExistingFile);
    };

    GenDataOptions gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic skull/face dataset");
    gen_cmd->add_option("--out", gen.out, "output data root");
    gen_cmd->add_option("--count", gen.count, "number of pairs");
    gen_cmd->add_option("--latent-size", gen.latent_size, "face model latent size")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--test-fraction", gen.test_fraction, "held-out fraction")->check(CLI::Range(0.0, 1.0));
    gen_cmd->add_option("--folds", gen.folds, "cross-validation folds")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--depth-spec", gen.depth_spec, "tissue-depth spec JSON")->check(CLI::ExistingFile);
    add_common(gen_cmd, false);

    FitTddOptions fit;
    auto* fit_cmd = app.add_subcommand("fit-tdd", "fit the global and regional tissue-depth models");
    fit_cmd->add_option("--out", fit.out, "output directory (default <data>/tdd)");
    fit_cmd->add_option("--split", fit.split, "train | all | fold:<i>");
    fit_cmd->add_option("--partition", fit.partition, "region partition JSON")->check(CLI::ExistingFile);
    add_common(fit_cmd, false);

    ReconstructOptions rec;
    std::vector<std::string> rec_attrs;
    bool rec_blind = false;
    auto* rec_cmd = app.add_subcommand("reconstruct", "reconstruct faces from skull landmarks");
    rec_cmd->add_option("--out", rec.out, "output directory")->required();
    rec_cmd->add_option("--skull", rec.skull, "skull landmark JSON")->check(CLI::ExistingFile);
    rec_cmd->add_option("--pair", rec.pair_ids, "dataset pair id (repeatable)");
    rec_cmd->add_option("--split", rec.split, "train | test | all | fold:<i>");
    rec_cmd->add_option("--limit", rec.limit, "at most this many pairs");
    rec_cmd->add_option("--mode", rec.mode, "tissue mode")->check(kModeValidator);
    rec_cmd->add_option("--attribute", rec_attrs, "attribute key=value (repeatable)");
    rec_cmd->add_option("--tdd", rec.tdd, "tissue-depth model directory");
    rec_cmd->add_flag("--no-ground-truth", rec_blind, "select best mode by loss, ignore known faces");
    add_common(rec_cmd, true);

    EvaluateOptions eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "k-fold cross-validated NME");
    eval_cmd->add_option("--out", eval.out, "output directory")->required();
    eval_cmd->add_option("--mode", eval.modes, "tissue modes (repeatable)")->check(kModeValidator);
    eval_cmd->add_option("--partition", eval.partition, "region partition JSON")->check(CLI::ExistingFile);
    add_common(eval_cmd, true);

    AblateOptions abl;
    auto* abl_cmd = app.add_subcommand("ablate", "loss-term ablation on the test split");
    abl_cmd->add_option("--out", abl.out, "output directory")->required();
    abl_cmd->add_option("--tdd", abl.tdd, "tissue-depth model directory");
    abl_cmd->add_option("--limit", abl.limit, "at most this many test pairs");
    add_common(abl_cmd, true);

    fs::path schema_out = "schema";
    auto* schema_cmd = app.add_subcommand("export-schema", "write schema and default configuration JSON");
    schema_cmd->add_option("--out", schema_out, "output directory");

    ServeOptions srv;
    auto* srv_cmd = app.add_subcommand("serve", "run the HTTP service");
    srv_cmd->add_option("--host", srv.host, "bind address");
    srv_cmd->add_option("--port", srv.port, "port")->check(CLI::Range(1, 65535));
    srv_cmd->add_option("--tdd", srv.tdd, "tissue-depth model directory");
    add_common(srv_cmd, true);

    try {
        app.parse(argc, argv);
        if (!rec_attrs.empty()) rec.attributes = parse_attributes(rec_attrs);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen_cmd) {
            if (gen.out.empty()) gen.out = data_root;
            gen.seed = seed;
            const auto pairs = cmd_gen_data(gen);
            std::cout << "wrote " << pairs.size() << " pairs to " << gen.out.string() << "\n";
        } else if (*fit_cmd) {
            fit.data = data_root;
            std::cout << cmd_fit_tdd(fit).text;
        } else if (*rec_cmd) {
            rec.data = data_root;
            rec.seed = seed;
            rec.config = config;
            rec.use_ground_truth = !rec_blind;
            for (const auto& s : cmd_reconstruct(rec)) {
                std::cout << s.id << " [" << s.mode << "] residual " << s.initial_residual << " -> "
                          << s.final_residual << " mm";
                if (s.nme) std::cout << ", NME " << 100.0 * *s.nme << "%";
                std::cout << "\n";
            }
        } else if (*eval_cmd) {
            eval.data = data_root;
            eval.seed = seed;
            eval.config = config;
            cmd_evaluate(eval);
        } else if (*abl_cmd) {
            abl.data = data_root;
            abl.seed = seed;
            abl.config = config;
            const auto report = cmd_ablate(abl);
            std::cout << report.table << "\n";
            for (const auto& line : report.ordering.lines) std::cout << line << "\n";
            std::cout << "ordering " << (report.ordering.passed ? "PASS" : "FAIL") << "\n";
        } else if (*schema_cmd) {
            cmd_export_schema(schema_out);
        } else if (*srv_cmd) {
            srv.data = data_root;
            srv.config = config;
            cmd_serve(srv);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
