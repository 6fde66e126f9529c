#include "doctest.h"

#include <csignal>
#include <cstdlib>
#include <thread>

#include <sys/wait.h>
#include <unistd.h>

#include "cranioforge/json_io.hpp"
#include "support.hpp"

#include "httplib.h"

using namespace cftest;
namespace fs = std::filesystem;

#ifdef CRANIOFORGE_CLI_PATH

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(CRANIOFORGE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

/// Relative path -> bytes for every file below root except run manifests.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
        out[fs::relative(e.path(), root).string()] = read_bytes(e.path());
    }
    return out;
}

void pipeline(const fs::path& root, const fs::path& config) {
    REQUIRE(run("gen-data --out " + root.string() + " --count 12 --latent-size 8 --folds 3 --seed 4") == 0);
    REQUIRE(run("fit-tdd --data " + root.string()) == 0);
    REQUIRE(run("reconstruct --data " + root.string() + " --out " + (root / "rec").string() +
                " --split test --limit 2 --mode best --seed 2 --config " + config.string()) == 0);
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("usage errors exit 2, help exits 0") {
        CHECK(run("--help") == 0);
        CHECK(run("") == 2);
        CHECK(run("frobnicate") == 2);
        CHECK(run("reconstruct --out /tmp/x --mode skinny") == 2);
        CHECK(run("gen-data --count abc") == 2);
        CHECK(run("reconstruct") == 2);
    }

    TEST_CASE("batch pipeline is byte-deterministic and writes manifests") {
        const auto dir = temp_dir("cli_pipeline");
        const fs::path config = dir / "config.json";
        cranioforge::write_json(config, {{"total_iterations", 60}});
        pipeline(dir / "a", config);
        pipeline(dir / "b", config);

        const auto a = snapshot(dir / "a"), b = snapshot(dir / "b");
        CHECK(a.size() > 20);
        CHECK(a == b);
        for (const auto* sub : {"", "tdd", "rec"}) CHECK(fs::exists(dir / "a" / sub / "manifest.json"));
        const auto manifest = cranioforge::read_json(dir / "a" / "rec" / "manifest.json");
        CHECK(manifest.at("command") == "reconstruct");
        CHECK(manifest.at("seed") == 2);
        CHECK(manifest.contains("config"));

        const auto summary = cranioforge::read_json(dir / "a" / "rec" / "summary.json");
        CHECK(!summary.dump().empty());
        bool found_face = false;
        for (const auto& [rel, bytes] : a) {
            if (rel.rfind("rec/", 0) == 0 && rel.size() > 8 && rel.substr(rel.size() - 8) == "face.obj") found_face = true;
        }
        CHECK(found_face);

        // Failures map to documented exit codes.
        CHECK(run("gen-data --out " + (dir / "tiny").string() + " --count 1") == 3);
        CHECK(run("fit-tdd --data " + (dir / "missing").string()) == 3);
    }

    TEST_CASE("export-schema writes the schema files") {
        const auto dir = temp_dir("cli_schema");
        REQUIRE(run("export-schema --out " + dir.string()) == 0);
        std::size_t n = 0;
        for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ".json";
        CHECK(n >= 6);
    }

    TEST_CASE("serve answers healthz") {
        const auto dir = temp_dir("cli_serve");
        REQUIRE(run("gen-data --out " + dir.string() + " --count 6 --latent-size 8 --folds 2") == 0);
        REQUIRE(run("fit-tdd --data " + dir.string()) == 0);
        const int port = 20000 + static_cast<int>(getpid() % 20000);
        const fs::path pidfile = dir / "pid";
        const std::string cmd = std::string(CRANIOFORGE_CLI_PATH) + " serve --data " + dir.string() +
                                " --host 127.0.0.1 --port " + std::to_string(port) + " >" + (dir / "log").string() +
                                " 2>&1 & echo $! > " + pidfile.string();
        REQUIRE(std::system(cmd.c_str()) == 0);
        const pid_t pid = std::stoi(read_bytes(pidfile));

        httplib::Client client("127.0.0.1", port);
        client.set_connection_timeout(1, 0);
        std::string body;
        int status = 0;
        for (int attempt = 0; attempt < 200 && status != 200; ++attempt) {
            if (auto res = client.Get("/healthz")) {
                status = res->status;
                body = res->body;
            } else {
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            }
        }
        CHECK(status == 200);
        CHECK(body.find("\"ok\"") != std::string::npos);
        if (status == 200) {
            auto created = client.Post("/sessions", R"({"dataset_id": "pair_000", "seed": 1})", "application/json");
            REQUIRE(created);
            CHECK(created->status == 201);
        }
        kill(pid, SIGTERM);
        int wstatus = 0;
        for (int i = 0; i < 50 && waitpid(pid, &wstatus, WNOHANG) == 0; ++i) {
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
    }
}

#endif
