#include "cranioforge/commands.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>

#include "cranioforge/error.hpp"
#include "cranioforge/json_io.hpp"
#include "cranioforge/metrics.hpp"
#include "cranioforge/service.hpp"

namespace cranioforge {

namespace fs = std::filesystem;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

RegionPartition load_partition(const std::optional<fs::path>& path) {
    if (!path) return LandmarkSchema::standard().region_partition();
    RegionPartition p = partition_from_json(read_json(*path));
    validate_partition(p, LandmarkSchema::standard().size());
    return p;
}

std::vector<std::string> all_ids(const DataLayout& data) {
    std::vector<std::string> ids;
    if (!fs::is_directory(data.pairs_dir())) {
        throw Error(ErrorKind::NotFound, "no pairs under " + data.pairs_dir().string() + " (run gen-data first)");
    }
    for (const auto& entry : fs::directory_iterator(data.pairs_dir())) {
        if (entry.is_directory()) ids.push_back(entry.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<std::string> split_ids(const DataLayout& data, const std::string& which) {
    if (which == "all") return all_ids(data);
    const DatasetSplit split = read_split(data.split_json());
    if (which == "train") return split.train;
    if (which == "test") return split.test;
    if (which.rfind("fold:", 0) == 0) {
        int i = -1;
        try {
            i = std::stoi(which.substr(5));
        } catch (const std::exception&) {
        }
        if (i < 0 || i >= static_cast<int>(split.folds.size())) {
            throw Error(ErrorKind::InvalidInput, "fold index out of range in '" + which + "'");
        }
        return split.fold_train(i);
    }
    throw Error(ErrorKind::InvalidInput, "unknown split '" + which + "' (train | test | all | fold:<i>)");
}

json representatives_to_json(const RepresentativeDepths& r) {
    return {{"thin", vector_to_json(r.thin)}, {"normal", vector_to_json(r.normal)}, {"fat", vector_to_json(r.fat)}};
}

RepresentativeDepths representatives_from_json(const json& j) {
    RepresentativeDepths r;
    r.thin = vector_from_json(j.at("thin"), "thin");
    r.normal = vector_from_json(j.at("normal"), "normal");
    r.fat = vector_from_json(j.at("fat"), "fat");
    return r;
}

std::string format_fixed(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

}  // namespace

fs::path default_data_root() {
    if (const char* env = std::getenv("CRANIOFORGE_DATA"); env && *env) return env;
    return "data";
}

MorphableFaceModel load_model(const DataLayout& data) {
    if (!fs::exists(data.model_json())) {
        throw Error(ErrorKind::NotFound, "no face model at " + data.model_json().string() + " (run gen-data first)");
    }
    return load_face_model(data.model_json());
}

void save_tdd(const fs::path& dir, const TddBundle& tdd) {
    ensure_dir(dir);
    write_json(dir / "tdd_global.json", to_json(tdd.global));
    write_json(dir / "tdd_regional.json", to_json(tdd.regional));
    write_json(dir / "tdd_representatives.json", representatives_to_json(tdd.representatives));
}

TddBundle load_tdd(const fs::path& dir) {
    if (!fs::exists(dir / "tdd_global.json")) {
        throw Error(ErrorKind::NotFound, "no tissue-depth model in " + dir.string() + " (run fit-tdd first)");
    }
    TddBundle t;
    try {
        t.global = tdd_from_json(read_json(dir / "tdd_global.json"));
        t.regional = regional_tdd_from_json(read_json(dir / "tdd_regional.json"));
        t.representatives = representatives_from_json(read_json(dir / "tdd_representatives.json"));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Schema, "malformed tissue-depth files in " + dir.string() + ": " + e.what());
    }
    return t;
}

AdaptationConfig load_config(const std::optional<fs::path>& path) {
    AdaptationConfig c;
    if (path) c = config_from_json(read_json(*path));
    c.validate();
    return c;
}

std::vector<SkullFacePair> cmd_gen_data(const GenDataOptions& o) {
    const auto start = clock_type::now();
    if (o.count < 2) {
        throw Error(ErrorKind::InsufficientData,
                    "gen-data needs at least 2 pairs for a train/test split, got " + std::to_string(o.count));
    }
    const DataLayout data{o.out};
    const DepthSpec spec = o.depth_spec ? depth_spec_from_json(read_json(*o.depth_spec)) : DepthSpec::standard();
    const MorphableFaceModel model = build_synthetic_model(o.seed, o.latent_size);

    std::vector<SkullFacePair> pairs = generate_pairs(model, o.count, o.seed, spec);
    for (auto& p : pairs) p = normalize_pair(p);
    std::vector<std::string> ids;
    for (const auto& p : pairs) ids.push_back(p.id);
    const DatasetSplit split = holdout_split(ids, o.test_fraction, std::min(o.folds, o.count), o.seed);

    ensure_dir(data.model_json().parent_path());
    save_face_model(model, data.model_json().parent_path() / "face_model");
    ensure_dir(data.pairs_dir());
    for (const auto& p : pairs) write_pair(data.pairs_dir(), p);
    write_split(data.split_json(), split);
    write_json(o.out / "depth_spec.json", to_json(spec));

    RunManifest m;
    m.command = "gen-data";
    m.config = {{"count", o.count},         {"latent_size", o.latent_size}, {"test_fraction", o.test_fraction},
                {"folds", o.folds},         {"depth_spec", to_json(spec)}};
    if (o.depth_spec) m.inputs["depth_spec"] = o.depth_spec->string();
    m.outputs = {{"model", data.model_json().string()},
                 {"pairs", data.pairs_dir().string()},
                 {"split", data.split_json().string()}};
    m.seed = o.seed;
    m.wall_seconds = seconds_since(start);
    write_manifest(o.out, m);
    return pairs;
}

FitTddReport cmd_fit_tdd(const FitTddOptions& o) {
    const auto start = clock_type::now();
    const DataLayout data{o.data};
    const RegionPartition partition = load_partition(o.partition);
    const std::vector<std::string> ids = split_ids(data, o.split);
    const std::vector<SkullFacePair> pairs = read_pairs(data.pairs_dir(), ids);

    FitTddReport report;
    report.tdd = fit_tdd(pairs, partition);
    const fs::path out = o.out.value_or(data.tdd_dir());
    save_tdd(out, report.tdd);

    std::string text = "tissue-depth PCA on " + std::to_string(pairs.size()) + " training pairs\n";
    const Eigen::VectorXd ratios = report.tdd.global.variance_ratios();
    double cumulative = 0.0;
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(ratios.size(), 5); ++k) {
        cumulative += ratios[k];
        text += "  component " + std::to_string(k + 1) + ": " + format_fixed(100.0 * ratios[k], 1) + "% (cumulative " +
                format_fixed(100.0 * cumulative, 1) + "%)\n";
    }
    const auto [lo, hi] = report.tdd.global.c_range();
    const auto [alo, ahi] = report.tdd.global.allowed_range();
    text += "  C range " + format_fixed(lo, 2) + " .. " + format_fixed(hi, 2) + " (allowed " + format_fixed(alo, 2) +
            " .. " + format_fixed(ahi, 2) + ")\n";
    for (const auto& [name, m] : report.tdd.regional.regions()) {
        text += "  region " + name + ": " + std::to_string(m.landmark_count()) + " landmarks, first component " +
                format_fixed(100.0 * m.variance_ratio(0), 1) + "%\n";
    }
    report.text = text;

    RunManifest m;
    m.command = "fit-tdd";
    m.config = {{"split", o.split}, {"pairs", pairs.size()}};
    m.inputs = {{"data", o.data.string()}};
    if (o.partition) m.inputs["partition"] = o.partition->string();
    m.outputs = {{"tdd", out.string()}};
    m.wall_seconds = seconds_since(start);
    write_manifest(out, m);
    return report;
}

std::vector<ReconstructSummary> cmd_reconstruct(const ReconstructOptions& o) {
    const auto start = clock_type::now();
    const DataLayout data{o.data};
    const TissueMode mode = TissueMode::parse(o.mode);
    const MorphableFaceModel model = load_model(data);
    const TddBundle tdd = load_tdd(o.tdd.value_or(data.tdd_dir()));
    const AdaptationConfig config = load_config(o.config);
    const SymmetryPairing pairing = LandmarkSchema::standard().pairing();

    struct Item {
        std::string id;
        SkullLandmarkSet skull;
        std::optional<TriMesh> truth;
        std::uint64_t seed;
    };
    std::vector<Item> items;
    if (o.skull) {
        if (!o.pair_ids.empty() || !o.split.empty()) {
            throw Error(ErrorKind::InvalidInput, "give either a skull file or dataset pairs, not both");
        }
        items.push_back({o.skull->stem().string(), skull_from_json(read_json(*o.skull), model.landmark_count()),
                         std::nullopt, o.seed});
    } else {
        std::vector<std::string> ids = o.pair_ids;
        if (!o.split.empty()) {
            const auto more = split_ids(data, o.split);
            ids.insert(ids.end(), more.begin(), more.end());
        }
        if (ids.empty()) throw Error(ErrorKind::InvalidInput, "nothing to reconstruct: give --skull, --pair or --split");
        if (o.limit >= 0 && static_cast<int>(ids.size()) > o.limit) ids.resize(static_cast<std::size_t>(o.limit));
        for (auto& p : read_pairs(data.pairs_dir(), ids)) {
            items.push_back({p.id, std::move(p.skull), std::optional<TriMesh>(std::move(p.face)),
                             pair_seed(o.seed, p.id)});
        }
    }

    ensure_dir(o.out);
    std::vector<ReconstructSummary> summaries;
    json summary_json = json::array();
    for (const auto& item : items) {
        ReconstructionRequest req;
        req.skull = item.skull;
        req.mode = mode;
        req.seed = item.seed;
        req.attributes = o.attributes;
        req.config = config;
        if (o.use_ground_truth && item.truth) req.ground_truth = &*item.truth;
        const Reconstruction r = reconstruct(model, tdd, pairing, req);

        const fs::path dir = o.out / item.id;
        ensure_dir(dir);
        write_obj(dir / "face.obj", r.mesh);
        json diag = to_json(r.adaptation);
        diag["id"] = item.id;
        diag["mode"] = r.mode.name();
        diag["requested_mode"] = mode.name();
        diag["seed"] = item.seed;
        diag["depths"] = vector_to_json(r.depths);
        diag["targets"] = points_to_json(r.targets);
        diag["initial_latent"] = to_json(r.initial_latent);
        diag["nme"] = r.nme ? json(*r.nme) : json(nullptr);
        json cands = json::array();
        for (const auto& [name, scores] : r.candidates) {
            cands.push_back({{"mode", name},
                             {"nme", std::isnan(scores.first) ? json(nullptr) : json(scores.first)},
                             {"final_loss", scores.second}});
        }
        diag["candidates"] = cands;
        write_json(dir / "diagnostics.json", diag);

        ReconstructSummary s{item.id, r.mode.name(), r.nme, r.initial_mean_residual(), r.final_mean_residual(),
                             r.adaptation.final_loss.total};
        summary_json.push_back({{"id", s.id},
                                {"mode", s.mode},
                                {"nme", s.nme ? json(*s.nme) : json(nullptr)},
                                {"initial_mean_residual", s.initial_residual},
                                {"final_mean_residual", s.final_residual},
                                {"final_loss", s.final_loss}});
        summaries.push_back(std::move(s));
    }
    write_json(o.out / "summary.json", summary_json);

    RunManifest m;
    m.command = "reconstruct";
    m.config = {{"mode", mode.name()}, {"adaptation", to_json(config)}, {"attributes", o.attributes}};
    m.inputs = {{"data", o.data.string()}, {"tdd", o.tdd.value_or(data.tdd_dir()).string()}};
    if (o.skull) m.inputs["skull"] = o.skull->string();
    if (o.config) m.inputs["config"] = o.config->string();
    m.outputs = {{"results", o.out.string()}};
    m.seed = o.seed;
    m.wall_seconds = seconds_since(start);
    write_manifest(o.out, m);
    return summaries;
}

CrossValidation cmd_evaluate(const EvaluateOptions& o) {
    const auto start = clock_type::now();
    const DataLayout data{o.data};
    const MorphableFaceModel model = load_model(data);
    const AdaptationConfig config = load_config(o.config);
    const RegionPartition partition = load_partition(o.partition);
    const DatasetSplit split = read_split(data.split_json());
    const std::vector<SkullFacePair> pairs = read_pairs(data.pairs_dir());
    std::vector<TissueMode> modes;
    for (const auto& name : o.modes) modes.push_back(TissueMode::parse(name));

    const CrossValidation cv =
        cross_validate(model, pairs, split, partition, LandmarkSchema::standard().pairing(), modes, o.seed, config);

    ensure_dir(o.out);
    json folds = json::array();
    std::string text;
    for (const auto& f : cv.folds) {
        json by_mode = json::object();
        for (const auto& [name, rep] : f.by_mode) {
            by_mode[name] = to_json(rep);
            text += "fold " + std::to_string(f.fold) + " " + name + ": mean " + format_fixed(100.0 * rep.mean) + "%\n";
        }
        folds.push_back({{"fold", f.fold}, {"by_mode", by_mode}});
    }
    json overall = json::object();
    std::vector<TableRow> rows;
    for (const auto& [name, rep] : cv.overall) {
        overall[name] = to_json(rep);
        rows.push_back({"Ours (" + name + " tissue)", rep});
    }
    text += "\n" + format_table(rows);
    write_json(o.out / "evaluation.json", {{"folds", folds}, {"overall", overall}});
    write_text(o.out / "evaluation.txt", text);

    RunManifest m;
    m.command = "evaluate";
    m.config = {{"modes", o.modes}, {"adaptation", to_json(config)}};
    m.inputs = {{"data", o.data.string()}};
    m.outputs = {{"report", (o.out / "evaluation.json").string()}};
    m.seed = o.seed;
    m.wall_seconds = seconds_since(start);
    write_manifest(o.out, m);
    std::cout << text;
    return cv;
}

AblationReport cmd_ablate(const AblateOptions& o) {
    const auto start = clock_type::now();
    const DataLayout data{o.data};
    const MorphableFaceModel model = load_model(data);
    const TddBundle tdd = load_tdd(o.tdd.value_or(data.tdd_dir()));
    const AdaptationConfig config = load_config(o.config);
    std::vector<std::string> ids = read_split(data.split_json()).test;
    if (o.limit >= 0 && static_cast<int>(ids.size()) > o.limit) ids.resize(static_cast<std::size_t>(o.limit));
    const std::vector<SkullFacePair> test = read_pairs(data.pairs_dir(), ids);

    AblationReport report;
    report.rows = run_ablation(model, tdd, LandmarkSchema::standard().pairing(), test, o.seed, config);
    report.ordering = check_ablation_ordering(report.rows);
    std::vector<TableRow> rows;
    for (const auto& r : report.rows) rows.push_back({r.label, r.report});
    report.table = format_table(rows);

    ensure_dir(o.out);
    json j = json::array();
    for (const auto& r : report.rows) j.push_back({{"label", r.label}, {"report", to_json(r.report)}});
    write_json(o.out / "ablation.json",
               {{"rows", j}, {"ordering_passed", report.ordering.passed}, {"ordering", report.ordering.lines}});
    std::string text = report.table + "\n";
    for (const auto& line : report.ordering.lines) text += line + "\n";
    text += std::string("ordering ") + (report.ordering.passed ? "PASS" : "FAIL") + "\n";
    write_text(o.out / "ablation.txt", text);

    RunManifest m;
    m.command = "ablate";
    m.config = {{"adaptation", to_json(config)}, {"pairs", test.size()}};
    m.inputs = {{"data", o.data.string()}};
    m.outputs = {{"report", (o.out / "ablation.json").string()}};
    m.seed = o.seed;
    m.wall_seconds = seconds_since(start);
    write_manifest(o.out, m);
    return report;
}

void cmd_export_schema(const fs::path& out) {
    ensure_dir(out);
    const LandmarkSchema& schema = LandmarkSchema::standard();
    write_json(out / "landmark_schema.json", to_json(schema));
    write_json(out / "region_partition.json", partition_to_json(schema.region_partition()));
    write_json(out / "symmetry_pairing.json", to_json(schema.pairing()));
    write_json(out / "attributes.json", to_json(AttributeTable::standard()));
    write_json(out / "adaptation_config.json", to_json(AdaptationConfig{}));
    write_json(out / "depth_spec.json", to_json(DepthSpec::standard()));
}

void cmd_serve(const ServeOptions& o) {
    const DataLayout data{o.data};
    ServiceContext ctx;
    ctx.model = std::make_shared<const MorphableFaceModel>(load_model(data));
    ctx.tdd = load_tdd(o.tdd.value_or(data.tdd_dir()));
    ctx.pairing = LandmarkSchema::standard().pairing();
    ctx.default_config = load_config(o.config);
    if (fs::is_directory(data.pairs_dir())) {
        for (auto& p : read_pairs(data.pairs_dir())) ctx.skulls.emplace(p.id, std::move(p.skull));
    }
    Service service(std::move(ctx));
    std::cout << "cranioforge service on http://" << o.host << ":" << o.port << std::endl;
    serve(service, o.host, o.port);
}

int exit_code_for(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        switch (err->kind()) {
            case ErrorKind::Degenerate:
            case ErrorKind::Numerical: return 4;
            default: return 3;
        }
    }
    return 3;
}

}  // namespace cranioforge
