#include "cranioforge/service.hpp"

#include <algorithm>
#include <condition_variable>
#include <regex>
#include <thread>

#include "cranioforge/error.hpp"
#include "cranioforge/json_io.hpp"
#include "cranioforge/registration.hpp"

namespace cranioforge {

using nlohmann::json;

const char* to_string(JobState state) noexcept {
    switch (state) {
        case JobState::Queued: return "queued";
        case JobState::Running: return "running";
        case JobState::Done: return "done";
        case JobState::Failed: return "failed";
        case JobState::Cancelled: return "cancelled";
    }
    return "unknown";
}

struct Service::Session {
    std::mutex mutex;
    std::string id;
    SkullLandmarkSet skull;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> attributes;
    double global_c = 0.0;
    std::map<std::string, double> c_locals;
    DepthVector depths;
    PointSet targets;
    FaceLatent latent;
    std::optional<AdaptationResult> last_result;
    std::string active_job;
};

struct Service::Job {
    std::string id;
    std::string session_id;
    std::mutex mutex;
    std::condition_variable changed;
    JobState state = JobState::Queued;
    AdaptationProgress progress;
    int completed = 0;
    std::vector<double> loss_totals;
    std::atomic<bool> cancel{false};
    std::string error;
    std::optional<LossBreakdown> final_loss;
    double mean_residual = 0.0;
};

namespace {

HttpResponse json_response(int status, const json& body) {
    HttpResponse r;
    r.status = status;
    r.body = body.dump();
    return r;
}

HttpResponse error_response(int status, const std::string& code, const std::string& message,
                             const json& detail = json::object()) {
    return json_response(status, {{"code", code}, {"message", message}, {"detail", detail}});
}

HttpResponse from_error(const Error& e) {
    json detail = json::object();
    int status = 400;
    switch (e.kind()) {
        case ErrorKind::InvalidInput:
        case ErrorKind::Schema:
        case ErrorKind::Partition: status = 400; break;
        case ErrorKind::NotFound: status = 404; break;
        case ErrorKind::Conflict: status = 409; break;
        case ErrorKind::OutOfRange: status = 422; break;
        case ErrorKind::InsufficientData:
        case ErrorKind::Degenerate:
        case ErrorKind::Numerical: status = 422; break;
        case ErrorKind::Io: status = 500; break;
    }
    if (const auto* range = dynamic_cast<const OutOfRangeError*>(&e)) {
        detail["c_range"] = {range->lower(), range->upper()};
    }
    if (const auto* part = dynamic_cast<const PartitionError*>(&e)) {
        detail["overlapping"] = part->overlapping();
        detail["missing"] = part->missing();
    }
    return error_response(status, to_string(e.kind()), e.what(), detail);
}

json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::InvalidInput, "request body is not valid JSON");
    if (!j.is_object()) throw Error(ErrorKind::InvalidInput, "request body must be a JSON object");
    return j;
}

json range_json(std::pair<double, double> r) { return json::array({r.first, r.second}); }

}  // namespace

Service::Service(ServiceContext context) : ctx_(std::move(context)) {
    if (!ctx_.model) throw Error(ErrorKind::InvalidInput, "service needs a face model");
    if (ctx_.tdd.global.landmark_count() != ctx_.model->landmark_count()) {
        throw Error(ErrorKind::Schema, "tissue-depth model and face model disagree on the landmark count");
    }
    ctx_.pairing.validate(ctx_.model->landmark_count());
    ctx_.default_config.validate();
}

Service::~Service() { shutdown(); }

void Service::shutdown() {
    {
        std::shared_lock lock(registry_mutex_);
        for (auto& [_, job] : jobs_) job->cancel.store(true);
    }
    std::unique_lock lock(workers_mutex_);
    workers_idle_.wait(lock, [this] { return active_workers_ == 0; });
}

std::shared_ptr<Service::Session> Service::find_session(const std::string& id) {
    std::shared_lock lock(registry_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorKind::NotFound, "unknown session '" + id + "'");
    return it->second;
}

std::shared_ptr<Service::Job> Service::find_job(const std::string& id) {
    std::shared_lock lock(registry_mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw Error(ErrorKind::NotFound, "unknown job '" + id + "'");
    return it->second;
}

HttpResponse Service::handle(const HttpRequest& request) {
    static const std::regex session_re("^/sessions/([^/]+)$");
    static const std::regex control_re("^/sessions/([^/]+)/control$");
    static const std::regex adapt_re("^/sessions/([^/]+)/adapt$");
    static const std::regex mesh_re("^/sessions/([^/]+)/mesh$");
    static const std::regex export_re("^/sessions/([^/]+)/export$");
    static const std::regex job_re("^/jobs/([^/]+)$");
    const std::string& m = request.method;
    const std::string& p = request.path;
    std::smatch match;
    try {
        if (p == "/healthz" && m == "GET") {
            return json_response(200, {{"status", "ok"}, {"version", version_stamp()}});
        }
        if (p == "/sessions" && m == "POST") return create_session(parse_body(request.body));
        if (std::regex_match(p, match, session_re) && m == "GET") return get_session(match[1]);
        if (std::regex_match(p, match, control_re) && m == "PUT") {
            return set_control(match[1], parse_body(request.body));
        }
        if (std::regex_match(p, match, adapt_re) && m == "POST") {
            return start_adaptation(match[1], parse_body(request.body));
        }
        if (std::regex_match(p, match, mesh_re) && m == "GET") {
            auto it = request.query.find("format");
            return get_mesh(match[1], it != request.query.end() && it->second == "json");
        }
        if (std::regex_match(p, match, export_re) && m == "GET") return export_session(match[1]);
        if (std::regex_match(p, match, job_re) && m == "GET") return job_status(match[1]);
        if (std::regex_match(p, match, job_re) && m == "DELETE") return cancel_job(match[1]);
        return error_response(404, "not_found", "no route for " + m + " " + p);
    } catch (const Error& e) {
        return from_error(e);
    } catch (const json::exception& e) {
        return error_response(400, "invalid_input", std::string("malformed request: ") + e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

namespace {

// Depths for the session's controls: global sample, then regional overrides.
DepthVector session_depths(const TddBundle& tdd, double c, const std::map<std::string, double>& c_locals) {
    DepthVector d = sample_global(tdd.global, c);
    for (const auto& [region, value] : c_locals) d = sample_regional(tdd.regional, d, region, value);
    return d;
}

}  // namespace

HttpResponse Service::create_session(const json& body) {
    auto s = std::make_shared<Session>();
    const int n = ctx_.model->landmark_count();
    if (body.contains("dataset_id")) {
        const std::string id = body.at("dataset_id").get<std::string>();
        auto it = ctx_.skulls.find(id);
        if (it == ctx_.skulls.end()) throw Error(ErrorKind::NotFound, "unknown dataset id '" + id + "'");
        s->skull = it->second;
    } else if (body.contains("skull")) {
        s->skull = skull_from_json(body.at("skull"), n);
    } else {
        throw Error(ErrorKind::InvalidInput, "expected 'dataset_id' or 'skull'");
    }
    if (body.contains("seed")) s->seed = body.at("seed").get<std::uint64_t>();
    if (body.contains("attributes")) s->attributes = body.at("attributes").get<std::map<std::string, std::string>>();
    s->latent = sample_prior(*ctx_.model, s->seed, s->attributes);
    s->depths = session_depths(ctx_.tdd, 0.0, {});
    s->targets = extend_landmarks(s->skull, s->depths);

    {
        std::unique_lock lock(registry_mutex_);
        s->id = "s" + std::to_string(next_session_++);
        sessions_[s->id] = s;
    }
    std::lock_guard lock(s->mutex);
    json out = {{"id", s->id},
                {"landmark_count", n},
                {"skull", to_json(s->skull)},
                {"depths", vector_to_json(s->depths)},
                {"targets", points_to_json(s->targets)},
                {"c", s->global_c},
                {"c_range", range_json(ctx_.tdd.global.allowed_range())}};
    json regions = json::object();
    for (const auto& [name, idx] : ctx_.tdd.regional.partition()) {
        regions[name] = {{"indices", idx}, {"c_range", range_json(ctx_.tdd.regional.region(name).allowed_range())}};
    }
    out["regions"] = regions;
    return json_response(201, out);
}

HttpResponse Service::get_session(const std::string& id) {
    auto s = find_session(id);
    std::lock_guard lock(s->mutex);
    json regions = json::object();
    for (const auto& [name, idx] : ctx_.tdd.regional.partition()) {
        auto it = s->c_locals.find(name);
        regions[name] = {{"indices", idx},
                         {"c_range", range_json(ctx_.tdd.regional.region(name).allowed_range())},
                         {"c_local", it == s->c_locals.end() ? json(nullptr) : json(it->second)}};
    }
    json out = {{"id", s->id},
                {"skull", to_json(s->skull)},
                {"c", s->global_c},
                {"c_range", range_json(ctx_.tdd.global.allowed_range())},
                {"regions", regions},
                {"depths", vector_to_json(s->depths)},
                {"targets", points_to_json(s->targets)},
                {"latent", to_json(s->latent)},
                {"active_job", s->active_job.empty() ? json(nullptr) : json(s->active_job)}};
    if (s->last_result) {
        out["last_result"] = {{"final_loss", to_json(s->last_result->final_loss)},
                              {"landmark_residuals", vector_to_json(s->last_result->landmark_residuals)},
                              {"mean_residual", s->last_result->landmark_residuals.mean()},
                              {"iterations_run", s->last_result->iterations_run}};
    } else {
        out["last_result"] = nullptr;
    }
    return json_response(200, out);
}

HttpResponse Service::set_control(const std::string& id, const json& body) {
    auto s = find_session(id);
    std::lock_guard lock(s->mutex);
    double c = s->global_c;
    std::map<std::string, double> c_locals = s->c_locals;
    if (body.contains("region")) {
        const std::string region = body.at("region").get<std::string>();
        if (!ctx_.tdd.regional.regions().count(region)) {
            throw Error(ErrorKind::InvalidInput, "unknown region '" + region + "'");
        }
        if (!body.contains("c_local")) throw Error(ErrorKind::InvalidInput, "regional control needs 'c_local'");
        c_locals[region] = body.at("c_local").get<double>();
    } else if (body.contains("c")) {
        // A global change resets the regional sliders.
        c = body.at("c").get<double>();
        c_locals.clear();
    } else {
        throw Error(ErrorKind::InvalidInput, "expected 'c' or 'region' + 'c_local'");
    }
    // Validate everything before touching the session.
    DepthVector depths = session_depths(ctx_.tdd, c, c_locals);
    PointSet targets = extend_landmarks(s->skull, depths);
    std::vector<int> moved;
    for (Eigen::Index i = 0; i < targets.cols(); ++i) {
        if ((targets.col(i) - s->targets.col(i)).norm() > 0.0) moved.push_back(static_cast<int>(i));
    }
    s->global_c = c;
    s->c_locals = std::move(c_locals);
    s->depths = std::move(depths);
    s->targets = std::move(targets);
    json locals = json::object();
    for (const auto& [name, v] : s->c_locals) locals[name] = v;
    return json_response(200, {{"c", s->global_c},
                                {"c_locals", locals},
                                {"depths", vector_to_json(s->depths)},
                                {"targets", points_to_json(s->targets)},
                                {"moved", moved}});
}

HttpResponse Service::start_adaptation(const std::string& id, const json& body) {
    auto s = find_session(id);
    AdaptationConfig config = ctx_.default_config;
    if (body.contains("config")) config = config_from_json(body.at("config"), config);
    config.validate();

    auto job = std::make_shared<Job>();
    PointSet targets;
    FaceLatent start;
    {
        std::lock_guard lock(s->mutex);
        if (!s->active_job.empty()) {
            return error_response(409, "conflict", "an adaptation job is already active for this session",
                                  {{"job_id", s->active_job}});
        }
        {
            std::unique_lock reg(registry_mutex_);
            job->id = "j" + std::to_string(next_job_++);
            job->session_id = s->id;
            jobs_[job->id] = job;
        }
        job->progress.total_iterations = config.total_iterations;
        s->active_job = job->id;
        targets = s->targets;
        start = s->latent;
    }
    {
        std::lock_guard lock(workers_mutex_);
        ++active_workers_;
    }
    std::thread([this, s, job, targets = std::move(targets), start = std::move(start), config]() mutable {
        run_job(s, job, std::move(targets), std::move(start), config);
        std::lock_guard lock(workers_mutex_);
        if (--active_workers_ == 0) workers_idle_.notify_all();
    }).detach();
    return json_response(202, {{"job_id", job->id}, {"session_id", s->id}, {"state", to_string(JobState::Queued)}});
}

void Service::run_job(std::shared_ptr<Session> session, std::shared_ptr<Job> job, PointSet targets, FaceLatent start,
                      AdaptationConfig config) {
    {
        std::lock_guard lock(job->mutex);
        job->state = JobState::Running;
    }
    job->changed.notify_all();
    AdaptationHooks hooks;
    hooks.cancel = &job->cancel;
    // Single producer (this thread); status readers copy under the lock.
    hooks.on_progress = [&job](const AdaptationProgress& p) {
        std::lock_guard lock(job->mutex);
        job->progress = p;
        job->completed = p.iteration + 1;
        job->loss_totals.push_back(p.loss.total);
    };
    JobState final_state = JobState::Done;
    std::string error;
    std::optional<AdaptationResult> result;
    try {
        result = adapt_face(*ctx_.model, start, targets, ctx_.pairing, config, hooks);
        if (result->cancelled) final_state = JobState::Cancelled;
    } catch (const std::exception& e) {
        final_state = JobState::Failed;
        error = e.what();
    }
    {
        std::lock_guard lock(session->mutex);
        if (final_state == JobState::Done) {
            session->latent = result->latent;
            session->last_result = *result;
        }
        session->active_job.clear();
    }
    {
        std::lock_guard lock(job->mutex);
        job->state = final_state;
        job->error = error;
        if (final_state == JobState::Done) {
            job->final_loss = result->final_loss;
            job->mean_residual = result->landmark_residuals.mean();
        }
    }
    job->changed.notify_all();
}

HttpResponse Service::job_status(const std::string& id) {
    auto job = find_job(id);
    std::lock_guard lock(job->mutex);
    json out = {{"id", job->id},
                {"session_id", job->session_id},
                {"state", to_string(job->state)},
                {"iteration", job->completed},
                {"total_iterations", job->progress.total_iterations},
                {"loss", to_json(job->progress.loss)},
                {"loss_history", job->loss_totals}};
    if (job->final_loss) {
        out["final_loss"] = to_json(*job->final_loss);
        out["mean_residual"] = job->mean_residual;
    }
    if (!job->error.empty()) out["error"] = job->error;
    return json_response(200, out);
}

HttpResponse Service::cancel_job(const std::string& id) {
    auto job = find_job(id);
    job->cancel.store(true);
    std::lock_guard lock(job->mutex);
    return json_response(202, {{"id", job->id}, {"state", to_string(job->state)}, {"cancel_requested", true}});
}

void Service::wait_for_job(const std::string& id) {
    auto job = find_job(id);
    std::unique_lock lock(job->mutex);
    job->changed.wait(lock, [&] { return job->state != JobState::Queued && job->state != JobState::Running; });
}

HttpResponse Service::get_mesh(const std::string& id, bool as_json) {
    auto s = find_session(id);
    std::lock_guard lock(s->mutex);
    const TriMesh face = decode(*ctx_.model, s->latent);
    // Back into the skull frame: the last run's H, else a fresh estimate
    // against the current targets.
    const SimilarityTransform h = s->last_result ? s->last_result->transform
                                                 : estimate_similarity(s->targets, extract_landmarks(*ctx_.model, face));
    const TriMesh mesh = apply(h.inverse(), face);
    if (!as_json) {
        HttpResponse r;
        r.content_type = "model/obj";
        r.body = to_obj_string(mesh);
        return r;
    }
    const PointSet q = extract_landmarks(*ctx_.model, mesh);
    Eigen::VectorXd residuals(q.cols());
    for (Eigen::Index i = 0; i < q.cols(); ++i) residuals[i] = (q.col(i) - s->targets.col(i)).norm();
    return json_response(200, {{"obj", to_obj_string(mesh)},
                               {"landmarks", points_to_json(q)},
                               {"residuals", vector_to_json(residuals)},
                               {"mean_residual", residuals.mean()}});
}

HttpResponse Service::export_session(const std::string& id) {
    auto s = find_session(id);
    std::lock_guard lock(s->mutex);
    json locals = json::object();
    for (const auto& [name, v] : s->c_locals) locals[name] = v;
    json out = {{"id", s->id},
                {"seed", s->seed},
                {"attributes", s->attributes},
                {"skull", to_json(s->skull)},
                {"c", s->global_c},
                {"c_locals", locals},
                {"depths", vector_to_json(s->depths)},
                {"targets", points_to_json(s->targets)},
                {"latent", to_json(s->latent)}};
    out["last_result"] = s->last_result ? to_json(*s->last_result) : json(nullptr);
    return json_response(200, out);
}

}  // namespace cranioforge
