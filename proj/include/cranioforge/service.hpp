#pragma once

// HTTP/JSON backend for the editor. Service::handle is transport-free so it
// can be exercised directly; serve() binds it to a socket.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "cranioforge/adaptation.hpp"
#include "cranioforge/dataset.hpp"
#include "cranioforge/face_model.hpp"
#include "cranioforge/pipeline.hpp"

namespace cranioforge {

struct HttpRequest {
    std::string method;
    std::string path;
    std::string body;
    std::map<std::string, std::string> query;
};

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;

    nlohmann::json json() const { return nlohmann::json::parse(body); }
};

/// Everything a service instance needs; shared read-only by all sessions.
struct ServiceContext {
    std::shared_ptr<const MorphableFaceModel> model;
    TddBundle tdd;
    SymmetryPairing pairing;
    AdaptationConfig default_config;
    /// Skulls addressable by dataset id.
    std::map<std::string, SkullLandmarkSet> skulls;
};

enum class JobState { Queued, Running, Done, Failed, Cancelled };
const char* to_string(JobState state) noexcept;

class Service {
public:
    explicit Service(ServiceContext context);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    HttpResponse handle(const HttpRequest& request);

    /// Blocks until the job leaves the queued/running states.
    void wait_for_job(const std::string& job_id);
    /// Cancels every active job and waits for the workers to finish.
    void shutdown();

private:
    struct Session;
    struct Job;

    HttpResponse create_session(const nlohmann::json& body);
    HttpResponse get_session(const std::string& id);
    HttpResponse set_control(const std::string& id, const nlohmann::json& body);
    HttpResponse start_adaptation(const std::string& id, const nlohmann::json& body);
    HttpResponse job_status(const std::string& id);
    HttpResponse cancel_job(const std::string& id);
    HttpResponse get_mesh(const std::string& id, bool as_json);
    HttpResponse export_session(const std::string& id);

    std::shared_ptr<Session> find_session(const std::string& id);
    std::shared_ptr<Job> find_job(const std::string& id);
    void run_job(std::shared_ptr<Session> session, std::shared_ptr<Job> job, PointSet targets, FaceLatent start,
                 AdaptationConfig config);

    ServiceContext ctx_;
    std::shared_mutex registry_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::uint64_t next_session_ = 1;
    std::uint64_t next_job_ = 1;
    std::mutex workers_mutex_;
    std::condition_variable workers_idle_;
    int active_workers_ = 0;
};

/// Serves the endpoints on host:port until the process is stopped.
/// Throws Io when the port cannot be bound.
void serve(Service& service, const std::string& host, int port);

}  // namespace cranioforge
