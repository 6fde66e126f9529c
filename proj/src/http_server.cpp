// Eigen first: httplib pulls in <resolv.h>, whose _res macro breaks Eigen.
#include "cranioforge/error.hpp"
#include "cranioforge/service.hpp"

#include <httplib.h>

namespace cranioforge {

void serve(Service& service, const std::string& host, int port) {
    httplib::Server server;
    auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
        HttpRequest r;
        r.method = req.method;
        r.path = req.path;
        r.body = req.body;
        for (const auto& [k, v] : req.params) r.query[k] = v;
        const HttpResponse out = service.handle(r);
        res.status = out.status;
        res.set_content(out.body, out.content_type);
    };
    const char* pattern = R"(/.*)";
    server.Get(pattern, forward);
    server.Post(pattern, forward);
    server.Put(pattern, forward);
    server.Delete(pattern, forward);
    if (!server.bind_to_port(host, port)) {
        throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
    }
    server.listen_after_bind();
}

}  // namespace cranioforge
