#include <cstdlib>

#include "httplib.h"
#include "json.hpp"
#include "kgprune/error.hpp"
#include "kgprune/service.hpp"

namespace kgp {
namespace {

using nlohmann::json;

constexpr const char* kIndexPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>kgprune</title></head>
<body>
<h1>kgprune job service</h1>
<ul>
<li>POST /api/jobs (multipart: qids, pids, options)</li>
<li>GET /api/jobs</li>
<li>GET /api/jobs/{id}</li>
<li>GET /api/jobs/{id}/result?format=json|nt</li>
<li>POST /api/jobs/{id}/resubmit {"extra_seeds": [...]}</li>
</ul>
</body></html>
)";

void send_error(httplib::Response& res, const Error& e) {
    json body = {{"error", to_string(e.kind())}, {"message", e.what()}};
    if (const auto* s = dynamic_cast<const SubmissionError*>(&e); s && !s->lines().empty()) {
        json lines = json::array();
        for (const auto& l : s->lines())
            lines.push_back({{"file", l.file}, {"line", l.error.line}, {"text", l.error.text}, {"message", l.error.message}});
        body["lines"] = lines;
    }
    res.status = http_status(e.kind());
    res.set_content(body.dump(), "application/json");
}

void send_bad_request(httplib::Response& res, const std::string& message) {
    send_error(res, Error(ErrorKind::ValidationError, message));
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, e);
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(json{{"error", "InternalError"}, {"message", e.what()}}.dump(), "application/json");
        }
    };
}

std::size_t query_number(const httplib::Request& req, const char* key, std::size_t fallback) {
    if (!req.has_param(key)) return fallback;
    const std::string v = req.get_param_value(key);
    char* end = nullptr;
    const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || *end || v.front() == '-')
        fail(ErrorKind::ValidationError, std::string(key) + " must be a non-negative integer");
    return static_cast<std::size_t>(n);
}

}  // namespace

struct HttpApi::Impl {
    JobService& service;
    httplib::Server server;
    std::thread thread;
    bool bound = false;

    explicit Impl(JobService& s) : service(s) {}
};

HttpApi::HttpApi(JobService& service, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(service)) {
    auto& server = impl_->server;
    JobService& jobs = service;
    server.set_payload_max_length(3 * service.config().max_upload_bytes + (64 << 10));

    server.Post("/api/jobs", guarded([&jobs](const httplib::Request& req, httplib::Response& res) {
        if (!req.is_multipart_form_data())
            return send_bad_request(res, "expected multipart/form-data with fields qids and pids");
        if (!req.has_file("qids")) return send_bad_request(res, "missing form field 'qids'");
        if (!req.has_file("pids")) return send_bad_request(res, "missing form field 'pids'");
        const std::string options = req.has_file("options") ? req.get_file_value("options").content : "";
        const std::string id =
            jobs.submit(req.get_file_value("qids").content, req.get_file_value("pids").content, options);
        res.status = 202;
        res.set_header("Location", "/api/jobs/" + id);
        res.set_content(json{{"job_id", id}}.dump(), "application/json");
    }));

    server.Get("/api/jobs", guarded([&jobs](const httplib::Request& req, httplib::Response& res) {
        const auto page = jobs.list(query_number(req, "page", 0), query_number(req, "page_size", 20));
        res.set_content(page_json(page), "application/json");
    }));

    server.Get(R"(/api/jobs/([0-9a-f]+))", guarded([&jobs](const httplib::Request& req, httplib::Response& res) {
        res.set_content(job_json(jobs.status(req.matches[1].str())), "application/json");
    }));

    server.Get(R"(/api/jobs/([0-9a-f]+)/result)", guarded([&jobs](const httplib::Request& req, httplib::Response& res) {
        const std::string format = req.has_param("format") ? req.get_param_value("format") : "json";
        const std::string id = req.matches[1].str();
        std::string body = jobs.result(id, format);
        if (format == "json") {
            res.set_content(std::move(body), "application/json");
        } else {
            res.set_content(std::move(body), "application/n-triples; charset=utf-8");
        }
        res.set_header("Content-Disposition", "attachment; filename=\"kgp-" + id + "." + format + "\"");
    }));

    server.Post(R"(/api/jobs/([0-9a-f]+)/resubmit)", guarded([&jobs](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::parse_error&) {
            return send_bad_request(res, "body must be a JSON object {\"extra_seeds\": [...]}");
        }
        if (!body.is_object() || !body.contains("extra_seeds") || !body["extra_seeds"].is_array())
            return send_bad_request(res, "body must be a JSON object {\"extra_seeds\": [...]}");
        for (const auto& [key, v] : body.items())
            if (key != "extra_seeds") return send_bad_request(res, "unknown field '" + key + "'");
        std::vector<std::string> extras;
        for (const auto& v : body["extra_seeds"]) {
            if (!v.is_string()) return send_bad_request(res, "extra_seeds must be strings");
            extras.push_back(v.get<std::string>());
        }
        const std::string id = jobs.resubmit_with_seeds(req.matches[1].str(), extras);
        res.status = 202;
        res.set_header("Location", "/api/jobs/" + id);
        res.set_content(json{{"job_id", id}}.dump(), "application/json");
    }));

    if (static_dir) {
        if (!server.set_mount_point("/", static_dir->string()))
            fail(ErrorKind::IoError, "static directory " + static_dir->string() + " does not exist");
    } else {
        server.Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(kIndexPage, "text/html; charset=utf-8");
        });
    }
}

HttpApi::~HttpApi() {
    stop();
}

int HttpApi::bind(const std::string& host, int port) {
    int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) fail(ErrorKind::IoError, "cannot listen on " + host + ":" + std::to_string(port));
    impl_->bound = true;
    return bound;
}

void HttpApi::listen() {
    impl_->server.listen_after_bind();
}

void HttpApi::start() {
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void HttpApi::stop() {
    if (impl_->bound) impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace kgp
