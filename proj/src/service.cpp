#include "castkit/service.hpp"

#include <thread>

#include "httplib.h"
#include "castkit/error.hpp"
#include "castkit/submission_store.hpp"

namespace castkit {

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  json body = {{"error", message}};
  // Messages lead with the offending field path, "path: reason".
  if (auto colon = message.find(": "); colon != std::string::npos) {
    std::string field = message.substr(0, colon);
    if (field.rfind("submission.", 0) == 0) field = field.substr(11);
    if (field.find(' ') == std::string::npos) body["field"] = field;
  }
  send_json(res, status, body);
}

}  // namespace

struct TestService::Impl {
  ServiceOptions opts;
  SubmissionStore store;
  httplib::Server server;
  std::thread worker;

  explicit Impl(ServiceOptions o) : opts(std::move(o)), store(opts.data_dir / "submissions.jsonl") {}

  const TestConfig* find_test(const std::string& id) const {
    for (const auto& t : opts.tests)
      if (t.test_id == id) return &t;
    return nullptr;
  }

  const Stimulus* find_stimulus(const std::string& id) const {
    for (const auto& t : opts.tests)
      if (const auto* s = t.find_stimulus(id)) return s;
    return nullptr;
  }

  void routes() {
    server.set_payload_max_length(opts.max_body_bytes);

    server.Get(R"(/api/tests/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto* t = find_test(req.matches[1]);
      if (!t) return send_error(res, 404, "unknown test");
      const std::string pid = req.has_param("pid") ? req.get_param_value("pid") : "";
      send_json(res, 200, client_view(*t, pid));
    });

    server.Get(R"(/api/audio/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto* s = find_stimulus(req.matches[1]);
      if (!s) return send_error(res, 404, "unknown stimulus");
      try {
        res.set_content(read_text_file(s->audio), "audio/wav");
      } catch (const Error&) {
        send_error(res, 500, "stimulus audio unavailable");
      }
    });

    server.Post("/api/submissions", [this](const httplib::Request& req, httplib::Response& res) {
      if (req.body.size() > opts.max_body_bytes) return send_error(res, 413, "payload too large");
      json doc;
      try {
        doc = json::parse(req.body);
      } catch (const json::parse_error&) {
        return send_error(res, 400, "body: not valid JSON");
      }
      try {
        auto sub = subjective::parse_submission(doc);
        const auto* t = find_test(sub.test_id);
        if (!t) return send_error(res, 400, "test_id: unknown test '" + sub.test_id + "'");
        subjective::validate_submission(sub, *t);
        const auto stored = store.append(std::move(sub));
        send_json(res, 200, {{"accepted", true}, {"submission_id", stored.submission_id}});
      } catch (const DuplicateSubmission& e) {
        send_error(res, 409, e.what());
      } catch (const ParseError& e) {
        send_error(res, 400, e.what());
      } catch (const ValidationError& e) {
        send_error(res, 400, e.what());
      } catch (const Error& e) {
        send_error(res, 500, e.what());
      }
    });

    if (opts.static_dir && !server.set_mount_point("/", opts.static_dir->string()))
      throw ValidationError("static directory not found: " + opts.static_dir->string());
  }
};

TestService::TestService(ServiceOptions opts) : impl_(std::make_unique<Impl>(std::move(opts))) { impl_->routes(); }

TestService::~TestService() { stop(); }

int TestService::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void TestService::start() {
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void TestService::run() { impl_->server.listen_after_bind(); }

void TestService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

std::filesystem::path TestService::submissions_path() const { return impl_->store.path(); }

}  // namespace castkit
