#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "castkit/test_config.hpp"

namespace castkit {

struct ServiceOptions {
  std::vector<TestConfig> tests;
  std::filesystem::path data_dir;                  // holds submissions.jsonl
  std::optional<std::filesystem::path> static_dir; // built UI, mounted at /
  std::size_t max_body_bytes = 1 << 20;
};

/// HTTP API for the listening tests:
///   GET  /api/tests/{test_id}?pid=<judger>  client-safe config
///   GET  /api/audio/{stimulus_id}           stimulus bytes
///   POST /api/submissions                   one SubmissionRecord
class TestService {
 public:
  explicit TestService(ServiceOptions opts);
  ~TestService();
  TestService(const TestService&) = delete;
  TestService& operator=(const TestService&) = delete;

  /// Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on a background thread after bind().
  void start();
  /// Serves on the calling thread after bind(); returns once stopped.
  void run();
  void stop();

  std::filesystem::path submissions_path() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace castkit
