#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "castkit/error.hpp"
#include "castkit/subjective.hpp"

namespace castkit {

/// The same judger already submitted this page of this test.
class DuplicateSubmission : public Error {
 public:
  using Error::Error;
};

/// Append-only JSON-lines store of submissions. Each append is one write(2)
/// of one complete line followed by fsync. On open, a torn final line left by
/// a crash is cut back to the last newline so the file always parses.
class SubmissionStore {
 public:
  explicit SubmissionStore(std::filesystem::path path);
  ~SubmissionStore();
  SubmissionStore(const SubmissionStore&) = delete;
  SubmissionStore& operator=(const SubmissionStore&) = delete;

  /// Assigns submission_id and received_at, persists, and returns the stored
  /// record. Throws DuplicateSubmission for a repeated (test, judger, page).
  subjective::SubmissionRecord append(subjective::SubmissionRecord record);

  bool contains(const std::string& test_id, const std::string& judger_id, const std::string& page_id) const;
  std::size_t size() const;
  /// Re-reads the file.
  std::vector<subjective::SubmissionRecord> snapshot() const;

  const std::filesystem::path& path() const { return path_; }

 private:
  using Key = std::tuple<std::string, std::string, std::string>;
  std::filesystem::path path_;
  int fd_ = -1;
  mutable std::mutex mu_;
  std::set<Key> keys_;
  std::uint64_t counter_ = 0;
};

/// Cuts an unterminated final line. Returns the number of bytes removed.
std::size_t repair_jsonl_tail(const std::filesystem::path& path);

}  // namespace castkit
