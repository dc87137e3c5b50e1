#include "castkit/submission_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <random>

namespace castkit {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

std::uint64_t random_prefix() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace

std::size_t repair_jsonl_tail(const fs::path& path) {
  if (!fs::exists(path)) return 0;
  const std::string text = read_text_file(path);
  if (text.empty() || text.back() == '\n') return 0;
  const auto last_nl = text.rfind('\n');
  const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
  fs::resize_file(path, keep);
  return text.size() - keep;
}

SubmissionStore::SubmissionStore(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  repair_jsonl_tail(path_);
  for (const auto& s : snapshot()) keys_.emplace(s.test_id, s.judger_id, s.page_id);
  counter_ = keys_.size();
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error("cannot open " + path_.string() + ": " + std::strerror(errno));
}

SubmissionStore::~SubmissionStore() {
  if (fd_ >= 0) ::close(fd_);
}

subjective::SubmissionRecord SubmissionStore::append(subjective::SubmissionRecord record) {
  static const std::uint64_t prefix = random_prefix();
  std::lock_guard lock(mu_);
  Key key{record.test_id, record.judger_id, record.page_id};
  if (keys_.count(key))
    throw DuplicateSubmission("judger " + record.judger_id + " already submitted page " + record.page_id);

  char id[40];
  std::snprintf(id, sizeof id, "%016llx-%06llu", static_cast<unsigned long long>(prefix),
                static_cast<unsigned long long>(++counter_));
  record.submission_id = id;
  record.received_at = utc_now();
  const std::string line = to_json(record).dump() + "\n";

  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("write to " + path_.string() + " failed: " + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) throw Error("fsync of " + path_.string() + " failed: " + std::strerror(errno));
  keys_.insert(std::move(key));
  return record;
}

bool SubmissionStore::contains(const std::string& test_id, const std::string& judger_id,
                               const std::string& page_id) const {
  std::lock_guard lock(mu_);
  return keys_.count({test_id, judger_id, page_id}) > 0;
}

std::size_t SubmissionStore::size() const {
  std::lock_guard lock(mu_);
  return keys_.size();
}

std::vector<subjective::SubmissionRecord> SubmissionStore::snapshot() const {
  if (!fs::exists(path_)) return {};
  return subjective::read_submissions(path_);
}

}  // namespace castkit
