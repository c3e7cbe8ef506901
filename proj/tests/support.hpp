#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "judgeharness/task.hpp"

namespace jhtest {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("jh-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline judgeharness::ComparisonTask make_task(std::string id, std::string sys1, std::string text1,
                                              std::string sys2, std::string text2,
                                              std::string instruction = "Say something useful.",
                                              std::string input = "") {
  judgeharness::ComparisonTask t;
  t.task_id = std::move(id);
  t.instruction = std::move(instruction);
  t.input = std::move(input);
  t.response_1 = {std::move(text1), std::move(sys1)};
  t.response_2 = {std::move(text2), std::move(sys2)};
  return t;
}

inline std::string test_data(const std::string& name) { return std::string(JH_TEST_DATA_DIR) + "/" + name; }
inline std::string sample_data(const std::string& name) { return std::string(JH_SAMPLE_DIR) + "/" + name; }

}  // namespace jhtest
