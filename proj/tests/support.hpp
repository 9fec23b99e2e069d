#pragma once

// Shared fixtures for the test suites.

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "tbcmp/markov.hpp"
#include "tbcmp/trace.hpp"

namespace testsupport {

// The worked example used throughout the suites: a user searching a file
// line by line. open succeeds 99% of the time (else error); each read
// finds the sought line with probability 1/4 (close) and continues
// reading otherwise.
inline tbcmp::MarkovChain file_search_chain() {
  return tbcmp::make_chain(1,
                           {
                               {"open", "error", 1},
                               {"open", "read", 99},
                               {"read", "read", 75},
                               {"read", "close", 25},
                           },
                           "open");
}

// file_search_chain made ergodic so it can generate long sequences:
// terminal states loop back to open.
inline tbcmp::MarkovChain file_search_loop_chain() {
  return tbcmp::make_chain(1,
                           {
                               {"open", "error", 1},
                               {"open", "read", 99},
                               {"read", "read", 75},
                               {"read", "close", 25},
                               {"close", "open", 1},
                               {"error", "open", 1},
                           },
                           "open");
}

inline tbcmp::CallSequence make_sequence(std::vector<std::string> calls,
                                         std::string source_id = "test") {
  tbcmp::CallSequence seq;
  seq.source_id = std::move(source_id);
  seq.calls = std::move(calls);
  return seq;
}

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("tbcmp_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testsupport
