#pragma once

#include <zlib.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "tbcmp/errors.hpp"

namespace tbcmp::detail {

// Reads a text file line by line. Gzip-compressed files (magic 0x1f 0x8b)
// are decompressed transparently; plain files pass through unchanged.
class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path) {
    file_ = gzopen(path.c_str(), "rb");
    if (file_ == nullptr) throw IoError("cannot open " + path);
  }

  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  ~LineReader() {
    if (file_ != nullptr) gzclose(file_);
  }

  // Returns false at end of input. The yielded line excludes the trailing
  // newline; a trailing '\r' is stripped as well.
  bool next(std::string& line) {
    line.clear();
    while (true) {
      auto nl = buf_.find('\n', pos_);
      if (nl != std::string::npos) {
        // append, not assign: the line may have started in the previous chunk
        line.append(buf_, pos_, nl - pos_);
        pos_ = nl + 1;
        break;
      }
      line.append(buf_, pos_, buf_.size() - pos_);
      buf_.clear();
      pos_ = 0;
      if (eof_) {
        if (line.empty()) return false;
        break;  // final line without newline
      }
      fill();
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no_;
    return true;
  }

  std::uint64_t line_number() const { return line_no_; }
  const std::string& path() const { return path_; }

 private:
  void fill() {
    char chunk[1 << 16];
    int n = gzread(file_, chunk, sizeof(chunk));
    if (n < 0) {
      int errnum = 0;
      const char* msg = gzerror(file_, &errnum);
      throw IoError("read error in " + path_ + ": " + (msg ? msg : "unknown"));
    }
    if (n == 0) {
      eof_ = true;
      return;
    }
    buf_.append(chunk, static_cast<std::size_t>(n));
  }

  gzFile file_ = nullptr;
  std::string path_;
  std::string buf_;
  std::size_t pos_ = 0;
  bool eof_ = false;
  std::uint64_t line_no_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read error in " + path.string());
  return data;
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write error in " + path.string());
}

}  // namespace tbcmp::detail
