#pragma once

// Reporter for the acceptance binaries: every check prints a detail line,
// and finish() prints the single PASS/FAIL verdict and returns the exit code.

#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

namespace hypmil::testing {

class Criterion {
 public:
  explicit Criterion(std::string name) : name_(std::move(name)) {}

  bool check(const std::string& label, bool ok, const char* fmt, ...) __attribute__((format(printf, 4, 5))) {
    char detail[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(detail, sizeof detail, fmt, args);
    va_end(args);
    return record(label, ok, detail);
  }
  bool check(const std::string& label, bool ok) { return record(label, ok, ""); }

  int finish() const {
    if (failed_.empty()) {
      std::printf("PASS %s\n", name_.c_str());
      return 0;
    }
    std::string list;
    for (const auto& f : failed_) list += (list.empty() ? "" : "; ") + f;
    std::printf("FAIL %s (%s)\n", name_.c_str(), list.c_str());
    return 1;
  }

 private:
  bool record(const std::string& label, bool ok, const char* detail) {
    std::printf("  [%s] %s%s%s\n", ok ? "ok" : "FAILED", label.c_str(), detail[0] ? ": " : "", detail);
    std::fflush(stdout);
    if (!ok) failed_.push_back(label);
    return ok;
  }

  std::string name_;
  std::vector<std::string> failed_;
};

}  // namespace hypmil::testing
