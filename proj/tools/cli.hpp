#pragma once

// The hypmil command line: gen, train, eval, protocol, ablate, embed,
// gradcheck and splits. Every command ends with one "RESULT <command> k=v ..."
// line on `out`.

#include <iosfwd>
#include <string>
#include <vector>

namespace hypmil::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Sidecar files written next to a train checkpoint.
std::string split_path_for(const std::string& checkpoint_path);
std::string config_path_for(const std::string& checkpoint_path);

}  // namespace hypmil::cli
