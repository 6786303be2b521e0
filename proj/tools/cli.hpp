#pragma once

#include <CLI11.hpp>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "unbend/pipeline.hpp"
#include "unbend/synth.hpp"

namespace unbend::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Everything the flags bind to. Defaults come from the library option
/// structs, so the tool and the library cannot drift apart.
struct CliState {
  PipelineOptions pipeline;
  CylinderSpec cylinder;
  std::vector<std::string> inputs;
  std::vector<double> out_spacing;
  std::vector<int> dims;
  std::optional<double> extent;
  std::string out;
  std::string bind = "127.0.0.1:8080";
  std::uint64_t seed = 0;
};

/// Registers subcommands and flags on `app`, bound to `state`.
void configure(CLI::App& app, CliState& state);

/// Parses and runs. 0 on success, 2 on usage errors, 1 on runtime errors.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace unbend::cli
