#pragma once

// Loading of the YAML session bundle: a config file naming a scene file and a
// procedure file (paths relative to the config), plus servo parameters.
// Every problem found is reported as a Diagnostic with file/line context; parsing
// continues past errors so one run lists them all.

#include "hapticsim/geometry.hpp"
#include "hapticsim/procedure.hpp"
#include "hapticsim/servo.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hapticsim {

struct Diagnostic {
  std::string file;
  int line = 0; // 1-based; 0 when unknown
  std::string message;
  bool io = false; // unreadable file rather than bad content

  std::string str() const;
};

template <class T> struct Parsed {
  std::optional<T> value;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return value.has_value() && diagnostics.empty(); }
  bool io_failure() const {
    for (const auto &d : diagnostics)
      if (d.io)
        return true;
    return false;
  }
};

enum class SessionMode { Replay, Interactive, Bench };

std::string_view to_string(SessionMode m);

struct SessionConfig {
  std::filesystem::path scene_path;
  std::filesystem::path procedure_path;
  ServoConfig servo; // defaults: dt 1 ms, alpha 0.2, v_deadband 1e-4 m/s, f_max 3.3 N
  SessionMode mode = SessionMode::Replay;
};

/// Everything a session needs, validated.
struct Bundle {
  SessionConfig config;
  Scene scene;
  Scenegraph procedure;
};

Parsed<Scene> parse_scene(std::string_view text, std::string_view source = "<scene>");
Parsed<Scenegraph> parse_procedure(std::string_view text, std::string_view source = "<procedure>");

/// Parses config text; scene/procedure paths resolve against `base_dir`.
Parsed<Bundle> parse_config(std::string_view text, const std::filesystem::path &base_dir,
                            std::string_view source = "<config>");

Parsed<Bundle> load_config(const std::filesystem::path &config_file);

} // namespace hapticsim
