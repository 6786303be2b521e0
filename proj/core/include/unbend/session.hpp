#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "unbend/pipeline.hpp"
#include "unbend/rig.hpp"

namespace unbend {

inline constexpr int kSessionFormatVersion = 1;

struct VolumeRef {
  std::string data_path;
  std::string meta_path;
  std::string data_sha256;
  std::string meta_sha256;
};

/// One applied change. `change` is an edit in the edit_to_json shape, or
/// {"op": "set_rig", "rig": …} for wholesale replacement (initial fit,
/// endpoint changes).
struct EditRecord {
  nlohmann::json change;
  std::string timestamp;
};

struct Session {
  VolumeRef volume_ref;
  EndpointSelection endpoints;
  DeformationRig rig;
  std::vector<EditRecord> edit_log;
  /// Surfaced on load, never written.
  std::vector<std::string> warnings;
};

/// Hex SHA-256 of a file's bytes. IoFailure if unreadable.
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

/// Paths made absolute and hashed.
[[nodiscard]] VolumeRef make_volume_ref(const std::filesystem::path& data_path, const std::filesystem::path& meta_path);

/// A fresh session whose log starts with set_rig.
[[nodiscard]] Session new_session(VolumeRef ref, EndpointSelection endpoints, DeformationRig rig);

/// Applies `edit` to the session rig and appends it to the log.
void record_edit(Session& s, const RigEdit& edit);
/// Replaces the rig (and endpoints) and appends a set_rig entry.
void record_refit(Session& s, EndpointSelection endpoints, DeformationRig rig);

/// Folds the log from nothing. SchemaInvalid if it does not start with set_rig.
[[nodiscard]] DeformationRig replay_edit_log(const std::vector<EditRecord>& log);

[[nodiscard]] nlohmann::json session_to_json(const Session& s);
[[nodiscard]] Session session_from_json(const nlohmann::json& j);

/// Sorted keys, no whitespace, doubles with 17 significant digits and always a
/// fraction or exponent, so that identical values give identical bytes.
[[nodiscard]] std::string canonical_dump(const nlohmann::json& j);

void save_session(const Session& s, const std::filesystem::path& path);
/// Validates format_version and every rig invariant. Hash mismatches are
/// reported through Session::warnings.
[[nodiscard]] Session load_session(const std::filesystem::path& path);

/// Current UTC time, ISO 8601 with milliseconds.
[[nodiscard]] std::string utc_timestamp();

}  // namespace unbend
