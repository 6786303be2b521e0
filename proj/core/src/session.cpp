#include "unbend/session.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "unbend/error.hpp"

namespace unbend {

namespace {

const char* const kTopLevelKeys[] = {"edit_log", "endpoints", "format_version", "rig", "volume_ref"};

void write_canonical(const nlohmann::json& j, std::string& out) {
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ',';
        first = false;
        out += nlohmann::json(key).dump();
        out += ':';
        write_canonical(value, out);
      }
      out += '}';
      break;
    }
    case nlohmann::json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        write_canonical(j[i], out);
      }
      out += ']';
      break;
    }
    case nlohmann::json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "cannot serialize a non-finite number");
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      std::string s(buf);
      // Keep floats floats on reload, including -0.
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      out += s;
      break;
    }
    default:
      out += j.dump();
  }
}

Error schema(const std::string& what) { return Error(ErrorCode::SchemaInvalid, what); }

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw schema(std::string("missing '") + key + "'");
  return j.at(key);
}

std::string require_string(const nlohmann::json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) throw schema(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

DeformationRig rig_or_schema(const nlohmann::json& j) {
  try {
    return rig_from_json(j);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaInvalid) throw;
    throw schema(std::string("rig violates its invariants: ") + e.what());
  }
}

}  // namespace

std::string canonical_dump(const nlohmann::json& j) {
  std::string out;
  write_canonical(j, out);
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::IoFailure, "cannot initialise SHA-256");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

VolumeRef make_volume_ref(const std::filesystem::path& data_path, const std::filesystem::path& meta_path) {
  const auto data = std::filesystem::absolute(data_path);
  const auto meta = std::filesystem::absolute(meta_path);
  return VolumeRef{data.string(), meta.string(), sha256_file(data), sha256_file(meta)};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()) % 1000;
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms.count() << 'Z';
  return os.str();
}

Session new_session(VolumeRef ref, EndpointSelection endpoints, DeformationRig rig) {
  Session s{std::move(ref), std::move(endpoints), rig, {}, {}};
  s.edit_log.push_back({{{"op", "set_rig"}, {"rig", rig_to_json(rig)}}, utc_timestamp()});
  return s;
}

void record_edit(Session& s, const RigEdit& edit) {
  s.rig = apply_edit(s.rig, edit);
  s.edit_log.push_back({edit_to_json(edit), utc_timestamp()});
}

void record_refit(Session& s, EndpointSelection endpoints, DeformationRig rig) {
  s.endpoints = std::move(endpoints);
  s.rig = std::move(rig);
  s.edit_log.push_back({{{"op", "set_rig"}, {"rig", rig_to_json(s.rig)}}, utc_timestamp()});
}

DeformationRig replay_edit_log(const std::vector<EditRecord>& log) {
  if (log.empty() || !log.front().change.is_object() || log.front().change.value("op", "") != "set_rig")
    throw schema("edit log must start with set_rig");
  std::optional<DeformationRig> rig;
  for (const auto& rec : log) {
    if (rec.change.value("op", "") == "set_rig") rig = rig_or_schema(require(rec.change, "rig"));
    else rig = apply_edit(*rig, edit_from_json(rec.change));
  }
  return *rig;
}

nlohmann::json session_to_json(const Session& s) {
  nlohmann::json log = nlohmann::json::array();
  for (const auto& rec : s.edit_log) {
    nlohmann::json entry = rec.change;
    entry["timestamp"] = rec.timestamp;
    log.push_back(std::move(entry));
  }
  return {{"format_version", kSessionFormatVersion},
          {"volume_ref",
           {{"data", s.volume_ref.data_path},
            {"meta", s.volume_ref.meta_path},
            {"data_sha256", s.volume_ref.data_sha256},
            {"meta_sha256", s.volume_ref.meta_sha256}}},
          {"endpoints", endpoints_to_json(s.endpoints)},
          {"rig", rig_to_json(s.rig)},
          {"edit_log", log}};
}

Session session_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw schema("session must be a JSON object");
  const auto& version = require(j, "format_version");
  if (!version.is_number_integer()) throw schema("format_version must be an integer");
  if (version.get<long long>() != kSessionFormatVersion)
    throw Error(ErrorCode::VersionUnsupported, "unsupported session format_version " + version.dump());
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kTopLevelKeys), std::end(kTopLevelKeys), key) == std::end(kTopLevelKeys))
      throw schema("unexpected top-level key '" + key + "'");
  }

  const auto& ref = require(j, "volume_ref");
  VolumeRef vr{require_string(ref, "data"), require_string(ref, "meta"), require_string(ref, "data_sha256"),
               require_string(ref, "meta_sha256")};
  EndpointSelection endpoints = endpoints_from_json(require(j, "endpoints"));
  DeformationRig rig = rig_or_schema(require(j, "rig"));

  const auto& log = require(j, "edit_log");
  if (!log.is_array()) throw schema("edit_log must be an array");
  std::vector<EditRecord> records;
  for (const auto& entry : log) {
    const std::string ts = require_string(entry, "timestamp");
    nlohmann::json change = entry;
    change.erase("timestamp");
    if (require_string(change, "op") == "set_rig") rig_or_schema(require(change, "rig"));
    else (void)edit_from_json(change);
    records.push_back({std::move(change), ts});
  }
  return Session{std::move(vr), std::move(endpoints), std::move(rig), std::move(records), {}};
}

void save_session(const Session& s, const std::filesystem::path& path) {
  const std::string text = canonical_dump(session_to_json(s)) + "\n";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

Session load_session(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw schema(std::string("session is not valid JSON: ") + e.what());
  }
  Session s = session_from_json(j);
  auto check = [&](const std::string& file, const std::string& expected) {
    try {
      if (sha256_file(file) != expected) s.warnings.push_back("content hash of " + file + " no longer matches");
    } catch (const Error&) {
      s.warnings.push_back("referenced file " + file + " is missing");
    }
  };
  check(s.volume_ref.data_path, s.volume_ref.data_sha256);
  check(s.volume_ref.meta_path, s.volume_ref.meta_sha256);
  return s;
}

}  // namespace unbend
