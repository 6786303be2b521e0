#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "unbend/pipeline.hpp"
#include "unbend/session.hpp"
#include "unbend/volume.hpp"

namespace unbend {

struct ServiceOptions {
  PipelineOptions pipeline;
  /// Voxel cap for the straightened volume behind GET /preview.
  std::size_t preview_budget = 2'000'000;
  int default_slice_size = 128;
};

/// HTTP front end over one editing session. A single writer applies edits
/// under an exclusive lock; readers copy the current rig and version under a
/// shared lock and render without holding it.
///
///   GET  /rig /slice?t&w&h /preview /curve /export?path=
///   POST /keyframe/{insert,remove,rotate,center,extent} /endpoints /save
///
/// Every response carries X-Rig-Version. Errors are 4xx with
/// {"error": <code>, "message": <text>}.
class SessionService {
 public:
  SessionService(Session session, ScalarVolume volume, ServiceOptions options = {});
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  /// BindFailure if the socket cannot be bound.
  int bind(const std::string& host, int port);
  /// Serves on the bound socket until stop().
  void run();
  /// bind + run on a background thread; returns the bound port once ready.
  int start(const std::string& host, int port);
  void stop();

  [[nodiscard]] std::uint64_t version() const;
  [[nodiscard]] Session session() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "host:port". InvalidArgument on malformed input.
[[nodiscard]] std::pair<std::string, int> parse_bind_address(const std::string& address);

}  // namespace unbend
